//! C interface to `curveclust`.
//!
//! Objects cross the boundary as opaque handles created by `cc_*_new`,
//! `cc_*_read*`, `cc_*_load` or `cc_mcec_run` and released with the
//! matching `cc_*_free`. Every fallible call returns a [`CcStatus`]; on
//! failure the message is available from [`cc_last_error`] on the same
//! thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use curveclust::dataio::{load_any_model, save_gaussian_mixture, save_model, ModelFile};
use curveclust::fourier::TRIG_CONVENTION;
use curveclust::{Dataset, Error, InitMethod, McecConfig};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Bad curve, σ, covariance or a non-finite objective.
    InvalidModel = 3,
    TooFewPoints = 4,
    DimensionMismatch = 5,
    /// Malformed CSV or model file.
    Parse = 6,
    Io = 7,
    /// A Rust panic was caught at the boundary.
    Internal = 8,
}

/// A point set with optional labels.
pub struct CcDataset {
    inner: Dataset,
}

/// A fitted or loaded mixture (curve or Gaussian components).
pub struct CcModel {
    inner: ModelFile,
}

/// MCEC settings; fill with [`cc_mcec_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CcMcecConfig {
    pub k: usize,
    pub order: usize,
    pub segments_k: usize,
    /// Absolute stop threshold; NaN selects `1e-4 · |initial energy|`.
    pub eps: f64,
    pub removal_pct: f64,
    pub seed: u64,
    pub max_iters: usize,
    /// 0: k-means partition, 1: uniformly random labels.
    pub init: u32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> CcStatus {
    match err {
        Error::InvalidArgument(_) => CcStatus::InvalidArgument,
        Error::InvalidCurve(_) | Error::InvalidSigma(_) | Error::NotPositiveDefinite | Error::NonFinite(_) => {
            CcStatus::InvalidModel
        }
        Error::EmptyPointSet | Error::TooFewPoints { .. } => CcStatus::TooFewPoints,
        Error::DimensionMismatch { .. } => CcStatus::DimensionMismatch,
        Error::Csv { .. } | Error::Schema(_) => CcStatus::Parse,
        Error::Io { .. } => CcStatus::Io,
    }
}

struct Fail(CcStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(CcStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CcStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {msg}"));
            CcStatus::Internal
        }
    }
}

unsafe fn path_arg<'a>(path: *const c_char) -> Result<&'a str, Fail> {
    if path.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(path)
        .to_str()
        .map_err(|_| Fail(CcStatus::InvalidArgument, "path is not valid UTF-8".into()))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Static string describing the Fourier basis convention.
#[no_mangle]
pub extern "C" fn cc_trig_convention() -> *const c_char {
    static CONV: std::sync::OnceLock<CString> = std::sync::OnceLock::new();
    CONV.get_or_init(|| CString::new(TRIG_CONVENTION).unwrap()).as_ptr()
}

/// Copies `n × dim` row-major coordinates; `labels` may be null.
///
/// # Safety
/// `coords` must point to `n * dim` doubles, `labels` (if non-null) to `n`
/// values, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cc_dataset_new(
    coords: *const f64,
    n: usize,
    dim: usize,
    labels: *const usize,
    out: *mut *mut CcDataset,
) -> CcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let total = n
            .checked_mul(dim)
            .ok_or_else(|| Fail(CcStatus::InvalidArgument, "n * dim overflows".into()))?;
        let coords = slice_arg(coords, total, "coords")?.to_vec();
        let labels = if labels.is_null() {
            None
        } else {
            Some(slice_arg(labels, n, "labels")?.to_vec())
        };
        let ds = Dataset::new(dim, coords, labels)?;
        *out = Box::into_raw(Box::new(CcDataset { inner: ds }));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cc_dataset_read_csv(path: *const c_char, out: *mut *mut CcDataset) -> CcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let ds = curveclust::read_csv(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(CcDataset { inner: ds }));
        Ok(())
    })
}

/// Number of points, 0 for null.
///
/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn cc_dataset_len(ds: *const CcDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.len())
}

/// Ambient dimension, 0 for null.
///
/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn cc_dataset_dim(ds: *const CcDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.dim())
}

/// # Safety
/// `ds` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cc_dataset_free(ds: *mut CcDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cc_mcec_config_default(out: *mut CcMcecConfig) -> CcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let d = McecConfig::default();
        *out = CcMcecConfig {
            k: d.k,
            order: d.order,
            segments_k: d.segments_k,
            eps: d.eps.unwrap_or(f64::NAN),
            removal_pct: d.removal_pct,
            seed: d.seed,
            max_iters: d.max_lloyd_iters,
            init: 0,
        };
        Ok(())
    })
}

/// Runs MCEC once. `labels` (nullable) receives one cluster index per
/// point; `energy` (nullable) the final energy.
///
/// # Safety
/// Handles must be live; `labels` must have room for `cc_dataset_len(ds)`
/// values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cc_mcec_run(
    ds: *const CcDataset,
    config: *const CcMcecConfig,
    out: *mut *mut CcModel,
    labels: *mut usize,
    energy: *mut f64,
) -> CcStatus {
    guard(|| {
        let ds = ds.as_ref().ok_or_else(|| null("dataset"))?;
        let c = config.as_ref().ok_or_else(|| null("config"))?;
        let out = out_arg(out, "out")?;
        let config = McecConfig {
            k: c.k,
            order: c.order,
            segments_k: c.segments_k,
            eps: if c.eps.is_nan() { None } else { Some(c.eps) },
            removal_pct: c.removal_pct,
            seed: c.seed,
            max_lloyd_iters: c.max_iters,
            init: match c.init {
                0 => InitMethod::Kmeans,
                1 => InitMethod::Random,
                other => return Err(Fail(CcStatus::InvalidArgument, format!("unknown init {other}"))),
            },
            ..McecConfig::default()
        };
        let outcome = curveclust::mcec_run(&ds.inner, &config)?;
        if !labels.is_null() {
            std::slice::from_raw_parts_mut(labels, ds.inner.len()).copy_from_slice(&outcome.state.assignment);
        }
        if let Some(e) = energy.as_mut() {
            *e = outcome.state.energy;
        }
        *out = Box::into_raw(Box::new(CcModel {
            inner: ModelFile::Curves(outcome.state),
        }));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cc_model_load(path: *const c_char, out: *mut *mut CcModel) -> CcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let model = load_any_model(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(CcModel { inner: model }));
        Ok(())
    })
}

/// # Safety
/// `model` must be live and `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cc_model_save(model: *const CcModel, path: *const c_char) -> CcStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let path = path_arg(path)?;
        match &model.inner {
            ModelFile::Curves(s) => save_model(s, path)?,
            ModelFile::Gaussians(g) => save_gaussian_mixture(g, path)?,
        }
        Ok(())
    })
}

/// Ambient dimension, 0 for null.
///
/// # Safety
/// `model` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn cc_model_dim(model: *const CcModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.dim())
}

/// Mixture log-density at one point of length `dim`.
///
/// # Safety
/// `x` must hold `dim` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn cc_model_log_density(
    model: *const CcModel,
    x: *const f64,
    dim: usize,
    out: *mut f64,
) -> CcStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let out = out_arg(out, "out")?;
        if dim != model.inner.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.inner.dim(),
                got: dim,
            }
            .into());
        }
        *out = model.inner.log_density(slice_arg(x, dim, "x")?);
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cc_model_free(model: *mut CcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `a` and `b` must hold `n` values; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cc_rand_index(a: *const usize, b: *const usize, n: usize, out: *mut f64) -> CcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = curveclust::rand_index(slice_arg(a, n, "a")?, slice_arg(b, n, "b")?)?;
        Ok(())
    })
}

/// # Safety
/// `a` and `b` must hold `n` values; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cc_jaccard_index(a: *const usize, b: *const usize, n: usize, out: *mut f64) -> CcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = curveclust::jaccard_index(slice_arg(a, n, "a")?, slice_arg(b, n, "b")?)?;
        Ok(())
    })
}
