//! JSON model files.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "kind": "curve_mixture",
//!   "trig_convention": "neg:cos(-2pi*l*s),zero:1,pos:sin(2pi*l*s)",
//!   "clusters": [
//!     { "n": 2, "d": 1, "order": 1, "K": 16, "sigma": 0.05, "weight": 1.0, "active": true,
//!       "coeffs": [ { "i": 0, "l": [-1], "value": 1.0 }, ... ] }
//!   ]
//! }
//! ```
//!
//! Gaussian mixtures use `"kind": "gaussian_mixture"` with a `components`
//! list of `{weight, mean, cov}`.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::baselines::GaussianMixture;
use crate::cec::{Component, MixtureState};
use crate::density::CurveGaussianModel;
use crate::error::{Error, Result};
use crate::fourier::{basis_len, FourierCurve, MultiIndex, TRIG_CONVENTION};
use crate::gaussian::Gaussian;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoeffEntry {
    i: usize,
    l: Vec<i32>,
    value: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClusterRecord {
    n: usize,
    d: usize,
    order: usize,
    #[serde(rename = "K")]
    segments_k: usize,
    sigma: f64,
    weight: f64,
    active: bool,
    coeffs: Vec<CoeffEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CurveMixtureFile {
    schema_version: u32,
    kind: String,
    trig_convention: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    energy: Option<f64>,
    clusters: Vec<ClusterRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GaussianRecord {
    weight: f64,
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GaussianMixtureFile {
    schema_version: u32,
    kind: String,
    components: Vec<GaussianRecord>,
}

/// Either kind of stored model.
#[derive(Debug, Clone)]
pub enum ModelFile {
    Curves(MixtureState<CurveGaussianModel>),
    Gaussians(GaussianMixture),
}

impl ModelFile {
    pub fn dim(&self) -> usize {
        match self {
            ModelFile::Curves(s) => s.components[0].model.ambient_dim(),
            ModelFile::Gaussians(g) => g.dim(),
        }
    }

    /// Log-density of the weighted mixture of active components.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        match self {
            ModelFile::Curves(s) => s.log_density(x),
            ModelFile::Gaussians(g) => g.log_density(x),
        }
    }
}

fn schema(msg: impl Into<String>) -> Error {
    Error::Schema(msg.into())
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| schema(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn parse_at<T: DeserializeOwned>(value: serde_json::Value) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        schema(format!("at {path}: {}", e.into_inner()))
    })
}

/// Curve mixture as JSON text.
pub fn model_to_json(state: &MixtureState<CurveGaussianModel>) -> Result<String> {
    if state.components.is_empty() {
        return Err(Error::InvalidArgument("mixture has no components".into()));
    }
    let clusters = state
        .components
        .iter()
        .map(|c| {
            let curve = c.model.curve();
            let d = curve.intrinsic_dim();
            let k = curve.order() as i32;
            let basis = curve.basis_len();
            let coeffs = curve
                .coeffs()
                .iter()
                .enumerate()
                .map(|(idx, &value)| CoeffEntry {
                    i: idx / basis,
                    l: MultiIndex::from_rank(idx % basis, -k, k, d).entries().to_vec(),
                    value,
                })
                .collect();
            ClusterRecord {
                n: curve.ambient_dim(),
                d,
                order: curve.order(),
                segments_k: c.model.segments_k(),
                sigma: c.model.sigma(),
                weight: c.weight,
                active: c.active,
                coeffs,
            }
        })
        .collect();
    let file = CurveMixtureFile {
        schema_version: SCHEMA_VERSION,
        kind: "curve_mixture".into(),
        trig_convention: TRIG_CONVENTION.into(),
        energy: state.energy.is_finite().then_some(state.energy),
        clusters,
    };
    serde_json::to_string_pretty(&file).map_err(|e| schema(e.to_string()))
}

pub fn save_model(state: &MixtureState<CurveGaussianModel>, path: impl AsRef<Path>) -> Result<()> {
    let text = model_to_json(state)?;
    let path = path.as_ref();
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn save_gaussian_mixture(mixture: &GaussianMixture, path: impl AsRef<Path>) -> Result<()> {
    let file = GaussianMixtureFile {
        schema_version: SCHEMA_VERSION,
        kind: "gaussian_mixture".into(),
        components: mixture
            .weights
            .iter()
            .zip(&mixture.components)
            .map(|(&weight, g)| GaussianRecord {
                weight,
                mean: g.mean.iter().copied().collect(),
                cov: g.cov.row_iter().map(|r| r.iter().copied().collect()).collect(),
            })
            .collect(),
    };
    write_json(&file, path.as_ref())
}

fn check_header(value: &serde_json::Value) -> Result<String> {
    let version = value
        .get("schema_version")
        .ok_or_else(|| schema("missing field `schema_version`"))?;
    if version.as_u64() != Some(SCHEMA_VERSION as u64) {
        return Err(schema(format!(
            "unsupported schema_version {version}, expected {SCHEMA_VERSION}"
        )));
    }
    value
        .get("kind")
        .and_then(|k| k.as_str())
        .map(str::to_owned)
        .ok_or_else(|| schema("missing string field `kind`"))
}

fn check_weights(weights: &[(f64, bool)]) -> Result<()> {
    for (idx, &(w, active)) in weights.iter().enumerate() {
        if !(0.0..=1.0).contains(&w) {
            return Err(schema(format!("component {idx}: weight {w} outside [0, 1]")));
        }
        if !active && w != 0.0 {
            return Err(schema(format!("component {idx}: inactive with weight {w}")));
        }
    }
    if !weights.iter().any(|&(_, a)| a) {
        return Err(schema("no active component"));
    }
    let sum: f64 = weights.iter().filter(|w| w.1).map(|w| w.0).sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(schema(format!("active weights sum to {sum}, expected 1")));
    }
    Ok(())
}

fn curve_from_record(idx: usize, rec: &ClusterRecord) -> Result<FourierCurve> {
    let at = |msg: String| schema(format!("clusters[{idx}]: {msg}"));
    if rec.n == 0 || rec.d == 0 || rec.segments_k == 0 {
        return Err(at("n, d and K must be positive".into()));
    }
    let k = rec.order as i32;
    let basis = basis_len(rec.order, rec.d);
    let mut coeffs = vec![0.0; rec.n * basis];
    let mut seen = HashSet::new();
    for (e, entry) in rec.coeffs.iter().enumerate() {
        if entry.i >= rec.n {
            return Err(at(format!("coeffs[{e}].i = {} out of range", entry.i)));
        }
        if entry.l.len() != rec.d || entry.l.iter().any(|&v| v < -k || v > k) {
            return Err(at(format!("coeffs[{e}].l = {:?} is not in {{-{k}..{k}}}^{}", entry.l, rec.d)));
        }
        let rank = MultiIndex::new(entry.l.clone()).rank(-k, k);
        if !seen.insert((entry.i, rank)) {
            return Err(at(format!("coeffs[{e}] duplicates (i={}, l={:?})", entry.i, entry.l)));
        }
        coeffs[entry.i * basis + rank] = entry.value;
    }
    if seen.len() != coeffs.len() {
        return Err(at(format!("{} of {} coefficients present", seen.len(), coeffs.len())));
    }
    FourierCurve::new(rec.n, rec.d, rec.order, coeffs).map_err(|e| at(e.to_string()))
}

/// Parses a curve mixture from JSON text.
pub fn model_from_json(text: &str) -> Result<MixtureState<CurveGaussianModel>> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| schema(e.to_string()))?;
    match check_header(&value)?.as_str() {
        "curve_mixture" => curves_from_value(value),
        other => Err(schema(format!("expected kind \"curve_mixture\", found {other:?}"))),
    }
}

fn curves_from_value(value: serde_json::Value) -> Result<MixtureState<CurveGaussianModel>> {
    let file: CurveMixtureFile = parse_at(value)?;
    if file.trig_convention != TRIG_CONVENTION {
        return Err(schema(format!("unsupported trig_convention {:?}", file.trig_convention)));
    }
    if file.clusters.is_empty() {
        return Err(schema("clusters: empty"));
    }
    let dim = file.clusters[0].n;
    let mut components = Vec::with_capacity(file.clusters.len());
    for (idx, rec) in file.clusters.iter().enumerate() {
        if rec.n != dim {
            return Err(schema(format!("clusters[{idx}].n = {} differs from {dim}", rec.n)));
        }
        let curve = curve_from_record(idx, rec)?;
        let model = CurveGaussianModel::new(curve, rec.sigma, rec.segments_k)
            .map_err(|e| schema(format!("clusters[{idx}]: {e}")))?;
        components.push(Component {
            model,
            weight: rec.weight,
            active: rec.active,
        });
    }
    check_weights(&components.iter().map(|c| (c.weight, c.active)).collect::<Vec<_>>())?;
    Ok(MixtureState {
        components,
        assignment: Vec::new(),
        energy: file.energy.unwrap_or(f64::NAN),
    })
}

fn gaussians_from_value(value: serde_json::Value) -> Result<GaussianMixture> {
    let file: GaussianMixtureFile = parse_at(value)?;
    if file.components.is_empty() {
        return Err(schema("components: empty"));
    }
    let n = file.components[0].mean.len();
    let mut weights = Vec::new();
    let mut comps = Vec::new();
    for (idx, rec) in file.components.iter().enumerate() {
        let at = |msg: &str| schema(format!("components[{idx}]: {msg}"));
        if rec.mean.len() != n || n == 0 {
            return Err(at("mean has the wrong length"));
        }
        if rec.cov.len() != n || rec.cov.iter().any(|r| r.len() != n) {
            return Err(at("cov must be n×n"));
        }
        let cov = DMatrix::from_row_iterator(n, n, rec.cov.iter().flatten().copied());
        if (&cov - cov.transpose()).abs().max() > 1e-12 {
            return Err(at("cov is not symmetric"));
        }
        let g = Gaussian::new(DVector::from_vec(rec.mean.clone()), cov).map_err(|e| at(&e.to_string()))?;
        weights.push(rec.weight);
        comps.push(g);
    }
    check_weights(&weights.iter().map(|&w| (w, true)).collect::<Vec<_>>())?;
    GaussianMixture::new(weights, comps).map_err(|e| schema(e.to_string()))
}

/// Loads a curve mixture; assignments are empty.
pub fn load_model(path: impl AsRef<Path>) -> Result<MixtureState<CurveGaussianModel>> {
    match load_any_model(path)? {
        ModelFile::Curves(s) => Ok(s),
        ModelFile::Gaussians(_) => Err(schema("expected kind \"curve_mixture\", found \"gaussian_mixture\"")),
    }
}

/// Loads either model kind.
pub fn load_any_model(path: impl AsRef<Path>) -> Result<ModelFile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| schema(e.to_string()))?;
    match check_header(&value)?.as_str() {
        "curve_mixture" => curves_from_value(value).map(ModelFile::Curves),
        "gaussian_mixture" => gaussians_from_value(value).map(ModelFile::Gaussians),
        other => Err(schema(format!("unknown kind {other:?}"))),
    }
}
