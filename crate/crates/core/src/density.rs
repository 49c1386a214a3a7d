//! The Gaussian distribution on a Fourier curve: chain-of-Gaussians density
//! used for fitting, the exact marginal by quadrature, the naive point-sum
//! approximation, and sampling.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::fourier::{multi_indices, FourierCurve};
use crate::gaussian::{log_sum_exp, Gaussian};
use crate::segments::{all_segments_with, IntegralTable};

/// Smallest σ a model accepts.
pub const SIGMA_FLOOR: f64 = 1e-6;

/// Default number of segments per parameter axis.
pub const DEFAULT_SEGMENTS: usize = 16;

/// A closed curve with isotropic Gaussian noise, evaluated through the
/// equal-weight mixture of its `K^d` segment Gaussians.
#[derive(Debug, Clone)]
pub struct CurveGaussianModel {
    curve: FourierCurve,
    sigma: f64,
    table: Arc<IntegralTable>,
    segments: Vec<Gaussian>,
    log_cells: f64,
}

impl CurveGaussianModel {
    pub fn new(curve: FourierCurve, sigma: f64, segments_k: usize) -> Result<Self> {
        if segments_k == 0 {
            return Err(Error::InvalidArgument("segment count must be positive".into()));
        }
        let table = IntegralTable::shared(curve.intrinsic_dim(), curve.order(), segments_k);
        Self::with_table(curve, sigma, table)
    }

    /// Builds the model reusing an existing integral table.
    pub fn with_table(curve: FourierCurve, sigma: f64, table: Arc<IntegralTable>) -> Result<Self> {
        if !(sigma >= SIGMA_FLOOR && sigma.is_finite()) {
            return Err(Error::InvalidSigma(sigma));
        }
        if !table.matches(&curve, table.segments()) {
            return Err(Error::InvalidArgument(
                "integral table does not match curve layout".into(),
            ));
        }
        let segments = all_segments_with(&table, &curve, sigma)?;
        let log_cells = (table.cells() as f64).ln();
        Ok(CurveGaussianModel {
            curve,
            sigma,
            table,
            segments,
            log_cells,
        })
    }

    /// Same layout, new parameters.
    pub fn reparametrized(&self, curve: FourierCurve, sigma: f64) -> Result<Self> {
        Self::with_table(curve, sigma, Arc::clone(&self.table))
    }

    pub fn curve(&self) -> &FourierCurve {
        &self.curve
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn segments_k(&self) -> usize {
        self.table.segments()
    }

    pub fn segments(&self) -> &[Gaussian] {
        &self.segments
    }

    pub fn table(&self) -> &Arc<IntegralTable> {
        &self.table
    }

    pub fn ambient_dim(&self) -> usize {
        self.curve.ambient_dim()
    }

    /// Number of free parameters: all coefficients plus σ.
    pub fn n_params(&self) -> usize {
        self.curve.coeffs().len() + 1
    }

    /// Writes `ln f_{N(μ_l,Σ_l)}(x)` for every segment into `out` and
    /// returns `ln f(x)`.
    pub(crate) fn segment_log_densities(&self, x: &[f64], out: &mut Vec<f64>) -> f64 {
        out.clear();
        out.extend(self.segments.iter().map(|g| g.log_pdf(x)));
        log_sum_exp(out) - self.log_cells
    }

    /// `ln( K^{-d} Σ_l N(x; μ_l, Σ_l) )`.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let mut buf = Vec::with_capacity(self.segments.len());
        self.segment_log_densities(x, &mut buf)
    }

    /// [`log_density`](Self::log_density) over every row, in order.
    pub fn log_density_many(&self, points: &Dataset) -> Vec<f64> {
        (0..points.len())
            .into_par_iter()
            .map_init(Vec::new, |buf, i| self.segment_log_densities(points.point(i), buf))
            .collect()
    }

    /// Draws `count` points; deterministic in `seed`.
    pub fn sample(&self, count: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        sample_curve(&self.curve, Noise::Isotropic(self.sigma), count, &mut rng)
    }
}

/// Noise model for [`sample_curve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise {
    Isotropic(f64),
    /// Points exactly on the curve.
    None,
}

/// Draws `s ~ U[0,1]^d` then `x ~ N(φ(s), σ² I)`.
pub fn sample_curve<R: Rng + ?Sized>(
    curve: &FourierCurve,
    noise: Noise,
    count: usize,
    rng: &mut R,
) -> Dataset {
    let n = curve.ambient_dim();
    let d = curve.intrinsic_dim();
    let mut coords = Vec::with_capacity(count * n);
    let mut s = vec![0.0; d];
    for _ in 0..count {
        for sm in s.iter_mut() {
            *sm = rng.random::<f64>();
        }
        let mut p = curve.eval(&s);
        if let Noise::Isotropic(sigma) = noise {
            for v in p.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *v += sigma * z;
            }
        }
        coords.extend(p);
    }
    Dataset::new(n, coords, None).expect("sampled coordinates are finite")
}

fn isotropic_log_kernel(x: &[f64], center: &[f64], sigma: f64) -> f64 {
    let n = x.len() as f64;
    let d2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
    -0.5 * n * (2.0 * PI * sigma * sigma).ln() - d2 / (2.0 * sigma * sigma)
}

/// The exact marginal `ln ∫ N(x; φ(s), σ² I) ds`, by the periodic midpoint
/// rule with `quad_points` nodes per axis. The integrand is smooth and
/// 1-periodic in each `s_m`, so the rule converges geometrically once the
/// node spacing resolves the noise scale along the curve.
pub fn log_density_exact(
    curve: &FourierCurve,
    sigma: f64,
    x: &[f64],
    quad_points: usize,
) -> Result<f64> {
    if quad_points < 32 {
        return Err(Error::InvalidArgument("quad_points must be at least 32".into()));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidSigma(sigma));
    }
    if x.len() != curve.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: curve.ambient_dim(),
            got: x.len(),
        });
    }
    let d = curve.intrinsic_dim();
    let h = 1.0 / quad_points as f64;
    let terms: Vec<f64> = multi_indices(0, quad_points as i32 - 1, d)
        .map(|idx| {
            let s: Vec<f64> = idx.entries().iter().map(|&e| (e as f64 + 0.5) * h).collect();
            isotropic_log_kernel(x, &curve.eval(&s), sigma)
        })
        .collect();
    Ok(log_sum_exp(&terms) - d as f64 * (quad_points as f64).ln())
}

/// `ln( (1/K) Σ_i N(x; φ(i/K), σ² I) )` for closed curves.
pub fn log_density_pointsum(
    curve: &FourierCurve,
    sigma: f64,
    x: &[f64],
    segments_k: usize,
) -> Result<f64> {
    if curve.intrinsic_dim() != 1 {
        return Err(Error::InvalidArgument(
            "point-sum approximation is defined for curves (d = 1) only".into(),
        ));
    }
    if segments_k == 0 {
        return Err(Error::InvalidArgument("segment count must be positive".into()));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidSigma(sigma));
    }
    let terms: Vec<f64> = (0..segments_k)
        .map(|i| {
            let s = i as f64 / segments_k as f64;
            isotropic_log_kernel(x, &curve.eval(&[s]), sigma)
        })
        .collect();
    Ok(log_sum_exp(&terms) - (segments_k as f64).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_curve_reduces_to_standard_normal() {
        let c = FourierCurve::constant(&[0.5, -1.0], 1, 2);
        for k in [1, 3, 16] {
            let m = CurveGaussianModel::new(c.clone(), 1.0, k).unwrap();
            assert_abs_diff_eq!(m.log_density(&[0.5, -1.0]), -(2.0 * PI).ln(), epsilon = 1e-13);
        }
        let exact = log_density_exact(&c, 1.0, &[0.5, -1.0], 32).unwrap();
        assert_abs_diff_eq!(exact, -(2.0 * PI).ln(), epsilon = 1e-13);
        for k in [1, 7, 32] {
            let ps = log_density_pointsum(&c, 1.0, &[0.1, 0.2], k).unwrap();
            let m = CurveGaussianModel::new(c.clone(), 1.0, k).unwrap();
            assert_abs_diff_eq!(ps, m.log_density(&[0.1, 0.2]), epsilon = 1e-12);
        }
    }

    #[test]
    fn circle_is_rotationally_symmetric() {
        let m = CurveGaussianModel::new(FourierCurve::circle([0.0, 0.0], 1.0), 0.1, 64).unwrap();
        let a = m.log_density(&[1.0, 0.0]).exp();
        let b = m.log_density(&[0.0, 1.0]).exp();
        assert!((a - b).abs() < 1e-3 * a.max(b));
    }

    #[test]
    fn far_points_stay_finite() {
        let m = CurveGaussianModel::new(FourierCurve::circle([0.0, 0.0], 1.0), 0.1, 16).unwrap();
        let v = m.log_density(&[1e6, -1e6]);
        assert!(v.is_finite() && v < -1e10);
    }

    #[test]
    fn sigma_floor_enforced() {
        let c = FourierCurve::circle([0.0, 0.0], 1.0);
        assert!(CurveGaussianModel::new(c.clone(), 1e-7, 4).is_err());
        assert!(CurveGaussianModel::new(c, 0.0, 4).is_err());
    }

    #[test]
    fn pointsum_rejects_tori() {
        let c = FourierCurve::constant(&[0.0, 0.0, 0.0], 2, 1);
        assert!(log_density_pointsum(&c, 0.1, &[0.0, 0.0, 0.0], 8).is_err());
    }

    #[test]
    fn noiseless_circle_samples_lie_on_circle() {
        let c = FourierCurve::circle([0.0, 0.0], 1.0);
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let d = sample_curve(&c, Noise::None, 200, &mut rng);
        for p in d.iter() {
            assert_abs_diff_eq!((p[0] * p[0] + p[1] * p[1]).sqrt(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn sampling_is_seeded() {
        let m = CurveGaussianModel::new(FourierCurve::circle([0.0, 0.0], 1.0), 0.1, 4).unwrap();
        assert_eq!(m.sample(50, 9), m.sample(50, 9));
        assert_ne!(m.sample(50, 9), m.sample(50, 10));
    }

    #[test]
    fn constant_curve_sample_mean() {
        let m = CurveGaussianModel::new(FourierCurve::constant(&[2.0, -3.0], 1, 1), 0.1, 4)
            .unwrap();
        let d = m.sample(10_000, 1);
        let mean = d.mean();
        assert!((mean[0] - 2.0).abs() < 0.01 && (mean[1] + 3.0).abs() < 0.01);
    }
}
