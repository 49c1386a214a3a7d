//! Fitting one curve component: minimize the empirical cross-entropy
//! `-(1/|X|) Σ ln f(x)` over all Fourier coefficients and σ with BFGS.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::dataio::Dataset;
use crate::density::{CurveGaussianModel, SIGMA_FLOOR};
use crate::error::{Error, Result};
use crate::fourier::{FourierCurve, MultiIndex};
use crate::gradient::{loglik_and_grad, total_loglik};
use crate::optim::{minimize, BfgsConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub wolfe_c1: f64,
    pub wolfe_c2: f64,
    pub sigma_floor: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_iters: 200,
            grad_tol: 1e-6,
            wolfe_c1: 1e-4,
            wolfe_c2: 0.9,
            sigma_floor: SIGMA_FLOOR,
        }
    }
}

impl FitConfig {
    fn bfgs(&self) -> BfgsConfig {
        BfgsConfig {
            max_iters: self.max_iters,
            grad_tol: self.grad_tol,
            c1: self.wolfe_c1,
            c2: self.wolfe_c2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.bfgs().validate()?;
        if !(self.sigma_floor >= SIGMA_FLOOR && self.sigma_floor.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma_floor must be at least {SIGMA_FLOOR}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: CurveGaussianModel,
    pub final_cross_entropy: f64,
    pub iters: usize,
    pub converged: bool,
    /// Cross-entropy at the start and after each accepted step.
    pub trace: Vec<f64>,
}

/// `-(1/|X|) Σ_x ln f(x)`.
pub fn cross_entropy(model: &CurveGaussianModel, points: &Dataset) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    if points.dim() != model.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.ambient_dim(),
            got: points.dim(),
        });
    }
    Ok(-total_loglik(model, points) / points.len() as f64)
}

/// Minimum number of points for fitting a curve with this layout.
pub fn min_points(curve: &FourierCurve) -> usize {
    curve.coeffs().len() + 1
}

/// Runs BFGS from `init`. σ is optimized as `ln σ` and clamped to
/// `config.sigma_floor`.
pub fn fit_component(points: &Dataset, init: &CurveGaussianModel, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    let needed = min_points(init.curve());
    if points.len() < needed {
        return Err(Error::TooFewPoints {
            needed,
            got: points.len(),
        });
    }
    if points.dim() != init.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: init.ambient_dim(),
            got: points.dim(),
        });
    }
    let count = points.len() as f64;
    let n_coeffs = init.curve().coeffs().len();
    let floor = config.sigma_floor;
    let sigma_of = |tau: f64| tau.exp().max(floor);

    let build = |theta: &[f64]| -> Result<CurveGaussianModel> {
        let curve = init.curve().with_coeffs(theta[..n_coeffs].to_vec())?;
        init.reparametrized(curve, sigma_of(theta[n_coeffs]))
    };

    let objective = |theta: &[f64], grad: &mut [f64]| -> f64 {
        let Ok(model) = build(theta) else {
            return f64::NAN;
        };
        match loglik_and_grad(&model, points) {
            Ok((ll, g)) => {
                for (dst, src) in grad[..n_coeffs].iter_mut().zip(&g.d_coeffs) {
                    *dst = -src / count;
                }
                let tau = theta[n_coeffs];
                grad[n_coeffs] = if tau.exp() >= floor {
                    -model.sigma() * g.d_sigma / count
                } else {
                    0.0
                };
                -ll / count
            }
            Err(_) => f64::NAN,
        }
    };

    let mut theta0 = init.curve().coeffs().to_vec();
    theta0.push(init.sigma().max(floor).ln());
    let out = minimize(objective, &theta0, &config.bfgs()).map_err(|e| match e {
        Error::NonFinite(msg) => Error::NonFinite(format!("initial model: {msg}")),
        other => other,
    })?;
    let model = build(&out.x)?;
    let final_cross_entropy = cross_entropy(&model, points)?;
    Ok(FitResult {
        model,
        final_cross_entropy,
        iters: out.iters,
        converged: out.converged,
        trace: out.trace,
    })
}

/// Moment-matching start: the order-1 part traces the covariance ellipse of
/// the points (axes `√2·√λ` along the two leading principal directions),
/// higher orders start at zero, σ is the RMS distance of the points to that
/// ellipse.
pub fn init_curve_guess(points: &Dataset, order: usize, segments_k: usize) -> Result<CurveGaussianModel> {
    init_curve_guess_with_floor(points, order, segments_k, SIGMA_FLOOR)
}

pub fn init_curve_guess_with_floor(
    points: &Dataset,
    order: usize,
    segments_k: usize,
    sigma_floor: f64,
) -> Result<CurveGaussianModel> {
    if points.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: points.len(),
        });
    }
    let n = points.dim();
    let centroid = points.mean();
    let mut cov = DMatrix::<f64>::zeros(n, n);
    for p in points.iter() {
        for a in 0..n {
            for b in 0..n {
                cov[(a, b)] += (p[a] - centroid[a]) * (p[b] - centroid[b]);
            }
        }
    }
    cov /= points.len() as f64;

    let mut curve = FourierCurve::constant(&centroid, 1, order);
    if order >= 1 {
        let eig = SymmetricEigen::new(cov);
        let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
            .map(|c| {
                let mut v: Vec<f64> = eig.eigenvectors.column(c).iter().copied().collect();
                // deterministic sign: largest-magnitude entry positive
                let (_, &big) = v
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                    .expect("n >= 1");
                if big < 0.0 {
                    v.iter_mut().for_each(|x| *x = -*x);
                }
                (eig.eigenvalues[c].max(0.0), v)
            })
            .collect();
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        let cos1 = MultiIndex::new(vec![-1]);
        let sin1 = MultiIndex::new(vec![1]);
        for (slot, (lambda, dir)) in [&cos1, &sin1].into_iter().zip(pairs.iter()) {
            let amp = (2.0 * lambda).sqrt();
            for i in 0..n {
                curve.set_coeff(i, slot, amp * dir[i]);
            }
        }
    }

    let sigma = rms_distance(&curve, points).max(sigma_floor);
    CurveGaussianModel::new(curve, sigma, segments_k)
}

/// RMS over points of the distance to the nearest of 512 curve samples.
fn rms_distance(curve: &FourierCurve, points: &Dataset) -> f64 {
    const SWEEP: usize = 512;
    let samples: Vec<Vec<f64>> = (0..SWEEP)
        .map(|i| curve.eval(&[i as f64 / SWEEP as f64]))
        .collect();
    let total: f64 = points
        .iter()
        .map(|p| {
            samples
                .iter()
                .map(|c| c.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    (total / points.len() as f64).sqrt()
}
