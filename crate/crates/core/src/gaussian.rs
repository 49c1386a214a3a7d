//! Dense multivariate normal with cached Cholesky factor and precision.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `N(mean, cov)` with everything needed for repeated log-density calls.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// Lower-triangular `L` with `L Lᵀ = cov`.
    pub chol: DMatrix<f64>,
    pub log_det: f64,
    pub precision: DMatrix<f64>,
    /// `-½ (n ln 2π + ln|Σ|)`.
    log_norm: f64,
}

impl Gaussian {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if cov.nrows() != n || cov.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: cov.nrows(),
            });
        }
        if !cov.iter().all(|v| v.is_finite()) || !mean.iter().all(|v| v.is_finite()) {
            return Err(Error::NotPositiveDefinite);
        }
        let chol = cov
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite)?;
        let l = chol.l();
        let log_det = 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        if !log_det.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        let precision = chol.inverse();
        let log_norm = -0.5 * (n as f64 * (2.0 * PI).ln() + log_det);
        Ok(Gaussian {
            mean,
            cov,
            chol: l,
            log_det,
            precision,
            log_norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Squared Mahalanobis distance `(x-μ)ᵀ Σ⁻¹ (x-μ)`.
    pub fn mahalanobis_sq(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for a in 0..n {
            let da = x[a] - self.mean[a];
            let mut row = 0.0;
            for b in 0..n {
                row += self.precision[(a, b)] * (x[b] - self.mean[b]);
            }
            acc += da * row;
        }
        acc
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        self.log_norm - 0.5 * self.mahalanobis_sq(x)
    }

    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }
}

/// `ln Σ exp(v)` with the max-shift; `-inf` for an empty or all `-inf` slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}
