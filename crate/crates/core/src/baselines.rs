//! Full-covariance Gaussian baselines: classic hard-assignment CEC and
//! EM for Gaussian mixtures.

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::cec::{lloyd, ClusterDensity, ClusterFitter, LloydConfig, LloydTrace, MixtureState, StopRule};
use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::gaussian::{log_sum_exp, Gaussian};
use crate::kmeans::kmeans_labels;

/// Diagonal loading applied only when a covariance estimate is singular.
pub const COLLAPSE_REGULARIZATION: f64 = 1e-6;

/// Relative log-likelihood change below which EM stops.
pub const EM_TOL: f64 = 1e-10;

impl ClusterDensity for Gaussian {
    fn log_density(&self, x: &[f64]) -> f64 {
        self.log_pdf(x)
    }

    fn n_params(&self) -> usize {
        let n = self.dim();
        n + n * (n + 1) / 2
    }
}

/// Weighted mean and covariance; `weights = None` means all ones.
fn weighted_moments(points: &Dataset, weights: Option<&[f64]>) -> (DVector<f64>, DMatrix<f64>, f64) {
    let n = points.dim();
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let mut total = 0.0;
    let mut mean = DVector::zeros(n);
    for (i, p) in points.iter().enumerate() {
        let wi = w(i);
        total += wi;
        for a in 0..n {
            mean[a] += wi * p[a];
        }
    }
    mean /= total;
    let mut cov = DMatrix::zeros(n, n);
    for (i, p) in points.iter().enumerate() {
        let wi = w(i);
        for a in 0..n {
            let da = p[a] - mean[a];
            for b in 0..=a {
                cov[(a, b)] += wi * da * (p[b] - mean[b]);
            }
        }
    }
    cov /= total;
    for a in 0..n {
        for b in 0..a {
            cov[(b, a)] = cov[(a, b)];
        }
    }
    (mean, cov, total)
}

/// Builds the Gaussian, loading the diagonal once if the estimate collapsed.
fn gaussian_or_regularized(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Gaussian> {
    match Gaussian::new(mean.clone(), cov.clone()) {
        Ok(g) => Ok(g),
        Err(Error::NotPositiveDefinite) => {
            let n = cov.nrows();
            Gaussian::new(mean, cov + DMatrix::identity(n, n) * COLLAPSE_REGULARIZATION)
        }
        Err(e) => Err(e),
    }
}

/// Maximum-likelihood Gaussian of `points`.
pub fn gaussian_mle(points: &Dataset) -> Result<Gaussian> {
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let (mean, cov, _) = weighted_moments(points, None);
    gaussian_or_regularized(mean, cov)
}

/// Closed-form Gaussian MLE as a CEC cluster model.
#[derive(Debug, Clone, Copy, Default)]
pub struct GaussianFitter;

impl ClusterFitter for GaussianFitter {
    type Model = Gaussian;

    fn min_points(&self, dim: usize) -> usize {
        dim + 1
    }

    fn fit_initial(&self, points: &Dataset) -> Result<Gaussian> {
        gaussian_mle(points)
    }

    fn refit(&self, points: &Dataset, _previous: &Gaussian) -> Result<Gaussian> {
        gaussian_mle(points)
    }
}

#[derive(Debug, Clone)]
pub struct CecOutcome {
    pub state: MixtureState<Gaussian>,
    pub trace: LloydTrace,
    pub initial_labels: Vec<usize>,
}

/// Hard-assignment CEC with full-covariance Gaussians, started from the
/// same k-means partition as MCEC.
pub fn cec_gaussian(
    points: &Dataset,
    k: usize,
    seed: u64,
    removal_pct: f64,
    max_iters: usize,
) -> Result<CecOutcome> {
    if k == 0 || max_iters == 0 {
        return Err(Error::InvalidArgument("k and max_iters must be positive".into()));
    }
    if points.len() < k * (points.dim() + 1) {
        return Err(Error::TooFewPoints {
            needed: k * (points.dim() + 1),
            got: points.len(),
        });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (initial_labels, _) = kmeans_labels(points, k, 1, &mut rng);
    let config = LloydConfig {
        removal_pct,
        stop: StopRule::Absolute(1e-10),
        max_iters,
    };
    let (state, trace) = lloyd(&GaussianFitter, points, &initial_labels, k, &config)?;
    Ok(CecOutcome {
        state,
        trace,
        initial_labels,
    })
}

/// Weights and full-covariance components.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    pub weights: Vec<f64>,
    pub components: Vec<Gaussian>,
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, components: Vec<Gaussian>) -> Result<Self> {
        if weights.len() != components.len() || components.is_empty() {
            return Err(Error::InvalidArgument("need one weight per component".into()));
        }
        let dim = components[0].dim();
        if components.iter().any(|c| c.dim() != dim) {
            return Err(Error::InvalidArgument("components differ in dimension".into()));
        }
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("weights must be nonnegative and sum to 1, sum {sum}")));
        }
        Ok(GaussianMixture { weights, components })
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// `ln Σ_j p_j N_j(x)`.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let terms: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.components)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, c)| w.ln() + c.log_pdf(x))
            .collect();
        log_sum_exp(&terms)
    }

    /// Component with the largest `p_j N_j(x)`; ties to the lowest index.
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_v = f64::NEG_INFINITY;
        for (j, (w, c)) in self.weights.iter().zip(&self.components).enumerate() {
            let v = w.ln() + c.log_pdf(x);
            if v > best_v {
                best_v = v;
                best = j;
            }
        }
        best
    }

    /// Component parameters of components with positive weight, plus the
    /// free weights.
    pub fn n_params(&self) -> usize {
        let live: Vec<&Gaussian> = self
            .weights
            .iter()
            .zip(&self.components)
            .filter(|(w, _)| **w > 0.0)
            .map(|(_, c)| c)
            .collect();
        live.iter().map(|c| c.n_params()).sum::<usize>() + live.len().saturating_sub(1)
    }

    /// Active components of a CEC state as a mixture.
    pub fn from_state(state: &MixtureState<Gaussian>) -> Result<Self> {
        let active = state.active_indices();
        Self::new(
            active.iter().map(|&i| state.components[i].weight).collect(),
            active.iter().map(|&i| state.components[i].model.clone()).collect(),
        )
    }
}

#[derive(Debug, Clone)]
pub struct GmmOutcome {
    pub mixture: GaussianMixture,
    /// Total log-likelihood of `mixture`.
    pub loglik: f64,
    /// Log-likelihood before the first M step and after every iteration.
    pub trace: Vec<f64>,
    pub iters: usize,
    pub converged: bool,
    pub initial_labels: Vec<usize>,
}

/// E step: total log-likelihood and row-major responsibilities.
fn e_step(mix: &GaussianMixture, points: &Dataset) -> (f64, Vec<f64>) {
    let k = mix.len();
    let rows: Vec<(f64, Vec<f64>)> = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let x = points.point(i);
            let mut terms: Vec<f64> = mix
                .weights
                .iter()
                .zip(&mix.components)
                .map(|(w, c)| if *w > 0.0 { w.ln() + c.log_pdf(x) } else { f64::NEG_INFINITY })
                .collect();
            let lse = log_sum_exp(&terms);
            terms.iter_mut().for_each(|t| *t = (*t - lse).exp());
            (lse, terms)
        })
        .collect();
    let mut ll = 0.0;
    let mut resp = Vec::with_capacity(points.len() * k);
    for (l, r) in rows {
        ll += l;
        resp.extend(r);
    }
    (ll, resp)
}

/// M step; components that lost all mass keep their parameters.
fn m_step(mix: &GaussianMixture, points: &Dataset, resp: &[f64]) -> Result<GaussianMixture> {
    let k = mix.len();
    let n_points = points.len() as f64;
    let mut weights = Vec::with_capacity(k);
    let mut components = Vec::with_capacity(k);
    for j in 0..k {
        let w: Vec<f64> = (0..points.len()).map(|i| resp[i * k + j]).collect();
        let mass: f64 = w.iter().sum();
        if mass <= 1e-12 * n_points {
            weights.push(0.0);
            components.push(mix.components[j].clone());
            continue;
        }
        let (mean, cov, _) = weighted_moments(points, Some(&w));
        weights.push(mass / n_points);
        components.push(gaussian_or_regularized(mean, cov).inspect_err(|e| {
            warn!("component {j} could not be re-estimated: {e}");
        })?);
    }
    let sum: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= sum);
    Ok(GaussianMixture { weights, components })
}

/// EM for a `k`-component full-covariance mixture, initialized from hard
/// k-means labels.
pub fn gmm_em(points: &Dataset, k: usize, seed: u64, max_iters: usize) -> Result<GmmOutcome> {
    if k == 0 || max_iters == 0 {
        return Err(Error::InvalidArgument("k and max_iters must be positive".into()));
    }
    if points.len() < k * (points.dim() + 1) {
        return Err(Error::TooFewPoints {
            needed: k * (points.dim() + 1),
            got: points.len(),
        });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (initial_labels, centers) = kmeans_labels(points, k, 1, &mut rng);
    let k_eff = centers.len();
    let mut hard = vec![0.0; points.len() * k_eff];
    for (i, &l) in initial_labels.iter().enumerate() {
        hard[i * k_eff + l] = 1.0;
    }
    let (_, global_cov, _) = weighted_moments(points, None);
    let seed_mix = GaussianMixture {
        weights: vec![1.0 / k_eff as f64; k_eff],
        components: centers
            .iter()
            .map(|c| gaussian_or_regularized(DVector::from_column_slice(c), global_cov.clone()))
            .collect::<Result<_>>()?,
    };
    let mut mix = m_step(&seed_mix, points, &hard)?;
    let (mut ll, mut resp) = e_step(&mix, points);
    let mut trace = vec![ll];
    let mut iters = 0;
    let mut converged = false;
    while iters < max_iters {
        let next = m_step(&mix, points, &resp)?;
        let (next_ll, next_resp) = e_step(&next, points);
        iters += 1;
        trace.push(next_ll);
        let gain = next_ll - ll;
        mix = next;
        ll = next_ll;
        resp = next_resp;
        if gain.abs() <= EM_TOL * ll.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    Ok(GmmOutcome {
        mixture: mix,
        loglik: ll,
        trace,
        iters,
        converged,
        initial_labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn blobs(centers: &[[f64; 2]], per: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, center) in centers.iter().enumerate() {
            for _ in 0..per {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                rows.push(vec![center[0] + 0.3 * a, center[1] + 0.2 * b + 0.1 * a]);
                labels.push(c);
            }
        }
        Dataset::from_rows(&rows).unwrap().with_labels(labels).unwrap()
    }

    #[test]
    fn single_component_em_is_sample_mle() {
        let d = blobs(&[[1.0, -1.0]], 200, 4);
        let out = gmm_em(&d, 1, 0, 50).unwrap();
        let mle = gaussian_mle(&d).unwrap();
        let g = &out.mixture.components[0];
        assert!((&g.mean - &mle.mean).abs().max() < 1e-12);
        assert!((&g.cov - &mle.cov).abs().max() < 1e-12);
        assert!(out.converged);
    }

    #[test]
    fn em_trace_is_monotone() {
        let d = blobs(&[[0.0, 0.0], [1.0, 0.5], [3.0, -1.0]], 80, 9);
        let out = gmm_em(&d, 3, 2, 200).unwrap();
        for w in out.trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-10, "{} -> {}", w[0], w[1]);
        }
        assert_eq!(*out.trace.last().unwrap(), out.loglik);
    }

    #[test]
    fn cec_single_cluster_is_mle() {
        let d = blobs(&[[0.0, 0.0]], 100, 1);
        let out = cec_gaussian(&d, 1, 0, 5.0, 10).unwrap();
        let mle = gaussian_mle(&d).unwrap();
        assert_eq!(out.state.components[0].model, mle);
    }

    #[test]
    fn cec_separates_blobs() {
        let d = blobs(&[[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]], 60, 2);
        let out = cec_gaussian(&d, 3, 5, 5.0, 50).unwrap();
        let truth = d.labels().unwrap();
        assert_eq!(crate::metrics::rand_index(truth, &out.state.assignment).unwrap(), 1.0);
    }

    #[test]
    fn collapsed_cluster_is_regularized() {
        let d = Dataset::from_rows(&vec![vec![2.0, 2.0]; 4]).unwrap();
        let g = gaussian_mle(&d).unwrap();
        assert!((g.cov[(0, 0)] - COLLAPSE_REGULARIZATION).abs() < 1e-18);
    }

    #[test]
    fn gaussian_param_count() {
        let g = gaussian_mle(&blobs(&[[0.0, 0.0]], 10, 1)).unwrap();
        assert_eq!(ClusterDensity::n_params(&g), 5);
    }
}
