//! MCEC: cross-entropy clustering whose clusters are Gaussians on closed
//! Fourier curves.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::cec::{lloyd, ClusterDensity, ClusterFitter, LloydConfig, LloydTrace, MixtureState, StopRule};
use crate::dataio::Dataset;
use crate::density::{CurveGaussianModel, DEFAULT_SEGMENTS};
use crate::error::{Error, Result};
use crate::fit::{fit_component, init_curve_guess_with_floor, FitConfig};
use crate::fourier::basis_len;
use crate::kmeans::kmeans_labels;
use crate::segments::IntegralTable;

/// Default ε as a multiple of `|initial energy|`.
pub const DEFAULT_EPS_FACTOR: f64 = 1e-4;

impl ClusterDensity for CurveGaussianModel {
    fn log_density(&self, x: &[f64]) -> f64 {
        CurveGaussianModel::log_density(self, x)
    }

    fn n_params(&self) -> usize {
        CurveGaussianModel::n_params(self)
    }
}

/// How the initial partition into `k` groups is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMethod {
    /// k-means++ seeding followed by one k-means pass.
    #[default]
    Kmeans,
    /// Every point gets a uniformly random label.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McecConfig {
    /// Initial number of clusters.
    pub k: usize,
    pub order: usize,
    pub segments_k: usize,
    /// Stop threshold; `None` means `1e-4 · |initial energy|`.
    pub eps: Option<f64>,
    /// Clusters below this percentage of the points are removed.
    pub removal_pct: f64,
    pub seed: u64,
    pub max_lloyd_iters: usize,
    pub init: InitMethod,
    pub fit: FitConfig,
}

impl Default for McecConfig {
    fn default() -> Self {
        McecConfig {
            k: 4,
            order: 1,
            segments_k: DEFAULT_SEGMENTS,
            eps: None,
            removal_pct: 5.0,
            seed: 0,
            max_lloyd_iters: 100,
            init: InitMethod::Kmeans,
            fit: FitConfig::default(),
        }
    }
}

impl McecConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if self.segments_k == 0 {
            return Err(Error::InvalidArgument("segment count must be positive".into()));
        }
        if let Some(e) = self.eps {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::InvalidArgument(format!("eps must be positive, got {e}")));
            }
        }
        if !(self.removal_pct > 0.0 && self.removal_pct < 100.0) {
            return Err(Error::InvalidArgument(format!(
                "removal_pct must be in (0, 100), got {}",
                self.removal_pct
            )));
        }
        if self.max_lloyd_iters == 0 {
            return Err(Error::InvalidArgument("max_lloyd_iters must be positive".into()));
        }
        self.fit.validate()
    }

    /// Smallest input accepted for `dim`-dimensional points.
    pub fn min_points(&self, dim: usize) -> usize {
        self.k * (dim * basis_len(self.order, 1) + 2)
    }
}

/// Fits closed-curve components: moment-matching start then BFGS.
#[derive(Debug, Clone)]
pub struct CurveFitter {
    pub order: usize,
    pub fit: FitConfig,
    table: Arc<IntegralTable>,
}

impl CurveFitter {
    pub fn new(order: usize, segments_k: usize, fit: FitConfig) -> Self {
        CurveFitter {
            order,
            fit,
            table: IntegralTable::shared(1, order, segments_k),
        }
    }
}

impl ClusterFitter for CurveFitter {
    type Model = CurveGaussianModel;

    fn min_points(&self, dim: usize) -> usize {
        dim * basis_len(self.order, 1) + 1
    }

    fn fit_initial(&self, points: &Dataset) -> Result<CurveGaussianModel> {
        let guess = init_curve_guess_with_floor(points, self.order, self.table.segments(), self.fit.sigma_floor)?;
        let guess = CurveGaussianModel::with_table(guess.curve().clone(), guess.sigma(), Arc::clone(&self.table))?;
        self.refit(points, &guess)
    }

    fn refit(&self, points: &Dataset, previous: &CurveGaussianModel) -> Result<CurveGaussianModel> {
        Ok(fit_component(points, previous, &self.fit)?.model)
    }
}

#[derive(Debug, Clone)]
pub struct McecOutcome {
    pub state: MixtureState<CurveGaussianModel>,
    pub trace: LloydTrace,
    /// Labels of the initial k-means partition.
    pub initial_labels: Vec<usize>,
}

/// Initial partition (see [`InitMethod`]), then the Lloyd CEC loop.
pub fn mcec_run(points: &Dataset, config: &McecConfig) -> Result<McecOutcome> {
    config.validate()?;
    let needed = config.min_points(points.dim());
    if points.len() < needed {
        return Err(Error::TooFewPoints {
            needed,
            got: points.len(),
        });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let initial_labels = match config.init {
        InitMethod::Kmeans => kmeans_labels(points, config.k, 1, &mut rng).0,
        InitMethod::Random => (0..points.len()).map(|_| rng.random_range(0..config.k)).collect(),
    };
    let fitter = CurveFitter::new(config.order, config.segments_k, config.fit);
    let lloyd_config = LloydConfig {
        removal_pct: config.removal_pct,
        stop: match config.eps {
            Some(e) => StopRule::Absolute(e),
            None => StopRule::RelativeToInitial(DEFAULT_EPS_FACTOR),
        },
        max_iters: config.max_lloyd_iters,
    };
    let (state, trace) = lloyd(&fitter, points, &initial_labels, config.k, &lloyd_config)?;
    Ok(McecOutcome {
        state,
        trace,
        initial_labels,
    })
}
