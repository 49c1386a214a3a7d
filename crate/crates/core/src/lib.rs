//! Gaussian distributions supported on closed curves (and tori) given by
//! truncated Fourier series, and MCEC: cross-entropy clustering whose
//! clusters are such distributions.
//!
//! Fourier basis convention: for a multi-index `l`, axis `m` contributes
//! `cos(-2π l_m s_m)` when `l_m < 0`, `1` when `l_m = 0` and
//! `sin(2π l_m s_m)` when `l_m > 0`; see [`fourier::TRIG_CONVENTION`].

pub mod baselines;
pub mod bench;
pub mod cec;
pub mod dataio;
pub mod density;
pub mod error;
pub mod fit;
pub mod fourier;
pub mod gaussian;
pub mod gradient;
pub mod kmeans;
pub mod mcec;
pub mod metrics;
pub mod optim;
pub mod plot;
pub mod segments;

pub use baselines::{cec_gaussian, gmm_em, GaussianMixture};
pub use cec::{assign, remove_small_clusters, ClusterDensity, Component, MixtureState};
pub use dataio::{read_csv, write_csv, Dataset};
pub use density::{log_density_exact, log_density_pointsum, CurveGaussianModel};
pub use error::{Error, Result};
pub use fit::{cross_entropy, fit_component, init_curve_guess, FitConfig, FitResult};
pub use fourier::{g_pair, g_single, FourierCurve, MultiIndex};
pub use gradient::{fd_gradient, grad_loglik, ParamGradient};
pub use mcec::{mcec_run, InitMethod, McecConfig, McecOutcome};
pub use metrics::{jaccard_index, rand_index, score, Likelihood, ModelScore};
pub use segments::{all_segments, segment_cov, segment_mean, segment_stats_oracle, SegmentGaussian};
