//! Multi-start runs of MCEC and the Gaussian baselines, and the synthetic
//! benchmark suites.
//!
//! Suite `orderN` has two disjoint closed curves of Fourier order `N`
//! (unit circles plus fixed harmonics, see [`suite_curves`]) with 300
//! points each at σ = 0.05.
//! MCEC gets the true cluster count; CEC and GMM get 2× for orders 1–2 and
//! 4× for orders 3–4.

use std::time::Instant;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{cec_gaussian, gmm_em, GaussianMixture};
use crate::dataio::{generate, CurveSpec, Dataset, ModelFile};
use crate::density::DEFAULT_SEGMENTS;
use crate::error::{Error, Result};
use crate::fit::FitConfig;
use crate::fourier::{FourierCurve, MultiIndex};
use crate::mcec::{mcec_run, InitMethod, McecConfig};
use crate::metrics::{jaccard_index, rand_index, score, score_gmm, Likelihood, ModelScore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mcec,
    Cec,
    Gmm,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Mcec => "mcec",
            Method::Cec => "cec",
            Method::Gmm => "gmm",
        }
    }

    /// What the best start minimizes.
    pub fn criterion(self) -> &'static str {
        match self {
            Method::Mcec | Method::Cec => "energy",
            Method::Gmm => "bic",
        }
    }
}

/// Everything a multi-start run depends on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunSettings {
    pub method: Method,
    pub k: usize,
    pub order: usize,
    pub segments_k: usize,
    pub starts: usize,
    pub seed: u64,
    pub removal_pct: f64,
    /// MCEC stop threshold; `None` means relative to the initial energy.
    pub eps: Option<f64>,
    pub max_iters: usize,
    pub likelihood: Likelihood,
    /// Initial partition for MCEC; the baselines always use k-means.
    pub init: InitMethod,
    pub fit: FitConfig,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            method: Method::Mcec,
            k: 4,
            order: 1,
            segments_k: DEFAULT_SEGMENTS,
            starts: 1,
            seed: 0,
            removal_pct: 5.0,
            eps: None,
            max_iters: 100,
            likelihood: Likelihood::Hard,
            init: InitMethod::Kmeans,
            fit: FitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StartReport {
    pub start: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<ModelScore>,
    /// Energy for CEC-type methods, BIC for GMM.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub criterion: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rand: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jaccard: Option<f64>,
    pub active_clusters: usize,
    /// Per-iteration energies (CEC-type) or log-likelihoods (GMM).
    pub trace: Vec<f64>,
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct MultiStart {
    pub starts: Vec<StartReport>,
    pub best: usize,
    pub model: ModelFile,
    pub labels: Vec<usize>,
}

impl MultiStart {
    pub fn best_report(&self) -> &StartReport {
        &self.starts[self.best]
    }
}

/// Seeds of the individual starts, drawn from one ChaCha20 stream.
pub fn start_seeds(seed: u64, starts: usize) -> Vec<u64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..starts).map(|_| rng.random::<u64>()).collect()
}

struct Fitted {
    model: ModelFile,
    labels: Vec<usize>,
    score: ModelScore,
    criterion: f64,
    trace: Vec<f64>,
    active: usize,
}

fn run_one(points: &Dataset, s: &RunSettings, seed: u64) -> Result<Fitted> {
    match s.method {
        Method::Mcec => {
            let cfg = McecConfig {
                k: s.k,
                order: s.order,
                segments_k: s.segments_k,
                eps: s.eps,
                removal_pct: s.removal_pct,
                seed,
                max_lloyd_iters: s.max_iters,
                init: s.init,
                fit: s.fit,
            };
            let out = mcec_run(points, &cfg)?;
            let sc = score(&out.state, points, s.likelihood)?;
            Ok(Fitted {
                labels: out.state.assignment.clone(),
                score: sc,
                criterion: out.state.energy,
                trace: out.trace.energies.clone(),
                active: out.state.active_count(),
                model: ModelFile::Curves(out.state),
            })
        }
        Method::Cec => {
            let out = cec_gaussian(points, s.k, seed, s.removal_pct, s.max_iters)?;
            let sc = score(&out.state, points, s.likelihood)?;
            Ok(Fitted {
                labels: out.state.assignment.clone(),
                score: sc,
                criterion: out.state.energy,
                trace: out.trace.energies.clone(),
                active: out.state.active_count(),
                model: ModelFile::Gaussians(GaussianMixture::from_state(&out.state)?),
            })
        }
        Method::Gmm => {
            let out = gmm_em(points, s.k, seed, s.max_iters)?;
            let sc = score_gmm(&out.mixture, points)?;
            let labels = points.iter().map(|x| out.mixture.predict(x)).collect();
            Ok(Fitted {
                labels,
                score: sc,
                criterion: sc.bic,
                trace: out.trace,
                active: out.mixture.weights.iter().filter(|w| **w > 0.0).count(),
                model: ModelFile::Gaussians(out.mixture),
            })
        }
    }
}

/// Runs `settings.starts` independent starts and keeps the one with the
/// smallest criterion (first on ties). Failed starts are reported, not fatal.
pub fn run_starts(points: &Dataset, settings: &RunSettings) -> Result<MultiStart> {
    if settings.starts == 0 {
        return Err(Error::InvalidArgument("starts must be at least 1".into()));
    }
    let seeds = start_seeds(settings.seed, settings.starts);
    let results: Vec<(Result<Fitted>, f64)> = seeds
        .par_iter()
        .map(|&seed| {
            let t = Instant::now();
            let r = run_one(points, settings, seed);
            (r, t.elapsed().as_secs_f64())
        })
        .collect();

    let truth = points.labels();
    let mut reports = Vec::with_capacity(results.len());
    let mut best: Option<(usize, Fitted)> = None;
    for (start, ((r, seconds), &seed)) in results.into_iter().zip(&seeds).enumerate() {
        match r {
            Ok(f) => {
                let (rand, jaccard) = match truth {
                    Some(t) => (Some(rand_index(t, &f.labels)?), Some(jaccard_index(t, &f.labels)?)),
                    None => (None, None),
                };
                reports.push(StartReport {
                    start,
                    seed,
                    error: None,
                    score: Some(f.score),
                    criterion: Some(f.criterion),
                    rand,
                    jaccard,
                    active_clusters: f.active,
                    trace: f.trace.clone(),
                    seconds,
                });
                if best.as_ref().is_none_or(|(_, b)| f.criterion < b.criterion) {
                    best = Some((start, f));
                }
            }
            Err(e) => {
                warn!("start {start} (seed {seed}) failed: {e}");
                reports.push(StartReport {
                    start,
                    seed,
                    error: Some(e.to_string()),
                    score: None,
                    criterion: None,
                    rand: None,
                    jaccard: None,
                    active_clusters: 0,
                    trace: Vec::new(),
                    seconds,
                });
            }
        }
    }
    let (best, fitted) = best.ok_or_else(|| {
        Error::InvalidArgument(format!("all {} starts failed", settings.starts))
    })?;
    Ok(MultiStart {
        starts: reports,
        best,
        model: fitted.model,
        labels: fitted.labels,
    })
}

pub const SUITES: &[&str] = &["order1", "order2", "order3", "order4"];

/// Parses `order1` … `order4`.
pub fn suite_order(name: &str) -> Result<usize> {
    match name {
        "order1" => Ok(1),
        "order2" => Ok(2),
        "order3" => Ok(3),
        "order4" => Ok(4),
        other => Err(Error::InvalidArgument(format!(
            "unknown suite {other:?}; known: {}",
            SUITES.join(", ")
        ))),
    }
}

/// Two disjoint curves of the given order: unit circles centered at
/// `(-2.5, 0)` and `(2.5, 0)`, each frequency `l ≥ 2` adding amplitude
/// `0.22 / l` (the second curve with alternating signs).
pub fn suite_curves(order: usize) -> Vec<FourierCurve> {
    let order = order.max(1);
    let make = |center: [f64; 2], flip: f64| {
        let mut c = FourierCurve::constant(&center, 1, order);
        c.set_coeff(0, &MultiIndex::new(vec![-1]), 1.0);
        c.set_coeff(1, &MultiIndex::new(vec![1]), 1.0);
        for l in 2..=order as i32 {
            let amp = 0.22 / l as f64;
            let sign = if l % 2 == 0 { 1.0 } else { flip };
            c.set_coeff(0, &MultiIndex::new(vec![-l]), amp);
            c.set_coeff(1, &MultiIndex::new(vec![l]), sign * amp);
        }
        c
    };
    vec![make([-2.5, 0.0], 1.0), make([2.5, 0.0], -1.0)]
}

pub const SUITE_SIGMA: f64 = 0.05;
pub const SUITE_POINTS_PER_CURVE: usize = 300;

pub fn suite_dataset(order: usize, seed: u64) -> Result<Dataset> {
    let specs: Vec<CurveSpec> = suite_curves(order)
        .into_iter()
        .map(|curve| CurveSpec {
            curve,
            sigma: SUITE_SIGMA,
            count: SUITE_POINTS_PER_CURVE,
        })
        .collect();
    Ok(generate(&specs, seed)?.with_name(format!("order{order}")))
}

/// Cluster-count multiplier for the Gaussian baselines.
pub fn baseline_multiplier(order: usize) -> usize {
    if order <= 2 {
        2
    } else {
        4
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub method: Method,
    pub k: usize,
    pub score: ModelScore,
    pub rand: f64,
    pub jaccard: f64,
    pub active_clusters: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub suite: String,
    pub seed: u64,
    pub starts: usize,
    pub true_clusters: usize,
    pub n_points: usize,
    pub sigma: f64,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    /// Plain-text table in the layout of the paper's result tables.
    pub fn table(&self) -> String {
        let mut out = format!(
            "suite {} ({} curves, {} points, seed {}, {} starts)\n{:<6} {:>3} {:>12} {:>12} {:>12} {:>6} {:>8}\n",
            self.suite, self.true_clusters, self.n_points, self.seed, self.starts, "method", "k", "MLE", "BIC", "AIC", "Rand", "Jaccard"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:<6} {:>3} {:>12.2} {:>12.2} {:>12.2} {:>6.2} {:>8.2}\n",
                r.method.name(),
                r.k,
                r.score.mle,
                r.score.bic,
                r.score.aic,
                r.rand,
                r.jaccard
            ));
        }
        out
    }
}

/// Regenerates the suite and runs all three methods.
pub fn run_suite(name: &str, seed: u64, starts: usize) -> Result<(Dataset, BenchReport, Vec<MultiStart>)> {
    let order = suite_order(name)?;
    let data = suite_dataset(order, seed)?;
    let true_k = suite_curves(order).len();
    let mult = baseline_multiplier(order);
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for (method, k) in [(Method::Mcec, true_k), (Method::Cec, mult * true_k), (Method::Gmm, mult * true_k)] {
        let settings = RunSettings {
            method,
            k,
            order,
            starts,
            seed,
            ..RunSettings::default()
        };
        let run = run_starts(&data, &settings)?;
        let best = run.best_report();
        rows.push(BenchRow {
            method,
            k,
            score: best.score.expect("best start succeeded"),
            rand: best.rand.unwrap_or(f64::NAN),
            jaccard: best.jaccard.unwrap_or(f64::NAN),
            active_clusters: best.active_clusters,
        });
        runs.push(run);
    }
    let report = BenchReport {
        suite: name.to_string(),
        seed,
        starts,
        true_clusters: true_k,
        n_points: data.len(),
        sigma: SUITE_SIGMA,
        rows,
    };
    Ok((data, report, runs))
}
