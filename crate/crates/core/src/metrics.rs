//! Model scores (log-likelihood, BIC, AIC) and pair-counting agreement
//! between labellings.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::baselines::GaussianMixture;
use crate::cec::{ClusterDensity, MixtureState};
use crate::dataio::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub mle: f64,
    pub n_params: usize,
    pub n_points: usize,
    pub bic: f64,
    pub aic: f64,
}

impl ModelScore {
    pub fn new(mle: f64, n_params: usize, n_points: usize) -> Self {
        let p = n_params as f64;
        ModelScore {
            mle,
            n_params,
            n_points,
            aic: -2.0 * mle + 2.0 * p,
            bic: -2.0 * mle + p * (n_points as f64).ln(),
        }
    }
}

/// Which likelihood a hard-assignment mixture is scored with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Likelihood {
    /// `Σ_x ln(p_{cl(x)} f_{cl(x)}(x))`
    #[default]
    Hard,
    /// `Σ_x ln Σ_i p_i f_i(x)`
    Soft,
}

/// Parameter count of a mixture state: active component parameters plus
/// `active − 1` weights.
pub fn state_params<M: ClusterDensity>(state: &MixtureState<M>) -> usize {
    let active = state.active_indices();
    active
        .iter()
        .map(|&i| state.components[i].model.n_params())
        .sum::<usize>()
        + active.len().saturating_sub(1)
}

/// Scores a clustering state on the points it was fitted to.
pub fn score<M: ClusterDensity>(state: &MixtureState<M>, points: &Dataset, likelihood: Likelihood) -> Result<ModelScore> {
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    if state.assignment.len() != points.len() {
        return Err(Error::InvalidArgument(format!(
            "assignment has {} entries for {} points",
            state.assignment.len(),
            points.len()
        )));
    }
    let mle: f64 = match likelihood {
        Likelihood::Hard => points
            .iter()
            .zip(&state.assignment)
            .map(|(x, &c)| {
                let comp = &state.components[c];
                comp.weight.ln() + comp.model.log_density(x)
            })
            .sum(),
        Likelihood::Soft => points.iter().map(|x| state.log_density(x)).sum(),
    };
    Ok(ModelScore::new(mle, state_params(state), points.len()))
}

/// Scores a Gaussian mixture with its soft likelihood.
pub fn score_gmm(mixture: &GaussianMixture, points: &Dataset) -> Result<ModelScore> {
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let mle: f64 = points.iter().map(|x| mixture.log_density(x)).sum();
    Ok(ModelScore::new(mle, mixture.n_params(), points.len()))
}

fn choose2(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

/// `(pairs together in both, together in a, together in b, all pairs)`.
fn pair_counts(a: &[usize], b: &[usize]) -> Result<(u64, u64, u64, u64)> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::InvalidArgument("need at least two labels".into()));
    }
    let mut joint: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let both = joint.values().map(|&c| choose2(c)).sum();
    let in_a = rows.values().map(|&c| choose2(c)).sum();
    let in_b = cols.values().map(|&c| choose2(c)).sum();
    Ok((both, in_a, in_b, choose2(a.len() as u64)))
}

/// Fraction of point pairs on which the labellings agree (together in
/// both, or apart in both).
pub fn rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    let (both, in_a, in_b, total) = pair_counts(a, b)?;
    let apart_both = total + both - in_a - in_b;
    Ok((both + apart_both) as f64 / total as f64)
}

/// Pairs together in both over pairs together in at least one; 1 when no
/// pair is together in either.
pub fn jaccard_index(a: &[usize], b: &[usize]) -> Result<f64> {
    let (both, in_a, in_b, _) = pair_counts(a, b)?;
    let union = in_a + in_b - both;
    if union == 0 {
        return Ok(1.0);
    }
    Ok(both as f64 / union as f64)
}
