//! Hard-assignment cross-entropy clustering (Lloyd variant) with small
//! cluster removal, generic over the per-cluster density family.
//!
//! The energy of a state is `Σ_i p_i (−ln p_i + H^×(X_i ‖ f_i))`, which equals
//! the mean over points of `−ln p_{cl(x)} − ln f_{cl(x)}(x)`.

use log::warn;
use rayon::prelude::*;
use serde::Serialize;

use crate::dataio::Dataset;
use crate::error::{Error, Result};

/// A density usable as a cluster model.
pub trait ClusterDensity: Clone + Send + Sync {
    fn log_density(&self, x: &[f64]) -> f64;
    /// Free parameters of this component (excluding its weight).
    fn n_params(&self) -> usize;
}

/// Fits cluster models; the "M step" of the Lloyd loop.
pub trait ClusterFitter: Sync {
    type Model: ClusterDensity;

    /// Smallest cluster this fitter can estimate.
    fn min_points(&self, dim: usize) -> usize;

    /// A fresh model for `points`.
    fn fit_initial(&self, points: &Dataset) -> Result<Self::Model>;

    /// Refit warm-started from `previous`.
    fn refit(&self, points: &Dataset, previous: &Self::Model) -> Result<Self::Model>;
}

#[derive(Debug, Clone)]
pub struct Component<M> {
    pub model: M,
    pub weight: f64,
    pub active: bool,
}

/// Weighted components, per-point assignment and the current energy.
#[derive(Debug, Clone)]
pub struct MixtureState<M> {
    pub components: Vec<Component<M>>,
    pub assignment: Vec<usize>,
    pub energy: f64,
}

impl<M: ClusterDensity> MixtureState<M> {
    pub fn active_count(&self) -> usize {
        self.components.iter().filter(|c| c.active).count()
    }

    pub fn active_indices(&self) -> Vec<usize> {
        (0..self.components.len())
            .filter(|&i| self.components[i].active)
            .collect()
    }

    /// Cluster sizes indexed by component.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.components.len()];
        for &a in &self.assignment {
            counts[a] += 1;
        }
        counts
    }

    /// `ln Σ_i p_i f_i(x)` over active components.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let terms: Vec<f64> = self
            .components
            .iter()
            .filter(|c| c.active && c.weight > 0.0)
            .map(|c| c.weight.ln() + c.model.log_density(x))
            .collect();
        crate::gaussian::log_sum_exp(&terms)
    }

    /// Index minimizing `−ln p_i − ln f_i(x)` among active components,
    /// optionally skipping one; ties go to the lowest index.
    pub fn closest(&self, x: &[f64], skip: Option<usize>) -> Option<usize> {
        let mut best = None;
        let mut best_cost = f64::INFINITY;
        for (i, c) in self.components.iter().enumerate() {
            if !c.active || Some(i) == skip {
                continue;
            }
            let cost = -c.weight.ln() - c.model.log_density(x);
            if best.is_none() || cost < best_cost {
                best = Some(i);
                best_cost = cost;
            }
        }
        best
    }

    /// Sets `p_i = |X_i| / |X|` for active components, 0 otherwise.
    pub fn update_weights(&mut self) {
        let counts = self.counts();
        let total = self.assignment.len().max(1) as f64;
        for (c, &n) in self.components.iter_mut().zip(&counts) {
            c.weight = if c.active { n as f64 / total } else { 0.0 };
        }
    }

    /// `Σ_i p_i (−ln p_i + H^×(X_i‖f_i))`, recomputed from scratch.
    pub fn compute_energy(&self, points: &Dataset) -> f64 {
        let total: f64 = (0..points.len())
            .into_par_iter()
            .map(|idx| {
                let c = &self.components[self.assignment[idx]];
                -c.weight.ln() - c.model.log_density(points.point(idx))
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum();
        total / points.len() as f64
    }
}

/// Reassigns every point to its closest active component.
pub fn assign<M: ClusterDensity>(state: &mut MixtureState<M>, points: &Dataset) -> Result<()> {
    if state.active_count() == 0 {
        return Err(Error::InvalidArgument("no active component".into()));
    }
    let labels: Vec<usize> = (0..points.len())
        .into_par_iter()
        .map(|i| state.closest(points.point(i), None).expect("active component"))
        .collect();
    state.assignment = labels;
    Ok(())
}

/// Moves every point of component `idx` to its closest other active
/// component and deactivates `idx`.
fn dissolve<M: ClusterDensity>(state: &mut MixtureState<M>, points: &Dataset, idx: usize) {
    let members: Vec<usize> = (0..points.len())
        .filter(|&p| state.assignment[p] == idx)
        .collect();
    let targets: Vec<usize> = members
        .par_iter()
        .map(|&p| state.closest(points.point(p), Some(idx)).expect("another active component"))
        .collect();
    for (p, t) in members.into_iter().zip(targets) {
        state.assignment[p] = t;
    }
    state.components[idx].active = false;
    state.update_weights();
}

/// Deactivates, in index order, every active component holding fewer than
/// `removal_pct`% of the points; their points go to the closest remaining
/// active component. The largest component always survives.
/// Returns the indices removed.
pub fn remove_small_clusters<M: ClusterDensity>(
    state: &mut MixtureState<M>,
    points: &Dataset,
    removal_pct: f64,
) -> Vec<usize> {
    let threshold = removal_pct / 100.0 * points.len() as f64;
    let counts = state.counts();
    let keep = state
        .active_indices()
        .into_iter()
        .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a)));
    let mut removed = Vec::new();
    for idx in 0..state.components.len() {
        if !state.components[idx].active || Some(idx) == keep {
            continue;
        }
        let size = state.assignment.iter().filter(|&&a| a == idx).count();
        if (size as f64) < threshold && state.active_count() > 1 {
            dissolve(state, points, idx);
            removed.push(idx);
        }
    }
    if removed.is_empty() {
        state.update_weights();
    }
    removed
}

/// Stop threshold for the Lloyd loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum StopRule {
    Absolute(f64),
    /// Multiple of `|initial energy|`.
    RelativeToInitial(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LloydTrace {
    /// Energy after the initial fits.
    pub initial_energy: f64,
    /// Energy at the end of every iteration.
    pub energies: Vec<f64>,
    /// Active component count at the end of every iteration.
    pub active_counts: Vec<usize>,
    /// Effective stop threshold ε.
    pub eps: f64,
    /// True when the loop ended on the ε rule rather than the iteration cap.
    pub stopped_on_eps: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LloydConfig {
    pub removal_pct: f64,
    pub stop: StopRule,
    pub max_iters: usize,
}

/// Runs the Lloyd CEC loop from an initial labelling with `k` groups.
pub fn lloyd<F: ClusterFitter>(
    fitter: &F,
    points: &Dataset,
    initial_labels: &[usize],
    k: usize,
    config: &LloydConfig,
) -> Result<(MixtureState<F::Model>, LloydTrace)> {
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    if !(config.removal_pct > 0.0 && config.removal_pct < 100.0) {
        return Err(Error::InvalidArgument("removal_pct must be in (0, 100)".into()));
    }
    let n_points = points.len();
    let threshold = config.removal_pct / 100.0 * n_points as f64;
    let groups: Vec<Vec<usize>> = (0..k)
        .map(|g| (0..n_points).filter(|&i| initial_labels[i] == g).collect())
        .collect();

    // initial fits, in parallel, only for groups over the threshold
    let largest = (0..k)
        .max_by(|&a, &b| groups[a].len().cmp(&groups[b].len()).then(b.cmp(&a)))
        .unwrap_or(0);
    let fitted: Vec<Option<F::Model>> = groups
        .par_iter()
        .enumerate()
        .map(|(g, members)| {
            if (members.len() as f64) < threshold && g != largest {
                return None;
            }
            let subset = points.subset(members);
            match fitter.fit_initial(&subset) {
                Ok(m) => Some(m),
                Err(e) => {
                    warn!("initial fit of cluster {g} failed: {e}");
                    None
                }
            }
        })
        .collect();
    if fitted.iter().all(Option::is_none) {
        return Err(Error::InvalidArgument(
            "no initial cluster could be fitted".into(),
        ));
    }
    let placeholder = fitted.iter().flatten().next().cloned().expect("one model");
    let mut state = MixtureState {
        components: fitted
            .into_iter()
            .map(|m| match m {
                Some(model) => Component {
                    model,
                    weight: 0.0,
                    active: true,
                },
                None => Component {
                    model: placeholder.clone(),
                    weight: 0.0,
                    active: false,
                },
            })
            .collect(),
        assignment: initial_labels.to_vec(),
        energy: f64::INFINITY,
    };
    // points of unfitted groups join their closest active cluster
    let orphaned: Vec<usize> = (0..k).filter(|&g| !state.components[g].active).collect();
    {
        let counts = state.counts();
        let total: usize = state
            .active_indices()
            .iter()
            .map(|&i| counts[i])
            .sum::<usize>()
            .max(1);
        for c in state.components.iter_mut().filter(|c| c.active) {
            c.weight = 0.0;
        }
        for i in state.active_indices() {
            state.components[i].weight = counts[i] as f64 / total as f64;
        }
    }
    for g in orphaned {
        let members: Vec<usize> = (0..n_points).filter(|&i| state.assignment[i] == g).collect();
        for p in members {
            state.assignment[p] = state.closest(points.point(p), None).expect("active");
        }
    }
    state.update_weights();
    let initial_energy = state.compute_energy(points);
    state.energy = initial_energy;
    let eps = match config.stop {
        StopRule::Absolute(e) => e,
        StopRule::RelativeToInitial(f) => (f * initial_energy.abs()).max(1e-12),
    };

    let mut trace = LloydTrace {
        initial_energy,
        energies: Vec::new(),
        active_counts: Vec::new(),
        eps,
        stopped_on_eps: false,
    };
    let mut previous = f64::INFINITY;
    for _ in 0..config.max_iters {
        assign(&mut state, points)?;
        state.update_weights();
        remove_small_clusters(&mut state, points, config.removal_pct);

        // refit active clusters warm-started from their current parameters
        let active = state.active_indices();
        let members: Vec<Vec<usize>> = active
            .iter()
            .map(|&c| (0..n_points).filter(|&i| state.assignment[i] == c).collect())
            .collect();
        let refits: Vec<Result<F::Model>> = active
            .par_iter()
            .zip(members.par_iter())
            .map(|(&c, idx)| {
                if idx.len() < fitter.min_points(points.dim()) {
                    return Err(Error::TooFewPoints {
                        needed: fitter.min_points(points.dim()),
                        got: idx.len(),
                    });
                }
                fitter.refit(&points.subset(idx), &state.components[c].model)
            })
            .collect();
        let mut failed = Vec::new();
        for (&c, r) in active.iter().zip(refits) {
            match r {
                Ok(m) => state.components[c].model = m,
                Err(e) => {
                    warn!("refit of cluster {c} failed, deactivating: {e}");
                    failed.push(c);
                }
            }
        }
        for c in failed {
            if state.active_count() > 1 {
                dissolve(&mut state, points, c);
            }
        }

        let h = state.compute_energy(points);
        state.energy = h;
        trace.energies.push(h);
        trace.active_counts.push(state.active_count());
        if !(h < previous - eps) {
            trace.stopped_on_eps = true;
            break;
        }
        previous = h;
    }
    Ok((state, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::Gaussian;
    use nalgebra::{DMatrix, DVector};

    fn unit(at: f64) -> Gaussian {
        Gaussian::new(DVector::from_vec(vec![at]), DMatrix::identity(1, 1)).unwrap()
    }

    fn state(models: Vec<Gaussian>, weights: Vec<f64>, n: usize) -> MixtureState<Gaussian> {
        MixtureState {
            components: models
                .into_iter()
                .zip(weights)
                .map(|(model, weight)| Component {
                    model,
                    weight,
                    active: true,
                })
                .collect(),
            assignment: vec![0; n],
            energy: f64::NAN,
        }
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let pts = Dataset::from_rows(&[vec![0.0], vec![3.0], vec![-2.0]]).unwrap();
        let mut s = state(vec![unit(0.0), unit(0.0)], vec![0.5, 0.5], 3);
        assign(&mut s, &pts).unwrap();
        assert_eq!(s.assignment, vec![0, 0, 0]);
    }

    #[test]
    fn common_weight_scaling_keeps_assignment() {
        let pts = Dataset::from_rows(&[vec![0.4], vec![3.0], vec![-2.0], vec![1.9]]).unwrap();
        let mut a = state(vec![unit(0.0), unit(2.0)], vec![0.3, 0.7], 4);
        let mut b = state(vec![unit(0.0), unit(2.0)], vec![0.6, 1.4], 4);
        assign(&mut a, &pts).unwrap();
        assign(&mut b, &pts).unwrap();
        assert_eq!(a.assignment, b.assignment);
    }

    #[test]
    fn empty_cluster_is_removed() {
        let pts = Dataset::from_rows(&[vec![0.0], vec![0.1], vec![0.2]]).unwrap();
        let mut s = state(vec![unit(0.0), unit(50.0)], vec![0.5, 0.5], 3);
        let removed = remove_small_clusters(&mut s, &pts, 5.0);
        assert_eq!(removed, vec![1]);
        assert!(!s.components[1].active);
        assert_eq!(s.components[0].weight, 1.0);
        assert_eq!(s.components[1].weight, 0.0);
    }

    #[test]
    fn removal_noop_when_all_large() {
        let pts = Dataset::from_rows(&[vec![0.0], vec![0.1], vec![5.0], vec![5.1]]).unwrap();
        let mut s = state(vec![unit(0.0), unit(5.0)], vec![0.5, 0.5], 4);
        s.assignment = vec![0, 0, 1, 1];
        let before = s.assignment.clone();
        assert!(remove_small_clusters(&mut s, &pts, 5.0).is_empty());
        assert_eq!(s.assignment, before);
        assert_eq!(s.active_count(), 2);
    }

    #[test]
    fn never_removes_everything() {
        let pts = Dataset::from_rows(&[vec![0.0], vec![0.1], vec![5.0]]).unwrap();
        let mut s = state(vec![unit(0.0), unit(5.0)], vec![0.5, 0.5], 3);
        s.assignment = vec![0, 0, 1];
        // 99% threshold: both are "small" but one must survive
        remove_small_clusters(&mut s, &pts, 99.0);
        assert_eq!(s.active_count(), 1);
        assert!(s.components[0].active);
        assert_eq!(s.assignment, vec![0, 0, 0]);
    }
}
