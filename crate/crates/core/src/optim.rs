//! Dense BFGS with a strong-Wolfe line search (bracketing + zoom with
//! safeguarded cubic interpolation).

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsConfig {
    pub max_iters: usize,
    /// Stop once `‖∇f‖∞` falls below this.
    pub grad_tol: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for BfgsConfig {
    fn default() -> Self {
        BfgsConfig {
            max_iters: 200,
            grad_tol: 1e-6,
            c1: 1e-4,
            c2: 0.9,
        }
    }
}

impl BfgsConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iters > 0
            && self.grad_tol > 0.0
            && self.c1 > 0.0
            && self.c2 < 1.0
            && self.c1 < self.c2;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "bad optimizer settings: {self:?} (need 0 < c1 < c2 < 1, positive bounds)"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iters: usize,
    pub converged: bool,
    /// Objective at the start and after every accepted step.
    pub trace: Vec<f64>,
    /// Number of BFGS updates skipped because `yᵀs` was too small.
    pub skipped_updates: usize,
}

/// Curvature threshold below which the inverse-Hessian update is skipped.
const MIN_CURVATURE: f64 = 1e-10;
const MAX_LINE_SEARCH_EVALS: usize = 40;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Minimizes `f`; `objective(x, grad)` returns `f(x)` and writes `∇f(x)`.
/// Non-finite values inside the line search are treated as "step too long".
pub fn minimize<F>(mut objective: F, x0: &[f64], config: &BfgsConfig) -> Result<BfgsOutcome>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    config.validate()?;
    let dim = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; dim];
    let mut f = objective(&x, &mut g);
    if !f.is_finite() || !g.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite(format!("objective at start: {f}")));
    }
    let mut h = identity(dim);
    let mut first_step = true;
    let mut trace = vec![f];
    let mut skipped = 0;
    let mut iters = 0;
    let mut converged = inf_norm(&g) < config.grad_tol;

    while !converged && iters < config.max_iters {
        let mut p = mat_vec(&h, &g);
        p.iter_mut().for_each(|v| *v = -*v);
        let mut slope = dot(&p, &g);
        if !(slope < 0.0) {
            // lost descent; restart from steepest descent
            h = identity(dim);
            p = g.iter().map(|v| -v).collect();
            slope = dot(&p, &g);
            first_step = true;
        }
        let alpha0 = if first_step {
            (1.0 / inf_norm(&p).max(1e-300)).min(1.0)
        } else {
            1.0
        };
        let Some(step) = line_search(&mut objective, &x, f, &g, &p, slope, alpha0, config) else {
            break;
        };
        iters += 1;
        let s: Vec<f64> = p.iter().map(|v| step.alpha * v).collect();
        let y: Vec<f64> = step.grad.iter().zip(&g).map(|(a, b)| a - b).collect();
        x = step.x;
        f = step.f;
        g = step.grad;
        trace.push(f);

        let ys = dot(&y, &s);
        if ys > MIN_CURVATURE {
            if first_step {
                // Shanno–Phua scaling of the initial inverse Hessian
                let scale = ys / dot(&y, &y);
                h = identity(dim);
                h.iter_mut().for_each(|v| *v *= scale);
                first_step = false;
            }
            bfgs_update(&mut h, &s, &y, ys);
        } else {
            skipped += 1;
        }
        converged = inf_norm(&g) < config.grad_tol;
    }

    Ok(BfgsOutcome {
        x,
        f,
        grad: g,
        iters,
        converged,
        trace,
        skipped_updates: skipped,
    })
}

fn identity(dim: usize) -> Vec<f64> {
    let mut m = vec![0.0; dim * dim];
    for i in 0..dim {
        m[i * dim + i] = 1.0;
    }
    m
}

fn mat_vec(m: &[f64], v: &[f64]) -> Vec<f64> {
    let dim = v.len();
    (0..dim).map(|r| dot(&m[r * dim..(r + 1) * dim], v)).collect()
}

/// `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ`.
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], ys: f64) {
    let dim = s.len();
    let rho = 1.0 / ys;
    let hy = mat_vec(h, y);
    let yhy = dot(y, &hy);
    let coef = (1.0 + rho * yhy) * rho;
    for r in 0..dim {
        for c in 0..dim {
            h[r * dim + c] += coef * s[r] * s[c] - rho * (hy[r] * s[c] + s[r] * hy[c]);
        }
    }
    // keep exact symmetry
    for r in 0..dim {
        for c in r + 1..dim {
            let avg = 0.5 * (h[r * dim + c] + h[c * dim + r]);
            h[r * dim + c] = avg;
            h[c * dim + r] = avg;
        }
    }
}

struct Step {
    alpha: f64,
    x: Vec<f64>,
    f: f64,
    grad: Vec<f64>,
}

struct Probe {
    alpha: f64,
    f: f64,
    slope: f64,
    x: Vec<f64>,
    grad: Vec<f64>,
}

fn probe<F>(objective: &mut F, x: &[f64], p: &[f64], alpha: f64) -> Probe
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let xa: Vec<f64> = x.iter().zip(p).map(|(a, b)| a + alpha * b).collect();
    let mut grad = vec![0.0; x.len()];
    let mut f = objective(&xa, &mut grad);
    if !grad.iter().all(|v| v.is_finite()) {
        f = f64::NAN;
    }
    let slope = dot(&grad, p);
    Probe {
        alpha,
        f,
        slope,
        x: xa,
        grad,
    }
}

/// Minimizer of the cubic interpolating `(a, fa, da)` and `(b, fb, db)`,
/// clamped into the interior of the interval.
fn cubic_min(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> f64 {
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let mid = 0.5 * (lo + hi);
    if disc < 0.0 || !disc.is_finite() {
        return mid;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let t = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
    let margin = 0.1 * (hi - lo);
    if t.is_finite() && t > lo + margin && t < hi - margin {
        t
    } else {
        mid
    }
}

#[allow(clippy::too_many_arguments)]
fn line_search<F>(
    objective: &mut F,
    x: &[f64],
    f0: f64,
    g0: &[f64],
    p: &[f64],
    slope0: f64,
    alpha0: f64,
    config: &BfgsConfig,
) -> Option<Step>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let accept = |pr: Probe| Step {
        alpha: pr.alpha,
        x: pr.x,
        f: pr.f,
        grad: pr.grad,
    };
    let mut prev = Probe {
        alpha: 0.0,
        f: f0,
        slope: slope0,
        x: x.to_vec(),
        grad: g0.to_vec(),
    };
    let mut alpha = alpha0;
    for evals in 0..MAX_LINE_SEARCH_EVALS {
        let cur = probe(objective, x, p, alpha);
        if !cur.f.is_finite() {
            // overshoot into an invalid region: shrink toward the last good point
            alpha = prev.alpha + 0.5 * (alpha - prev.alpha);
            if alpha - prev.alpha < 1e-16 {
                return None;
            }
            continue;
        }
        if cur.f > f0 + config.c1 * cur.alpha * slope0 || (evals > 0 && cur.f >= prev.f) {
            return zoom(objective, x, f0, p, slope0, prev, cur, config).map(accept);
        }
        if cur.slope.abs() <= -config.c2 * slope0 {
            return Some(accept(cur));
        }
        if cur.slope >= 0.0 {
            return zoom(objective, x, f0, p, slope0, cur, prev, config).map(accept);
        }
        alpha = 2.0 * cur.alpha;
        prev = cur;
    }
    None
}

#[allow(clippy::too_many_arguments)]
fn zoom<F>(
    objective: &mut F,
    x: &[f64],
    f0: f64,
    p: &[f64],
    slope0: f64,
    mut lo: Probe,
    mut hi: Probe,
    config: &BfgsConfig,
) -> Option<Probe>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    for _ in 0..MAX_LINE_SEARCH_EVALS {
        if (hi.alpha - lo.alpha).abs() < 1e-16 * lo.alpha.abs().max(1.0) {
            break;
        }
        let alpha = cubic_min(lo.alpha, lo.f, lo.slope, hi.alpha, hi.f, hi.slope);
        let cur = probe(objective, x, p, alpha);
        if !cur.f.is_finite() || cur.f > f0 + config.c1 * alpha * slope0 || cur.f >= lo.f {
            hi = cur;
            if !hi.f.is_finite() {
                hi.f = f64::MAX;
                hi.slope = 0.0;
            }
        } else {
            if cur.slope.abs() <= -config.c2 * slope0 {
                return Some(cur);
            }
            if cur.slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
    }
    // No strong-Wolfe point found; accept the best sufficient-decrease point
    // if it is strictly better than the start.
    if lo.alpha > 0.0 && lo.f < f0 {
        Some(lo)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64], g: &mut [f64]) -> f64 {
        let (a, b) = (x[0], x[1]);
        g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
        g[1] = 200.0 * (b - a * a);
        (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
    }

    #[test]
    fn solves_rosenbrock() {
        let out = minimize(rosenbrock, &[-1.2, 1.0], &BfgsConfig::default()).unwrap();
        assert!(out.converged, "{out:?}");
        assert!((out.x[0] - 1.0).abs() < 1e-5 && (out.x[1] - 1.0).abs() < 1e-5);
        for w in out.trace.windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn quadratic_converges_quickly() {
        let q = |x: &[f64], g: &mut [f64]| {
            g[0] = 2.0 * (x[0] - 3.0);
            g[1] = 8.0 * (x[1] + 1.0);
            (x[0] - 3.0).powi(2) + 4.0 * (x[1] + 1.0).powi(2)
        };
        let out = minimize(q, &[0.0, 0.0], &BfgsConfig::default()).unwrap();
        assert!(out.converged);
        assert!(out.iters < 10);
    }

    #[test]
    fn already_stationary_takes_no_steps() {
        let q = |x: &[f64], g: &mut [f64]| {
            g[0] = 2.0 * x[0];
            x[0] * x[0]
        };
        let out = minimize(q, &[0.0], &BfgsConfig::default()).unwrap();
        assert!(out.converged);
        assert_eq!(out.iters, 0);
    }

    #[test]
    fn rejects_bad_wolfe_constants() {
        let cfg = BfgsConfig {
            c1: 0.9,
            c2: 0.1,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn wolfe_steps_keep_curvature_positive() {
        // strong Wolfe implies yᵀs > 0; skips only happen once steps are tiny
        let cfg = BfgsConfig {
            grad_tol: 1e-4,
            ..Default::default()
        };
        let out = minimize(rosenbrock, &[-1.2, 1.0], &cfg).unwrap();
        assert!(out.converged);
        assert!(out.trace.len() > 2);
        assert_eq!(out.skipped_updates, 0);
    }

    #[test]
    fn non_finite_start_is_an_error() {
        let bad = |_: &[f64], _: &mut [f64]| f64::NAN;
        assert!(minimize(bad, &[0.0], &BfgsConfig::default()).is_err());
    }
}
