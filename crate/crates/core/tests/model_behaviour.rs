use curveclust::bench::suite_dataset;
use curveclust::dataio::presets::rabbit;
use curveclust::fit::init_curve_guess;
use curveclust::plot::density_grid;
use curveclust::{
    assign, cross_entropy, fd_gradient, fit_component, grad_loglik, log_density_exact, mcec_run, CurveGaussianModel,
    Dataset, FitConfig, FourierCurve, InitMethod, McecConfig, MultiIndex,
};

fn bbox_of(curve: &FourierCurve, pad: f64) -> [f64; 4] {
    let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
    for i in 0..2000 {
        let p = curve.eval(&[i as f64 / 2000.0]);
        b = [b[0].min(p[0]), b[1].min(p[1]), b[2].max(p[0]), b[3].max(p[1])];
    }
    [b[0] - pad, b[1] - pad, b[2] + pad, b[3] + pad]
}

#[test]
fn planar_models_integrate_to_one() {
    for (curve, sigma) in [
        (FourierCurve::circle([0.0, 0.0], 1.0), 0.1),
        (FourierCurve::ellipse([1.0, -1.0], 2.0, 1.0), 0.05),
        (rabbit(), 0.1),
    ] {
        let model = CurveGaussianModel::new(curve.clone(), sigma, 16).unwrap();
        let grid = density_grid(|x| model.log_density(x), bbox_of(&curve, 6.0 * sigma), 400, 400).unwrap();
        let total = grid.integral();
        assert!((0.99..=1.01).contains(&total), "σ={sigma}: {total}");
    }
}

#[test]
fn unit_circle_chain_is_close_to_exact() {
    let curve = FourierCurve::circle([0.0, 0.0], 1.0);
    let model = CurveGaussianModel::new(curve.clone(), 0.1, 64).unwrap();
    let points = model.sample(20, 3);
    for x in points.iter() {
        let exact = log_density_exact(&curve, 0.1, x, 4096).unwrap();
        assert!((model.log_density(x) - exact).abs() < 1e-2);
    }
}

#[test]
fn center_of_ellipse_is_far_less_likely_than_the_curve() {
    let curve = FourierCurve::ellipse([0.5, 0.5], 2.0, 1.0);
    let on = log_density_exact(&curve, 0.05, &curve.eval(&[0.1]), 2048).unwrap();
    let center = log_density_exact(&curve, 0.05, &[0.5, 0.5], 2048).unwrap();
    assert!(center < on - 50.0);
}

#[test]
fn phase_shift_invariance() {
    let curve = rabbit();
    let shifted = curve.phase_shifted(&[0.3]);
    let x = [0.7, -0.4];
    let a = CurveGaussianModel::new(curve.clone(), 0.2, 1).unwrap().log_density(&x);
    let b = CurveGaussianModel::new(shifted.clone(), 0.2, 1).unwrap().log_density(&x);
    assert!((a - b).abs() < 1e-12);
    let a = log_density_exact(&curve, 0.2, &x, 4096).unwrap();
    let b = log_density_exact(&shifted, 0.2, &x, 4096).unwrap();
    assert!((a - b).abs() < 1e-10);
}

#[test]
fn gradient_is_stable_across_step_sizes() {
    let model = CurveGaussianModel::new(FourierCurve::ellipse([0.0, 0.0], 1.5, 1.0), 0.2, 16).unwrap();
    let points = CurveGaussianModel::new(FourierCurve::ellipse([0.1, 0.0], 1.4, 1.1), 0.15, 16)
        .unwrap()
        .sample(60, 9);
    let coarse = fd_gradient(&model, &points, 1e-5).unwrap().to_vec();
    let fine = fd_gradient(&model, &points, 1e-6).unwrap().to_vec();
    let analytic = grad_loglik(&model, &points).unwrap().to_vec();
    for ((c, f), a) in coarse.iter().zip(&fine).zip(&analytic) {
        if c.abs().max(f.abs()) > 1e-3 {
            assert!((c - f).abs() / c.abs().max(f.abs()) < 1e-4, "{c} vs {f}");
        }
        assert!((a - c).abs() <= 1e-5 * a.abs().max(c.abs()) + 1e-8);
    }
}

#[test]
fn sigma_gradient_is_negative_when_sigma_is_too_large() {
    let curve = FourierCurve::circle([0.0, 0.0], 1.0);
    let points = CurveGaussianModel::new(curve.clone(), 0.02, 16).unwrap().sample(200, 4);
    let model = CurveGaussianModel::new(curve, 0.5, 16).unwrap();
    assert!(grad_loglik(&model, &points).unwrap().d_sigma < 0.0);
}

fn perturbed_circle_fit() -> (Dataset, curveclust::FitResult) {
    let truth = CurveGaussianModel::new(FourierCurve::circle([0.0, 0.0], 1.0), 0.05, 16).unwrap();
    let points = truth.sample(500, 11);
    let init = CurveGaussianModel::new(FourierCurve::circle([0.0, 0.0], 1.2), 0.1, 16).unwrap();
    let fit = fit_component(&points, &init, &FitConfig::default()).unwrap();
    (points, fit)
}

#[test]
fn fit_recovers_circle() {
    let (points, fit) = perturbed_circle_fit();
    assert!((0.04..=0.06).contains(&fit.model.sigma()), "σ = {}", fit.model.sigma());
    let worst = (0..400)
        .map(|i| {
            let p = fit.model.curve().eval(&[i as f64 / 400.0]);
            ((p[0] * p[0] + p[1] * p[1]).sqrt() - 1.0).abs()
        })
        .fold(0.0, f64::max);
    assert!(worst < 0.05, "max distance {worst}");
    assert!((fit.final_cross_entropy - cross_entropy(&fit.model, &points).unwrap()).abs() < 1e-12);
    // stationary: gradient of the mean log-likelihood is below the tolerance
    let g = grad_loglik(&fit.model, &points).unwrap();
    let n = points.len() as f64;
    let per_point = g
        .d_coeffs
        .iter()
        .map(|v| v / n)
        .chain(std::iter::once(g.d_sigma * fit.model.sigma() / n))
        .fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(fit.converged && per_point < FitConfig::default().grad_tol, "{per_point}");
}

#[test]
fn fit_trace_decreases_and_is_deterministic() {
    let (_, a) = perturbed_circle_fit();
    let (_, b) = perturbed_circle_fit();
    assert!(a.trace.windows(2).all(|w| w[1] < w[0]));
    assert!(a.final_cross_entropy <= a.trace[0] + 1e-12);
    assert_eq!(a.final_cross_entropy.to_bits(), b.final_cross_entropy.to_bits());
    assert_eq!(a.model.sigma().to_bits(), b.model.sigma().to_bits());
    assert_eq!(a.iters, b.iters);
}

#[test]
fn stationary_start_needs_few_iterations() {
    let data = CurveGaussianModel::new(FourierCurve::constant(&[1.0, 2.0], 1, 1), 0.3, 1)
        .unwrap()
        .sample(4000, 5);
    let mean = data.mean();
    let var: f64 = data
        .iter()
        .map(|p| (p[0] - mean[0]).powi(2) + (p[1] - mean[1]).powi(2))
        .sum::<f64>()
        / (2.0 * data.len() as f64);
    let init = CurveGaussianModel::new(FourierCurve::constant(&mean, 1, 1), var.sqrt(), 1).unwrap();
    let config = FitConfig {
        grad_tol: 1e-6,
        ..FitConfig::default()
    };
    let fit = fit_component(&data, &init, &config).unwrap();
    assert!(fit.converged && fit.iters <= 2, "{} iterations", fit.iters);
}

#[test]
fn sample_then_fit_recovers_sigma() {
    let truth = CurveGaussianModel::new(rabbit(), 0.08, 16).unwrap();
    let points = truth.sample(2000, 21);
    let init = truth.reparametrized(rabbit().translated(&[0.05, -0.05]), 0.15).unwrap();
    let fit = fit_component(&points, &init, &FitConfig::default()).unwrap();
    let rel = (fit.model.sigma() - 0.08).abs() / 0.08;
    assert!(rel < 0.15, "σ = {}", fit.model.sigma());
}

#[test]
fn initial_guess_is_valid_for_every_order() {
    let points = suite_dataset(1, 0).unwrap();
    for order in 1..=4 {
        let guess = init_curve_guess(&points, order, 16).unwrap();
        assert_eq!(guess.curve().order(), order);
        for l in 2..=order as i32 {
            assert_eq!(guess.curve().coeff(0, &MultiIndex::new(vec![l])), 0.0);
        }
    }
}

#[test]
fn mcec_reduces_nine_clusters() {
    // a random partition spreads every initial cluster over both curves;
    // from a k-means start each arc can instead settle as its own cluster
    for seed in 0..4 {
        let data = suite_dataset(1, seed).unwrap();
        let out = mcec_run(
            &data,
            &McecConfig {
                k: 9,
                seed,
                init: InitMethod::Random,
                ..McecConfig::default()
            },
        )
        .unwrap();
        assert!(out.state.active_count() < 9, "seed {seed}");
        // deactivated clusters stay inactive
        assert!(out.trace.active_counts.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn mcec_final_state_is_consistent() {
    let data = suite_dataset(2, 5).unwrap();
    let out = mcec_run(
        &data,
        &McecConfig {
            k: 3,
            order: 2,
            seed: 5,
            ..McecConfig::default()
        },
    )
    .unwrap();
    let state = &out.state;
    let counts = state.counts();
    let mut total = 0.0;
    for (i, c) in state.components.iter().enumerate() {
        if c.active {
            assert_eq!(c.weight, counts[i] as f64 / data.len() as f64);
            total += c.weight;
        } else {
            assert_eq!(counts[i], 0);
        }
    }
    assert!((total - 1.0).abs() < 1e-12);
    // one more assignment pass moves at most a handful of points
    let mut again = state.clone();
    assign(&mut again, &data).unwrap();
    let moved = again.assignment.iter().zip(&state.assignment).filter(|(a, b)| a != b).count();
    let h = again.compute_energy(&data);
    assert!(h <= state.energy + out.trace.eps, "moved {moved}, energy {h} vs {}", state.energy);
}
