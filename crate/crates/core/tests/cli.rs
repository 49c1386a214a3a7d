use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use curveclust::dataio::presets::rabbit;
use curveclust::dataio::save_model;
use curveclust::{read_csv, Component, CurveGaussianModel, FourierCurve, MixtureState};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_curveclust"))
        .args(args)
        .env_remove("CURVECLUST_THREADS")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn single_model(curve: FourierCurve, sigma: f64, path: &Path) {
    let state = MixtureState {
        components: vec![Component {
            model: CurveGaussianModel::new(curve, sigma, 16).unwrap(),
            weight: 1.0,
            active: true,
        }],
        assignment: Vec::new(),
        energy: f64::NAN,
    };
    save_model(&state, path).unwrap();
}

fn two_circle_data(dir: &Path) -> std::path::PathBuf {
    let data = dir.join("d.csv");
    ok(&["generate", "--preset", "two-circles", "--count", "600", "--seed", "1", "--out", p(&data)]);
    data
}

#[test]
fn generate_writes_requested_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let summary = ok(&["generate", "--preset", "rabbit", "--sigma", "0.05", "--count", "500", "--seed", "1", "--out", p(&out)]);
    let v: Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(v["points"], 500);
    assert_eq!(read_csv(&out).unwrap().len(), 500);

    let two = dir.path().join("t.csv");
    ok(&["generate", "--preset", "two-circles", "--count", "101", "--out", p(&two)]);
    let mut labels = read_csv(&two).unwrap().labels().unwrap().to_vec();
    labels.sort();
    labels.dedup();
    assert_eq!(labels, vec![0, 1]);
}

#[test]
fn generate_from_model_file_splits_by_weight() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    single_model(FourierCurve::circle([0.0, 0.0], 2.0), 0.01, &model);
    let out = dir.path().join("c.csv");
    ok(&["generate", "--curve-file", p(&model), "--count", "40", "--out", p(&out)]);
    let data = read_csv(&out).unwrap();
    assert_eq!(data.len(), 40);
    for x in data.iter() {
        assert!(((x[0] * x[0] + x[1] * x[1]).sqrt() - 2.0).abs() < 0.1);
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let unknown = run(&["generate", "--preset", "dragon", "--count", "5", "--out", p(&out)]);
    assert_eq!(unknown.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("unknown preset"));

    let both = run(&["generate", "--preset", "rabbit", "--curve-file", "m.json", "--count", "5", "--out", p(&out)]);
    assert_eq!(both.status.code(), Some(2));
    assert_eq!(run(&["cluster", "--k", "3"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));

    let missing = run(&["cluster", "--in", "/nonexistent.csv", "--out-model", "m", "--out-report", "r"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(missing.stdout.is_empty());
}

#[test]
fn thread_override_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let args = ["--threads", "3", "generate", "--preset", "circle", "--count", "5", "--out", p(&out)];
    let bad = Command::new(env!("CARGO_BIN_EXE_curveclust"))
        .args(args)
        .env("CURVECLUST_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
    let good = Command::new(env!("CARGO_BIN_EXE_curveclust"))
        .args(args)
        .env("CURVECLUST_THREADS", "1")
        .output()
        .unwrap();
    assert!(good.status.success());
}

#[test]
fn mcec_clusters_two_circles_and_beats_gmm() {
    let dir = tempfile::tempdir().unwrap();
    let data = two_circle_data(dir.path());
    let (model, report) = (dir.path().join("m.json"), dir.path().join("r.json"));
    let svg = dir.path().join("c.svg");
    ok(&[
        "cluster", "--in", p(&data), "--method", "mcec", "--k", "4", "--starts", "16", "--seed", "3",
        "--out-model", p(&model), "--out-report", p(&report), "--svg", p(&svg),
    ]);
    let r = json(&report);
    assert_eq!(r["best"]["rand"], 1.0);
    assert_eq!(r["best"]["jaccard"], 1.0);
    assert_eq!(r["config"]["k"], 4);
    assert_eq!(r["config"]["fit"]["grad_tol"], 1e-6);
    assert_eq!(r["selection"]["criterion"], "energy");
    let starts = r["starts"].as_array().unwrap();
    assert_eq!(starts.len(), 16);
    let best = r["best_start"].as_u64().unwrap() as usize;
    let min = starts.iter().map(|s| s["criterion"].as_f64().unwrap()).fold(f64::INFINITY, f64::min);
    assert_eq!(starts[best]["criterion"].as_f64().unwrap(), min);
    assert!(r.get("times").is_none());
    assert!(std::fs::read_to_string(&svg).unwrap().contains("class=\"curve\""));

    let (gm, gr) = (dir.path().join("g.json"), dir.path().join("gr.json"));
    ok(&["cluster", "--in", p(&data), "--method", "gmm", "--k", "4", "--starts", "4", "--out-model", p(&gm), "--out-report", p(&gr)]);
    let g = json(&gr);
    assert_eq!(g["selection"]["criterion"], "bic");
    assert!(g["best"]["score"]["mle"].as_f64().unwrap() < r["best"]["score"]["mle"].as_f64().unwrap());

    let scored: Value = serde_json::from_str(&ok(&["score", "--model", p(&model), "--in", p(&data)])).unwrap();
    assert_eq!(scored["rand"], 1.0);
    let mle = scored["score"]["mle"].as_f64().unwrap();
    assert!((mle - r["best"]["score"]["mle"].as_f64().unwrap()).abs() < 1e-6 * mle.abs());
}

#[test]
fn same_seed_gives_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let data = two_circle_data(dir.path());
    let mut reports = Vec::new();
    for i in 0..2 {
        let (m, r) = (dir.path().join(format!("m{i}.json")), dir.path().join(format!("r{i}.json")));
        ok(&["cluster", "--in", p(&data), "--starts", "1", "--seed", "7", "--out-model", p(&m), "--out-report", p(&r)]);
        reports.push((std::fs::read(&m).unwrap(), std::fs::read(&r).unwrap()));
    }
    assert_eq!(reports[0], reports[1]);

    let timed = dir.path().join("t.json");
    ok(&[
        "cluster", "--in", p(&data), "--starts", "2", "--record-times", "--out-model",
        p(&dir.path().join("mt.json")), "--out-report", p(&timed),
    ]);
    assert!(json(&timed)["times"]["total_seconds"].as_f64().unwrap() > 0.0);
}

#[test]
fn fit_command_writes_a_loadable_model() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("e.csv");
    ok(&["generate", "--preset", "ellipse", "--count", "300", "--seed", "2", "--out", p(&data)]);
    let model = dir.path().join("f.json");
    let out: Value = serde_json::from_str(&ok(&["fit", "--in", p(&data), "--order", "1", "--out-model", p(&model)])).unwrap();
    assert!(out["final_cross_entropy"].as_f64().unwrap() <= out["initial_cross_entropy"].as_f64().unwrap());
    let sigma = out["sigma"].as_f64().unwrap();
    assert!((0.04..0.06).contains(&sigma), "σ = {sigma}");
    curveclust::dataio::load_model(&model).unwrap();
}

fn distance_to_curve(curve: &FourierCurve, x: [f64; 2]) -> f64 {
    (0..4000)
        .map(|i| {
            let c = curve.eval(&[i as f64 / 4000.0]);
            ((c[0] - x[0]).powi(2) + (c[1] - x[1]).powi(2)).sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn rabbit_density_svg_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("rabbit.json");
    single_model(rabbit(), 0.05, &model);

    let svg = dir.path().join("r.svg");
    let summary: Value = serde_json::from_str(&ok(&["density", "--model", p(&model), "--grid", "200x200", "--out", p(&svg)])).unwrap();
    let bbox: Vec<f64> = summary["bbox"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let cell = ((bbox[2] - bbox[0]) / 200.0).max((bbox[3] - bbox[1]) / 200.0);
    let argmax = summary["argmax"].as_array().unwrap();
    let at = [argmax[0].as_f64().unwrap(), argmax[1].as_f64().unwrap()];
    assert!(distance_to_curve(&rabbit(), at) < 2.0 * cell);
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg") && text.contains("class=\"band\"") && text.contains("class=\"level\""));

    let csv = dir.path().join("r.csv");
    ok(&["density", "--model", p(&model), "--grid", "300x300", "--out", p(&csv)]);
    let rows: Vec<Vec<f64>> = std::fs::read_to_string(&csv)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 90_000);
    let dx = rows[1][0] - rows[0][0];
    let dy = rows[300][1] - rows[0][1];
    let total: f64 = rows.iter().map(|r| r[2].exp()).sum::<f64>() * dx * dy;
    assert!((total - 1.0).abs() < 0.01, "{total}");
}

#[test]
fn constant_curve_density_is_radial() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("c.json");
    single_model(FourierCurve::constant(&[0.0, 0.0], 1, 1), 0.5, &model);
    let csv = dir.path().join("c.csv");
    ok(&["density", "--model", p(&model), "--grid", "41x41", "--bbox", "-2,-2,2,2", "--out", p(&csv)]);
    let rows: Vec<Vec<f64>> = std::fs::read_to_string(&csv)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    for r in &rows {
        let r2 = r[0] * r[0] + r[1] * r[1];
        let expected = -(2.0 * std::f64::consts::PI * 0.25).ln() - r2 / 0.5;
        assert!((r[2] - expected).abs() < 1e-9);
    }
    let bad = run(&["density", "--model", p(&model), "--bbox", "1,1,1,2", "--out", p(&csv)]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn bench_is_deterministic_and_mcec_wins() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&["bench", "--suite", "order1", "--seed", "2", "--starts", "4", "--out-dir", p(out)]);
    }
    for f in ["order1.json", "order1.csv", "tables.txt"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let r = json(&a.join("order1.json"));
    let rows = r["rows"].as_array().unwrap();
    let mle = |m: &str| rows.iter().find(|row| row["method"] == m).unwrap()["score"]["mle"].as_f64().unwrap();
    assert!(mle("mcec") > mle("cec") && mle("mcec") > mle("gmm"));
    assert_eq!(rows[0]["rand"], 1.0);
}
