use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use curveclust::dataio::{
    generate, load_any_model, load_model, model_from_json, model_to_json, preset, save_gaussian_mixture, save_model,
    CurveSpec, ModelFile,
};
use curveclust::gaussian::Gaussian;
use curveclust::{
    jaccard_index, rand_index, read_csv, write_csv, Component, CurveGaussianModel, Dataset, Error, FourierCurve,
    GaussianMixture, MixtureState, ModelScore,
};

fn two_cluster_state() -> MixtureState<CurveGaussianModel> {
    let a = CurveGaussianModel::new(curveclust::dataio::presets::rabbit(), 0.05, 16).unwrap();
    let b = CurveGaussianModel::new(FourierCurve::ellipse([4.0, 1.0], 1.0, 0.5), 0.1, 16).unwrap();
    MixtureState {
        components: vec![
            Component { model: a, weight: 0.7, active: true },
            Component { model: b.clone(), weight: 0.3, active: true },
            Component { model: b, weight: 0.0, active: false },
        ],
        assignment: Vec::new(),
        energy: 1.25,
    }
}

#[test]
fn csv_roundtrip_is_exact() {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let coords: Vec<f64> = (0..200).map(|_| rng.random_range(-1e3..1e3) * rng.random::<f64>().powi(7)).collect();
    let labels: Vec<usize> = (0..100).map(|_| rng.random_range(0..4)).collect();
    let data = Dataset::new(2, coords, Some(labels)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    write_csv(&data, &path).unwrap();
    let back = read_csv(&path).unwrap();
    assert_eq!(back.coords(), data.coords());
    assert_eq!(back.labels(), data.labels());
}

#[test]
fn csv_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "x1,x2\n1,2\n3,oops\n").unwrap();
    match read_csv(&path) {
        Err(Error::Csv { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    std::fs::write(&path, "x1,x2\n1,NaN\n").unwrap();
    assert!(read_csv(&path).is_err());
}

#[test]
fn model_roundtrip_preserves_density() {
    let state = two_cluster_state();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    save_model(&state, &path).unwrap();
    let back = load_model(&path).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    for _ in 0..50 {
        let x = [rng.random_range(-2.0..6.0), rng.random_range(-2.0..3.0)];
        let (a, b) = (state.log_density(&x), back.log_density(&x));
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
    assert_eq!(back.energy, 1.25);
    assert!(!back.components[2].active);
}

#[test]
fn gaussian_mixture_roundtrip() {
    let mix = GaussianMixture::new(
        vec![0.25, 0.75],
        vec![
            Gaussian::new(DVector::from_vec(vec![0.0, 1.0]), DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 2.0])).unwrap(),
            Gaussian::new(DVector::from_vec(vec![3.0, -1.0]), DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5])).unwrap(),
        ],
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.json");
    save_gaussian_mixture(&mix, &path).unwrap();
    let ModelFile::Gaussians(back) = load_any_model(&path).unwrap() else {
        panic!("wrong kind");
    };
    for x in [[0.0, 0.0], [2.0, -0.5], [10.0, 10.0]] {
        assert!((mix.log_density(&x) - back.log_density(&x)).abs() < 1e-12);
    }
}

fn edit_json(f: impl FnOnce(&mut serde_json::Value)) -> String {
    let mut v: serde_json::Value = serde_json::from_str(&model_to_json(&two_cluster_state()).unwrap()).unwrap();
    f(&mut v);
    v.to_string()
}

#[test]
fn negative_sigma_is_rejected() {
    let text = edit_json(|v| v["clusters"][0]["sigma"] = (-1.0).into());
    let err = model_from_json(&text).unwrap_err().to_string();
    assert!(err.contains("sigma"), "{err}");
}

#[test]
fn missing_weight_names_the_field() {
    let text = edit_json(|v| {
        v["clusters"][1].as_object_mut().unwrap().remove("weight");
    });
    let err = model_from_json(&text).unwrap_err().to_string();
    assert!(err.contains("clusters[1]") && err.contains("weight"), "{err}");
}

#[test]
fn schema_violations_are_rejected() {
    let cases = [
        edit_json(|v| v["schema_version"] = 99.into()),
        edit_json(|v| v["trig_convention"] = "cos-first".into()),
        edit_json(|v| v["clusters"][0]["weight"] = 0.9.into()),
        edit_json(|v| v["clusters"][2]["weight"] = 0.1.into()),
        edit_json(|v| {
            v["clusters"][0]["coeffs"].as_array_mut().unwrap().pop();
        }),
        edit_json(|v| v["clusters"][0]["extra"] = 1.into()),
    ];
    for text in cases {
        assert!(model_from_json(&text).is_err());
    }
}

#[test]
fn generation_is_deterministic_and_stream_split() {
    let p = preset("two-ellipses").unwrap();
    let specs = p.specs(0.05, 400);
    let a = generate(&specs, 9).unwrap();
    let b = generate(&specs, 9).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_csv(&a, dir.path().join("a.csv")).unwrap();
    write_csv(&b, dir.path().join("b.csv")).unwrap();
    assert_eq!(
        std::fs::read(dir.path().join("a.csv")).unwrap(),
        std::fs::read(dir.path().join("b.csv")).unwrap()
    );
    // adding a curve leaves the earlier curves' samples unchanged
    let mut more = specs.clone();
    more.push(CurveSpec {
        curve: FourierCurve::circle([9.0, 9.0], 1.0),
        sigma: 0.1,
        count: 50,
    });
    let c = generate(&more, 9).unwrap();
    assert_eq!(&c.coords()[..a.coords().len()], a.coords());
    assert_eq!(a.labels().unwrap().iter().max(), Some(&1));
}

fn labelling() -> impl Strategy<Value = Vec<usize>> {
    (2usize..60).prop_flat_map(|n| prop::collection::vec(0usize..5, n))
}

proptest! {
    #[test]
    fn pair_indices_are_symmetric(a in labelling(), seed in any::<u64>()) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let b: Vec<usize> = a.iter().map(|_| rng.random_range(0..4)).collect();
        prop_assert_eq!(rand_index(&a, &b).unwrap(), rand_index(&b, &a).unwrap());
        prop_assert_eq!(jaccard_index(&a, &b).unwrap(), jaccard_index(&b, &a).unwrap());
        prop_assert_eq!(rand_index(&a, &a).unwrap(), 1.0);
        prop_assert_eq!(jaccard_index(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn pair_indices_ignore_label_names(a in labelling(), b in labelling(), shift in 1usize..100) {
        let n = a.len().min(b.len());
        let (a, b) = (&a[..n], &b[..n]);
        let renamed: Vec<usize> = b.iter().map(|l| (l * 7 + shift) % 1000).collect();
        prop_assert!((rand_index(a, b).unwrap() - rand_index(a, &renamed).unwrap()).abs() < 1e-15);
        prop_assert!((jaccard_index(a, b).unwrap() - jaccard_index(a, &renamed).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn information_criteria_identities(mle in -1e5f64..1e5, p in 1usize..200, n in 1usize..100_000) {
        let s = ModelScore::new(mle, p, n);
        prop_assert!((s.aic - (-2.0 * mle + 2.0 * p as f64)).abs() <= 1e-12 * s.aic.abs().max(1.0));
        prop_assert!((s.bic - (-2.0 * mle + p as f64 * (n as f64).ln())).abs() <= 1e-12 * s.bic.abs().max(1.0));
    }
}
