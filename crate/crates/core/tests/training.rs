//! Training-loop contracts: frozen extractor, learning-rate schedule,
//! convergence sanity, determinism and window independence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wpnav_core::envelope::Sample;
use wpnav_core::model::{
    adam_step, loss, train, AdamConfig, AdamState, FeatureExtractor, ModelSpec, TrainConfig,
};
use wpnav_core::{
    build_dataset, generate_world, sequence_windows, CameraSpec, Dataset, EnvelopeConfig, Point2,
    RegressorKind, SimConfig, WaypointPath, WorldParams,
};

fn straight(len: f64) -> WaypointPath {
    WaypointPath::new("straight", vec![Point2::new(0.0, -len / 2.0), Point2::new(0.0, len / 2.0)]).unwrap()
}

fn small_camera() -> CameraSpec {
    CameraSpec { width: 32, height: 18, ..CameraSpec::default() }
}

/// Clean straight-line flights; every label is zero.
fn zero_label_dataset(aux: usize) -> Dataset {
    let world = generate_world(3, &WorldParams { block_count: 60, area_extent: 40.0, ..Default::default() }).unwrap();
    let env = EnvelopeConfig { auxiliary_path_count: aux, position_noise: 0.0, yaw_noise: 0.0, ..Default::default() };
    build_dataset(&straight(20.0), &world, &env, &small_camera(), &SimConfig::default()).unwrap()
}

/// `n` copies of a single frame, all labelled `label`.
fn constant_dataset(n: usize, label: f64) -> Dataset {
    let mut ds = zero_label_dataset(1);
    let frame = ds.frame(0).to_vec();
    ds.samples = (0..n).map(|i| Sample { frame_ref: 0, label, path_ordinal: 0, step_ordinal: i }).collect();
    ds.frames = frame;
    ds.manifest.sample_count = n;
    ds.validate().unwrap();
    ds
}

#[test]
fn learning_rate_halves_every_25_epochs() {
    let cfg = TrainConfig::default();
    for e in [0usize, 24, 25, 49, 50, 75, 99] {
        let expected = 1e-4 * 0.5f64.powi((e / 25) as i32);
        assert_eq!(cfg.learning_rate_at(e), expected, "epoch {e}");
    }
}

#[test]
fn extractor_is_frozen_across_training() {
    let ds = zero_label_dataset(2);
    let spec = ModelSpec::default();
    let fresh = FeatureExtractor::new(&spec.extractor, 32, 18).unwrap().digest();
    for kind in RegressorKind::standard() {
        let out = train(&ds, &spec.with_kind(kind), &TrainConfig::default()).unwrap();
        assert_eq!(out.model.extractor.digest(), fresh, "{kind}");
        assert_eq!(out.loss_curve.len(), 100);
    }
}

#[test]
fn constant_label_is_learned() {
    let c = 0.25;
    let ds = constant_dataset(2560, c);
    let out = train(&ds, &ModelSpec::default(), &TrainConfig::default()).unwrap();
    let p = out.model.forward(&[ds.frame(0)]).unwrap();
    assert!((p - c).abs() < 1e-2, "prediction {p}");
}

#[test]
fn training_is_deterministic() {
    let ds = zero_label_dataset(2);
    let cfg = TrainConfig { epochs: 10, ..TrainConfig::default() };
    for kind in [RegressorKind::Fcnn, RegressorKind::Gru { timesteps: 2 }] {
        let spec = ModelSpec::default().with_kind(kind);
        let a = train(&ds, &spec, &cfg).unwrap();
        let b = train(&ds, &spec, &cfg).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.loss_curve, b.loss_curve);
    }
}

#[test]
fn zero_label_loss_curve_is_non_increasing() {
    let ds = zero_label_dataset(4);
    assert!(ds.samples.iter().all(|s| s.label.abs() <= 1e-9));
    let out = train(&ds, &ModelSpec::default(), &TrainConfig::default()).unwrap();
    let curve = &out.loss_curve;
    let violations = (6..curve.len()).filter(|&e| curve[e] > curve[e - 1]).count();
    assert!(violations <= 3, "{violations} increasing epochs: {curve:?}");
    assert!(curve[curve.len() - 1] < curve[0]);
}

#[test]
fn batch_loss_matches_scalar_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(64);
    let preds: Vec<f64> = (0..64).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let labels: Vec<f64> = (0..64).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let mut total = 0.0;
    let mut i = 0;
    while i < 64 {
        let e = labels[i] - preds[i];
        total = total + e * e;
        i += 1;
    }
    let report = loss(&preds, &labels).unwrap();
    assert_eq!(report.n, 64);
    assert!((report.mse - total / 64.0).abs() <= 1e-12);
    assert_eq!(loss(&[0.0], &[0.5]).unwrap().mse, 0.25);
    assert_eq!(loss(&labels, &labels).unwrap().mse, 0.0);
}

#[test]
fn adam_matches_scalar_reference_on_a_quadratic() {
    // f(x) = 3 (x - 2)^2
    let cfg = AdamConfig::default();
    let lr = 0.1;
    let mut params = [5.0];
    let mut state = AdamState::new(1);
    let (mut x, mut m, mut v) = (5.0f64, 0.0f64, 0.0f64);
    for t in 1..=10 {
        let g = 6.0 * (x - 2.0);
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        let mh = m / (1.0 - 0.9f64.powi(t));
        let vh = v / (1.0 - 0.999f64.powi(t));
        x -= lr * mh / (vh.sqrt() + 1e-8);

        let grad = [6.0 * (params[0] - 2.0)];
        adam_step(&mut params, &grad, &mut state, lr, &cfg);
        assert!((params[0] - x).abs() <= 1e-12, "step {t}: {} vs {x}", params[0]);
    }

    let mut p = [1.0, -1.0];
    let mut s = AdamState::new(2);
    adam_step(&mut p, &[0.5, -7.0], &mut s, 1e-4, &cfg);
    assert!((p[0] - (1.0 - 1e-4)).abs() < 1e-10);
    assert!((p[1] - (-1.0 + 1e-4)).abs() < 1e-10);
    for _ in 0..5 {
        let before = p;
        let mut z = AdamState::new(2);
        adam_step(&mut p, &[0.0, 0.0], &mut z, 1e-4, &cfg);
        assert_eq!(p, before);
    }
}

#[test]
fn gru_windows_ignore_their_surroundings() {
    let mut ds = zero_label_dataset(1);
    let out = train(&ds, &ModelSpec::default().with_kind(RegressorKind::Gru { timesteps: 4 }), &TrainConfig { epochs: 3, ..TrainConfig::default() }).unwrap();
    let model = out.model;
    let windows = sequence_windows(&ds, 4);
    let w = &windows[10];
    let frames = |ds: &Dataset| -> Vec<Vec<f32>> { w.frame_refs.iter().map(|&r| ds.frame(r).to_vec()).collect() };
    let before: Vec<Vec<f32>> = frames(&ds);
    let views: Vec<&[f32]> = before.iter().map(|f| f.as_slice()).collect();
    let p = model.forward(&views).unwrap();

    // scramble every frame outside the window and run other windows first
    let n = ds.frame_len();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for r in 0..ds.frame_count() {
        if !w.frame_refs.contains(&r) {
            for v in &mut ds.frames[r * n..(r + 1) * n] {
                *v = rng.gen_range(0.0..1.0);
            }
        }
    }
    for other in windows.iter().take(5) {
        let fs: Vec<&[f32]> = other.frame_refs.iter().map(|&r| ds.frame(r)).collect();
        model.forward(&fs).unwrap();
    }
    let after = frames(&ds);
    let views: Vec<&[f32]> = after.iter().map(|f| f.as_slice()).collect();
    assert_eq!(model.forward(&views).unwrap(), p);
}
