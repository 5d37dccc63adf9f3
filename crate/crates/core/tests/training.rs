use std::path::{Path, PathBuf};
use std::sync::Mutex;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use racnet::augment::AugmentationSpec;
use racnet::losses::seg_loss;
use racnet::pointcloud::{load_cloud, CloudFormat, DenseLabels, PointCloud, SparseLabels};
use racnet::segmodel::{backward, forward, ModelParams, TrainState, Weights};
use racnet::synthdata::{make_dataset, ClickScheme, Manifest, SceneConfig};
use racnet::trainer::{
    load_dataset, parse_metrics_csv, run_training, train_step, Dataset, MetricsRecord, Session, StepOutput,
    TrainConfig, TrainScene,
};

fn tiny_scenes() -> SceneConfig {
    SceneConfig {
        n_points: 192,
        objects_min: 2,
        objects_max: 3,
        seed: 5,
        ..SceneConfig::default()
    }
}

fn tiny_config() -> TrainConfig {
    TrainConfig {
        epochs: 3,
        eval_every: 1,
        hidden: 8,
        k_neighbors: 4,
        tau: 0.2,
        deterministic: true,
        ..TrainConfig::default()
    }
}

fn dataset(dir: &Path, n_train: usize) -> (PathBuf, Dataset) {
    let (manifest, _) = make_dataset(&tiny_scenes(), n_train, 1, &ClickScheme::otoc(3), dir).unwrap();
    let data = load_dataset(&manifest, tiny_config().k_neighbors).unwrap();
    (manifest, data)
}

fn run_session(
    config: &TrainConfig,
    data: &Dataset,
    mut each_step: impl FnMut(&StepOutput, &TrainState) + Send,
) -> (Vec<MetricsRecord>, ModelParams) {
    let mut session = Session::new(config.clone(), AugmentationSpec::default(), data).unwrap();
    let mut records = Vec::new();
    session
        .run(
            &mut |r| {
                records.push(r.clone());
                Ok(())
            },
            &mut |out, state| {
                each_step(out, state);
                Ok(())
            },
        )
        .unwrap();
    (records, session.state.params)
}

#[test]
fn deterministic_runs_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (_, data) = dataset(dir.path(), 3);
    let (a, pa) = run_session(&tiny_config(), &data, |_, _| {});
    let (b, pb) = run_session(&tiny_config(), &data, |_, _| {});
    assert_eq!(a, b);
    assert_eq!(pa.weights, pb.weights);
    assert!(a.iter().any(|r| r.reliable_count.unwrap_or(0) > 0));
}

#[test]
fn prefetching_run_matches_deterministic_run() {
    let dir = tempfile::tempdir().unwrap();
    let (_, data) = dataset(dir.path(), 3);
    let (a, pa) = run_session(&tiny_config(), &data, |_, _| {});
    let threaded = TrainConfig {
        deterministic: false,
        ..tiny_config()
    };
    let (b, pb) = run_session(&threaded, &data, |_, _| {});
    let strip = |v: Vec<MetricsRecord>| -> Vec<MetricsRecord> {
        v.into_iter().map(|r| MetricsRecord { secs: 0.0, ..r }).collect()
    };
    assert_eq!(strip(a), strip(b));
    assert_eq!(pa.weights, pb.weights);
}

#[test]
fn reliable_count_matches_recount() {
    let dir = tempfile::tempdir().unwrap();
    let (_, data) = dataset(dir.path(), 3);
    let mut checked = 0;
    run_session(&tiny_config(), &data, |out, _| {
        let recount: usize = out.scenes.iter().map(|s| s.partition.mask.iter().filter(|&&m| m).count()).sum();
        let points: usize = out.scenes.iter().map(|s| s.partition.mask.len()).sum();
        assert_eq!(out.record.reliable_count, Some(recount));
        assert_eq!(out.record.reliable_frac, Some(recount as f64 / points as f64));
        checked += 1;
    });
    assert_eq!(checked, 6);
}

/// Supervised-only training written out directly: forward the original
/// cloud, cross-entropy on the clicks, mean gradient over the batch,
/// classical momentum.
fn seg_only_reference(config: &TrainConfig, data: &Dataset, schedule: &[(u64, Vec<usize>)]) -> Vec<Weights> {
    let mut params = ModelParams::init(data.model_config(config), config.seed).unwrap();
    let mut buffers = Weights::zeros(&params.config);
    let mut trajectory = Vec::new();
    for (_, batch) in schedule {
        let mut sum = Weights::zeros(&params.config);
        for &i in batch {
            let scene = &data.train[i];
            let (logits, tape) = forward(&params, &scene.input(&scene.cloud), &scene.neighbors).unwrap();
            let (_, g) = seg_loss(&logits, &scene.clicks).unwrap();
            sum.add(&backward(&params, &tape, &g).unwrap());
        }
        sum.scale(1.0 / batch.len() as f64);
        let weights = params.weights_mut();
        for ((w, b), g) in weights.tensors_mut().into_iter().zip(buffers.tensors_mut()).zip(sum.tensors()) {
            for ((wv, bv), gv) in w.iter_mut().zip(b.iter_mut()).zip(g) {
                *bv = config.momentum * *bv + gv;
                *wv -= config.lr * *bv;
            }
        }
        trajectory.push(params.weights.clone());
    }
    trajectory
}

#[test]
fn zero_lambdas_reproduce_supervised_training_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let (_, data) = dataset(dir.path(), 4);
    let config = TrainConfig {
        lambda1: 0.0,
        lambda2: 0.0,
        lambda3: 0.0,
        ..tiny_config()
    };
    let schedule = Session::new(config.clone(), AugmentationSpec::default(), &data).unwrap().schedule();
    let reference = seg_only_reference(&config, &data, &schedule);
    let trajectory = Mutex::new(Vec::new());
    run_session(&config, &data, |_, state| trajectory.lock().unwrap().push(state.params.weights.clone()));
    let trajectory = trajectory.into_inner().unwrap();
    assert_eq!(trajectory.len(), reference.len());
    for (step, (a, b)) in trajectory.iter().zip(&reference).enumerate() {
        assert!(a == b, "trajectories diverge at step {step}");
    }
}

#[test]
fn unlimited_kappa_selects_by_confidence_alone() {
    let dir = tempfile::tempdir().unwrap();
    let (_, data) = dataset(dir.path(), 3);
    let config = TrainConfig {
        kappa: f64::INFINITY,
        lambda2: 0.0,
        lambda3: 0.0,
        ..tiny_config()
    };
    let mut reliable = 0;
    let mut ambiguous = 0;
    run_session(&config, &data, |out, _| {
        for s in &out.scenes {
            let confident: Vec<bool> = s
                .mean
                .rows()
                .into_iter()
                .map(|r| r.iter().any(|&v| v >= config.tau))
                .collect();
            assert_eq!(s.partition.mask, confident);
            reliable += confident.iter().filter(|&&c| c).count();
            ambiguous += confident.iter().filter(|&&c| !c).count();
        }
    });
    assert!(reliable > 0 && ambiguous > 0, "{reliable} reliable, {ambiguous} ambiguous");
}

#[test]
fn a_step_moves_parameters_exactly_when_some_gradient_is_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let (_, data) = dataset(dir.path(), 2);
    let config = tiny_config();
    let params = ModelParams::init(data.model_config(&config), 1).unwrap();
    let mut state = TrainState::new(params.clone(), config.lr, config.momentum).unwrap();
    let batch: Vec<&TrainScene> = data.train.iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let out = train_step(&mut state, &batch, &config, &AugmentationSpec::default(), &mut rng).unwrap();
    assert!(!out.grads.is_zero());
    assert_ne!(state.params.weights, params.weights);

    // No clicks and an empty reliable set (τ unreachable): no gradient at all.
    let silent: Vec<TrainScene> = data
        .train
        .iter()
        .map(|s| TrainScene::new(s.id, s.cloud.clone(), s.truth.clone(), SparseLabels::empty(), 4).unwrap())
        .collect();
    let batch: Vec<&TrainScene> = silent.iter().collect();
    let zero_params = ModelParams::zeros(data.model_config(&config)).unwrap();
    let mut state = TrainState::new(zero_params.clone(), config.lr, config.momentum).unwrap();
    let out = train_step(&mut state, &batch, &TrainConfig { tau: 0.99, ..config }, &AugmentationSpec::default(), &mut rng).unwrap();
    assert!(out.grads.is_zero());
    assert_eq!(state.params.weights, zero_params.weights);
}

#[test]
fn converges_on_a_separable_scene_with_full_labels() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 64;
    let loc = Array2::from_shape_fn((n, 3), |_| rng.random_range(-1.0..1.0));
    let classes: Vec<usize> = (0..n).map(|i| if loc[[i, 0]] + 0.5 * loc[[i, 1]] > 0.0 { 1 } else { 0 }).collect();
    let feat = Array2::from_shape_fn((n, 1), |(i, _)| classes[i] as f64);
    let cloud = PointCloud::new(loc, feat).unwrap();
    let clicks = SparseLabels::new(classes.iter().copied().enumerate().collect(), n, 2).unwrap();
    let truth = DenseLabels::new(classes.clone(), vec![0; n]).unwrap();
    let config = TrainConfig {
        hidden: 16,
        k_neighbors: 4,
        lambda1: 0.0,
        lambda2: 0.0,
        lambda3: 0.0,
        ..TrainConfig::default()
    };
    let scene = TrainScene::new(0, cloud, Some(truth), clicks, config.k_neighbors).unwrap();
    let cfg = racnet::segmodel::ModelConfig { in_dim: 4, hidden: 16, n_classes: 2, k: 4 };
    let mut state = TrainState::new(ModelParams::init(cfg, 0).unwrap(), config.lr, config.momentum).unwrap();
    let spec = AugmentationSpec::default();
    let mut last = f64::INFINITY;
    for _ in 0..500 {
        let out = train_step(&mut state, &[&scene], &config, &spec, &mut rng).unwrap();
        last = out.record.seg.unwrap();
        if last < 0.1 {
            break;
        }
    }
    assert!(last < 0.1, "seg loss still {last} after 500 steps");
}

#[test]
fn dataset_files_are_reproducible_and_fraction_recounts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (ma, manifest) = make_dataset(&tiny_scenes(), 3, 2, &ClickScheme::otoc(3), a.path()).unwrap();
    let (mb, _) = make_dataset(&tiny_scenes(), 3, 2, &ClickScheme::otoc(3), b.path()).unwrap();
    assert_eq!(std::fs::read(&ma).unwrap(), std::fs::read(&mb).unwrap());
    assert_eq!(manifest.entries.len(), 5);
    let mut labeled = 0;
    let mut points = 0;
    for e in &manifest.entries {
        let fa = std::fs::read(a.path().join(&e.cloud_path)).unwrap();
        assert_eq!(fa, std::fs::read(b.path().join(&e.cloud_path)).unwrap());
        if e.split == racnet::synthdata::Split::Train {
            let (cloud, _) = load_cloud(&a.path().join(&e.cloud_path), CloudFormat::Binary).unwrap();
            let clicks = std::fs::read_to_string(a.path().join(&e.clicks_path)).unwrap();
            labeled += clicks.lines().filter(|l| !l.trim().is_empty()).count();
            points += cloud.n_points();
        }
    }
    let reparsed = Manifest::load(&ma).unwrap();
    assert_eq!(reparsed.label_fraction(), labeled as f64 / points as f64);
}

#[test]
fn run_training_writes_one_row_per_step_and_eval() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, _) = dataset(&dir.path().join("data"), 2);
    let config = TrainConfig {
        epochs: 1,
        ..tiny_config()
    };
    let out = run_training(&config, &AugmentationSpec::default(), &manifest, &dir.path().join("run")).unwrap();
    let rows = parse_metrics_csv(&std::fs::read_to_string(&out.metrics_path).unwrap()).unwrap();
    // 2 scenes at batch size 2: one step, then one evaluation.
    assert_eq!(rows.len(), 2);
    assert_eq!(rows, out.history);
    assert!(rows[1].miou.is_some() && rows[0].miou.is_none());
    assert!(out.checkpoint_path.exists());
    let steps: Vec<u64> = rows.iter().filter(|r| !r.is_eval()).map(|r| r.step).collect();
    assert!(steps.windows(2).all(|w| w[0] < w[1]));
}
