//! The training pipeline.
//!
//! Per scene and step: forward the original cloud, forward `K` augmented
//! views, split points into reliable and ambiguous sets, forward a mixed
//! view, compute the four losses, and backprop each branch. The batch
//! gradient is the mean over scenes; one momentum-SGD step follows.

mod metrics;
mod run;

pub use metrics::{
    parse_metrics_csv, pseudo_label_stats, ConfusionMatrix, EvalReport, MetricsRecord,
    MetricsWriter, PseudoLabelStats, CSV_HEADER,
};
pub use run::{load_dataset, run_training, Dataset, RunOutcome, Session, CHECKPOINT_FILE, METRICS_FILE};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::{gen_augmented_views, mix_augment, AugmentationSpec, MixSample};
use crate::losses::{AmbiguousLossKind, Lambdas, LossReport, LossSetup, ReliableLossKind};
use crate::pointcloud::{knn_indices, DenseLabels, PointCloud, SparseLabels};
use crate::reliability::{self, ReliabilityPartition};
use crate::segmodel::{backward, forward, predict, probabilities, ModelParams, Normalizer, TrainState, Weights};
use crate::{Error, Result};

const AUG_STREAM: u64 = 0xA06;
const SHUFFLE_STREAM: u64 = 0x5EF;
const PROBE_STREAM: u64 = 0x960B;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Scenes per optimizer step.
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub tau: f64,
    pub kappa: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub reliable_loss: ReliableLossKind,
    pub ambiguous_loss: AmbiguousLossKind,
    /// Evaluate every this many epochs; the last epoch is always evaluated.
    pub eval_every: usize,
    pub seed: u64,
    /// Single-threaded execution with wall time recorded as 0.
    pub deterministic: bool,
    pub hidden: usize,
    pub k_neighbors: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 2,
            lr: 0.01,
            momentum: 0.9,
            tau: reliability::DEFAULT_TAU,
            kappa: reliability::DEFAULT_KAPPA,
            lambda1: 1.0,
            lambda2: 1.0,
            lambda3: 1.0,
            reliable_loss: ReliableLossKind::Ce,
            ambiguous_loss: AmbiguousLossKind::Kl,
            eval_every: 1,
            seed: 0,
            deterministic: false,
            hidden: 64,
            k_neighbors: 16,
        }
    }
}

impl TrainConfig {
    pub fn lambdas(&self) -> Lambdas {
        Lambdas::new(self.lambda1, self.lambda2, self.lambda3)
    }

    pub fn losses(&self) -> LossSetup {
        LossSetup {
            reliable: self.reliable_loss,
            ambiguous: self.ambiguous_loss,
            lambdas: self.lambdas(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        reliability::validate_thresholds(self.tau, self.kappa)?;
        if self.batch_size == 0 || self.hidden == 0 || self.k_neighbors == 0 {
            return Err(Error::Config("batch_size, hidden and k_neighbors must be ≥ 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("need lr > 0 and momentum in [0, 1)".into()));
        }
        for (name, l) in [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda3", self.lambda3),
        ] {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and ≥ 0")));
            }
        }
        Ok(())
    }
}

/// A scene prepared for training or evaluation: standardization and the
/// neighbour graph are computed once on the original cloud.
#[derive(Debug, Clone)]
pub struct TrainScene {
    pub id: usize,
    pub cloud: PointCloud,
    pub truth: Option<DenseLabels>,
    pub clicks: SparseLabels,
    pub normalizer: Normalizer,
    pub neighbors: Array2<usize>,
}

impl TrainScene {
    pub fn new(
        id: usize,
        cloud: PointCloud,
        truth: Option<DenseLabels>,
        clicks: SparseLabels,
        k: usize,
    ) -> Result<Self> {
        if let Some(t) = &truth {
            if t.len() != cloud.n_points() {
                return Err(Error::arg(format!("scene {id}: truth length differs from cloud")));
            }
        }
        let neighbors = knn_indices(&cloud, k.min(cloud.n_points()))?;
        Ok(Self {
            id,
            normalizer: Normalizer::fit(&cloud),
            cloud,
            truth,
            clicks,
            neighbors,
        })
    }

    pub fn input(&self, cloud: &PointCloud) -> Array2<f64> {
        self.normalizer.input(cloud)
    }
}

/// The augmented views and mixed view of one scene for one step. Depends
/// only on the scene and the random stream, never on the model, so plans
/// can be prepared ahead of time.
#[derive(Debug, Clone)]
pub struct ScenePlan {
    pub views: Vec<PointCloud>,
    /// Mixed view; `source_views` uses 0 for the original and `k` for
    /// augmented view `k` (1-based).
    pub mix: MixSample,
}

/// Generates the `K` views, picks the mix pair and samples the mix weights.
pub fn plan_scene<R: Rng + ?Sized>(scene: &TrainScene, spec: &AugmentationSpec, rng: &mut R) -> Result<ScenePlan> {
    let views = gen_augmented_views(&scene.cloud, spec, rng)?;
    let k = views.len();
    let mix = if k >= 2 {
        let m = rng.random_range(0..k);
        let mut n = rng.random_range(0..k - 1);
        if n >= m {
            n += 1;
        }
        let mut mix = mix_augment(&views[m], &views[n], rng)?;
        mix.source_views = (m + 1, n + 1);
        mix
    } else {
        let mut mix = mix_augment(&scene.cloud, &views[0], rng)?;
        mix.source_views = (0, 1);
        mix
    };
    Ok(ScenePlan { views, mix })
}

/// The random stream for scene `scene_id` at optimizer step `step`.
pub fn plan_rng(config: &TrainConfig, spec: &AugmentationSpec, step: u64, scene_id: usize) -> crate::rng::Rng {
    crate::rng::stream(config.seed, &[AUG_STREAM, spec.rng_seed, step, scene_id as u64])
}

/// Scene order for an epoch: a seeded shuffle of `0..n`.
pub fn epoch_order(seed: u64, epoch: usize, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut crate::rng::stream(seed, &[SHUFFLE_STREAM, epoch as u64]));
    order
}

/// Per-scene losses, partition and gradients of one step.
#[derive(Debug, Clone)]
pub struct SceneOutput {
    pub scene_id: usize,
    pub losses: LossReport,
    pub mean: Array2<f64>,
    pub partition: ReliabilityPartition,
    pub grads: Weights,
}

/// Runs every branch of one scene and returns the loss terms and the
/// parameter gradient of the weighted total.
pub fn scene_pass(
    params: &ModelParams,
    scene: &TrainScene,
    plan: &ScenePlan,
    config: &TrainConfig,
) -> Result<SceneOutput> {
    let nbrs = &scene.neighbors;
    let (logits0, tape0) = forward(params, &scene.input(&scene.cloud), nbrs)?;
    let p0 = probabilities(&logits0);

    let aug: Vec<_> = plan
        .views
        .par_iter()
        .map(|v| forward(params, &scene.input(v), nbrs))
        .collect::<Result<_>>()?;
    let aug_logits: Vec<Array2<f64>> = aug.iter().map(|(l, _)| l.clone()).collect();
    let aug_probs: Vec<Array2<f64>> = aug_logits.iter().map(probabilities).collect();

    let (mean, _dev, partition) = reliability::split(&p0, &aug_probs, config.tau, config.kappa)?;

    let (mix_logits, mix_tape) = forward(params, &scene.input(&plan.mix.cloud), nbrs)?;

    let losses = LossReport::compute(&logits0, &scene.clicks, &partition, &aug_logits, &mix_logits, config.losses())?;
    if !losses.total.is_finite() {
        return Err(Error::Training(format!(
            "non-finite loss in scene {} (seg={}, rel={}, amb={}, mix={})",
            scene.id, losses.seg, losses.reliable, losses.ambiguous, losses.mix
        )));
    }

    // Zero-weighted branches are skipped outright so that disabled terms
    // cost nothing.
    let lambdas = losses.lambdas;
    let mut grads = backward(params, &tape0, &losses.grad_original)?;
    if lambdas.reliable != 0.0 || lambdas.ambiguous != 0.0 {
        for ((_, tape), g) in aug.iter().zip(&losses.grad_augmented) {
            grads.add(&backward(params, tape, g)?);
        }
    }
    if lambdas.mix != 0.0 {
        grads.add(&backward(params, &mix_tape, &losses.grad_mix)?);
    }

    Ok(SceneOutput {
        scene_id: scene.id,
        losses,
        mean,
        partition,
        grads,
    })
}

/// Result of one optimizer step.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub record: MetricsRecord,
    pub scenes: Vec<SceneOutput>,
    /// Pseudo-label statistics pooled over the batch; `None` without truth.
    pub pseudo_labels: Option<PseudoLabelStats>,
    /// Batch-mean parameter gradient that was applied.
    pub grads: Weights,
}

/// One optimizer step on a batch with pre-computed plans.
pub fn train_step_planned(
    state: &mut TrainState,
    batch: &[&TrainScene],
    plans: &[ScenePlan],
    config: &TrainConfig,
) -> Result<StepOutput> {
    if batch.is_empty() || batch.len() != plans.len() {
        return Err(Error::arg("batch must be non-empty with one plan per scene"));
    }
    let mut scenes = Vec::with_capacity(batch.len());
    for (scene, plan) in batch.iter().zip(plans) {
        scenes.push(scene_pass(&state.params, scene, plan, config)?);
    }

    let mut grads = Weights::zeros(&state.params.config);
    for s in &scenes {
        grads.add(&s.grads);
    }
    grads.scale(1.0 / batch.len() as f64);
    state.apply(&grads)?;

    let b = scenes.len() as f64;
    let mean_of = |f: fn(&SceneOutput) -> f64| scenes.iter().map(f).sum::<f64>() / b;
    let reliable_count: usize = scenes.iter().map(|s| s.partition.reliable_count()).sum();
    let total_points: usize = scenes.iter().map(|s| s.partition.n_points()).sum();

    let mut pseudo = Some(PseudoLabelStats::zero());
    for (scene, out) in batch.iter().zip(&scenes) {
        match (&scene.truth, pseudo.as_mut()) {
            (Some(t), Some(acc)) => acc.merge(&pseudo_label_stats(&out.partition, t)?),
            _ => pseudo = None,
        }
    }
    if pseudo.is_some_and(|p| p.is_empty()) {
        log::debug!("step {}: empty reliable set, pseudo-label accuracy set to 1.0", state.step);
    }

    let record = MetricsRecord {
        step: state.step,
        seg: Some(mean_of(|s| s.losses.seg)),
        rel: Some(mean_of(|s| s.losses.reliable)),
        amb: Some(mean_of(|s| s.losses.ambiguous)),
        mix: Some(mean_of(|s| s.losses.mix)),
        total: Some(mean_of(|s| s.losses.total)),
        reliable_count: Some(reliable_count),
        reliable_frac: Some(reliable_count as f64 / total_points as f64),
        pl_acc: pseudo.map(|p| p.accuracy()),
        miou: None,
        secs: 0.0,
    };
    Ok(StepOutput {
        record,
        scenes,
        pseudo_labels: pseudo,
        grads,
    })
}

/// One optimizer step; views and mix samples are drawn from `rng`.
pub fn train_step<R: Rng + ?Sized>(
    state: &mut TrainState,
    batch: &[&TrainScene],
    config: &TrainConfig,
    spec: &AugmentationSpec,
    rng: &mut R,
) -> Result<StepOutput> {
    let plans = batch
        .iter()
        .map(|s| plan_scene(s, spec, rng))
        .collect::<Result<Vec<_>>>()?;
    train_step_planned(state, batch, &plans, config)
}

/// Argmax predictions of the un-augmented clouds, pooled into IoU.
pub fn evaluate(params: &ModelParams, scenes: &[TrainScene]) -> Result<EvalReport> {
    let mut cm = ConfusionMatrix::new(params.config.n_classes);
    let mut any = false;
    for scene in scenes {
        let Some(truth) = &scene.truth else {
            return Err(Error::arg(format!("scene {} has no ground truth", scene.id)));
        };
        let (logits, _) = forward(params, &scene.input(&scene.cloud), &scene.neighbors)?;
        cm.add(&truth.class_per_point, &predict(&logits))?;
        any = true;
    }
    if !any {
        return Err(Error::arg("no scenes to evaluate"));
    }
    Ok(EvalReport {
        miou: cm.miou().unwrap_or(0.0),
        per_class_iou: cm.iou(),
    })
}

/// Pseudo-label statistics of the current model on `scenes` under several
/// uncertainty thresholds, all computed from the same predictions. Views
/// come from a fixed probe stream, so repeated calls see identical
/// augmentations.
pub fn selection_stats(
    params: &ModelParams,
    scenes: &[TrainScene],
    spec: &AugmentationSpec,
    tau: f64,
    kappas: &[f64],
    seed: u64,
) -> Result<Vec<PseudoLabelStats>> {
    let mut out = vec![PseudoLabelStats::zero(); kappas.len()];
    for scene in scenes {
        let truth = scene
            .truth
            .as_ref()
            .ok_or_else(|| Error::arg(format!("scene {} has no ground truth", scene.id)))?;
        let mut rng = crate::rng::stream(seed, &[PROBE_STREAM, scene.id as u64]);
        let views = gen_augmented_views(&scene.cloud, spec, &mut rng)?;
        let (l0, _) = forward(params, &scene.input(&scene.cloud), &scene.neighbors)?;
        let p0 = probabilities(&l0);
        let probs = views
            .iter()
            .map(|v| forward(params, &scene.input(v), &scene.neighbors).map(|(l, _)| probabilities(&l)))
            .collect::<Result<Vec<_>>>()?;
        let mean = reliability::mean_prediction(&p0, &probs)?;
        let dev = reliability::uncertainty(&p0, &probs, &mean)?;
        for (acc, &kappa) in out.iter_mut().zip(kappas) {
            let part = reliability::partition(&p0, &mean, &dev, tau, kappa)?;
            acc.merge(&pseudo_label_stats(&part, truth)?);
        }
    }
    Ok(out)
}
