//! Dataset loading and the epoch loop.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Instant;

use super::{
    epoch_order, evaluate, plan_rng, plan_scene, train_step_planned, EvalReport, MetricsRecord,
    MetricsWriter, ScenePlan, StepOutput, TrainConfig, TrainScene,
};
use crate::augment::AugmentationSpec;
use crate::pointcloud::{load_cloud, CloudFormat, SparseLabels};
use crate::segmodel::{save_checkpoint, ModelConfig, ModelParams, TrainState};
use crate::synthdata::{Manifest, Split};
use crate::{Error, Result};

pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKPOINT_FILE: &str = "model.ckpt";

/// Scenes of a manifest, loaded and prepared.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub n_classes: usize,
    pub feature_dim: usize,
    pub label_fraction: f64,
    pub train: Vec<TrainScene>,
    pub test: Vec<TrainScene>,
}

impl Dataset {
    pub fn model_config(&self, config: &TrainConfig) -> ModelConfig {
        ModelConfig {
            in_dim: 3 + self.feature_dim,
            hidden: config.hidden,
            n_classes: self.n_classes,
            k: config.k_neighbors,
        }
    }
}

pub fn load_dataset(manifest_path: &Path, k: usize) -> Result<Dataset> {
    let manifest = Manifest::load(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut feature_dim = None;
    for (id, entry) in manifest.entries.iter().enumerate() {
        let cloud_path = base.join(&entry.cloud_path);
        let (cloud, truth) = load_cloud(&cloud_path, CloudFormat::from_path(&cloud_path))?;
        if *feature_dim.get_or_insert(cloud.feature_dim()) != cloud.feature_dim() {
            return Err(Error::Format(format!(
                "{}: feature dimension differs from earlier scenes",
                cloud_path.display()
            )));
        }
        if let Some(t) = &truth {
            if let Some(c) = t.class_per_point.iter().find(|&&c| c >= manifest.n_classes) {
                return Err(Error::Format(format!(
                    "{}: class {c} outside 0..{}",
                    cloud_path.display(),
                    manifest.n_classes
                )));
            }
        }
        let clicks_path = base.join(&entry.clicks_path);
        let clicks = match entry.split {
            Split::Train => {
                let text = fs::read_to_string(&clicks_path).map_err(|e| Error::io(&clicks_path, e))?;
                SparseLabels::parse_clicks(&text, cloud.n_points(), manifest.n_classes)?
            }
            Split::Test => SparseLabels::empty(),
        };
        let scene = TrainScene::new(id, cloud, truth, clicks, k)?;
        match entry.split {
            Split::Train => train.push(scene),
            Split::Test => test.push(scene),
        }
    }
    Ok(Dataset {
        n_classes: manifest.n_classes,
        feature_dim: feature_dim.ok_or_else(|| Error::EmptyInput("manifest lists no scenes".into()))?,
        label_fraction: manifest.label_fraction(),
        train,
        test,
    })
}

/// Drives the epoch loop over an in-memory dataset.
pub struct Session<'a> {
    pub config: TrainConfig,
    pub spec: AugmentationSpec,
    pub dataset: &'a Dataset,
    pub state: TrainState,
}

impl<'a> Session<'a> {
    pub fn new(config: TrainConfig, spec: AugmentationSpec, dataset: &'a Dataset) -> Result<Self> {
        config.validate()?;
        spec.validate()?;
        if dataset.train.is_empty() {
            return Err(Error::arg("dataset has no training scenes"));
        }
        let params = ModelParams::init(dataset.model_config(&config), config.seed)?;
        let state = TrainState::new(params, config.lr, config.momentum)?;
        Ok(Self {
            config,
            spec,
            dataset,
            state,
        })
    }

    /// `(step, scene indices)` for every optimizer step of the run.
    pub fn schedule(&self) -> Vec<(u64, Vec<usize>)> {
        let n = self.dataset.train.len();
        let mut step = self.state.step;
        let mut out = Vec::new();
        for epoch in 0..self.config.epochs {
            for batch in epoch_order(self.config.seed, epoch, n).chunks(self.config.batch_size) {
                out.push((step, batch.to_vec()));
                step += 1;
            }
        }
        out
    }

    fn plans_for(&self, step: u64, batch: &[usize]) -> Result<Vec<ScenePlan>> {
        batch
            .iter()
            .map(|&i| {
                let scene = &self.dataset.train[i];
                plan_scene(scene, &self.spec, &mut plan_rng(&self.config, &self.spec, step, scene.id))
            })
            .collect()
    }

    fn is_eval_epoch(&self, epoch: usize) -> bool {
        let last = epoch + 1 == self.config.epochs;
        last || (self.config.eval_every > 0 && (epoch + 1).is_multiple_of(self.config.eval_every))
    }

    /// Runs all epochs. `on_record` sees every metrics row in order;
    /// `on_step` sees every step's full output and the updated state.
    pub fn run(
        &mut self,
        on_record: &mut (dyn FnMut(&MetricsRecord) -> Result<()> + Send),
        on_step: &mut (dyn FnMut(&StepOutput, &TrainState) -> Result<()> + Send),
    ) -> Result<Option<EvalReport>> {
        if self.config.deterministic {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(1)
                .build()
                .map_err(|e| Error::Training(e.to_string()))?;
            pool.install(|| self.run_inner(on_record, on_step, false))
        } else {
            self.run_inner(on_record, on_step, true)
        }
    }

    fn run_inner(
        &mut self,
        on_record: &mut (dyn FnMut(&MetricsRecord) -> Result<()> + Send),
        on_step: &mut (dyn FnMut(&StepOutput, &TrainState) -> Result<()> + Send),
        prefetch: bool,
    ) -> Result<Option<EvalReport>> {
        let schedule = self.schedule();
        let steps_per_epoch = self.dataset.train.len().div_ceil(self.config.batch_size);
        let start = Instant::now();
        let mut last_eval = None;

        let this = &*self;
        let (eval, state) = std::thread::scope(|scope| -> Result<(Option<EvalReport>, TrainState)> {
            // Augmentations depend only on seeds, so a producer thread can
            // prepare the next batches while the current one trains.
            let (tx, rx) = mpsc::sync_channel::<Result<Vec<ScenePlan>>>(2);
            if prefetch {
                let schedule = schedule.clone();
                scope.spawn(move || {
                    for (step, batch) in &schedule {
                        if tx.send(this.plans_for(*step, batch)).is_err() {
                            break;
                        }
                    }
                });
            } else {
                drop(tx);
            }

            let mut state = this.state.clone();
            for (idx, (step, batch)) in schedule.iter().enumerate() {
                let plans = if prefetch {
                    rx.recv()
                        .map_err(|_| Error::Training("augmentation producer stopped".into()))??
                } else {
                    this.plans_for(*step, batch)?
                };
                let scenes: Vec<&TrainScene> = batch.iter().map(|&i| &this.dataset.train[i]).collect();
                let mut out = train_step_planned(&mut state, &scenes, &plans, &this.config)?;
                if !this.config.deterministic {
                    out.record.secs = start.elapsed().as_secs_f64();
                }
                on_step(&out, &state)?;
                on_record(&out.record)?;

                let epoch_end = (idx + 1) % steps_per_epoch == 0;
                if epoch_end && this.is_eval_epoch(idx / steps_per_epoch) && !this.dataset.test.is_empty() {
                    let report = evaluate(&state.params, &this.dataset.test)?;
                    let record = MetricsRecord {
                        step: state.step,
                        miou: Some(report.miou),
                        secs: if this.config.deterministic {
                            0.0
                        } else {
                            start.elapsed().as_secs_f64()
                        },
                        ..Default::default()
                    };
                    on_record(&record)?;
                    last_eval = Some(report);
                }
            }
            Ok((last_eval, state))
        })?;
        self.state = state;
        Ok(eval)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub history: Vec<MetricsRecord>,
    pub final_eval: Option<EvalReport>,
    pub params: ModelParams,
    pub metrics_path: PathBuf,
    pub checkpoint_path: PathBuf,
}

/// Trains on the manifest's dataset, writing `metrics.csv` (flushed row by
/// row) and the final `model.ckpt` into `out_dir`.
pub fn run_training(
    config: &TrainConfig,
    spec: &AugmentationSpec,
    manifest_path: &Path,
    out_dir: &Path,
) -> Result<RunOutcome> {
    config.validate()?;
    let dataset = load_dataset(manifest_path, config.k_neighbors)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let metrics_path = out_dir.join(METRICS_FILE);
    let file = fs::File::create(&metrics_path).map_err(|e| Error::io(&metrics_path, e))?;
    let mut writer =
        MetricsWriter::new(std::io::BufWriter::new(file)).map_err(|e| Error::io(&metrics_path, e))?;

    let mut session = Session::new(config.clone(), spec.clone(), &dataset)?;
    let mut history = Vec::new();
    let final_eval = session.run(
        &mut |rec| {
            history.push(rec.clone());
            writer.write(rec).map_err(|e| Error::io(&metrics_path, e))
        },
        &mut |_, _| Ok(()),
    )?;

    let checkpoint_path = out_dir.join(CHECKPOINT_FILE);
    save_checkpoint(&session.state.params, &checkpoint_path)?;
    Ok(RunOutcome {
        history,
        final_eval,
        params: session.state.params.clone(),
        metrics_path,
        checkpoint_path,
    })
}
