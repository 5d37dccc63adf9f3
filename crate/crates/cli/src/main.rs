//! `racnet` command-line entry point.

mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use racnet::augment::{
    affine_transform, mix_augment, mix_with_alpha, pointwise_noise, pointwolf_deform, AffineParams, AugMethod,
    NoiseParams, PointWolfParams,
};
use racnet::config::RunConfig;
use racnet::losses::{AmbiguousLossKind, ReliableLossKind};
use racnet::pointcloud::{load_cloud, save_cloud, CloudFormat};
use racnet::segmodel::{forward, load_checkpoint, probabilities, ModelConfig};
use racnet::synthdata::make_dataset;
use racnet::trainer::{evaluate, load_dataset, run_training, TrainScene};
use racnet::{reliability, Error};

/// Error with the process exit code it maps to.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

/// Bad inputs are usage errors (2); failures while running are runtime
/// errors (1).
impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Training(_) | Error::Contract(_) | Error::Io { .. } => 1,
            _ => 2,
        };
        Self { code, message: e.to_string() }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

#[derive(Parser)]
#[command(name = "racnet", version, about = "Reliability-adaptive consistency training for sparse point-cloud labels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and its manifest.
    GenData {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train on a manifest; writes metrics.csv, model.ckpt and config.toml.
    Train(TrainArgs),
    /// Evaluate a checkpoint on the test scenes of a manifest.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Supplies τ, κ and the augmentations for --dump-masks.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
        /// Write one reliability mask file per scene into this directory.
        #[arg(long)]
        dump_masks: Option<PathBuf>,
    },
    /// Apply one augmentation to a cloud file.
    Augment(AugmentArgs),
    /// Compare metrics files: step-aligned curves and a final-mIoU summary.
    Report {
        #[arg(required = true)]
        metrics: Vec<PathBuf>,
        /// Directory for curves.csv and summary.csv; printed to stdout otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    tau: Option<f64>,
    /// Uncertainty threshold; `inf` selects by confidence alone.
    #[arg(long)]
    kappa: Option<f64>,
    /// Number of augmented views: the first K of pointwolf, affine, noise.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    lambda3: Option<f64>,
    #[arg(long, value_parser = parse_from_str::<ReliableLossKind>)]
    reliable_loss: Option<ReliableLossKind>,
    #[arg(long, value_parser = parse_from_str::<AmbiguousLossKind>)]
    ambiguous_loss: Option<AmbiguousLossKind>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    deterministic: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Affine,
    Noise,
    Pointwolf,
    Mix,
}

#[derive(Args)]
struct AugmentArgs {
    #[arg(long, value_enum)]
    method: MethodArg,
    #[arg(long)]
    input: PathBuf,
    /// Second view for `mix`.
    #[arg(long)]
    input2: Option<PathBuf>,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Rotation about z in radians, [0, 2π).
    #[arg(long, default_value_t = 0.0)]
    angle: f64,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, num_args = 3, value_names = ["X", "Y", "Z"], allow_negative_numbers = true)]
    translation: Option<Vec<f64>>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    clip: Option<f64>,
    #[arg(long)]
    anchors: Option<usize>,
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Use this α for every point instead of sampling.
    #[arg(long)]
    alpha_const: Option<f64>,
}

fn parse_from_str<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    match path {
        Some(p) => Ok(RunConfig::load(p)?),
        None => Ok(RunConfig::default()),
    }
}

fn require_file(path: &Path, what: &str) -> CliResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::usage(format!("{what} {} does not exist", path.display())))
    }
}

fn write_file(path: &Path, contents: &str) -> CliResult {
    fs::write(path, contents).map_err(|e| Failure { code: 1, message: format!("{}: {e}", path.display()) })
}

fn cmd_gen_data(config: Option<&Path>, out: &Path) -> CliResult {
    let cfg = load_config(config)?;
    let (manifest_path, manifest) =
        make_dataset(&cfg.scene, cfg.data.n_train, cfg.data.n_test, &cfg.data.scheme(), out)?;
    println!("manifest: {}", manifest_path.display());
    println!(
        "label fraction: {:.6} ({} of {} training points)",
        manifest.label_fraction(),
        manifest.labeled_points,
        manifest.train_points
    );
    Ok(())
}

const VIEW_ORDER: [AugMethod; 3] = [AugMethod::PointWolf, AugMethod::Affine, AugMethod::Noise];

fn cmd_train(args: &TrainArgs) -> CliResult {
    require_file(&args.manifest, "manifest")?;
    let mut cfg = load_config(args.config.as_deref())?;
    let t = &mut cfg.train;
    if let Some(v) = args.tau {
        t.tau = v;
    }
    if let Some(v) = args.kappa {
        t.kappa = v;
    }
    if let Some(v) = args.lambda1 {
        t.lambda1 = v;
    }
    if let Some(v) = args.lambda2 {
        t.lambda2 = v;
    }
    if let Some(v) = args.lambda3 {
        t.lambda3 = v;
    }
    if let Some(v) = args.reliable_loss {
        t.reliable_loss = v;
    }
    if let Some(v) = args.ambiguous_loss {
        t.ambiguous_loss = v;
    }
    if let Some(v) = args.epochs {
        t.epochs = v;
    }
    if let Some(v) = args.seed {
        t.seed = v;
    }
    if args.deterministic {
        t.deterministic = true;
    }
    if let Some(k) = args.k {
        if !(1..=VIEW_ORDER.len()).contains(&k) {
            return Err(Failure::usage(format!("--k must be 1..={}, got {k}", VIEW_ORDER.len())));
        }
        cfg.augment.methods = VIEW_ORDER[..k].to_vec();
    }
    cfg.validate()?;

    fs::create_dir_all(&args.out).map_err(|e| Failure { code: 1, message: format!("{}: {e}", args.out.display()) })?;
    write_file(&args.out.join("config.toml"), &cfg.canonical())?;
    let outcome = run_training(&cfg.train, &cfg.augment, &args.manifest, &args.out)?;
    let steps = outcome.history.iter().filter(|r| !r.is_eval()).count();
    println!("steps: {steps}");
    if let Some(e) = &outcome.final_eval {
        println!("final mIoU: {:.4}", e.miou);
    }
    println!("metrics: {}", outcome.metrics_path.display());
    println!("checkpoint: {}", outcome.checkpoint_path.display());
    Ok(())
}

fn cmd_eval(
    checkpoint: &Path,
    manifest: &Path,
    config: Option<&Path>,
    split: SplitArg,
    dump_masks: Option<&Path>,
) -> CliResult {
    require_file(checkpoint, "checkpoint")?;
    require_file(manifest, "manifest")?;
    let cfg = load_config(config)?;
    let params = load_checkpoint(checkpoint, None)?;
    let dataset = load_dataset(manifest, params.config.k)?;
    let expected = ModelConfig {
        in_dim: 3 + dataset.feature_dim,
        n_classes: dataset.n_classes,
        ..params.config
    };
    if expected != params.config {
        return Err(Failure::usage(format!(
            "checkpoint expects {} inputs and {} classes, dataset has {} and {}",
            params.config.in_dim, params.config.n_classes, expected.in_dim, expected.n_classes
        )));
    }
    let scenes: &[TrainScene] = match split {
        SplitArg::Train => &dataset.train,
        SplitArg::Test => &dataset.test,
    };
    let report = evaluate(&params, scenes)?;
    println!("mIoU: {:.6}", report.miou);
    for (c, iou) in report.per_class_iou.iter().enumerate() {
        match iou {
            Some(v) => println!("class {c}: {v:.6}"),
            None => println!("class {c}: absent"),
        }
    }

    if let Some(dir) = dump_masks {
        fs::create_dir_all(dir).map_err(|e| Failure { code: 1, message: format!("{}: {e}", dir.display()) })?;
        for scene in scenes {
            let (l0, _) = forward(&params, &scene.input(&scene.cloud), &scene.neighbors)?;
            let views = cfg.augment.views(&scene.cloud)?;
            let probs = views
                .iter()
                .map(|v| forward(&params, &scene.input(v), &scene.neighbors).map(|(l, _)| probabilities(&l)))
                .collect::<racnet::Result<Vec<_>>>()?;
            let (_, _, part) = reliability::split(&probabilities(&l0), &probs, cfg.train.tau, cfg.train.kappa)?;
            let mut text = String::from("# reliable class\n");
            for (m, c) in part.mask.iter().zip(&part.hard_labels) {
                text.push_str(&format!("{} {c}\n", *m as u8));
            }
            write_file(&dir.join(format!("scene_{:04}.mask", scene.id)), &text)?;
        }
    }
    Ok(())
}

fn cmd_augment(a: &AugmentArgs) -> CliResult {
    require_file(&a.input, "input cloud")?;
    let format = CloudFormat::from_path(&a.input);
    let (cloud, labels) = load_cloud(&a.input, format)?;
    let mut rng = racnet::rng::seeded(a.seed);
    let out = match a.method {
        MethodArg::Affine => {
            let translation = match a.translation.as_deref() {
                None => [0.0; 3],
                Some(&[x, y, z]) => [x, y, z],
                Some(_) => return Err(Failure::usage("--translation takes three values")),
            };
            affine_transform(&cloud, &AffineParams { rotation_angle: a.angle, scale: a.scale, translation })?
        }
        MethodArg::Noise => {
            let d = NoiseParams::default();
            let params = NoiseParams { sigma: a.sigma.unwrap_or(d.sigma), clip: a.clip.unwrap_or(d.clip) };
            pointwise_noise(&cloud, &params, &mut rng)?
        }
        MethodArg::Pointwolf => {
            let d = PointWolfParams::default();
            let params = PointWolfParams {
                n_anchors: a.anchors.unwrap_or(d.n_anchors),
                kernel_bandwidth: a.bandwidth.unwrap_or(d.kernel_bandwidth),
                ..d
            };
            pointwolf_deform(&cloud, &params, &mut rng)?
        }
        MethodArg::Mix => {
            let second = a.input2.as_deref().ok_or_else(|| Failure::usage("mix needs --input2"))?;
            require_file(second, "second cloud")?;
            let (other, _) = load_cloud(second, CloudFormat::from_path(second))?;
            match a.alpha_const {
                Some(alpha) => mix_with_alpha(&cloud, &other, &vec![alpha; cloud.n_points()])?,
                None => mix_augment(&cloud, &other, &mut rng)?.cloud,
            }
        }
    };
    save_cloud(&out, labels.as_ref(), &a.output, CloudFormat::from_path(&a.output))?;
    Ok(())
}

fn configure_threads() -> CliResult {
    if let Ok(v) = std::env::var("RAC_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Failure::usage(format!("RAC_THREADS must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure { code: 1, message: e.to_string() })?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    configure_threads()?;
    match cli.command {
        Command::GenData { config, out } => cmd_gen_data(config.as_deref(), &out),
        Command::Train(args) => cmd_train(&args),
        Command::Eval { checkpoint, manifest, config, split, dump_masks } => {
            cmd_eval(&checkpoint, &manifest, config.as_deref(), split, dump_masks.as_deref())
        }
        Command::Augment(args) => cmd_augment(&args),
        Command::Report { metrics, out } => report::run(&metrics, out.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
