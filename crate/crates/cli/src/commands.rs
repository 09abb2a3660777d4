use std::path::{Path, PathBuf};

use c2f_core::bench::{
    evaluate as run_eval, generate_demonstrations, DemoConfig, EvalConfig, Executor, Level, OracleExecutor,
    PolicyConfig, RandomExecutor, SceneConfig,
};
use c2f_core::trajectory::store::{build_dataset as build, load_dataset, StoredSample};
use c2f_core::trajectory::{SampleConfig, SamplingStrategy};
use c2f_predictor::train::{prepare_examples, split_indices};
use c2f_predictor::{load_checkpoint, save_checkpoint, train as fit, Predictor, PredictorError, TrainedExecutor};
use clap::{Args, ValueEnum};
use serde::Serialize;

use crate::config::Config;
use crate::CliError;

pub const CHECKPOINT_FILE: &str = "checkpoint.c2ft";
pub const REPORT_FILE: &str = "report.json";
pub const TABLE_FILE: &str = "table.txt";
pub const GENERATE_MANIFEST: &str = "generate.json";

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    bytes.push(b'\n');
    std::fs::write(path, bytes).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Demonstrations per training variation.
    #[arg(long)]
    pub demos: Option<usize>,
    /// "standard", "mini" or a suite TOML path.
    #[arg(long)]
    pub suite: Option<String>,
    /// Defaults to <out>/trajectories.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct GenerateManifest {
    suite: String,
    seeds: Vec<u64>,
    demonstrations: Vec<String>,
}

pub fn generate(config: &mut Config, args: GenerateArgs) -> Result<(), CliError> {
    if let Some(s) = args.suite {
        config.data.suite = s;
    }
    if let Some(n) = args.demos {
        config.data.demos_per_variation = n;
    }
    config.validate()?;
    let out = args.out_dir.unwrap_or_else(|| config.general.out.join("trajectories"));
    let suite = config.suite()?;
    let instances = suite.instances_at(Level::Train).map_err(data_err)?;
    if instances.is_empty() {
        return Err(CliError::Data(format!("suite {} has no training tasks", suite.name)));
    }
    let seed = config.general.seed;
    let seeds: Vec<u64> = (0..config.data.demos_per_variation as u64).map(|i| seed + i).collect();
    let demo = DemoConfig {
        bounds: config.data.bounds,
        camera_resolution: config.data.camera_resolution,
        ..DemoConfig::default()
    };
    create_dir(&out)?;
    let dirs = generate_demonstrations(&instances, &seeds, &out, &demo).map_err(data_err)?;
    let manifest = GenerateManifest {
        suite: suite.name.clone(),
        seeds,
        demonstrations: dirs
            .iter()
            .map(|d| d.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default())
            .collect(),
    };
    write_json(&out.join(GENERATE_MANIFEST), &manifest)?;
    println!("{} demonstrations in {}", dirs.len(), out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Defaults to <out>/trajectories.
    #[arg(long)]
    pub traj_dir: Option<PathBuf>,
    /// Frames kept after each keyframe.
    #[arg(long)]
    pub m: Option<usize>,
    /// Defaults to <out>/dataset.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

pub fn build_dataset(config: &mut Config, args: BuildArgs) -> Result<(), CliError> {
    if let Some(m) = args.m {
        config.data.m = m;
    }
    config.validate()?;
    let traj = args.traj_dir.unwrap_or_else(|| config.general.out.join("trajectories"));
    if !traj.is_dir() {
        return Err(CliError::Data(format!("no trajectory directory at {}", traj.display())));
    }
    let out = args.out_dir.unwrap_or_else(|| config.general.out.join("dataset"));
    let sample = SampleConfig {
        strategy: SamplingStrategy::PostKeyframe { m: config.data.m },
        bounds: config.data.bounds,
        resolution: config.data.resolution,
    };
    let manifest = build(&traj, &out, &sample).map_err(data_err)?;
    println!(
        "{} samples from {} trajectories in {}",
        manifest.total_samples,
        manifest.files.len(),
        out.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Defaults to <out>/dataset.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Defaults to <out>/train.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

fn subset(samples: &[StoredSample], idx: &[usize]) -> Vec<StoredSample> {
    idx.iter().map(|i| samples[*i].clone()).collect()
}

pub fn train(config: &mut Config, args: TrainArgs) -> Result<(), CliError> {
    if let Some(e) = args.epochs {
        config.train.epochs = e;
    }
    if let Some(lr) = args.lr {
        config.train.lr = lr;
    }
    if let Some(b) = args.batch_size {
        config.train.batch_size = b;
    }
    if config.train.lr.is_nan() || config.train.lr <= 0.0 {
        return Err(CliError::Usage(format!("learning rate must be positive, got {}", config.train.lr)));
    }
    config.validate()?;
    let dataset = args.dataset.unwrap_or_else(|| config.general.out.join("dataset"));
    let out = args.out_dir.unwrap_or_else(|| config.general.out.join("train"));
    let samples = load_dataset(&dataset).map_err(data_err)?;
    let mut predictor = Predictor::new(config.model.clone()).map_err(|e| CliError::Usage(e.to_string()))?;
    let (train_idx, held_idx) = split_indices(samples.len(), config.train.holdout, config.train.seed);
    let train_set = prepare_examples(&subset(&samples, &train_idx), &predictor, &config.train).map_err(data_err)?;
    let holdout = prepare_examples(&subset(&samples, &held_idx), &predictor, &config.train).map_err(data_err)?;
    let skipped = samples.len() - train_set.len() - holdout.len();
    create_dir(&out)?;
    let checkpoint = out.join(CHECKPOINT_FILE);
    match fit(&mut predictor, &train_set, &holdout, &config.train) {
        Ok(mut report) => {
            report.skipped_samples = skipped;
            let steps = report.epochs.last().map_or(0, |e| e.steps);
            save_checkpoint(&checkpoint, &predictor, steps).map_err(data_err)?;
            write_json(&out.join(REPORT_FILE), &report)?;
            println!(
                "{} steps, final loss {:.4}, held-out pixel error {:.3}; checkpoint {}",
                steps,
                report.epochs.last().map_or(f64::NAN, |e| e.loss.total),
                report.final_holdout.mean_pixel_error,
                checkpoint.display()
            );
            Ok(())
        }
        Err(PredictorError::NonFiniteLoss { step, last_good }) => {
            predictor.params = *last_good;
            save_checkpoint(&checkpoint, &predictor, step).map_err(data_err)?;
            Err(CliError::Internal(format!(
                "non-finite loss at step {step}; last good weights saved to {}",
                checkpoint.display()
            )))
        }
        Err(PredictorError::EmptyDataset) => Err(CliError::Data("no usable training samples".into())),
        Err(e) => Err(CliError::Internal(e.to_string())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Policy {
    /// Exact planner keypoints, ground-truth actions.
    Oracle,
    /// Planner keypoints with Gaussian noise, ground-truth actions.
    NoisyOracle,
    /// Oracle planner feeding the trained predictor.
    Trained,
    /// Uniform positions in the workspace.
    Random,
}

impl Policy {
    fn name(self) -> &'static str {
        match self {
            Policy::Oracle => "oracle",
            Policy::NoisyOracle => "noisy-oracle",
            Policy::Trained => "trained",
            Policy::Random => "random",
        }
    }
}

fn parse_level(s: &str) -> Result<Level, String> {
    Level::EVAL
        .into_iter()
        .find(|l| l.name() == s)
        .ok_or_else(|| format!("unknown level {s:?}; expected l1, l2, l3 or l4"))
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, value_enum, default_value = "oracle")]
    pub policy: Policy,
    /// "standard", "mini" or a suite TOML path.
    #[arg(long)]
    pub suite: Option<String>,
    /// Episodes per variation and seed.
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Number of seeds, counted up from the master seed.
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Restrict to these levels (repeatable).
    #[arg(long = "level", value_parser = parse_level)]
    pub levels: Vec<Level>,
    /// Required for --policy trained.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Planner keypoint noise (m per axis); defaults to eval.noise_sigma
    /// for noisy-oracle and 0 otherwise.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub no_memory: bool,
    #[arg(long)]
    pub no_subtask_scoping: bool,
    /// Defaults to <out>/eval/<policy>.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

pub fn evaluate(config: &mut Config, args: EvaluateArgs) -> Result<(), CliError> {
    if let Some(s) = args.suite {
        config.data.suite = s;
    }
    if let Some(n) = args.episodes {
        config.eval.episodes = n;
    }
    if let Some(n) = args.seeds {
        config.eval.seeds = n;
    }
    if !args.levels.is_empty() {
        config.eval.levels = args.levels;
    }
    if args.no_memory {
        config.eval.memory = false;
    }
    if args.no_subtask_scoping {
        config.eval.subtask_scoping = false;
    }
    let noise = match (args.noise, args.policy) {
        (Some(n), _) => n,
        (None, Policy::NoisyOracle) => config.eval.noise_sigma,
        (None, _) => 0.0,
    };
    if noise.is_nan() || noise < 0.0 {
        return Err(CliError::Usage(format!("noise must be non-negative, got {noise}")));
    }
    config.validate()?;
    let levels = if config.eval.levels.is_empty() { Level::EVAL.to_vec() } else { config.eval.levels.clone() };
    let suite = config.suite()?;
    let instances: Vec<_> = suite
        .instances()
        .map_err(data_err)?
        .into_iter()
        .filter(|i| levels.contains(&i.level))
        .collect();
    if instances.is_empty() {
        return Err(CliError::Data(format!("suite {} has no tasks at {levels:?}", suite.name)));
    }
    let seed = config.general.seed;
    let eval = EvalConfig {
        episodes: config.eval.episodes,
        seeds: (0..config.eval.seeds as u64).map(|i| seed + i).collect(),
        bounds: config.data.bounds,
        resolution: config.data.resolution,
        camera_resolution: config.data.camera_resolution,
        max_steps_factor: config.eval.max_steps_factor,
        scene: SceneConfig::default(),
        policy: PolicyConfig {
            memory: config.eval.memory,
            subtask_scoping: config.eval.subtask_scoping,
            noise_sigma: noise,
        },
    };
    let oracle = OracleExecutor { cube_side: config.train.cube_side };
    let trained;
    let executor: &dyn Executor = match args.policy {
        Policy::Oracle | Policy::NoisyOracle => &oracle,
        Policy::Random => &RandomExecutor,
        Policy::Trained => {
            let path = args
                .checkpoint
                .ok_or_else(|| CliError::Usage("--policy trained needs --checkpoint".into()))?;
            let (predictor, _) = load_checkpoint(&path).map_err(data_err)?;
            trained = TrainedExecutor::new(predictor, config.train.cube_side, config.eval.grid_step);
            &trained
        }
    };
    let report = run_eval(args.policy.name(), &instances, executor, &eval);
    let out = args.out_dir.unwrap_or_else(|| config.general.out.join("eval").join(args.policy.name()));
    create_dir(&out)?;
    write_json(&out.join(REPORT_FILE), &report)?;
    let table = report.render_table();
    std::fs::write(out.join(TABLE_FILE), &table).map_err(data_err)?;
    print!("{table}");
    Ok(())
}
