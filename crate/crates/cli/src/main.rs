mod commands;
mod config;
mod inspect;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};

use config::Config;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("data: {0}")]
    Data(String),
    #[error("internal: {0}")]
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "c2f", version, about = "Coarse-to-fine keyframe manipulation toolkit")]
struct Cli {
    /// TOML config file; unset keys keep their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (beats C2F_SEED, which beats the config file).
    #[arg(long, global = true, env = "C2F_SEED")]
    seed: Option<u64>,
    /// Output root.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// More logging; repeat for debug output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Record expert demonstrations for the training tasks.
    Generate(commands::GenerateArgs),
    /// Turn recorded demonstrations into training samples.
    BuildDataset(commands::BuildArgs),
    /// Train the action predictor on a built dataset.
    Train(commands::TrainArgs),
    /// Run the evaluation protocol for one policy.
    Evaluate(commands::EvaluateArgs),
    /// Summarize a views, samples or checkpoint file, or a JSON report.
    Inspect(inspect::InspectArgs),
}

fn parse() -> Result<Cli, clap::Error> {
    let cmd = Cli::command().after_help(config::describe_defaults());
    let matches = cmd.try_get_matches()?;
    Cli::from_arg_matches(&matches)
}

fn resolve(cli: &Cli) -> Result<Config, CliError> {
    let mut config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let seed = cli.seed.unwrap_or(config.general.seed);
    config.apply_seed(seed);
    if let Some(out) = &cli.out {
        config.general.out = out.clone();
    }
    if let Some(j) = cli.jobs {
        config.general.jobs = j;
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = resolve(&cli)?;
    if config.general.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.general.jobs)
            .build_global()
            .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    match cli.command {
        Command::Generate(a) => commands::generate(&mut config, a),
        Command::BuildDataset(a) => commands::build_dataset(&mut config, a),
        Command::Train(a) => commands::train(&mut config, a),
        Command::Evaluate(a) => commands::evaluate(&mut config, a),
        Command::Inspect(a) => inspect::inspect(&config, a),
    }
}

fn main() -> ExitCode {
    let cli = match parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| level.into()))
        .with_writer(std::io::stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
