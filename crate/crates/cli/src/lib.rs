//! The `dynamix` command-line pipeline: corpus generation, training,
//! zero-shot forecasting, evaluation sweeps and expert-usage similarity.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use error::{CliError, CliResult, EXIT_DIVERGENCE, EXIT_INPUT, EXIT_RUNTIME};

/// Environment variable naming the default artifact root.
pub const DATA_DIR_ENV: &str = "DYNAMIX_DATA_DIR";

#[derive(Debug, Parser)]
#[command(name = "dynamix", version, about = "Zero-shot dynamical systems reconstruction")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Master seed; overrides the `seed` key of the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads. 1 gives bit-exact reproducibility.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Default artifact root for outputs without an explicit path.
    #[arg(long, global = true, env = DATA_DIR_ENV)]
    pub data_dir: Option<PathBuf>,
}

impl GlobalArgs {
    pub fn root(&self) -> PathBuf {
        self.data_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate catalog systems into a DMX1 dataset.
    Generate(commands::generate::GenerateArgs),
    /// Train a model on a dataset.
    Train(commands::train::TrainArgs),
    /// Forecast from a context CSV with a trained checkpoint.
    Forecast(commands::forecast::ForecastArgs),
    /// Score zero-shot forecasts on catalog systems.
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Pairwise expert-usage similarity between systems.
    Similarity(commands::similarity::SimilarityArgs),
    /// List the catalog systems.
    Systems,
}

pub fn run(cli: Cli) -> CliResult<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.global.jobs.max(1))
        .build_global()
        .map_err(|e| CliError::runtime(format!("thread pool: {e}")))?;
    match &cli.command {
        Command::Generate(args) => commands::generate::run(&cli.global, args),
        Command::Train(args) => commands::train::run(&cli.global, args),
        Command::Forecast(args) => commands::forecast::run(&cli.global, args),
        Command::Evaluate(args) => commands::evaluate::run(&cli.global, args),
        Command::Similarity(args) => commands::similarity::run(&cli.global, args),
        Command::Systems => {
            for name in dynamix_core::systems::Catalog::builtin().names() {
                println!("{name}");
            }
            Ok(())
        }
    }
}
