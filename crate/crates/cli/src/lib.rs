//! Command-line driver: argument parsing, experiment configs, CSV output and
//! the end-to-end comparison pipeline.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod pipeline;
pub mod plots;
pub mod table;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::ExperimentConfig;
pub use error::CliError;
pub use pipeline::{run_pipeline, ComparisonReport};
pub use plots::emit_plots;

#[derive(Debug, Parser)]
#[command(name = "dnls", version, about = "Dissipative cubic derivative NLS experiments")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Experiment config (TOML); required by `pipeline`.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory. Without it, single-table commands print CSV to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Recorded in manifests; overrides the config's seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// -v for info, -vv for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify Im ν for a coefficient file.
    Classify(commands::ClassifyArgs),
    /// Integrate the profile ODE and compare β with the closed form A.
    Profile(commands::ProfileArgs),
    /// Evaluate S(τ) and certify its τ^{-1/2} bounds.
    Decay(commands::DecayArgs),
    /// Fit a decay law to a (t, value) curve.
    Fit(commands::FitArgs),
    /// Run the spectral solver.
    Simulate(commands::SimulateArgs),
    /// Run classify → simulate → profile → report from --config.
    Pipeline,
    /// Re-emit plot scripts for a finished pipeline directory.
    Plots,
}

/// Runs a parsed command line. The caller maps errors to exit codes.
pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Invalid(format!("--threads: {e}")))?;
    }
    let g = &cli.global;
    match &cli.command {
        Command::Classify(a) => commands::classify(a, g),
        Command::Profile(a) => commands::profile(a, g),
        Command::Decay(a) => commands::decay(a, g),
        Command::Fit(a) => commands::fit(a, g),
        Command::Simulate(a) => commands::simulate(a, g),
        Command::Pipeline => commands::pipeline(g),
        Command::Plots => commands::plots(g),
    }
}
