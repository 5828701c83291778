//! Batch driver for the uhs numerical laboratory: validated TOML experiments, sweeps over a
//! worker pool, persisted run records with manifests, estimate verification and plots.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod plot;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::Outcome;
pub use config::{ExperimentConfig, LoadedConfig, SCHEMA_VERSION};
pub use error::{CliError, CliResult};
pub use manifest::RunManifest;

#[derive(Debug, Parser)]
#[command(name = "uhs", version, about = "Experiments on Schrödinger equations with non-degenerate principal part")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate rays from the configured seeds and classify them as escaped or undecided.
    Rays {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Run the solver over the configured sweep.
    Solve {
        #[arg(short, long)]
        config: PathBuf,
        /// Recompute runs whose records already exist.
        #[arg(long)]
        force: bool,
        /// Worker threads (defaults to the available cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Evaluate the selected estimates; exits 1 when any is violated.
    Verify {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Symbol cache maintenance.
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
    /// Collect records and estimates into tables and plots under a separate directory.
    Report {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum CacheAction {
    /// Build the ray tables needed by K/E tracking for every grid and radius of the sweep.
    Build {
        #[arg(short, long)]
        config: PathBuf,
    },
}

pub fn run(cli: Cli) -> CliResult<Outcome> {
    match cli.command {
        Command::Rays { config } => commands::rays::run(&LoadedConfig::load(&config)?),
        Command::Solve { config, force, jobs } => commands::solve::run(&LoadedConfig::load(&config)?, force, jobs),
        Command::Verify { config } => commands::verify::run(&LoadedConfig::load(&config)?),
        Command::Cache { action: CacheAction::Build { config } } => commands::cache::run(&LoadedConfig::load(&config)?),
        Command::Report { config, output } => commands::report::run(&LoadedConfig::load(&config)?, &output),
    }
}
