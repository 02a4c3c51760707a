//! Batch driver for the gravnet pipeline: synth, fit, predict, netstats,
//! compare and report, each reading the previous stage's artifacts from
//! the output directory.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;

use clap::{Parser, Subcommand};

pub use config::{Flags, RunConfig};
pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "gravnet", version, about = "Gravity-model trade networks: fit, predict, compare")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Generate a synthetic panel with known coefficients
    Synth,
    /// Fit every (year, model) cross-section
    Fit,
    /// Predicted weights, link probabilities and binary networks
    Predict,
    /// Node statistics of observed and predicted networks
    Netstats,
    /// K-S tests and ensemble comparisons
    Compare,
    /// Markdown summary of the comparison report
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Fit => "fit",
            Command::Predict => "predict",
            Command::Netstats => "netstats",
            Command::Compare => "compare",
            Command::Report => "report",
        }
    }
}

/// Runs one command; returns the artifacts written, relative to the output
/// directory.
pub fn run_command(command: Command, cfg: &RunConfig) -> Result<Vec<String>> {
    match command {
        Command::Synth => commands::synth(cfg),
        Command::Fit => commands::fit(cfg),
        Command::Predict => commands::predict(cfg),
        Command::Netstats => commands::netstats(cfg),
        Command::Compare => commands::compare(cfg),
        Command::Report => commands::report(cfg),
    }
}

pub fn run(cli: &Cli) -> Result<Vec<String>> {
    let cfg = RunConfig::resolve(&cli.flags)?;
    run_command(cli.command, &cfg)
}
