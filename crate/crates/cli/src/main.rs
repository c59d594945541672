//! `sntk`: experiment runner for sparse-activation NTK training.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::ExperimentConfig;
use error::CliError;
use output::OutputDir;

#[derive(Parser)]
#[command(name = "sntk", version, about = "Sparse-activation NTK experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set model.B=1.0`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Run seed (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Train and write the loss trace, checkpoint and summary.
    Train,
    /// Track the activation fraction during training.
    Sparsity,
    /// Compare the empirical kernel at initialization with the limit.
    Ntk,
    /// Evaluate every bound against a training run.
    Bounds,
    /// Run the numerical cross-checks.
    Verify,
    /// Time dense against sparse gradient steps.
    Bench,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::load(cli.common.config.as_deref(), &cli.common.set)?;
    if let Some(dir) = cli.common.out {
        cfg.output.dir = dir;
    }
    if let Some(seed) = cli.common.seed {
        cfg.seed = seed;
    }
    let mut out = OutputDir::open(&cfg.output.dir)?;
    match cli.command {
        Command::Train => commands::train::run(&cfg, &mut out),
        Command::Sparsity => commands::sparsity::run(&cfg, &mut out),
        Command::Ntk => commands::ntk::run(&cfg, &mut out),
        Command::Bounds => commands::bounds::run(&cfg, &mut out),
        Command::Verify => commands::verify::run(&cfg, &mut out),
        Command::Bench => commands::bench::run(&cfg, &mut out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sntk: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
