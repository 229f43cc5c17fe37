// SPDX-License-Identifier: Apache-2.0

//! The `rydopt` command line: `optimize`, `sweep` and `gradcheck`.
//!
//! Exit codes: 0 on success, 1 for invalid input, 2 for runtime failures
//! (including aborted optimizations and failed gradient checks).

mod commands;
pub mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub use commands::{cmd_gradcheck, cmd_optimize, cmd_sweep};
pub use manifest::RunManifest;

use crate::error::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_RUNTIME: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "rydopt", version, about = "Pulse optimization for Rydberg atom arrays")]
pub struct Cli {
    /// Worker threads (default: all cores for sweeps, 1 otherwise).
    #[arg(long, global = true, env = "RYDOPT_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimize one experiment and write its log, best parameters and drive.
    Optimize(OptimizeArgs),
    /// Run the experiments behind one results table.
    Sweep(SweepArgs),
    /// Compare analytic and finite-difference gradients at the initial parameters.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// Experiment config (TOML).
    #[arg(long, env = "RYDOPT_CONFIG")]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long, env = "RYDOPT_OUT", default_value = "out")]
    pub out: PathBuf,
    #[arg(long, env = "RYDOPT_SEED")]
    pub seed: Option<u64>,
    #[arg(long, env = "RYDOPT_EPOCHS")]
    pub epochs: Option<usize>,
    /// Continue from the checkpoint in the output directory.
    #[arg(long)]
    pub resume: bool,
    /// Write a checkpoint every this many epochs.
    #[arg(long, default_value_t = 25)]
    pub checkpoint_every: usize,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// T1, T2, T3, T4 or T5.
    #[arg(long, env = "RYDOPT_TABLE")]
    pub table: String,
    #[arg(long, env = "RYDOPT_OUT", default_value = "out")]
    pub out: PathBuf,
    /// Seeds per row; repeat or separate with commas.
    #[arg(long, env = "RYDOPT_SEED", value_delimiter = ',', default_values_t = [0u64, 1, 2])]
    pub seed: Vec<u64>,
    #[arg(long, env = "RYDOPT_EPOCHS")]
    pub epochs: Option<usize>,
    /// Skip rows with more qubits.
    #[arg(long)]
    pub max_qubits: Option<usize>,
    /// Keep only rows with these qubit counts.
    #[arg(long, value_delimiter = ',')]
    pub qubits: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, env = "RYDOPT_CONFIG")]
    pub config: PathBuf,
    #[arg(long, env = "RYDOPT_OUT", default_value = "out")]
    pub out: PathBuf,
    #[arg(long, env = "RYDOPT_SEED")]
    pub seed: Option<u64>,
}

/// Maps an error to its exit code.
pub fn exit_code(e: &Error) -> u8 {
    if e.is_validation() {
        EXIT_VALIDATION
    } else {
        EXIT_RUNTIME
    }
}

pub fn run(cli: Cli) -> Result<u8, Error> {
    let threads = cli.threads.unwrap_or(match cli.command {
        Command::Sweep(_) => 0,
        _ => 1,
    });
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid("threads", e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Optimize(a) => cmd_optimize(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
    })
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
