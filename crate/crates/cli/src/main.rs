//! `tumorstrip stationary|spectrum|threshold|evolve --config <path> --out <dir>`
//!
//! Exit codes: 0 success, 1 configuration error, 2 invalid model,
//! 3 numerical tolerance not met, 4 simulation stopped before `t_end`.
//! `TUMORSTRIP_THREADS` caps the worker pool.

mod commands;
mod config;
mod exit;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Command;
use exit::Failure;

#[derive(Parser)]
#[command(name = "tumorstrip", version, about = "Flat tumor layer: stationary state, spectrum and evolution")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Flat stationary state and its profiles.
    Stationary(RunArgs),
    /// Linearized growth rates with the modal oracle.
    Spectrum(RunArgs),
    /// Smallest surface tension with an all-positive spectrum.
    Threshold(RunArgs),
    /// Nonlinear evolution of a perturbed flat layer.
    Evolve(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var("TUMORSTRIP_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::config(format!("TUMORSTRIP_THREADS must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::config(format!("cannot size the thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { exit::CONFIG } else { exit::OK };
            let _ = err.print();
            return ExitCode::from(code as u8);
        }
    };
    let (command, args) = match cli.command {
        Sub::Stationary(a) => (Command::Stationary, a),
        Sub::Spectrum(a) => (Command::Spectrum, a),
        Sub::Threshold(a) => (Command::Threshold, a),
        Sub::Evolve(a) => (Command::Evolve, a),
    };
    let result = configure_threads().and_then(|()| commands::run(command, &args.config, &args.out));
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(failure) => {
            eprintln!("tumorstrip {}: {}", command.name(), failure.message);
            ExitCode::from(failure.code as u8)
        }
    }
}
