//! `cqosc` — hybrid classical-quantum oscillator experiments.
//!
//! Subcommands read a flat `key = value` config file with one section per
//! subcommand, run deterministically for a given (config, seed), and write
//! CSV/JSON artifacts plus a manifest embedding the config and its hash.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cqosc", version, about = "Classical-quantum oscillator toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file (flat key = value with [sections]).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the `seed` key of the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Most-probable-path and saddle solutions; writes path and residual CSVs.
    Mpp(RunArgs),
    /// Free or corrected correlator scans.
    Correlators(RunArgs),
    /// Oracle-equivalence report: lattice vs closed forms, order sweep.
    LatticeCheck(RunArgs),
    /// Langevin ensemble of the diffusive classical sector.
    Langevin(RunArgs),
    /// Decoherence-weight surface over branch-difference boundary data.
    DecoherenceScan(RunArgs),
}

/// CLI failure with a machine-readable name and a process exit code
/// (2 for configuration problems, 1 for everything else).
pub struct CliError {
    pub name: String,
    pub message: String,
    pub code: u8,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            name: "ConfigError".into(),
            message: message.into(),
            code: 2,
        }
    }

    pub fn tolerance(message: impl Into<String>) -> Self {
        CliError {
            name: "ToleranceFailure".into(),
            message: message.into(),
            code: 1,
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError {
            name: "IoError".into(),
            message: message.into(),
            code: 1,
        }
    }
}

impl From<cqosc::Error> for CliError {
    fn from(e: cqosc::Error) -> Self {
        CliError {
            name: e.name().to_string(),
            message: e.to_string(),
            code: if e.name() == "ConfigError" { 2 } else { 1 },
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::io(e.to_string())
    }
}

fn init_thread_pool() -> Result<(), CliError> {
    if let Ok(raw) = std::env::var("CQOSC_THREADS") {
        let threads: usize = raw
            .parse()
            .map_err(|_| CliError::config(format!("CQOSC_THREADS must be an integer, got {raw:?}")))?;
        if threads == 0 {
            return Err(CliError::config("CQOSC_THREADS must be at least 1"));
        }
        // Outputs are scheduling-independent, so the cap only affects speed.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    Ok(())
}

fn run() -> Result<(), CliError> {
    init_thread_pool()?;
    let cli = Cli::parse();
    match cli.command {
        Command::Mpp(args) => commands::mpp::run(&args),
        Command::Correlators(args) => commands::correlators::run(&args),
        Command::LatticeCheck(args) => commands::lattice_check::run(&args),
        Command::Langevin(args) => commands::langevin::run(&args),
        Command::DecoherenceScan(args) => commands::decoherence::run(&args),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = serde_json::json!({ "error": e.name, "message": e.message });
            eprintln!("{report}");
            ExitCode::from(e.code)
        }
    }
}
