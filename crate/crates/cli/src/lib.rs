//! Command-line workflows: normal modes, pulse shaping, drift scans, echo
//! compilation, shift synthesis and dynamics validation.

pub mod commands;
pub mod config;
pub mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    NoConvergence(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Validation(_) => 2,
            CliError::NoConvergence(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "iongate", version, about = "Trapped-ion qudit gate design and verification")]
pub struct Cli {
    /// Job configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "IONGATE_THREADS", default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normal-mode frequencies and Lamb-Dicke parameters as CSV.
    Modes,
    /// Optimize a pulse for the configured target and stabilization.
    Shape,
    /// Phase errors of a pulse against radial-frequency drift.
    Scan {
        #[arg(long)]
        pulse: PathBuf,
    },
    /// Compile an echo sequence and report its phase ledger.
    Echo,
    /// Swap list for the cyclic shift by `m` on a `d`-level qudit.
    Shift {
        d: usize,
        #[arg(allow_negative_numbers = true)]
        m: i64,
    },
    /// Integrate the dynamics on a mode subset and compare with the closed form.
    Validate {
        #[arg(long)]
        pulse: PathBuf,
    },
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if cli.threads > 0 {
        // A second initialization (e.g. from tests) is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    commands::dispatch(&cli)
}

pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
