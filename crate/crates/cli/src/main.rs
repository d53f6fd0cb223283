mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use config::RunConfig;

#[derive(Parser)]
#[command(name = "qest", version, about = "Causal Wiener estimation of a continuously measured oscillator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Simulation seed, overriding `sim.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Error variances and uncertainty product over the sweep grid (CSV).
    Sweep,
    /// Commutator kernels, error commutator and in-loop equivalence (JSON).
    Verify,
    /// Monte Carlo traces (CSV) and error statistics (JSON).
    Simulate,
}

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Verification(String),
    Runtime(String),
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Verification(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    fn report(&self) -> String {
        let (kind, msg) = match self {
            CliError::Validation(m) => ("validation", m),
            CliError::Verification(m) => ("verification", m),
            CliError::Runtime(m) => ("runtime", m),
        };
        json!({ "error": { "kind": kind, "message": msg, "exit_code": self.code() } }).to_string()
    }
}

impl From<qest::Error> for CliError {
    fn from(e: qest::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.output.dir = out.to_string_lossy().into_owned();
    }
    if let Some(seed) = cli.seed {
        cfg.sim.seed = seed;
    }
    match cli.command {
        Command::Sweep => commands::sweep(&cfg),
        Command::Verify => commands::verify(&cfg),
        Command::Simulate => commands::simulate(cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind::*;
            if matches!(e.kind(), DisplayHelp | DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            eprintln!("{}", CliError::validation(e.to_string().trim_end()).report());
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.report());
            ExitCode::from(e.code())
        }
    }
}
