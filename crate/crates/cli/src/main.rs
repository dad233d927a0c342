#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod report;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Core(metastab::Error),
    Usage(String),
    Io(String),
    /// Some checks failed; the table has already been printed.
    Verification(usize),
}

impl From<metastab::Error> for CliError {
    fn from(e: metastab::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if !e.is_validation() => 2,
            CliError::Verification(_) => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Usage(s) | CliError::Io(s) => f.write_str(s),
            CliError::Verification(n) => write!(f, "{n} check(s) failed"),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "metastab", version, about = "Metastability analysis of diffusions on the circle")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Options,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Decomposition, wells and critical points as JSON.
    Analyze,
    /// Asymptotic and quadrature stationary densities as CSV.
    Density,
    /// Capacities between every pair of wells as CSV.
    Capacity,
    /// The reduced chain as JSON.
    Chain,
    /// Solutions of the Poisson equation as CSV.
    Poisson,
    /// Monte Carlo traces as CSV and a comparison with the chain as JSON.
    Simulate,
    /// Run the check suite on the built-in drifts.
    Verify,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Options {
    /// Drift spec JSON file.
    #[arg(long, global = true)]
    pub drift: Option<PathBuf>,
    /// Comma-separated noise levels.
    #[arg(long, global = true, value_delimiter = ',')]
    pub epsilon: Vec<f64>,
    /// Well cut level; defaults to half the well depth.
    #[arg(long, global = true)]
    pub vcut: Option<f64>,
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, default_value_t = 100)]
    pub paths: usize,
    /// Time step; defaults to eps / 20.
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Path length on the slow time scale.
    #[arg(long, global = true, default_value_t = 10.0)]
    pub horizon: f64,
    /// Values of the chain observable for `poisson`; defaults to the state index.
    #[arg(long, global = true, value_delimiter = ',')]
    pub observable: Vec<f64>,
    /// Grid points for `density` and `poisson`.
    #[arg(long, global = true, default_value_t = 1000)]
    pub grid: usize,
    #[arg(long, global = true, default_value_t = metastab::drift::DEFAULT_TOL_ROOT)]
    pub tol_root: f64,
    #[arg(long, global = true, default_value_t = metastab::drift::DEFAULT_TOL_DERIV)]
    pub tol_deriv: f64,
    #[arg(long, global = true, default_value_t = metastab::landscape::DEFAULT_TOL_LEVEL)]
    pub tol_level: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
