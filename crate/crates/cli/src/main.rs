//! `consensus-lab`: spectral analysis, gain design and step-response
//! simulation of accelerated consensus updates from the command line.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use consensus_lab::Error;

#[derive(Parser, Debug)]
#[command(name = "consensus-lab", version, about = "Design and simulate accelerated consensus updates on directed networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Eigenvalues of the pinned Laplacian and their summary.
    Analyze(Common),
    /// Synthesize gains for one method.
    Design(Common),
    /// Step response from x_i to x_f.
    Simulate(Common),
    /// Closed-loop roots for every eigenvalue.
    Roots(Common),
    /// Closed-loop roots of the perturbed example network over a range of e.
    Perturb(PerturbArgs),
    /// Per-eigenvalue stability report for a gain triple.
    Stability(Common),
    /// Every design strategy side by side with reference values.
    #[command(name = "reproduce-table1")]
    ReproduceTable1(Common),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Graph document; the built-in example network when omitted.
    #[arg(long, value_name = "FILE")]
    graph: Option<PathBuf>,
    /// Use the example network with a weight-e link from agent 1 into agent 2.
    #[arg(long, value_name = "E", conflicts_with = "graph")]
    perturbation: Option<f64>,
    /// no-dsr, robust-adsr, adsr, nesterov, momentum or outdated.
    #[arg(long, value_name = "NAME")]
    method: Option<String>,
    #[arg(long, value_name = "sigma|ts", default_value = "sigma")]
    objective: String,
    #[arg(long = "alpha-hat", value_name = "F", allow_negative_numbers = true)]
    alpha_hat: Option<f64>,
    #[arg(long, value_name = "F", allow_negative_numbers = true)]
    beta1: Option<f64>,
    #[arg(long, value_name = "F", allow_negative_numbers = true)]
    beta2: Option<f64>,
    #[arg(long, value_name = "F", default_value_t = 0.0, allow_negative_numbers = true)]
    xi: f64,
    #[arg(long, value_name = "F", default_value_t = 100.0, allow_negative_numbers = true)]
    xf: f64,
    #[arg(long, value_name = "N", default_value_t = 200)]
    steps: usize,
    /// Settling band as a fraction of |xf - xi|.
    #[arg(long, value_name = "F", default_value_t = 0.05)]
    band: f64,
    /// Desired inter-agent spacing seen by the decentralized harness.
    #[arg(long, value_name = "F", default_value_t = 0.0, allow_negative_numbers = true)]
    d0: f64,
    /// Run one agent per node on relative measurements only.
    #[arg(long)]
    decentralized: bool,
    /// Write all artifacts and a manifest into this directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Debug, Clone)]
pub struct PerturbArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long = "e-min", default_value_t = 1e-5)]
    e_min: f64,
    #[arg(long = "e-max", default_value_t = 1e-1)]
    e_max: f64,
    /// Number of log-spaced perturbation values.
    #[arg(long, default_value_t = 5)]
    count: usize,
}

/// Failure with its process exit code.
#[derive(Debug)]
pub enum CliError {
    Lib(Error),
    Usage(String),
    Io(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 1,
            CliError::Lib(e) => match e {
                Error::Infeasible | Error::Diverged { .. } => 3,
                Error::EigenNonConvergence(_) | Error::EigenResidual { .. } | Error::NonPositiveSpectrum { .. } => 4,
                _ => 2,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Lib(e) => e.to_string(),
            CliError::Usage(m) | CliError::Io(m) => m.clone(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Analyze(c) => commands::analyze(c),
        Command::Design(c) => commands::design(c),
        Command::Simulate(c) => commands::simulate(c),
        Command::Roots(c) => commands::roots(c),
        Command::Perturb(p) => commands::perturb(p),
        Command::Stability(c) => commands::stability(c),
        Command::ReproduceTable1(c) => commands::reproduce_table(c),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
