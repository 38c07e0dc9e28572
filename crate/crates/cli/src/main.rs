mod commands;
mod output;
mod spec;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

/// Failure classes, each with its own exit code.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable or malformed spec file.
    Parse(String),
    /// The computation itself failed.
    Numeric(tmvn_core::Error),
    /// Bad flags or arguments.
    Usage(String),
    /// Bad arguments caught by the library (e.g. duplicate indices).
    UsageNumeric(tmvn_core::Error),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Usage(_) | CliError::UsageNumeric(_) => 4,
            CliError::Io(_) => 1,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Parse(m) => format!("ParseError: {m}"),
            CliError::Numeric(e) | CliError::UsageNumeric(e) => format!("{}: {e}", e.name()),
            CliError::Usage(m) => format!("UsageError: {m}"),
            CliError::Io(m) => format!("IoError: {m}"),
        }
    }
}

impl From<tmvn_core::Error> for CliError {
    fn from(e: tmvn_core::Error) -> Self {
        CliError::Numeric(e)
    }
}

#[derive(Parser, Debug)]
#[command(name = "tmvn", version, about = "Truncated multivariate normal: probabilities, marginals, moments")]
pub struct Cli {
    /// Seed for QMC shifts and sampling
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Maximum lattice points per shift
    #[arg(long, global = true)]
    points: Option<usize>,
    /// Number of random shifts
    #[arg(long, global = true)]
    shifts: Option<usize>,
    /// Absolute error target for rectangle probabilities
    #[arg(long, global = true)]
    target_error: Option<f64>,
    /// Write output to FILE (atomically) instead of stdout
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Emit grid, trace and draw payloads as CSV
    #[arg(long, global = true)]
    csv: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Rectangle probability α = P(a ≤ X ≤ b)
    Prob { spec: PathBuf },
    /// Truncated mean and covariance
    Moments {
        spec: PathBuf,
        #[arg(long, value_enum, default_value_t = MomentRoute::Auto)]
        method: MomentRoute,
    },
    /// One- or two-dimensional marginal density on a grid
    Marginal {
        spec: PathBuf,
        /// 1-based variable indices: q or q,r
        #[arg(long)]
        dims: String,
        /// min:max:steps, or one per dimension separated by a comma
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
    },
    /// Monte Carlo draws, moment estimates, or running-estimate traces
    Sample {
        spec: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value_t = SamplerArg::Rejection)]
        method: SamplerArg,
        /// Emit running estimates every STRIDE draws
        #[arg(long, value_name = "STRIDE")]
        trace: Option<usize>,
        /// Gibbs burn-in sweeps (default 100·d)
        #[arg(long)]
        burn_in: Option<usize>,
        #[arg(long, default_value_t = 1)]
        thinning: usize,
    },
    /// Precision matrix before and after truncation
    Precision {
        spec: PathBuf,
        /// Truncation box lo:hi,... overriding the file's bounds
        #[arg(long = "box", value_name = "BOX", allow_hyphen_values = true)]
        bounds: Option<String>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum MomentRoute {
    Auto,
    Full,
    Jk,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplerArg {
    Rejection,
    Gibbs,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
