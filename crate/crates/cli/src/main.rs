use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod manifest;

/// Exit codes: 0 all checks passed, 1 a check failed, 2 usage error, 3 I/O error.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Io(String),
}

impl From<trajmeasure::Error> for Failure {
    fn from(e: trajmeasure::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "trajmeasure", version, about = "Conditional particle measures for stochastic recurrences")]
pub struct Cli {
    /// Master seed; every random stream is derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output file (stdout when omitted).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Iterate x_{n+1} = phi(x_n, xi_{n+1}) and write index,x,xi as CSV.
    Simulate {
        /// `fractional` or `contraction:a=<value>`.
        map: String,
        steps: u64,
    },
    /// Evaluate the characteristic-functional residual on a conditional measure.
    HopfCheck {
        map: String,
        #[arg(long, default_value_t = 10_000)]
        particles: usize,
        /// Window length; indices 0..window-1.
        #[arg(long, default_value_t = 16)]
        window: i64,
        /// Random specs evaluated in addition to the fixed grid.
        #[arg(long, default_value_t = 32)]
        specs: usize,
        /// Shuffle the last coordinate across particles (negative control).
        #[arg(long)]
        perturb: bool,
    },
    /// Run a diagnostic suite: tsirelson, stationarity, rotation,
    /// conditional-law, consistency or equivariance.
    Diagnose {
        suite: String,
        #[command(flatten)]
        opts: DiagnoseOpts,
    },
}

#[derive(Args, Debug, Clone)]
pub struct DiagnoseOpts {
    /// Sample size or replica count (suite-dependent default).
    #[arg(long)]
    pub n: Option<usize>,
    /// Particles per conditional measure (suite-dependent default).
    #[arg(long)]
    pub particles: Option<usize>,
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    /// Rotation time for the rotation suite.
    #[arg(long, default_value_t = PI / 3.0)]
    pub t: f64,
    /// Window length; indices 0..window-1.
    #[arg(long, default_value_t = 11)]
    pub window: i64,
    /// Index at which statistics of x_n are evaluated.
    #[arg(long, default_value_t = 5)]
    pub index: i64,
    #[arg(long, default_value = "fractional")]
    pub map: String,
    /// Frozen noise paths for the conditional statistic.
    #[arg(long, default_value_t = 10)]
    pub paths: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,2,5", allow_hyphen_values = true)]
    pub shifts: Vec<i64>,
    #[arg(long, default_value_t = 0.8, allow_hyphen_values = true)]
    pub rho: f64,
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    pub a: f64,
    /// Raw per-replica values as CSV, for plotting.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("I/O error: {msg}");
            ExitCode::from(3)
        }
    }
}
