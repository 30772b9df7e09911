//! The `tally` command-line interface.
//!
//! Every command except `benchmark` reads a margins file
//! `{"rows": [...], "cols": [...]}` (optional for `check`) and writes one
//! report to standard output, as JSON or as a one-row CSV table. Reports
//! echo the command, input path, seed and every knob.
//!
//! Exit codes: 0 on success, 1 on invalid input, 2 when a budget or an
//! iteration limit is exceeded.

mod bench;
mod checks;
mod commands;
mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use thiserror::Error;

use tally_core::{Budget, Margins};

pub use bench::{run_benchmark, BenchConfig, BENCH_COLUMNS};
pub use checks::Suite;
pub use output::CSV_VERSION;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{path}: {}{message}", position(*line, *column))]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Core(#[from] tally_core::Error),

    #[error("{0}")]
    Usage(String),

    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_resource_limit() => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "tally", version, about = "Count contingency tables with given margins")]
pub struct Cli {
    /// Master seed for every randomized command.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Worker threads; defaults to the number of CPUs. Results do not
    /// depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// Include wall-clock times, which makes output non-reproducible.
    #[arg(long, global = true)]
    pub timings: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact count by dynamic programming.
    Exact { input: PathBuf },
    /// Monte Carlo estimate of the count.
    Estimate(EstimateArgs),
    /// The typical table and the upper bound exp g(X*).
    Typical {
        input: PathBuf,
        #[arg(long, default_value_t = tally_core::typical::DEFAULT_TOL)]
        tol: f64,
    },
    /// Sinkhorn scaling of a positive matrix and the factorization f = p φ.
    Scale {
        input: PathBuf,
        /// JSON file holding a nested array of positive entries.
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value_t = tally_core::scaling::DEFAULT_TOL)]
        tol: f64,
    },
    /// Upper bounds on the count and on the typical entries.
    Bounds { input: PathBuf },
    /// Smoothness classification of the margins.
    Smoothness(SmoothnessArgs),
    /// Uniformly random tables with the given margins.
    SampleTables {
        input: PathBuf,
        #[arg(long, default_value_t = 10)]
        count: usize,
    },
    /// Run a property suite.
    Check(CheckArgs),
    /// Compare exact and estimated counts over a directory of margin files.
    Benchmark {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Uniform samples for the plain estimator and the φ integral.
        #[arg(long, default_value_t = 20_000)]
        samples: usize,
        #[arg(long, default_value_t = 2_000)]
        nu_samples: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Plain,
    Phi,
    Full,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Full)]
    pub method: MethodArg,
    /// Uniform simplex samples.
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    /// Chain samples for the `full` method.
    #[arg(long, default_value_t = 10_000)]
    pub nu_samples: usize,
    /// Truncation level `ln τ = D (ln N)^2`; `inf` disables truncation.
    #[arg(long, default_value_t = 1.0)]
    pub delta_exponent: f64,
    #[arg(long, default_value_t = tally_core::sampling::ChainConfig::DEFAULT_BURN_IN)]
    pub burnin: usize,
    #[arg(long, default_value_t = tally_core::sampling::ChainConfig::DEFAULT_THINNING)]
    pub thin: usize,
    #[arg(long, default_value_t = tally_core::sampling::ChainConfig::DEFAULT_CHAINS)]
    pub chains: usize,
    /// Interior margin δ of the chain's domain; defaults to 1/(1000 mn (N+mn)).
    #[arg(long)]
    pub delta_interior: Option<f64>,
    /// Also count exactly and report the z-score of the estimate.
    #[arg(long)]
    pub compare: bool,
}

#[derive(Debug, Args)]
pub struct SmoothnessArgs {
    pub input: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    pub golden_rho: f64,
    #[arg(long, default_value_t = 0.1)]
    pub golden_eps: f64,
    #[arg(long, default_value_t = 2.0)]
    pub linear_beta: f64,
    #[arg(long, default_value_t = 0.4)]
    pub linear_eps: f64,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Margins to test; each suite has a built-in set otherwise.
    pub input: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub suite: Suite,
    /// Instances, points or samples, depending on the suite.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Common exponent `λ < 1` for the Laplace-transform suite.
    #[arg(long, default_value_t = 0.25)]
    pub lambda: f64,
}

/// Parses `args`, runs the command, prints the report or the error and
/// returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs the command and returns the text destined for standard output.
pub fn execute(cli: &Cli) -> CliResult<String> {
    let budget = Budget::from_env()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        pool = pool.num_threads(w);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    pool.install(|| commands::dispatch(cli, &budget))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_owned(),
        line: e.line(),
        column: e.column(),
        message: strip_position(&e.to_string()),
    })
}

pub fn read_margins(path: &Path) -> CliResult<Margins> {
    read_json(path)
}

fn position(line: usize, column: usize) -> String {
    if line == 0 {
        String::new()
    } else {
        format!("line {line}, column {column}: ")
    }
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}
