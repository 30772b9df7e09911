//! The `benchmark` command: one CSV row per margins file of a corpus.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use tally_core::estimator::{estimate_full, estimate_plain};
use tally_core::exact::count_tables;
use tally_core::margins::{classify_smoothness, SmoothnessParams};
use tally_core::sampling::ChainConfig;
use tally_core::typical::{solve_typical, DEFAULT_TOL};
use tally_core::Budget;

use crate::output::csv_comment;
use crate::{read_margins, CliError, CliResult};

pub const BENCH_COLUMNS: [&str; 21] = [
    "file",
    "status",
    "error_code",
    "error",
    "N",
    "m",
    "n",
    "golden_ratio",
    "linear",
    "strong_alpha",
    "ln_count",
    "log10_count",
    "log_rho",
    "log10_rho",
    "plain_log_estimate",
    "plain_log_std_error",
    "full_log_estimate",
    "full_log_std_error",
    "truncated_fraction",
    "plain_seconds",
    "full_seconds",
];

const FULL_DELTA_EXPONENT: f64 = 1.0;

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub samples: usize,
    pub nu_samples: usize,
    pub seed: u64,
    /// Fill the wall-time columns; they stay empty otherwise so that reruns
    /// are byte-identical.
    pub timings: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    /// One cell per entry of [`BENCH_COLUMNS`].
    pub cells: Vec<String>,
}

impl BenchRow {
    pub fn is_err(&self) -> bool {
        self.cells[1] == "error"
    }
}

/// Runs every `*.json` file of `corpus` in file-name order, writes the table
/// to `out` and returns its rows.
pub fn run_benchmark(corpus: &Path, out: &Path, config: &BenchConfig, budget: &Budget) -> CliResult<Vec<BenchRow>> {
    let io = |path: &Path| {
        let path = path.to_owned();
        move |source| CliError::Io { path, source }
    };
    let mut files: Vec<PathBuf> = std::fs::read_dir(corpus)
        .map_err(io(corpus))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .map_err(io(corpus))?;
    files.retain(|p| p.is_file() && p.extension().is_some_and(|e| e == "json"));
    files.sort();

    let rows: Vec<BenchRow> = files.par_iter().map(|f| bench_one(f, config, budget)).collect();

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(BENCH_COLUMNS)?;
    for row in &rows {
        w.write_record(&row.cells)?;
    }
    let body = w.into_inner().expect("in-memory CSV");
    let mut text = csv_comment("benchmark").into_bytes();
    text.extend(body);
    std::fs::write(out, text).map_err(io(out))?;
    Ok(rows)
}

#[derive(Default)]
struct Partial {
    cells: Vec<(usize, String)>,
}

impl Partial {
    fn set(&mut self, column: &str, value: impl ToString) {
        let i = BENCH_COLUMNS.iter().position(|c| *c == column).expect("known column");
        self.cells.push((i, value.to_string()));
    }
}

fn bench_one(path: &Path, config: &BenchConfig, budget: &Budget) -> BenchRow {
    let mut partial = Partial::default();
    let file = path.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
    partial.set("file", &file);
    let outcome = fill(path, config, budget, &mut partial);
    match outcome {
        Ok(()) => partial.set("status", "ok"),
        Err(e) => {
            partial.set("status", "error");
            partial.set("error_code", e.exit_code());
            partial.set("error", e);
        }
    }
    let mut cells = vec![String::new(); BENCH_COLUMNS.len()];
    for (i, v) in partial.cells {
        cells[i] = v;
    }
    BenchRow { cells }
}

fn fill(path: &Path, config: &BenchConfig, budget: &Budget, row: &mut Partial) -> CliResult<()> {
    let ln10 = std::f64::consts::LN_10;
    let margins = read_margins(path)?;
    row.set("N", margins.total());
    row.set("m", margins.m());
    row.set("n", margins.n());

    let typical = solve_typical(&margins, DEFAULT_TOL)?;
    let smooth = classify_smoothness(&margins, Some(&typical), &SmoothnessParams::default())?;
    row.set("golden_ratio", smooth.golden_ratio);
    row.set("linear", smooth.linear);
    row.set("strong_alpha", smooth.strong_alpha.unwrap_or(f64::NAN));
    row.set("log_rho", typical.log_rho);
    row.set("log10_rho", typical.log_rho / ln10);

    let count = count_tables(&margins, budget)?;
    row.set("ln_count", count.ln());
    row.set("log10_count", count.log10());

    let start = Instant::now();
    let plain = estimate_plain(&margins, config.samples, config.seed, budget)?;
    let plain_time = start.elapsed().as_secs_f64();
    row.set("plain_log_estimate", plain.log_estimate);
    row.set("plain_log_std_error", plain.log_std_error);

    let start = Instant::now();
    let chain = ChainConfig::for_margins(&margins, config.seed);
    let full = estimate_full(&margins, config.samples, config.nu_samples, FULL_DELTA_EXPONENT, &chain, budget)?;
    let full_time = start.elapsed().as_secs_f64();
    row.set("full_log_estimate", full.log_estimate);
    row.set("full_log_std_error", full.log_std_error);
    row.set("truncated_fraction", full.truncated_fraction.unwrap_or(0.0));

    if config.timings {
        row.set("plain_seconds", plain_time);
        row.set("full_seconds", full_time);
    }
    Ok(())
}
