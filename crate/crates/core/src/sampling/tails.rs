//! Empirical checks of tail and moment identities under `ψ`.

use ndarray::Array2;
use serde::Serialize;

use super::PsiSampler;
use crate::error::{Error, Result};
use crate::exact::{BlockEvaluator, Budget, WeightMatrix};
use crate::margins::Margins;
use crate::matrix::{check_shape, to_nested};
use crate::rng::{chunked, Purpose};
use crate::scaling::{FactorEvaluator, DEFAULT_TOL};
use crate::stats::LogMean;

#[derive(Clone, Debug, PartialEq)]
pub struct TailConfig {
    pub samples: usize,
    pub seed: u64,
    /// Exponents `λ_ij < 1` for the Laplace-transform check; skipped if absent.
    pub lambdas: Option<Array2<f64>>,
    /// Evaluate `ln p` on every sample and compare it with this threshold.
    pub log_p_threshold: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Lemma93Check {
    /// `2 (N + mn)`.
    pub threshold: f64,
    pub exceed_count: usize,
    pub frequency: f64,
    /// `(3/4)^(N + mn)`.
    pub ceiling: f64,
    /// Three binomial standard deviations at the ceiling.
    pub slack: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogPSummary {
    pub mean: f64,
    pub min: f64,
    pub median: f64,
    pub q90: f64,
    pub q99: f64,
    pub max: f64,
    pub threshold: f64,
    pub fraction_above: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Lemma91Check {
    pub lambdas: Vec<Vec<f64>>,
    pub empirical_mean: f64,
    pub std_error: f64,
    /// `T(R,C;W) / #(R,C) · Π w_ij` with `w_ij = 1 / (1 - λ_ij)`.
    pub exact: f64,
    pub z_score: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailReport {
    pub samples: usize,
    pub seed: u64,
    pub lemma93: Lemma93Check,
    pub log_p: Option<LogPSummary>,
    pub lemma91: Option<Lemma91Check>,
}

struct ChunkResult {
    exceed: usize,
    log_p: Vec<f64>,
    log_laplace: Vec<f64>,
}

/// Draws `config.samples` points from `ψ` and reports:
///
/// - the frequency of `Σ x_ij >= 2(N + mn)` against the ceiling
///   `(3/4)^(N + mn)`;
/// - optionally the distribution of `ln p(X)`;
/// - optionally the sample mean of `exp(Σ λ_ij x_ij)` against its exact
///   value `T(R,C;W) / #(R,C) · Π w_ij`.
pub fn empirical_tail_checks(margins: &Margins, config: &TailConfig, budget: &Budget) -> Result<TailReport> {
    if config.samples == 0 {
        return Err(Error::InvalidParameter("samples must be positive".into()));
    }
    if let Some(l) = &config.lambdas {
        check_shape(l, margins.m(), margins.n())?;
        if l.iter().any(|v| !(v.is_finite() && *v < 1.0)) {
            return Err(Error::InvalidParameter("every lambda must be finite and < 1".into()));
        }
    }
    let sampler = PsiSampler::new(margins, budget)?;
    let factor = match config.log_p_threshold {
        Some(_) => {
            let f = FactorEvaluator::new(margins, DEFAULT_TOL, budget)?;
            if !f.is_exact() {
                return Err(Error::BudgetExceeded {
                    what: "block permanent DP",
                    required: u128::MAX,
                    budget: budget.dp_states as u128,
                });
            }
            Some(f)
        }
        None => None,
    };
    let shape = margins.total() as f64 + margins.cells() as f64;
    let threshold = 2.0 * shape;

    let chunks: Vec<Result<ChunkResult>> = chunked(config.samples, config.seed, Purpose::Psi, |rng, len| {
        let mut out = ChunkResult {
            exceed: 0,
            log_p: Vec::new(),
            log_laplace: Vec::new(),
        };
        for _ in 0..len {
            let s = sampler.sample(rng);
            if s.x.sum() >= threshold {
                out.exceed += 1;
            }
            if let Some(f) = &factor {
                out.log_p.push(f.log_p(&s.x)?.lower());
            }
            if let Some(l) = &config.lambdas {
                out.log_laplace.push(l.iter().zip(&s.x).map(|(a, b)| a * b).sum());
            }
        }
        Ok(out)
    });
    let mut exceed = 0;
    let mut log_p = Vec::new();
    let mut log_laplace = Vec::new();
    for c in chunks {
        let c = c?;
        exceed += c.exceed;
        log_p.extend(c.log_p);
        log_laplace.extend(c.log_laplace);
    }

    let k = config.samples as f64;
    let ceiling = 0.75f64.powf(shape);
    let frequency = exceed as f64 / k;
    let slack = 3.0 * (ceiling * (1.0 - ceiling) / k).sqrt();
    let lemma93 = Lemma93Check {
        threshold,
        exceed_count: exceed,
        frequency,
        ceiling,
        slack,
        pass: frequency <= ceiling + slack,
    };

    let log_p = config.log_p_threshold.map(|t| summarize(log_p, t));

    let lemma91 = match &config.lambdas {
        Some(l) => {
            let w = WeightMatrix::new(l.mapv(|v| 1.0 / (1.0 - v)))?;
            let block = BlockEvaluator::new(margins, budget)?;
            let ln_t = block.log_weighted(&w)?.ln();
            let ln_count = sampler.tables().count().ln();
            let ln_exact = ln_t - ln_count + w.as_array().iter().map(|v| v.ln()).sum::<f64>();
            let emp = LogMean::from_logs(&log_laplace);
            let exact = ln_exact.exp();
            let mean = emp.log_mean.exp();
            let se = emp.log_std_error.exp();
            let z = if se > 0.0 { (mean - exact) / se } else if mean == exact { 0.0 } else { f64::INFINITY };
            Some(Lemma91Check {
                lambdas: to_nested(l),
                empirical_mean: mean,
                std_error: se,
                exact,
                z_score: z,
                pass: z.abs() <= 3.0,
            })
        }
        None => None,
    };

    Ok(TailReport {
        samples: config.samples,
        seed: config.seed,
        lemma93,
        log_p,
        lemma91,
    })
}

fn summarize(mut values: Vec<f64>, threshold: f64) -> LogPSummary {
    let k = values.len();
    let above = values.iter().filter(|&&v| v > threshold).count();
    let mean = values.iter().sum::<f64>() / k as f64;
    values.sort_by(f64::total_cmp);
    let q = |p: f64| values[((p * (k - 1) as f64).round() as usize).min(k - 1)];
    LogPSummary {
        mean,
        min: values[0],
        median: q(0.5),
        q90: q(0.9),
        q99: q(0.99),
        max: values[k - 1],
        threshold,
        fraction_above: above as f64 / k as f64,
    }
}
