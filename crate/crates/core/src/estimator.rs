//! Monte Carlo estimators of `#(R,C)`.
//!
//! With `Δ` the simplex of positive `m x n` matrices summing to one and
//! expectations over its uniform measure,
//!
//! - plain: `#(R,C) = E[f(X)]`;
//! - `φ` integral: `E[φ(X)]`, a lower estimate of `#(R,C)` since `p >= 1`;
//! - full: `#(R,C) ≈ E[φ 1_{Δ_δ}] · E_ν[p̄]`, where `ν` has density
//!   proportional to `φ` on the δ-interior `Δ_δ` and `p̄ = min(p, τ)` with
//!   `τ = exp(δ_exp (ln N)²)`.
//!
//! Standard errors are computed in linear scale and mapped to the log
//! domain by the delta method.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{count_tables, BlockEvaluator, Budget};
use crate::margins::Margins;
use crate::rng::{chunked, Purpose};
use crate::sampling::{sample_nu, sample_simplex_uniform, ChainConfig};
use crate::scaling::{p_upper_bound, FactorEvaluator, PhiEvaluator, DEFAULT_TOL};
use crate::special::{ln_factorial, ln_gamma};
use crate::stats::{batch_means, LogMean};

/// Batches per chain for the Markov chain standard error.
const BATCHES_PER_CHAIN: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Plain,
    PhiOnly,
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FullComponents {
    /// `ln E[φ 1_{Δ_δ}]` under the uniform measure.
    pub log_phi_integral: f64,
    pub phi_rel_error: f64,
    /// Fraction of uniform samples that fell in `Δ_δ`.
    pub interior_fraction: f64,
    /// `1 - (1 - mnδ)^(N+mn-1)`, a bound on the share of `∫f` outside `Δ_δ`.
    pub interior_mass_deficit_bound: f64,
    /// `ln` of the sample mean of `p̄` under the chain.
    pub log_mean_p_bar: f64,
    pub p_bar_rel_error: f64,
    pub max_log_p: f64,
    /// Upper bound on `ln p` over the whole simplex.
    pub log_p_upper_bound: f64,
    pub acceptance_rate: f64,
    pub restarts: usize,
    pub chain: ChainConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateReport {
    pub method: Method,
    /// Natural log of the estimate.
    pub log_estimate: f64,
    pub log10_estimate: f64,
    /// Delta-method standard error of `log_estimate`.
    pub log_std_error: f64,
    /// Natural log of the linear-scale standard error.
    pub log_linear_std_error: f64,
    pub samples_used: usize,
    pub seed: u64,
    pub samples: usize,
    pub nu_samples: Option<usize>,
    pub delta_exponent: Option<f64>,
    /// `ln τ`; absent when truncation is disabled.
    pub tau_log: Option<f64>,
    pub truncated_fraction: Option<f64>,
    pub components: Option<FullComponents>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

impl EstimateReport {
    fn new(method: Method, log_estimate: f64, rel_error: f64, samples: usize, seed: u64) -> Self {
        EstimateReport {
            method,
            log_estimate,
            log10_estimate: log_estimate / std::f64::consts::LN_10,
            log_std_error: rel_error,
            log_linear_std_error: log_estimate + rel_error.ln(),
            samples_used: samples,
            seed,
            samples,
            nu_samples: None,
            delta_exponent: None,
            tau_log: None,
            truncated_fraction: None,
            components: None,
            wall_time: None,
        }
    }
}

/// `ln[(N+mn-1)! / (mn-1)!] - Σ ln r_i! - Σ ln c_j!`.
fn ln_f_constant(margins: &Margins) -> f64 {
    let cells = margins.cells() as f64;
    ln_gamma(margins.total() as f64 + cells) - ln_gamma(cells)
        - margins
            .rows()
            .iter()
            .chain(margins.cols())
            .map(|&t| ln_factorial(t))
            .sum::<f64>()
}

fn check_samples(k: usize, what: &str) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidParameter(format!("{what} must be positive")));
    }
    Ok(())
}

/// Sample mean of `f(X)` over `k` uniform points of the simplex.
pub fn estimate_plain(margins: &Margins, k: usize, seed: u64, budget: &Budget) -> Result<EstimateReport> {
    check_samples(k, "samples")?;
    let start = Instant::now();
    let block = BlockEvaluator::new(margins, budget)?;
    let (m, n) = (margins.m(), margins.n());
    let logs: Vec<f64> = chunked(k, seed, Purpose::Plain, |rng, len| {
        (0..len)
            .map(|_| block.ln_per_block_unchecked(&sample_simplex_uniform(m, n, rng)))
            .collect::<Vec<_>>()
    })
    .concat();
    let mean = LogMean::from_logs(&logs);
    let mut report = EstimateReport::new(Method::Plain, ln_f_constant(margins) + mean.log_mean, mean.rel_error, k, seed);
    report.wall_time = Some(start.elapsed().as_secs_f64());
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhiIntegral {
    pub log_integral: f64,
    pub log_std_error: f64,
    /// Samples that fell in the region of integration.
    pub inside: usize,
    pub samples: usize,
}

/// `ln E[φ]` over `k` uniform points of the simplex.
pub fn estimate_phi_integral(margins: &Margins, k: usize, seed: u64) -> Result<PhiIntegral> {
    phi_integral(margins, k, seed, 0.0)
}

/// `ln E[φ 1{min x_ij >= delta}]`.
fn phi_integral(margins: &Margins, k: usize, seed: u64, delta: f64) -> Result<PhiIntegral> {
    check_samples(k, "samples")?;
    let phi = PhiEvaluator::new(margins, DEFAULT_TOL)?;
    let (m, n) = (margins.m(), margins.n());
    let chunks: Vec<Result<Vec<f64>>> = chunked(k, seed, Purpose::PhiIntegral, |rng, len| {
        let mut lambda = vec![1.0; m];
        let mut mu = vec![1.0; n];
        (0..len)
            .map(|_| {
                let x = sample_simplex_uniform(m, n, rng);
                if x.iter().any(|&v| v < delta) {
                    return Ok(f64::NEG_INFINITY);
                }
                lambda.iter_mut().for_each(|v| *v = 1.0);
                mu.iter_mut().for_each(|v| *v = 1.0);
                phi.log_phi_warm(&x, &mut lambda, &mut mu)
            })
            .collect()
    });
    let mut logs = Vec::with_capacity(k);
    for c in chunks {
        logs.extend(c?);
    }
    let mean = LogMean::from_logs(&logs);
    Ok(PhiIntegral {
        log_integral: mean.log_mean,
        log_std_error: mean.rel_error,
        inside: logs.iter().filter(|v| v.is_finite()).count(),
        samples: k,
    })
}

/// The `φ`-integral as an [`EstimateReport`].
pub fn estimate_phi_report(margins: &Margins, k: usize, seed: u64) -> Result<EstimateReport> {
    let start = Instant::now();
    let phi = estimate_phi_integral(margins, k, seed)?;
    let mut report = EstimateReport::new(Method::PhiOnly, phi.log_integral, phi.log_std_error, k, seed);
    report.wall_time = Some(start.elapsed().as_secs_f64());
    Ok(report)
}

/// The truncated estimator `E[φ 1_{Δ_δ}] · E_ν[min(p, τ)]`.
///
/// `delta_exponent = +inf` disables truncation. The chain seed drives both
/// factors through disjoint streams.
pub fn estimate_full(
    margins: &Margins,
    k_phi: usize,
    k_nu: usize,
    delta_exponent: f64,
    config: &ChainConfig,
    budget: &Budget,
) -> Result<EstimateReport> {
    check_samples(k_phi, "samples")?;
    check_samples(k_nu, "nu samples")?;
    if !(delta_exponent >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "delta exponent must be non-negative, got {delta_exponent}"
        )));
    }
    config.validate(margins)?;
    let start = Instant::now();
    let factor = FactorEvaluator::new(margins, DEFAULT_TOL, budget)?;
    if !factor.is_exact() {
        // Surface the DP failure.
        BlockEvaluator::new(margins, budget)?;
    }
    let ln_n = (margins.total() as f64).ln();
    let tau_log = delta_exponent * ln_n * ln_n;
    let tau_log = if tau_log.is_nan() { f64::INFINITY } else { tau_log };

    let phi = phi_integral(margins, k_phi, config.seed, config.delta_interior)?;
    let run = sample_nu(margins, config, k_nu)?;
    let chains = run.by_chain();
    let log_p: Vec<Vec<f64>> = chains
        .par_iter()
        .map(|samples| {
            samples
                .iter()
                .map(|s| factor.log_p(&s.x).map(|lp| lp.lower()))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let truncated = log_p.iter().flatten().filter(|&&v| v > tau_log).count();
    let max_log_p = log_p.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let p_bar: Vec<Vec<f64>> = log_p
        .iter()
        .map(|c| c.iter().map(|&v| v.min(tau_log)).collect())
        .collect();
    let p_mean = batch_means(&p_bar, BATCHES_PER_CHAIN);

    let rel = (phi.log_std_error.powi(2) + p_mean.rel_error.powi(2)).sqrt();
    let cells = margins.cells() as f64;
    let deficit = 1.0 - (1.0 - cells * config.delta_interior).powf(margins.total() as f64 + cells - 1.0);
    let mut report = EstimateReport::new(Method::Full, phi.log_integral + p_mean.log_mean, rel, k_phi + k_nu, config.seed);
    report.nu_samples = Some(k_nu);
    report.samples = k_phi;
    report.delta_exponent = delta_exponent.is_finite().then_some(delta_exponent);
    report.tau_log = tau_log.is_finite().then_some(tau_log);
    report.truncated_fraction = Some(truncated as f64 / k_nu as f64);
    report.components = Some(FullComponents {
        log_phi_integral: phi.log_integral,
        phi_rel_error: phi.log_std_error,
        interior_fraction: phi.inside as f64 / phi.samples as f64,
        interior_mass_deficit_bound: deficit,
        log_mean_p_bar: p_mean.log_mean,
        p_bar_rel_error: p_mean.rel_error,
        max_log_p,
        log_p_upper_bound: p_upper_bound(margins),
        acceptance_rate: run.diagnostics.acceptance_rate,
        restarts: run.diagnostics.restarts,
        chain: config.clone(),
    });
    report.wall_time = Some(start.elapsed().as_secs_f64());
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub exact_count: String,
    pub log_exact: f64,
    /// `log_estimate - ln #(R,C)`.
    pub log_error: f64,
    /// `log_error / log_std_error`.
    pub z_score: f64,
    /// `|z| <= 3`.
    pub pass: bool,
}

pub fn compare_to_exact(margins: &Margins, report: &EstimateReport, budget: &Budget) -> Result<Comparison> {
    let count = count_tables(margins, budget)?;
    Ok(compare_log(count.ln(), count.to_string(), report))
}

/// As [`compare_to_exact`] with a known `ln #(R,C)`.
pub fn compare_log(log_exact: f64, exact_count: String, report: &EstimateReport) -> Comparison {
    let log_error = report.log_estimate - log_exact;
    let z_score = if report.log_std_error > 0.0 {
        log_error / report.log_std_error
    } else if log_error == 0.0 {
        0.0
    } else {
        f64::INFINITY * log_error.signum()
    };
    Comparison {
        exact_count,
        log_exact,
        log_error,
        z_score,
        pass: z_score.abs() <= 3.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mg(r: &[u64], c: &[u64]) -> Margins {
        Margins::new(r.to_vec(), c.to_vec()).unwrap()
    }

    #[test]
    fn plain_on_small_margins() {
        let m = mg(&[1, 1], &[1, 1]);
        let r = estimate_plain(&m, 20_000, 1, &Budget::default()).unwrap();
        let c = compare_to_exact(&m, &r, &Budget::default()).unwrap();
        assert!(c.pass, "{c:?}");
        assert_eq!(r.samples_used, 20_000);
    }

    #[test]
    fn phi_on_trivial_simplex() {
        let m = mg(&[4], &[4]);
        let phi = estimate_phi_integral(&m, 10, 0).unwrap();
        let direct = PhiEvaluator::new(&m, DEFAULT_TOL)
            .unwrap()
            .log_phi(&ndarray::array![[1.0]])
            .unwrap();
        assert!((phi.log_integral - direct).abs() < 1e-12);
    }

    #[test]
    fn full_reports_truncation() {
        let m = mg(&[2, 2], &[2, 2]);
        let mut cfg = ChainConfig::for_margins(&m, 5);
        cfg.burn_in = 100;
        let r = estimate_full(&m, 2000, 400, 0.0, &cfg, &Budget::default()).unwrap();
        // τ = 1 caps every p at one.
        assert_eq!(r.tau_log, Some(0.0));
        let comp = r.components.as_ref().unwrap();
        assert!(comp.log_mean_p_bar.abs() < 1e-12);
        assert!(r.truncated_fraction.unwrap() > 0.5);
        let open = estimate_full(&m, 2000, 400, f64::INFINITY, &cfg, &Budget::default()).unwrap();
        assert_eq!(open.tau_log, None);
        assert_eq!(open.truncated_fraction, Some(0.0));
        assert!(open.log_estimate >= r.log_estimate);
    }

    #[test]
    fn corrupted_estimate_fails_comparison() {
        let m = mg(&[2, 2], &[2, 2]);
        let mut r = estimate_plain(&m, 5000, 0, &Budget::default()).unwrap();
        let c = compare_to_exact(&m, &r, &Budget::default()).unwrap();
        r.log_estimate = c.log_exact + 10.0 * r.log_std_error;
        let bad = compare_to_exact(&m, &r, &Budget::default()).unwrap();
        assert!(!bad.pass);
        r.log_estimate = c.log_exact;
        assert_eq!(compare_to_exact(&m, &r, &Budget::default()).unwrap().z_score, 0.0);
    }
}
