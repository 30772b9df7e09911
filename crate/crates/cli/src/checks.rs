//! Property suites run by `tally check`.
//!
//! Each suite draws its random instances from the `Checks` stream of the
//! master seed, one substream per trial, and reports a `pass` flag together
//! with the worst observed value.

use clap::ValueEnum;
use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use tally_core::exact::{simplex_sum, TableCounter};
use tally_core::rng::{substream, Purpose};
use tally_core::sampling::{empirical_tail_checks, sample_simplex_uniform, TailConfig};
use tally_core::scaling::{thm52_report, variational_reports, FactorEvaluator, DEFAULT_TOL};
use tally_core::{Budget, Margins};

use crate::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    /// Per-cell inequality between a matrix and its scaling.
    Thm52,
    /// The scaling minimizes relative entropy over the polytope.
    Thm81,
    /// `Σ r c ln y >= Σ r c ln x` for the scaling `y` of `x`.
    Lemma82,
    /// Laplace transform of `ψ` against its exact value.
    Lemma91,
    /// Tail frequency of `Σ x` under `ψ`.
    Lemma93,
    /// Integer-simplex Gamma identity.
    Lemma113,
    /// `ln f = ln φ + ln p` on random simplex points.
    Factorization,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Thm52 => "thm52",
            Suite::Thm81 => "thm81",
            Suite::Lemma82 => "lemma82",
            Suite::Lemma91 => "lemma91",
            Suite::Lemma93 => "lemma93",
            Suite::Lemma113 => "lemma113",
            Suite::Factorization => "factorization",
        }
    }

    pub fn default_trials(self) -> usize {
        match self {
            Suite::Thm52 | Suite::Lemma113 | Suite::Factorization => 100,
            Suite::Thm81 => 10,
            Suite::Lemma82 => 50,
            Suite::Lemma91 | Suite::Lemma93 => 100_000,
        }
    }
}

/// Polytope points tested per instance by the entropy suite.
const POLYTOPE_POINTS: usize = 100;
/// Simplex points per margin pair in the factorization suite.
const POINTS_PER_MARGINS: usize = 10;
const FACTORIZATION_SLACK: f64 = 1e-6;
const SIMPLEX_SLACK: f64 = 1e-10;

/// Margins with `m, n <= 3` and `N <= 8`.
pub fn random_margins<R: Rng + ?Sized>(rng: &mut R) -> Margins {
    let m = rng.random_range(1..=3usize);
    let n = rng.random_range(1..=3usize);
    let total = rng.random_range(m.max(n) as u64..=8);
    Margins::new(composition(total, m, rng), composition(total, n, rng)).expect("positive parts with equal totals")
}

fn composition<R: Rng + ?Sized>(total: u64, parts: usize, rng: &mut R) -> Vec<u64> {
    let mut v = vec![1u64; parts];
    for _ in 0..total - parts as u64 {
        v[rng.random_range(0..parts)] += 1;
    }
    v
}

/// Positive entries spread over six orders of magnitude.
fn random_positive<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((m, n), || rng.random_range(-7.0..7.0f64).exp())
}

fn default_tail_margins(suite: Suite) -> Vec<Margins> {
    let pairs: &[(&[u64], &[u64])] = match suite {
        Suite::Lemma91 => &[(&[1, 1], &[1, 1]), (&[2, 1], &[1, 2]), (&[2, 2], &[1, 2, 1])],
        _ => &[
            (&[1, 1], &[1, 1]),
            (&[2, 2], &[2, 2]),
            (&[2, 1], &[1, 1, 1]),
            (&[3, 2], &[2, 3]),
            (&[2, 2, 2], &[2, 2, 2]),
        ],
    };
    pairs
        .iter()
        .map(|(r, c)| Margins::new(r.to_vec(), c.to_vec()).expect("built-in margins are valid"))
        .collect()
}

fn instance_margins<R: Rng + ?Sized>(given: Option<&Margins>, rng: &mut R) -> Margins {
    match given {
        Some(m) => m.clone(),
        None => random_margins(rng),
    }
}

fn margins_json(m: &Margins) -> Value {
    json!({ "rows": m.rows(), "cols": m.cols() })
}

pub(crate) fn run_suite(
    suite: Suite,
    given: Option<&Margins>,
    trials: Option<usize>,
    lambda: f64,
    seed: u64,
    budget: &Budget,
) -> CliResult<(Value, Map<String, Value>)> {
    let trials = trials.unwrap_or(suite.default_trials());
    if trials == 0 {
        return Err(CliError::Usage("--trials must be positive".into()));
    }
    let mut knobs = Map::new();
    knobs.insert("suite".into(), suite.name().into());
    knobs.insert("trials".into(), trials.into());
    knobs.insert("dp_budget".into(), budget.dp_states.into());
    let rng = |t: usize| substream(seed, Purpose::Checks, t as u64);

    let result = match suite {
        Suite::Thm52 => {
            let rows = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let mut rng = rng(t);
                    let margins = instance_margins(given, &mut rng);
                    let x = random_positive(margins.m(), margins.n(), &mut rng);
                    let rep = thm52_report(&x, &margins)?;
                    let failed = rep.pass.iter().filter(|p| !**p).count();
                    Ok((failed, rep.max_excess))
                })
                .collect::<CliResult<Vec<_>>>()?;
            let violations: usize = rows.iter().map(|r| r.0).sum();
            let worst = rows.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
            json!({
                "suite": suite.name(),
                "instances": trials,
                "cell_violations": violations,
                "max_excess": worst,
                "pass": violations == 0,
            })
        }
        Suite::Thm81 | Suite::Lemma82 => {
            let reports = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let mut rng = rng(t);
                    let margins = instance_margins(given, &mut rng);
                    let x = random_positive(margins.m(), margins.n(), &mut rng);
                    let counter = TableCounter::new(&margins, budget)?;
                    Ok(variational_reports(&x, &margins, POLYTOPE_POINTS, &counter, &mut rng)?)
                })
                .collect::<CliResult<Vec<_>>>()?;
            if suite == Suite::Thm81 {
                let violations: usize = reports.iter().map(|r| r.kl_violations).sum();
                let min_gap = reports.iter().map(|r| r.min_kl_gap).fold(f64::INFINITY, f64::min);
                json!({
                    "suite": suite.name(),
                    "instances": trials,
                    "points_per_instance": POLYTOPE_POINTS,
                    "violations": violations,
                    "min_kl_gap": min_gap,
                    "pass": violations == 0,
                })
            } else {
                let failures = reports.iter().filter(|r| !r.log_sum_pass).count();
                let min_gap = reports
                    .iter()
                    .map(|r| r.log_sum_scaled - r.log_sum_input)
                    .fold(f64::INFINITY, f64::min);
                json!({
                    "suite": suite.name(),
                    "instances": trials,
                    "violations": failures,
                    "min_gap": min_gap,
                    "pass": failures == 0,
                })
            }
        }
        Suite::Lemma91 | Suite::Lemma93 => {
            if suite == Suite::Lemma91 {
                knobs.insert("lambda".into(), lambda.into());
            }
            let list = match given {
                Some(m) => vec![m.clone()],
                None => default_tail_margins(suite),
            };
            let mut instances = Vec::new();
            let mut pass = true;
            for margins in &list {
                let config = TailConfig {
                    samples: trials,
                    seed,
                    lambdas: (suite == Suite::Lemma91).then(|| Array2::from_elem((margins.m(), margins.n()), lambda)),
                    log_p_threshold: None,
                };
                let rep = empirical_tail_checks(margins, &config, budget)?;
                let detail = if suite == Suite::Lemma91 {
                    let l = rep.lemma91.expect("lambdas were given");
                    pass &= l.pass;
                    serde_json::to_value(l)
                } else {
                    pass &= rep.lemma93.pass;
                    serde_json::to_value(rep.lemma93)
                }
                .expect("reports serialize");
                instances.push(json!({ "margins": margins_json(margins), "check": detail }));
            }
            json!({
                "suite": suite.name(),
                "samples": trials,
                "instances": instances,
                "pass": pass,
            })
        }
        Suite::Lemma113 => {
            let rows = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let mut rng = rng(t);
                    let m = rng.random_range(1..=5usize);
                    let c = rng.random_range(0..=8u64);
                    let lambdas: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let s = simplex_sum(m, c, &lambdas, budget)?;
                    let brute = s.brute.ok_or(tally_core::Error::BudgetExceeded {
                        what: "simplex enumeration",
                        required: s.terms,
                        budget: budget.simplex_terms as u128,
                    })?;
                    Ok(((brute - s.closed) / s.closed).abs())
                })
                .collect::<CliResult<Vec<f64>>>()?;
            let worst = rows.iter().copied().fold(0.0, f64::max);
            json!({
                "suite": suite.name(),
                "instances": trials,
                "max_relative_gap": worst,
                "slack": SIMPLEX_SLACK,
                "pass": worst <= SIMPLEX_SLACK,
            })
        }
        Suite::Factorization => {
            let groups = trials.div_ceil(POINTS_PER_MARGINS);
            let gaps = (0..groups)
                .into_par_iter()
                .map(|g| {
                    let mut rng = rng(g);
                    let margins = instance_margins(given, &mut rng);
                    let factor = FactorEvaluator::new(&margins, DEFAULT_TOL, budget)?;
                    let points = POINTS_PER_MARGINS.min(trials - g * POINTS_PER_MARGINS);
                    let mut worst = 0.0f64;
                    for _ in 0..points {
                        let x = sample_simplex_uniform(margins.m(), margins.n(), &mut rng);
                        let gap = factor.report(&x)?.consistency_gap.ok_or(tally_core::Error::BudgetExceeded {
                            what: "block permanent DP",
                            required: u128::MAX,
                            budget: budget.dp_states as u128,
                        })?;
                        worst = worst.max(gap);
                    }
                    Ok(worst)
                })
                .collect::<CliResult<Vec<f64>>>()?;
            let worst = gaps.iter().copied().fold(0.0, f64::max);
            json!({
                "suite": suite.name(),
                "points": trials,
                "margin_pairs": groups,
                "max_gap": worst,
                "slack": FACTORIZATION_SLACK,
                "pass": worst <= FACTORIZATION_SLACK,
            })
        }
    };
    Ok((result, knobs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_margins_stay_small() {
        let mut rng = substream(0, Purpose::Checks, 0);
        for _ in 0..500 {
            let m = random_margins(&mut rng);
            assert!(m.m() <= 3 && m.n() <= 3 && m.total() <= 8);
        }
    }

    #[test]
    fn quick_suites_pass() {
        let budget = Budget::default();
        for suite in [Suite::Thm52, Suite::Lemma82, Suite::Lemma113, Suite::Factorization] {
            let (v, _) = run_suite(suite, None, Some(20), 0.25, 1, &budget).unwrap();
            assert_eq!(v["pass"], true, "{suite:?}: {v}");
        }
    }
}
