//! Checkable inequalities satisfied by every scaling.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use super::{sinkhorn, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::error::Result;
use crate::exact::TableCounter;
use crate::margins::Margins;
use crate::matrix::to_nested;

const SLACK: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct Thm52Report {
    pub pass: Array2<bool>,
    /// Largest `lhs - rhs` over all cells; non-positive when every cell passes.
    pub max_excess: f64,
    pub all_pass: bool,
}

impl Serialize for Thm52Report {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            pass: Vec<Vec<bool>>,
            max_excess: f64,
            all_pass: bool,
        }
        Repr {
            pass: to_nested(&self.pass),
            max_excess: self.max_excess,
            all_pass: self.all_pass,
        }
        .serialize(s)
    }
}

/// Checks, for every cell `(p, q)`, the entry bound
///
/// `ln y_pq <= ln(r_p c_q / N) + ln x_pq + ln((1/N²) Σ r_i c_j x_ij)
///             - (1/N) Σ_j c_j ln x_pj - (1/N) Σ_i r_i ln x_iq`
///
/// for the scaling `Y` of `X`, up to a slack of `1e-8`.
pub fn thm52_report(x: &Array2<f64>, margins: &Margins) -> Result<Thm52Report> {
    let y = sinkhorn(x, margins, DEFAULT_TOL, DEFAULT_MAX_ITER)?.scaled;
    let r: Vec<f64> = margins.rows().iter().map(|&v| v as f64).collect();
    let c: Vec<f64> = margins.cols().iter().map(|&v| v as f64).collect();
    let n = margins.total() as f64;
    let (m, k) = x.dim();
    let weighted: f64 = x.indexed_iter().map(|((i, j), &v)| r[i] * c[j] * v).sum();
    let ln_avg = (weighted / (n * n)).ln();
    let row_term: Vec<f64> = (0..m)
        .map(|i| (0..k).map(|j| c[j] * x[[i, j]].ln()).sum::<f64>() / n)
        .collect();
    let col_term: Vec<f64> = (0..k)
        .map(|j| (0..m).map(|i| r[i] * x[[i, j]].ln()).sum::<f64>() / n)
        .collect();
    let excess = Array2::from_shape_fn((m, k), |(p, q)| {
        let rhs = (r[p] * c[q] / n).ln() + x[[p, q]].ln() + ln_avg - row_term[p] - col_term[q];
        y[[p, q]].ln() - rhs
    });
    let pass = excess.mapv(|e| e <= SLACK);
    Ok(Thm52Report {
        all_pass: pass.iter().all(|&b| b),
        max_excess: excess.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        pass,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VariationalReport {
    pub trials: usize,
    /// `Σ y (ln y - ln x)` at the scaling.
    pub kl_at_scaling: f64,
    /// Smallest `Σ z (ln z - ln x) - Σ y (ln y - ln x)` over the trials.
    pub min_kl_gap: f64,
    pub kl_violations: usize,
    /// `Σ r_i c_j ln y_ij` and `Σ r_i c_j ln x_ij` with `X` normalized to
    /// total `N`.
    pub log_sum_scaled: f64,
    pub log_sum_input: f64,
    pub log_sum_pass: bool,
}

/// Two variational properties of the scaling `Y` of `X`:
///
/// - `Y` minimizes `Σ z (ln z - ln x)` over the transportation polytope,
///   tested against `trials` random points of the polytope, each a random
///   convex combination of uniformly drawn tables;
/// - with `Σ x_ij = N`, `Σ r_i c_j ln y_ij >= Σ r_i c_j ln x_ij`.
pub fn variational_reports<R: Rng + ?Sized>(
    x: &Array2<f64>,
    margins: &Margins,
    trials: usize,
    tables: &TableCounter,
    rng: &mut R,
) -> Result<VariationalReport> {
    let y = sinkhorn(x, margins, DEFAULT_TOL, DEFAULT_MAX_ITER)?.scaled;
    let kl = |z: &Array2<f64>| -> f64 {
        z.iter()
            .zip(x)
            .map(|(&a, &b)| if a == 0.0 { 0.0 } else { a * (a.ln() - b.ln()) })
            .sum()
    };
    let kl_y = kl(&y);
    let mut min_gap = f64::INFINITY;
    let mut violations = 0;
    for _ in 0..trials {
        let parts = rng.random_range(1..=4);
        let weights: Vec<f64> = (0..parts).map(|_| Exp1.sample(rng)).collect();
        let total: f64 = weights.iter().sum();
        let mut z = Array2::<f64>::zeros(x.dim());
        for w in weights {
            z.scaled_add(w / total, &tables.sample(rng).to_real());
        }
        let gap = kl(&z) - kl_y;
        min_gap = min_gap.min(gap);
        if gap < -SLACK {
            violations += 1;
        }
    }

    let n = margins.total() as f64;
    let scale = n / x.sum();
    let rc = |i: usize, j: usize| (margins.rows()[i] * margins.cols()[j]) as f64;
    let log_sum_scaled: f64 = y.indexed_iter().map(|((i, j), &v)| rc(i, j) * v.ln()).sum();
    let log_sum_input: f64 = x
        .indexed_iter()
        .map(|((i, j), &v)| rc(i, j) * (v * scale).ln())
        .sum();
    Ok(VariationalReport {
        trials,
        kl_at_scaling: kl_y,
        min_kl_gap: min_gap,
        kl_violations: violations,
        log_sum_scaled,
        log_sum_input,
        log_sum_pass: log_sum_scaled >= log_sum_input - SLACK,
    })
}
