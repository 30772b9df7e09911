use serde::Serialize;

use super::Budget;
use crate::error::{Error, Result};
use crate::special::ln_gamma;

/// Both sides of the integer-simplex Gamma identity
///
/// `(1/#Υ) Σ_{d ∈ Υ(m,c)} Π Γ(d_i - λ_i + 1)/Γ(d_i + 1)
///   = Γ(c+m-l) Γ(m) / (Γ(c+m) Γ(m-l)) · Π Γ(1 - λ_i)`, `l = Σ λ_i`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimplexSum {
    /// Direct average over all compositions; `None` above the term budget.
    pub brute: Option<f64>,
    pub closed: f64,
    /// `#Υ(m, c) = C(m + c - 1, m - 1)`, saturating.
    pub terms: u128,
}

pub fn simplex_sum(m: usize, c: u64, lambdas: &[f64], budget: &Budget) -> Result<SimplexSum> {
    if m == 0 {
        return Err(Error::InvalidParameter("m must be positive".into()));
    }
    if lambdas.len() != m {
        return Err(Error::InvalidParameter(format!(
            "expected {m} lambdas, got {}",
            lambdas.len()
        )));
    }
    if let Some(bad) = lambdas.iter().find(|l| !(l.is_finite() && **l < 1.0)) {
        return Err(Error::InvalidParameter(format!(
            "every lambda must be finite and < 1, got {bad}"
        )));
    }

    let l: f64 = lambdas.iter().sum();
    let (mf, cf) = (m as f64, c as f64);
    let ln_closed = ln_gamma(cf + mf - l) + ln_gamma(mf) - ln_gamma(cf + mf) - ln_gamma(mf - l)
        + lambdas.iter().map(|&lam| ln_gamma(1.0 - lam)).sum::<f64>();

    let terms = binomial_saturating(m as u64 - 1 + c, m as u64 - 1);
    let brute = (terms <= budget.simplex_terms as u128).then(|| brute_average(m, c, lambdas, terms));

    Ok(SimplexSum {
        brute,
        closed: ln_closed.exp(),
        terms,
    })
}

fn brute_average(m: usize, c: u64, lambdas: &[f64], terms: u128) -> f64 {
    // ln Γ(d - λ_i + 1) - ln Γ(d + 1) for every row and every d <= c.
    let table: Vec<Vec<f64>> = lambdas
        .iter()
        .map(|&lam| {
            (0..=c)
                .map(|d| ln_gamma(d as f64 - lam + 1.0) - ln_gamma(d as f64 + 1.0))
                .collect()
        })
        .collect();

    fn walk(table: &[Vec<f64>], i: usize, left: u64, acc: f64, sum: &mut f64) {
        if i + 1 == table.len() {
            *sum += (acc + table[i][left as usize]).exp();
            return;
        }
        for d in 0..=left {
            walk(table, i + 1, left - d, acc + table[i][d as usize], sum);
        }
    }
    let mut sum = 0.0;
    walk(&table, 0, c, 0.0, &mut sum);
    debug_assert!(m == table.len());
    sum / terms as f64
}

fn binomial_saturating(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 1..=k as u128 {
        acc = match acc.checked_mul(n as u128 - k as u128 + i) {
            Some(v) => v / i,
            None => return u128::MAX,
        };
    }
    acc
}
