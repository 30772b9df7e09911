use ndarray::Array2;

use crate::error::{Error, Result};
use crate::margins::Margins;
use crate::special::{ln_factorial, ln_gamma};

/// `ln [(N^N / N!) min(Π r_i! / r_i^r_i, Π c_j! / c_j^c_j)]`, an upper bound
/// on `ln p(X)` for every positive `X`.
pub fn p_upper_bound(margins: &Margins) -> f64 {
    let n = margins.total();
    let side = |v: &[u64]| -> f64 { v.iter().map(|&t| ln_factorial(t) - t as f64 * (t as f64).ln()).sum() };
    let head = n as f64 * (n as f64).ln() - ln_factorial(n);
    head + side(margins.rows()).min(side(margins.cols()))
}

/// Bracket `(ln N!/N^N, N ln(τ/N) + τ ln Γ(1 + N/τ))` on `ln per B` for an
/// `N x N` doubly stochastic `B` whose row maxima sum to `τ`.
pub fn permanent_bracket(row_maxima: &[f64]) -> Result<(f64, f64)> {
    if row_maxima.iter().any(|z| !(z.is_finite() && *z > 0.0)) {
        return Err(Error::InvalidParameter("row maxima must be positive".into()));
    }
    let tau: f64 = row_maxima.iter().sum();
    bracket_from_tau(tau, row_maxima.len() as u64)
}

pub(crate) fn bracket_from_tau(tau: f64, n: u64) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::InvalidParameter("empty matrix".into()));
    }
    // Row maxima of a doubly stochastic matrix are at least 1/N, so τ >= 1
    // up to rounding.
    if !(tau >= 1.0 - 1e-12) {
        return Err(Error::InvalidParameter(format!("tau must be at least 1, got {tau}")));
    }
    let tau = tau.max(1.0);
    let nf = n as f64;
    let lower = ln_factorial(n) - nf * nf.ln();
    let upper = nf * (tau / nf).ln() + tau * ln_gamma(1.0 + nf / tau);
    Ok((lower, upper.max(lower)))
}

/// Row maxima of the `N x N` doubly stochastic matrix `B` whose `(i, j)`
/// block is the `r_i x c_j` constant block `y_ij / (r_i c_j)`; `y` must have
/// margins `(R, C)`.
pub fn scaled_row_maxima(y: &Array2<f64>, margins: &Margins) -> Vec<f64> {
    let mut out = Vec::with_capacity(margins.total() as usize);
    for (i, &r) in margins.rows().iter().enumerate() {
        let z = margins
            .cols()
            .iter()
            .enumerate()
            .map(|(j, &c)| y[[i, j]] / (r as f64 * c as f64))
            .fold(0.0, f64::max);
        out.extend(std::iter::repeat_n(z, r as usize));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p_bound_examples() {
        for n in 1..8u64 {
            let m = Margins::new(vec![1; n as usize], vec![1; n as usize]).unwrap();
            let expected = n as f64 * (n as f64).ln() - ln_factorial(n);
            assert!((p_upper_bound(&m) - expected).abs() < 1e-12);
        }
        let single = Margins::new(vec![9], vec![2, 3, 4]).unwrap();
        assert!(p_upper_bound(&single).abs() < 1e-12);
    }

    #[test]
    fn bracket_edges() {
        for n in 1..10usize {
            let (lo, hi) = permanent_bracket(&vec![1.0 / n as f64; n]).unwrap();
            assert!((hi - lo).abs() < 1e-12);
            let (_, hi) = permanent_bracket(&vec![1.0; n]).unwrap();
            assert!(hi.abs() < 1e-12);
        }
        let (lo, hi) = permanent_bracket(&[0.5; 4]).unwrap();
        assert!(hi >= lo);
        assert!(permanent_bracket(&[0.1, 0.1]).is_err());
    }
}
