//! Sinkhorn scaling of a positive matrix to prescribed margins, and the
//! quantities built on it.
//!
//! The scaling of a positive `X` to margins `(R, C)` is the unique matrix
//! `Y` with those margins such that `x_ij = y_ij λ_i μ_j` for positive
//! multipliers `λ`, `μ`. The multipliers are unique up to `λ -> λ t`,
//! `μ -> μ / t`; we fix `λ_1 = 1`.

mod bounds;
mod factor;
mod properties;

pub use bounds::{p_upper_bound, permanent_bracket, scaled_row_maxima};
pub use factor::{log_p, log_phi, FactorEvaluator, FactorReport, Interval, LogP, PhiEvaluator};
pub use properties::{thm52_report, variational_reports, Thm52Report, VariationalReport};

use ndarray::Array2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::margins::Margins;
use crate::matrix::{check_positive, check_shape, to_nested};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100_000;

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingResult {
    pub scaled: Array2<f64>,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub iterations: usize,
    /// Largest relative margin violation `|achieved - target| / target`.
    pub residual: f64,
}

impl Serialize for ScalingResult {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            scaled: Vec<Vec<f64>>,
            lambda: &'a [f64],
            mu: &'a [f64],
            log_lambda: Vec<f64>,
            log_mu: Vec<f64>,
            iterations: usize,
            residual: f64,
        }
        Repr {
            scaled: to_nested(&self.scaled),
            lambda: &self.lambda,
            mu: &self.mu,
            log_lambda: self.lambda.iter().map(|v| v.ln()).collect(),
            log_mu: self.mu.iter().map(|v| v.ln()).collect(),
            iterations: self.iterations,
            residual: self.residual,
        }
        .serialize(s)
    }
}

/// Scales `x` to `margins` by alternating row and column normalization.
pub fn sinkhorn(x: &Array2<f64>, margins: &Margins, tol: f64, max_iter: usize) -> Result<ScalingResult> {
    check_shape(x, margins.m(), margins.n())?;
    check_positive(x)?;
    let mut lambda = vec![1.0; margins.m()];
    let mut mu = vec![1.0; margins.n()];
    let (iterations, residual) = scale_multipliers(x, margins, tol, max_iter, &mut lambda, &mut mu)?;
    let scaled = Array2::from_shape_fn(x.dim(), |(i, j)| x[[i, j]] / (lambda[i] * mu[j]));
    Ok(ScalingResult {
        scaled,
        lambda,
        mu,
        iterations,
        residual,
    })
}

/// Core iteration on the multipliers, warm-started from `lambda` and `mu`.
///
/// Returns the number of sweeps and the final relative residual. `x` must be
/// positive and shaped like `margins`.
pub(crate) fn scale_multipliers(
    x: &Array2<f64>,
    margins: &Margins,
    tol: f64,
    max_iter: usize,
    lambda: &mut [f64],
    mu: &mut [f64],
) -> Result<(usize, f64)> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    let (m, n) = x.dim();
    let rows: Vec<f64> = margins.rows().iter().map(|&r| r as f64).collect();
    let cols: Vec<f64> = margins.cols().iter().map(|&c| c as f64).collect();
    let mut inv = vec![0.0; m.max(n)];
    let mut sums = vec![0.0; m.max(n)];

    // Row sums of x / μ; used both for the residual of the current iterate
    // and for the next row update.
    let row_pass = |mu: &[f64], inv: &mut [f64], sums: &mut [f64]| {
        for j in 0..n {
            inv[j] = 1.0 / mu[j];
        }
        for i in 0..m {
            sums[i] = x.row(i).iter().zip(&inv[..n]).map(|(a, b)| a * b).sum();
        }
    };

    row_pass(mu, &mut inv, &mut sums);
    let mut residual = f64::INFINITY;
    for sweep in 1..=max_iter {
        for i in 0..m {
            lambda[i] = sums[i] / rows[i];
        }
        for i in 0..m {
            inv[i] = 1.0 / lambda[i];
        }
        sums[..n].iter_mut().for_each(|s| *s = 0.0);
        for i in 0..m {
            for (s, &a) in sums[..n].iter_mut().zip(x.row(i)) {
                *s += a * inv[i];
            }
        }
        for j in 0..n {
            mu[j] = sums[j] / cols[j];
        }
        let t = lambda[0];
        lambda.iter_mut().for_each(|v| *v /= t);
        mu.iter_mut().for_each(|v| *v *= t);

        row_pass(mu, &mut inv, &mut sums);
        residual = (0..m)
            .map(|i| (sums[i] / lambda[i] - rows[i]).abs() / rows[i])
            .fold(0.0, f64::max);
        if residual <= tol {
            return Ok((sweep, residual));
        }
    }
    Err(Error::NoConvergence {
        what: "Sinkhorn scaling",
        iterations: max_iter,
        residual,
    })
}
