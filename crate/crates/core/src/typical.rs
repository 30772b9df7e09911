//! The typical table `X*`, the unique maximizer of
//! `g(X) = Σ (x_ij + 1) ln(x_ij + 1) - x_ij ln x_ij` over the transportation
//! polytope, computed through the dual problem
//!
//! `min_{0 < x_i, y_j < 1} Π x_i^-r_i Π y_j^-c_j Π (1 - x_i y_j)^-1`
//!
//! whose optimal value is `ρ(R,C) = exp g(X*)`, an upper bound on `#(R,C)`.
//! The optimum is related to `X*` by `x*_ij = x_i y_j / (1 - x_i y_j)`.
//!
//! The dual is minimized by exact block coordinate descent: with `y` fixed,
//! the stationarity condition for each `x_i` is the monotone scalar equation
//! `Σ_j x_i y_j / (1 - x_i y_j) = r_i`, and symmetrically for `y_j`. The
//! stationarity conditions are exactly the margin constraints on `X*`, so the
//! margin residual doubles as the optimality certificate.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::WeightMatrix;
use crate::margins::Margins;
use crate::matrix::{check_non_negative, check_shape, to_nested};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_SWEEPS: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TypicalTable {
    pub entries: Array2<f64>,
    pub dual: DualPoint,
    /// `ln ρ(R,C) = g(X*)`.
    pub log_rho: f64,
    /// Largest absolute deviation of a row or column sum from its margin.
    pub residual: f64,
    pub sweeps: usize,
}

impl Serialize for TypicalTable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            entries: Vec<Vec<f64>>,
            dual: &'a DualPoint,
            log_rho: f64,
            residual: f64,
            sweeps: usize,
        }
        Repr {
            entries: to_nested(&self.entries),
            dual: &self.dual,
            log_rho: self.log_rho,
            residual: self.residual,
            sweeps: self.sweeps,
        }
        .serialize(s)
    }
}

/// Solves for the typical table until the largest absolute margin residual
/// is at most `tol`, or at most a small multiple of the rounding error in
/// the margin sums when that is larger.
pub fn solve_typical(margins: &Margins, tol: f64) -> Result<TypicalTable> {
    solve_typical_with(margins, tol, DEFAULT_MAX_SWEEPS)
}

pub fn solve_typical_with(margins: &Margins, tol: f64, max_sweeps: usize) -> Result<TypicalTable> {
    let dual = solve_dual(margins, None, tol, max_sweeps)?;
    let entries = Array2::from_shape_fn((margins.m(), margins.n()), |(i, j)| {
        let t = dual.x[i] * dual.y[j];
        t / (1.0 - t)
    });
    let log_rho = dual_objective(margins, None, &dual.x, &dual.y);
    Ok(TypicalTable {
        entries,
        dual: DualPoint {
            x: dual.x,
            y: dual.y,
        },
        log_rho,
        residual: dual.residual,
        sweeps: dual.sweeps,
    })
}

/// `ln ρ(R,C;W)`, the log of
/// `inf Π x_i^-r_i Π y_j^-c_j Π (1 - w_ij x_i y_j)^-1` over `w_ij x_i y_j < 1`.
///
/// Cells with zero weight drop out of the product. A row or column whose
/// weights are all zero admits no table, and the infimum is zero.
pub fn log_rho_weighted(margins: &Margins, weights: &WeightMatrix, tol: f64) -> Result<f64> {
    let w = weights.as_array();
    check_shape(w, margins.m(), margins.n())?;
    let dead_row = w.rows().into_iter().any(|r| r.iter().all(|&v| v == 0.0));
    let dead_col = w.columns().into_iter().any(|c| c.iter().all(|&v| v == 0.0));
    if dead_row || dead_col {
        return Ok(f64::NEG_INFINITY);
    }
    let dual = solve_dual(margins, Some(w), tol, DEFAULT_MAX_SWEEPS)?;
    Ok(dual_objective(margins, Some(w), &dual.x, &dual.y))
}

/// `g(X) = Σ (x + 1) ln(x + 1) - x ln x` with `0 ln 0 = 0`.
pub fn g_value(x: &Array2<f64>) -> Result<f64> {
    check_non_negative(x)?;
    Ok(x.iter().map(|&v| g_term(v)).sum())
}

fn g_term(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        (v + 1.0) * v.ln_1p() - v * v.ln()
    }
}

struct DualSolution {
    x: Vec<f64>,
    y: Vec<f64>,
    residual: f64,
    sweeps: usize,
}

fn weight(w: Option<&Array2<f64>>, i: usize, j: usize) -> f64 {
    w.map_or(1.0, |w| w[[i, j]])
}

fn dual_objective(margins: &Margins, w: Option<&Array2<f64>>, x: &[f64], y: &[f64]) -> f64 {
    let mut v = 0.0;
    for (&r, &xi) in margins.rows().iter().zip(x) {
        v -= r as f64 * xi.ln();
    }
    for (&c, &yj) in margins.cols().iter().zip(y) {
        v -= c as f64 * yj.ln();
    }
    for (i, &xi) in x.iter().enumerate() {
        for (j, &yj) in y.iter().enumerate() {
            let wij = weight(w, i, j);
            if wij > 0.0 {
                v -= (-wij * xi * yj).ln_1p();
            }
        }
    }
    v
}

fn solve_dual(
    margins: &Margins,
    w: Option<&Array2<f64>>,
    tol: f64,
    max_sweeps: usize,
) -> Result<DualSolution> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    let (m, n) = (margins.m(), margins.n());
    let st = margins.stats();
    let w_max = w.map_or(1.0, |w| w.iter().copied().fold(0.0, f64::max));
    // Symmetric start: ζ²/(1 - ζ²) = s.
    let zeta = (st.s / (1.0 + st.s)).sqrt() / w_max.sqrt();
    let mut x = vec![zeta; m];
    let mut y = vec![zeta; n];
    let mut coeffs = Vec::with_capacity(m.max(n));
    let mut residual = f64::INFINITY;

    for sweep in 1..=max_sweeps {
        for i in 0..m {
            coeffs.clear();
            coeffs.extend((0..n).map(|j| weight(w, i, j) * y[j]));
            x[i] = solve_margin_equation(&coeffs, margins.rows()[i] as f64, x[i]);
        }
        for j in 0..n {
            coeffs.clear();
            coeffs.extend((0..m).map(|i| weight(w, i, j) * x[i]));
            y[j] = solve_margin_equation(&coeffs, margins.cols()[j] as f64, y[j]);
        }
        // x_i -> x_i t, y_j -> y_j / t leaves every product unchanged.
        let x_max = x.iter().copied().fold(0.0, f64::max);
        let y_max = y.iter().copied().fold(0.0, f64::max);
        let t = (y_max / x_max).sqrt();
        x.iter_mut().for_each(|v| *v *= t);
        y.iter_mut().for_each(|v| *v /= t);

        let (r, noise) = margin_residual(margins, w, &x, &y);
        residual = r;
        if residual <= tol.max(16.0 * noise) {
            return Ok(DualSolution {
                x,
                y,
                residual,
                sweeps: sweep,
            });
        }
    }
    Err(Error::NoConvergence {
        what: "typical table solver",
        iterations: max_sweeps,
        residual,
    })
}

/// Largest absolute margin error, and the rounding error of the sums: an
/// entry `t / (1 - t)` carries an error of about `ε (1 + e)^2`.
fn margin_residual(margins: &Margins, w: Option<&Array2<f64>>, x: &[f64], y: &[f64]) -> (f64, f64) {
    let (m, n) = (x.len(), y.len());
    let mut row = vec![0.0; m];
    let mut col = vec![0.0; n];
    let mut row_noise = vec![0.0; m];
    let mut col_noise = vec![0.0; n];
    for i in 0..m {
        for j in 0..n {
            let t = weight(w, i, j) * x[i] * y[j];
            let e = t / (1.0 - t);
            row[i] += e;
            col[j] += e;
            row_noise[i] += (1.0 + e) * (1.0 + e);
            col_noise[j] += (1.0 + e) * (1.0 + e);
        }
    }
    let noise = row_noise.iter().chain(&col_noise).copied().fold(0.0, f64::max) * f64::EPSILON;
    let r = row
        .iter()
        .zip(margins.rows())
        .map(|(s, &t)| (s - t as f64).abs());
    let c = col
        .iter()
        .zip(margins.cols())
        .map(|(s, &t)| (s - t as f64).abs());
    (r.chain(c).fold(0.0, f64::max), noise)
}

/// Solves `Σ_k a_k v / (1 - a_k v) = target` for `v` in `(0, 1 / max a_k)`.
///
/// The left side increases from 0 to infinity on the bracket, so the root is
/// unique. Newton steps are taken while they stay inside the current
/// bracket, bisection otherwise.
pub(crate) fn solve_margin_equation(coeffs: &[f64], target: f64, guess: f64) -> f64 {
    const FLOOR: f64 = 1e-300;
    let a_max = coeffs.iter().copied().fold(0.0, f64::max);
    let mut lo = FLOOR;
    let mut hi = (1.0 - f64::EPSILON) / a_max;
    let mut v = if guess > lo && guess < hi {
        guess
    } else {
        0.5 * hi
    };
    for _ in 0..400 {
        let (mut f, mut df) = (0.0, 0.0);
        for &a in coeffs {
            if a > 0.0 {
                let q = 1.0 / (1.0 - a * v);
                f += a * v * q;
                df += a * q * q;
            }
        }
        let gap = f - target;
        if gap.abs() <= 4.0 * f64::EPSILON * target {
            break;
        }
        if gap > 0.0 {
            hi = v;
        } else {
            lo = v;
        }
        let newton = v - gap / df;
        let next = if newton > lo && newton < hi {
            newton
        } else if hi / lo > 4.0 {
            // Geometric bisection while the bracket spans orders of magnitude.
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
        if next == v {
            break;
        }
        v = next;
    }
    v
}
