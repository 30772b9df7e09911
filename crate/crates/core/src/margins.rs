//! Margins, their summary statistics, smoothness classes and a priori bounds
//! on the entries of the typical table.
//!
//! Ratios that feed boolean classifications are evaluated in exact rational
//! arithmetic; real-valued parameters are converted to the exact rational
//! value of their `f64` representation first.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::typical::TypicalTable;

/// Row sums `R` and column sums `C` with a common total `N`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawMargins")]
pub struct Margins {
    rows: Vec<u64>,
    cols: Vec<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMargins {
    rows: Vec<u64>,
    cols: Vec<u64>,
}

impl TryFrom<RawMargins> for Margins {
    type Error = Error;
    fn try_from(raw: RawMargins) -> Result<Self> {
        Margins::new(raw.rows, raw.cols)
    }
}

impl Margins {
    pub fn new(rows: Vec<u64>, cols: Vec<u64>) -> Result<Self> {
        if rows.is_empty() || cols.is_empty() {
            return Err(Error::EmptyMargins);
        }
        if let Some(index) = rows.iter().position(|&r| r == 0) {
            return Err(Error::ZeroMargin { axis: "row", index });
        }
        if let Some(index) = cols.iter().position(|&c| c == 0) {
            return Err(Error::ZeroMargin { axis: "column", index });
        }
        let row_total = checked_total(&rows)?;
        let col_total = checked_total(&cols)?;
        if row_total != col_total {
            return Err(Error::InconsistentMargins {
                row_total,
                col_total,
            });
        }
        Ok(Margins { rows, cols })
    }

    pub fn rows(&self) -> &[u64] {
        &self.rows
    }

    pub fn cols(&self) -> &[u64] {
        &self.cols
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn n(&self) -> usize {
        self.cols.len()
    }

    /// The common total `N`.
    pub fn total(&self) -> u64 {
        self.rows.iter().sum()
    }

    /// Cells in the table, `m * n`.
    pub fn cells(&self) -> usize {
        self.m() * self.n()
    }

    /// Swaps the roles of rows and columns.
    pub fn transpose(&self) -> Margins {
        Margins {
            rows: self.cols.clone(),
            cols: self.rows.clone(),
        }
    }

    /// A `1 x n` or `m x 1` table is determined by its margins.
    pub fn is_degenerate(&self) -> bool {
        self.m() == 1 || self.n() == 1
    }

    pub fn stats(&self) -> MarginStats {
        let total = self.total();
        let (m, n) = (self.m(), self.n());
        MarginStats {
            total,
            m,
            n,
            s: ratio_to_f64(&ratio(total, (m * n) as u64)),
            r_plus: *self.rows.iter().max().unwrap(),
            r_minus: *self.rows.iter().min().unwrap(),
            c_plus: *self.cols.iter().max().unwrap(),
            c_minus: *self.cols.iter().min().unwrap(),
        }
    }
}

fn checked_total(v: &[u64]) -> Result<u64> {
    v.iter()
        .try_fold(0u64, |acc, &x| acc.checked_add(x))
        .ok_or_else(|| Error::InvalidParameter("margin total overflows u64".into()))
}

/// Derived statistics of a margin pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginStats {
    #[serde(rename = "N")]
    pub total: u64,
    pub m: usize,
    pub n: usize,
    /// Average table entry `N / (m n)`.
    pub s: f64,
    pub r_plus: u64,
    pub r_minus: u64,
    pub c_plus: u64,
    pub c_minus: u64,
}

pub fn margin_stats(margins: &Margins) -> MarginStats {
    margins.stats()
}

/// Parameters of the golden-ratio and linear-margins classes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessParams {
    /// Allowed aspect ratio: `m <= rho n` and `n <= rho m`.
    pub golden_rho: f64,
    /// Required gap in `β₁β₂ <= max(β₁, β₂) + 1 - eps`.
    pub golden_eps: f64,
    /// Bound on `r_+ / r_-`.
    pub linear_beta: f64,
    /// Bound on `c_+ / m`; the class needs `linear_eps * linear_beta < 1`.
    pub linear_eps: f64,
}

impl Default for SmoothnessParams {
    fn default() -> Self {
        SmoothnessParams {
            golden_rho: 2.0,
            golden_eps: 0.1,
            linear_beta: 2.0,
            linear_eps: 0.4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessReport {
    /// Smallest `α` with `r_+ <= α N/m` and `c_+ <= α N/n`.
    pub alpha_min_upper: f64,
    /// Largest `β` with `r_- >= β N/m` and `c_- >= β N/n`.
    pub beta_max_lower: f64,
    /// Smallest `α` with `max x*_ij <= α s`; needs a typical table.
    pub strong_alpha: Option<f64>,
    /// The moderateness level, equal to `s`.
    pub moderate_s0: f64,
    pub golden_ratio: bool,
    pub linear: bool,
    pub params: SmoothnessParams,
}

pub fn classify_smoothness(
    margins: &Margins,
    typical: Option<&TypicalTable>,
    params: &SmoothnessParams,
) -> Result<SmoothnessReport> {
    let SmoothnessParams {
        golden_rho,
        golden_eps,
        linear_beta,
        linear_eps,
    } = *params;
    for (name, v) in [
        ("golden_rho", golden_rho),
        ("golden_eps", golden_eps),
        ("linear_beta", linear_beta),
        ("linear_eps", linear_eps),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
        }
    }
    if golden_eps >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "golden_eps must lie in (0, 1), got {golden_eps}"
        )));
    }

    let st = margins.stats();
    let (m, n, total) = (st.m as u64, st.n as u64, st.total);

    let alpha_upper = ratio(st.r_plus * m, total).max(ratio(st.c_plus * n, total));
    let beta_lower = ratio(st.r_minus * m, total).min(ratio(st.c_minus * n, total));

    let rho = exact(golden_rho);
    let eps = exact(golden_eps);
    let beta1 = ratio(st.r_plus, st.r_minus);
    let beta2 = ratio(st.c_plus, st.c_minus);
    let one = BigRational::from_integer(BigInt::from(1));
    let aspect_ok = ratio(m, 1) <= &rho * ratio(n, 1) && ratio(n, 1) <= &rho * ratio(m, 1);
    let product_ok = &beta1 * &beta2 <= beta1.clone().max(beta2.clone()) + &one - eps;
    let golden_ratio = aspect_ok && product_ok;

    let lin_beta = exact(linear_beta);
    let lin_eps = exact(linear_eps);
    let linear = &lin_eps * &lin_beta < one
        && beta1 <= lin_beta
        && ratio(st.c_plus, 1) <= lin_eps * ratio(m, 1);

    let strong_alpha = typical.map(|t| {
        let max_entry = t.entries.iter().copied().fold(0.0, f64::max);
        max_entry / st.s
    });

    Ok(SmoothnessReport {
        alpha_min_upper: ratio_to_f64(&alpha_upper),
        beta_max_lower: ratio_to_f64(&beta_lower),
        strong_alpha,
        moderate_s0: st.s,
        golden_ratio,
        linear,
        params: *params,
    })
}

/// A priori bounds on every entry of the typical table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryBounds {
    pub lower: f64,
    pub upper: Option<f64>,
}

pub fn typical_entry_bounds(margins: &Margins) -> EntryBounds {
    let st = margins.stats();
    let (m, n) = (st.m as u64, st.n as u64);
    let (rp, rm, cp, cm) = (st.r_plus, st.r_minus, st.c_plus, st.c_minus);
    let big = |v: u64| BigInt::from(v);

    let lower = ratio(rm * cm, rp * m).max(ratio(cm * rm, cp * n));

    let mut uppers = Vec::new();
    // r_- c_+ + r_- c_- + m r_- > r_+ c_+
    let d1 = big(rm) * big(cp) + big(rm) * big(cm) + big(m) * big(rm) - big(rp) * big(cp);
    if d1 > BigInt::zero() {
        let num = big(cp) * (big(rm) * big(cm) + big(m) * big(rp));
        uppers.push(BigRational::new(num, big(m) * d1));
    }
    // c_- r_+ + c_- r_- + n c_- > r_+ c_+
    let d2 = big(cm) * big(rp) + big(cm) * big(rm) + big(n) * big(cm) - big(cp) * big(rp);
    if d2 > BigInt::zero() {
        let num = big(rp) * (big(cm) * big(rm) + big(n) * big(cp));
        uppers.push(BigRational::new(num, big(n) * d2));
    }

    EntryBounds {
        lower: ratio_to_f64(&lower),
        upper: uppers.into_iter().min().map(|u| ratio_to_f64(&u)),
    }
}

fn ratio(num: u64, den: u64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn exact(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite parameter")
}

fn ratio_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}
