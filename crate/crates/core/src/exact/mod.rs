//! Exact evaluation by a column dynamic program.
//!
//! Tables are filled one column at a time; the DP state is the vector of row
//! sums still to be placed. The same state graph ([`plan::DpPlan`]) serves
//! plain counting with arbitrary-precision integers, weighted sums
//! `T(R,C;W) = Σ_D Π w_ij^d_ij`, the block permanent
//! `per A(X) = Π r_i! Π c_j! Σ_D Π x_ij^d_ij / d_ij!`, and exact uniform
//! sampling of tables by walking the graph backwards.

mod count;
mod plan;
mod ryser;
mod simplex;
mod weighted;

use std::fmt;

use ndarray::Array2;
use num_bigint::BigUint;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::margins::Margins;
use crate::matrix::{check_non_negative, to_nested};

pub use count::{count_tables, sample_table_uniform, TableCounter};
pub use ryser::per_ryser;
pub use simplex::{simplex_sum, SimplexSum};
pub use weighted::{count_weighted, count_weighted_exact, per_block, BlockEvaluator};

/// Resource caps for the exact routines.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    /// Maximum number of DP states, summed over all columns.
    pub dp_states: u64,
    /// Largest matrix order accepted by [`per_ryser`].
    pub ryser_max_order: usize,
    /// Largest integer simplex enumerated by [`simplex_sum`].
    pub simplex_terms: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            dp_states: 10_000_000,
            ryser_max_order: 20,
            simplex_terms: 1_000_000,
        }
    }
}

impl Budget {
    pub const DP_ENV_VAR: &'static str = "TALLY_DP_BUDGET";

    /// Default budget with the DP state cap taken from `TALLY_DP_BUDGET`
    /// when it is set.
    pub fn from_env() -> Result<Self> {
        let mut budget = Budget::default();
        if let Ok(v) = std::env::var(Self::DP_ENV_VAR) {
            budget.dp_states = v.trim().parse().map_err(|_| {
                Error::InvalidParameter(format!("{} must be an integer, got {v:?}", Self::DP_ENV_VAR))
            })?;
        }
        Ok(budget)
    }
}

/// An exact, arbitrary-precision table count.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct BigCount(pub BigUint);

impl BigCount {
    pub fn ln(&self) -> f64 {
        ln_biguint(&self.0)
    }

    pub fn log10(&self) -> f64 {
        self.ln() / std::f64::consts::LN_10
    }
}

impl fmt::Display for BigCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl Serialize for BigCount {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            count: String,
            log10_count: f64,
        }
        Repr {
            count: self.0.to_string(),
            log10_count: self.log10(),
        }
        .serialize(s)
    }
}

pub(crate) fn ln_biguint(v: &BigUint) -> f64 {
    let bits = v.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    if bits <= 1000 {
        return v.to_f64().expect("fits in f64").ln();
    }
    let shift = bits - 64;
    let top = (v >> shift).to_f64().expect("64-bit prefix");
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// A non-negative integer matrix with prescribed margins.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ContingencyTable {
    entries: Array2<u64>,
}

impl ContingencyTable {
    pub fn new(entries: Array2<u64>, margins: &Margins) -> Result<Self> {
        if entries.dim() != (margins.m(), margins.n()) {
            return Err(Error::DimensionMismatch {
                expected_rows: margins.m(),
                expected_cols: margins.n(),
                rows: entries.nrows(),
                cols: entries.ncols(),
            });
        }
        let rows_ok = entries
            .rows()
            .into_iter()
            .zip(margins.rows())
            .all(|(r, &t)| r.sum() == t);
        let cols_ok = entries
            .columns()
            .into_iter()
            .zip(margins.cols())
            .all(|(c, &t)| c.sum() == t);
        if !(rows_ok && cols_ok) {
            return Err(Error::TableMarginMismatch);
        }
        Ok(ContingencyTable { entries })
    }

    pub(crate) fn from_entries_unchecked(entries: Array2<u64>) -> Self {
        ContingencyTable { entries }
    }

    pub fn entries(&self) -> &Array2<u64> {
        &self.entries
    }

    pub fn into_entries(self) -> Array2<u64> {
        self.entries
    }

    pub fn to_real(&self) -> Array2<f64> {
        self.entries.mapv(|d| d as f64)
    }
}

impl Serialize for ContingencyTable {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        to_nested(&self.entries).serialize(s)
    }
}

/// Non-negative finite weights `w_ij`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMatrix(Array2<f64>);

impl WeightMatrix {
    pub fn new(w: Array2<f64>) -> Result<Self> {
        check_non_negative(&w)?;
        Ok(WeightMatrix(w))
    }

    pub fn ones(m: usize, n: usize) -> Self {
        WeightMatrix(Array2::ones((m, n)))
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }
}

impl Serialize for WeightMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        to_nested(&self.0).serialize(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn biguint_log() {
        assert_eq!(ln_biguint(&BigUint::from(0u32)), f64::NEG_INFINITY);
        assert!((ln_biguint(&BigUint::from(1000u32)) - 1000f64.ln()).abs() < 1e-14);
        let huge = BigUint::from(3u32).pow(2000);
        assert!((ln_biguint(&huge) - 2000.0 * 3f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn count_json() {
        let c = BigCount(BigUint::from(2u32));
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.starts_with(r#"{"count":"2","log10_count":0.30102999"#), "{s}");
    }

    #[test]
    fn table_validation() {
        let m = Margins::new(vec![2, 1], vec![1, 2]).unwrap();
        assert!(ContingencyTable::new(array![[1, 1], [0, 1]], &m).is_ok());
        assert_eq!(
            ContingencyTable::new(array![[2, 0], [0, 1]], &m),
            Err(Error::TableMarginMismatch)
        );
        let t = ContingencyTable::new(array![[0, 2], [1, 0]], &m).unwrap();
        assert_eq!(serde_json::to_string(&t).unwrap(), "[[0,2],[1,0]]");
    }

    #[test]
    fn weights_reject_negative() {
        assert!(WeightMatrix::new(array![[1.0, -1.0]]).is_err());
        assert!(WeightMatrix::new(array![[1.0, f64::NAN]]).is_err());
        assert!(WeightMatrix::new(array![[0.0, 2.0]]).is_ok());
    }
}
