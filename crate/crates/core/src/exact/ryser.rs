use ndarray::Array2;

use super::Budget;
use crate::error::{Error, Result};
use crate::logreal::LogReal;
use crate::matrix::check_non_negative;

/// Permanent of a square non-negative matrix by Ryser's inclusion-exclusion
/// formula, visiting column subsets in Gray-code order.
///
/// `per A = Σ_S (-1)^(N-|S|) Π_i Σ_{j in S} a_ij`. The alternating sum is
/// accumulated with Neumaier compensation; a non-positive result (rounding
/// of a zero permanent) is reported as zero.
pub fn per_ryser(a: &Array2<f64>, budget: &Budget) -> Result<LogReal> {
    let (rows, cols) = a.dim();
    if rows != cols {
        return Err(Error::DimensionMismatch {
            expected_rows: rows,
            expected_cols: rows,
            rows,
            cols,
        });
    }
    check_non_negative(a)?;
    let n = rows;
    if n > budget.ryser_max_order {
        return Err(Error::BudgetExceeded {
            what: "Ryser permanent",
            required: n as u128,
            budget: budget.ryser_max_order as u128,
        });
    }
    if n == 0 {
        return Ok(LogReal::ONE);
    }

    let mut row_sums = vec![0.0f64; n];
    let mut sum = 0.0f64;
    let mut compensation = 0.0f64;
    let mut gray: u64 = 0;
    for k in 1u64..(1u64 << n) {
        let j = k.trailing_zeros() as usize;
        gray ^= 1 << j;
        let adding = gray & (1 << j) != 0;
        for (i, s) in row_sums.iter_mut().enumerate() {
            if adding {
                *s += a[[i, j]];
            } else {
                *s -= a[[i, j]];
            }
        }
        let mut term: f64 = row_sums.iter().product();
        if (n - gray.count_ones() as usize) % 2 == 1 {
            term = -term;
        }
        let t = sum + term;
        if sum.abs() >= term.abs() {
            compensation += (sum - t) + term;
        } else {
            compensation += (term - t) + sum;
        }
        sum = t;
    }
    let per = sum + compensation;
    Ok(if per > 0.0 {
        LogReal::from_value(per)
    } else {
        LogReal::ZERO
    })
}
