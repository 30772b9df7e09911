//! Small helpers around `ndarray::Array2` shared by the numeric modules.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Row-major nested vectors, the JSON shape used for every matrix.
pub fn to_nested<T: Clone>(a: &Array2<T>) -> Vec<Vec<T>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

pub fn from_nested<T: Clone>(rows: &[Vec<T>]) -> Result<Array2<T>> {
    let m = rows.len();
    let n = rows.first().map_or(0, Vec::len);
    if m == 0 || n == 0 {
        return Err(Error::InvalidParameter("matrix must be non-empty".into()));
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != n) {
        return Err(Error::DimensionMismatch {
            expected_rows: m,
            expected_cols: n,
            rows: m,
            cols: bad.len(),
        });
    }
    let flat: Vec<T> = rows.iter().flat_map(|r| r.iter().cloned()).collect();
    Ok(Array2::from_shape_vec((m, n), flat).expect("shape checked"))
}

pub fn check_shape<T>(a: &Array2<T>, m: usize, n: usize) -> Result<()> {
    if a.dim() != (m, n) {
        return Err(Error::DimensionMismatch {
            expected_rows: m,
            expected_cols: n,
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    Ok(())
}

pub fn check_positive(a: &Array2<f64>) -> Result<()> {
    for ((row, col), &v) in a.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::InvalidEntry { row, col, reason: "not finite" });
        }
        if v <= 0.0 {
            return Err(Error::InvalidEntry { row, col, reason: "not positive" });
        }
    }
    Ok(())
}

pub fn check_non_negative(a: &Array2<f64>) -> Result<()> {
    for ((row, col), &v) in a.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::InvalidEntry { row, col, reason: "not finite" });
        }
        if v < 0.0 {
            return Err(Error::InvalidEntry { row, col, reason: "negative" });
        }
    }
    Ok(())
}

/// Scales `a` so its entries sum to one.
pub fn project_to_simplex(a: &Array2<f64>) -> Array2<f64> {
    let total: f64 = a.sum();
    a / total
}

pub fn row_sums(a: &Array2<f64>) -> Vec<f64> {
    a.rows().into_iter().map(|r| r.sum()).collect()
}

pub fn col_sums(a: &Array2<f64>) -> Vec<f64> {
    a.columns().into_iter().map(|c| c.sum()).collect()
}
