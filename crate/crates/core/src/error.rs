use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("margins must have at least one row and one column")]
    EmptyMargins,

    #[error("{axis} sum {index} is zero; all margins must be positive")]
    ZeroMargin { axis: &'static str, index: usize },

    #[error("inconsistent margins: row sums total {row_total}, column sums total {col_total}")]
    InconsistentMargins { row_total: u64, col_total: u64 },

    #[error("expected a {expected_rows}x{expected_cols} matrix, found {rows}x{cols}")]
    DimensionMismatch {
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },

    #[error("invalid matrix entry at ({row}, {col}): {reason}")]
    InvalidEntry {
        row: usize,
        col: usize,
        reason: &'static str,
    },

    #[error("table does not match the margins")]
    TableMarginMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{what} needs {required} but the budget is {budget}")]
    BudgetExceeded {
        what: &'static str,
        required: u128,
        budget: u128,
    },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },
}

impl Error {
    /// Budget and convergence failures mean the input was valid but the
    /// instance is out of reach for the requested method.
    pub fn is_resource_limit(&self) -> bool {
        matches!(
            self,
            Error::BudgetExceeded { .. } | Error::NoConvergence { .. }
        )
    }
}
