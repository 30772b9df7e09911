//! Exact and randomized counting of contingency tables.
//!
//! A contingency table with margins `(R, C)` is a non-negative integer
//! matrix whose row sums are `R` and whose column sums are `C`. This crate
//! provides:
//!
//! - [`exact`]: a column dynamic program that counts tables exactly, evaluates
//!   weighted table sums and the block permanent `per A(X)`, and samples
//!   tables uniformly.
//! - [`typical`]: the typical table, i.e. the maximizer of the concave
//!   functional `g` over the transportation polytope, and the bound
//!   `#(R,C) <= exp g(X*)`.
//! - [`scaling`]: Sinkhorn scaling, the factorization `f = p * phi` of the
//!   integrand of the simplex integral for `#(R,C)`, and permanent bounds.
//! - [`sampling`]: uniform simplex draws, exact draws from the Gamma-mixture
//!   density `psi`, and a hit-and-run chain targeting the density
//!   proportional to `phi`.
//! - [`estimator`]: Monte Carlo estimators of `#(R,C)` with standard errors.

pub mod error;
pub mod estimator;
pub mod exact;
pub mod logreal;
pub mod margins;
pub mod matrix;
pub mod rng;
pub mod sampling;
pub mod scaling;
pub mod special;
pub mod stats;
pub mod typical;

pub use error::{Error, Result};
pub use exact::{Budget, BigCount, ContingencyTable, WeightMatrix};
pub use logreal::LogReal;
pub use margins::{MarginStats, Margins};
