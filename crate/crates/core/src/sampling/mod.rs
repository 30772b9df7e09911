//! Random points of the simplex and the positive orthant.
//!
//! - [`sample_simplex_uniform`]: the normalized Lebesgue measure on
//!   `Δ = {X > 0, Σ x_ij = 1}`.
//! - [`PsiSampler`]: exact draws from
//!   `ψ(X) = (1/#(R,C)) Σ_D Π_ij x_ij^d_ij e^-x_ij / d_ij!`, a uniform mixture
//!   over tables `D` of products of Gamma densities.
//! - [`sample_nu`]: a hit-and-run chain on the δ-interior of `Δ` targeting
//!   the density proportional to `φ`.

mod chain;
mod tails;

pub use chain::{sample_nu, write_jsonl, ChainConfig, ChainDiagnostics, NuRun, NuSample};
pub use tails::{empirical_tail_checks, Lemma91Check, Lemma93Check, LogPSummary, TailConfig, TailReport};

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use serde::Serialize;

use crate::error::Result;
use crate::exact::{Budget, ContingencyTable, TableCounter};
use crate::margins::Margins;
use crate::matrix::to_nested;

/// A uniform point of the open simplex of `m x n` matrices.
pub fn sample_simplex_uniform<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> Array2<f64> {
    let mut x = Array2::from_shape_simple_fn((m, n), || Exp1.sample(rng));
    let total = x.sum();
    x /= total;
    x
}

#[derive(Clone, Debug, PartialEq)]
pub struct PsiSample {
    pub x: Array2<f64>,
    /// The table whose Gamma product generated `x`.
    pub table: ContingencyTable,
}

impl Serialize for PsiSample {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            x: Vec<Vec<f64>>,
            table: &'a ContingencyTable,
        }
        Repr {
            x: to_nested(&self.x),
            table: &self.table,
        }
        .serialize(s)
    }
}

/// Draws from `ψ`: a uniform table `D`, then independent
/// `x_ij ~ Gamma(d_ij + 1, 1)`.
pub struct PsiSampler {
    tables: TableCounter,
    /// `gammas[d]` has shape `d + 1`.
    gammas: Vec<Gamma<f64>>,
}

impl PsiSampler {
    pub fn new(margins: &Margins, budget: &Budget) -> Result<Self> {
        let tables = TableCounter::new(margins, budget)?;
        let max_entry = *margins.rows().iter().chain(margins.cols()).max().unwrap();
        let gammas = (0..=max_entry)
            .map(|d| Gamma::new(d as f64 + 1.0, 1.0).expect("positive shape"))
            .collect();
        Ok(PsiSampler { tables, gammas })
    }

    pub fn tables(&self) -> &TableCounter {
        &self.tables
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PsiSample {
        let table = self.tables.sample(rng);
        let x = table.entries().mapv(|d| self.gammas[d as usize].sample(rng));
        PsiSample { x, table }
    }
}

pub fn sample_psi<R: Rng + ?Sized>(margins: &Margins, budget: &Budget, rng: &mut R) -> Result<PsiSample> {
    Ok(PsiSampler::new(margins, budget)?.sample(rng))
}
