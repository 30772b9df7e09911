//! The factorization `f = p φ` of the integrand
//!
//! `f(X) = (N+mn-1)! / (mn-1)! · per A(X) / (Π r_i! Π c_j!)`
//!
//! on the simplex `Δ = {X > 0, Σ x_ij = 1}`, where `#(R,C)` is the average
//! of `f` over `Δ`. With `x_ij = y_ij λ_i μ_j` the scaling of `X`:
//!
//! - `ln φ(X) = ln [(N+mn-1)! N! / ((mn-1)! N^N)] + Σ_i (r_i ln r_i - ln r_i!)
//!   + Σ_j (c_j ln c_j - ln c_j!) + Σ_i r_i ln λ_i + Σ_j c_j ln μ_j`,
//! - `p(X) = (N^N / N!) per B(X)` for the doubly stochastic scaling `B(X)` of
//!   `A(X)`, so `1 <= p(X)`.
//!
//! Every input is first projected onto `Δ`.

use ndarray::Array2;
use serde::Serialize;

use super::bounds::{bracket_from_tau, p_upper_bound};
use super::{scale_multipliers, DEFAULT_MAX_ITER};
use crate::error::{Error, Result};
use crate::exact::{BlockEvaluator, Budget};
use crate::margins::Margins;
use crate::matrix::{check_positive, check_shape, project_to_simplex};
use crate::special::{ln_factorial, ln_gamma};

/// Evaluates `ln φ` for one margin pair.
#[derive(Clone, Debug)]
pub struct PhiEvaluator {
    margins: Margins,
    ln_const: f64,
    tol: f64,
    max_iter: usize,
}

impl PhiEvaluator {
    pub fn new(margins: &Margins, tol: f64) -> Result<Self> {
        if !(tol.is_finite() && tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tol must be positive, got {tol}")));
        }
        let n = margins.total();
        let nf = n as f64;
        let cells = margins.cells() as f64;
        let side: f64 = margins
            .rows()
            .iter()
            .chain(margins.cols())
            .map(|&t| t as f64 * (t as f64).ln() - ln_factorial(t))
            .sum();
        let ln_const = ln_gamma(nf + cells) + ln_factorial(n) - ln_gamma(cells) - nf * nf.ln() + side;
        Ok(PhiEvaluator {
            margins: margins.clone(),
            ln_const,
            tol,
            max_iter: DEFAULT_MAX_ITER,
        })
    }

    pub fn margins(&self) -> &Margins {
        &self.margins
    }

    pub fn log_phi(&self, x: &Array2<f64>) -> Result<f64> {
        let x = self.project(x)?;
        let mut lambda = vec![1.0; self.margins.m()];
        let mut mu = vec![1.0; self.margins.n()];
        self.log_phi_warm(&x, &mut lambda, &mut mu)
    }

    pub(crate) fn project(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        check_shape(x, self.margins.m(), self.margins.n())?;
        check_positive(x)?;
        Ok(project_to_simplex(x))
    }

    /// `ln φ` of a point already on the simplex, starting the scaling from
    /// the given multipliers and leaving the converged ones in place.
    pub(crate) fn log_phi_warm(&self, x: &Array2<f64>, lambda: &mut [f64], mu: &mut [f64]) -> Result<f64> {
        scale_multipliers(x, &self.margins, self.tol, self.max_iter, lambda, mu)?;
        Ok(self.log_phi_from_multipliers(lambda, mu))
    }

    fn log_phi_from_multipliers(&self, lambda: &[f64], mu: &[f64]) -> f64 {
        let r: f64 = self.margins.rows().iter().zip(lambda).map(|(&r, l)| r as f64 * l.ln()).sum();
        let c: f64 = self.margins.cols().iter().zip(mu).map(|(&c, u)| c as f64 * u.ln()).sum();
        self.ln_const + r + c
    }
}

/// `ln p(X)`: a point value when the block permanent is within the DP
/// budget, otherwise an interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum LogP {
    Exact { value: f64 },
    Bracket { bracket: Interval },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl LogP {
    pub fn value(&self) -> Option<f64> {
        match self {
            LogP::Exact { value } => Some(*value),
            LogP::Bracket { .. } => None,
        }
    }

    pub fn lower(&self) -> f64 {
        match self {
            LogP::Exact { value } => *value,
            LogP::Bracket { bracket } => bracket.lower,
        }
    }

    pub fn upper(&self) -> f64 {
        match self {
            LogP::Exact { value } => *value,
            LogP::Bracket { bracket } => bracket.upper,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FactorReport {
    pub log_phi: f64,
    pub log_p: LogP,
    /// `ln f` from the block permanent; absent above the DP budget.
    pub log_f: Option<f64>,
    /// `|ln f - ln φ - ln p|`.
    pub consistency_gap: Option<f64>,
}

/// Evaluates `φ`, `p` and `f` for one margin pair.
pub struct FactorEvaluator {
    phi: PhiEvaluator,
    /// The DP failure is kept to report it when a point value is requested.
    block: std::result::Result<BlockEvaluator, Error>,
    /// `ln Γ(N+mn) - ln Γ(mn)`.
    ln_simplex_volume: f64,
    ln_p_bound: f64,
}

impl FactorEvaluator {
    /// Falls back to interval-valued `ln p` when the block permanent DP does
    /// not fit in `budget`.
    pub fn new(margins: &Margins, tol: f64, budget: &Budget) -> Result<Self> {
        let block = match BlockEvaluator::new(margins, budget) {
            Err(e) if !e.is_resource_limit() => return Err(e),
            other => other,
        };
        let cells = margins.cells() as f64;
        Ok(FactorEvaluator {
            phi: PhiEvaluator::new(margins, tol)?,
            block,
            ln_simplex_volume: ln_gamma(margins.total() as f64 + cells) - ln_gamma(cells),
            ln_p_bound: p_upper_bound(margins),
        })
    }

    pub fn phi(&self) -> &PhiEvaluator {
        &self.phi
    }

    pub fn is_exact(&self) -> bool {
        self.block.is_ok()
    }

    pub fn log_phi(&self, x: &Array2<f64>) -> Result<f64> {
        self.phi.log_phi(x)
    }

    pub fn log_p(&self, x: &Array2<f64>) -> Result<LogP> {
        let x = self.phi.project(x)?;
        let (lambda, mu) = self.multipliers(&x)?;
        Ok(self.log_p_projected(&x, &lambda, &mu))
    }

    /// `ln f(X)`; requires the block permanent.
    pub fn log_f(&self, x: &Array2<f64>) -> Result<f64> {
        let x = self.phi.project(x)?;
        let block = self.block_or_err()?;
        let margins = self.phi.margins();
        let ln_fact: f64 = margins
            .rows()
            .iter()
            .chain(margins.cols())
            .map(|&t| ln_factorial(t))
            .sum();
        Ok(self.ln_simplex_volume + block.ln_per_block_unchecked(&x) - ln_fact)
    }

    pub fn report(&self, x: &Array2<f64>) -> Result<FactorReport> {
        let xs = self.phi.project(x)?;
        let (lambda, mu) = self.multipliers(&xs)?;
        let log_phi = self.phi.log_phi_from_multipliers(&lambda, &mu);
        let log_p = self.log_p_projected(&xs, &lambda, &mu);
        let log_f = if self.block.is_ok() {
            Some(self.log_f(&xs)?)
        } else {
            None
        };
        let consistency_gap = match (log_f, log_p.value()) {
            (Some(f), Some(p)) => Some((f - log_phi - p).abs()),
            _ => None,
        };
        Ok(FactorReport {
            log_phi,
            log_p,
            log_f,
            consistency_gap,
        })
    }

    fn block_or_err(&self) -> Result<&BlockEvaluator> {
        self.block.as_ref().map_err(Clone::clone)
    }

    fn multipliers(&self, x: &Array2<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut lambda = vec![1.0; x.nrows()];
        let mut mu = vec![1.0; x.ncols()];
        self.phi.log_phi_warm(x, &mut lambda, &mut mu)?;
        Ok((lambda, mu))
    }

    /// `ln p` of a simplex point with converged multipliers.
    pub(crate) fn log_p_projected(&self, x: &Array2<f64>, lambda: &[f64], mu: &[f64]) -> LogP {
        let margins = self.phi.margins();
        let n = margins.total();
        let head = n as f64 * (n as f64).ln() - ln_factorial(n);
        match &self.block {
            Ok(block) => {
                let r: f64 = margins
                    .rows()
                    .iter()
                    .zip(lambda)
                    .map(|(&r, l)| r as f64 * (l * r as f64).ln())
                    .sum();
                let c: f64 = margins
                    .cols()
                    .iter()
                    .zip(mu)
                    .map(|(&c, u)| c as f64 * (u * c as f64).ln())
                    .sum();
                LogP::Exact {
                    value: head + block.ln_per_block_unchecked(x) - r - c,
                }
            }
            Err(_) => {
                // Row maxima of B(X) sum to τ = Σ_i max_j y_ij / c_j.
                let tau: f64 = (0..margins.m())
                    .map(|i| {
                        (0..margins.n())
                            .map(|j| x[[i, j]] / (lambda[i] * mu[j] * margins.cols()[j] as f64))
                            .fold(0.0, f64::max)
                    })
                    .sum();
                let (lower, upper) = bracket_from_tau(tau, n).unwrap_or((f64::NAN, f64::INFINITY));
                LogP::Bracket {
                    bracket: Interval {
                        lower: (head + lower).max(0.0),
                        upper: (head + upper).min(self.ln_p_bound),
                    },
                }
            }
        }
    }
}

/// `ln φ(X)` for a single matrix.
pub fn log_phi(x: &Array2<f64>, margins: &Margins, tol: f64) -> Result<f64> {
    PhiEvaluator::new(margins, tol)?.log_phi(x)
}

/// `ln p(X)` for a single matrix.
pub fn log_p(x: &Array2<f64>, margins: &Margins, tol: f64, budget: &Budget) -> Result<LogP> {
    FactorEvaluator::new(margins, tol, budget)?.log_p(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::count_tables;
    use crate::sampling::sample_simplex_uniform;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const TOL: f64 = 1e-12;

    fn mg(r: &[u64], c: &[u64]) -> Margins {
        Margins::new(r.to_vec(), c.to_vec()).unwrap()
    }

    #[test]
    fn rank_one_has_p_one() {
        let m = mg(&[2, 1, 3], &[4, 2]);
        let x = Array2::from_shape_fn((3, 2), |(i, j)| (i + 1) as f64 * (2 * j + 1) as f64);
        let lp = log_p(&x, &m, TOL, &Budget::default()).unwrap().value().unwrap();
        assert!(lp.abs() < 1e-10, "{lp}");
    }

    #[test]
    fn scale_invariance() {
        let m = mg(&[2, 3], &[1, 2, 2]);
        let x = array![[0.2, 1.3, 0.7], [2.2, 0.1, 0.9]];
        let e = FactorEvaluator::new(&m, TOL, &Budget::default()).unwrap();
        let a = e.log_p(&x).unwrap().value().unwrap();
        let b = e.log_p(&(&x * 37.5)).unwrap().value().unwrap();
        assert!((a - b).abs() < 1e-9);
        assert!((e.log_phi(&x).unwrap() - e.log_phi(&(&x * 1e-3)).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn two_by_two_permutation_margins() {
        // X = [[2,1],[1,2]] is already doubly symmetric; its doubly
        // stochastic scaling is X / 3, with permanent (4 + 1) / 9.
        let m = mg(&[1, 1], &[1, 1]);
        let lp = log_p(&array![[2.0, 1.0], [1.0, 2.0]], &m, TOL, &Budget::default())
            .unwrap()
            .value()
            .unwrap();
        let expected = (4.0f64 / 2.0 * 5.0 / 9.0).ln();
        assert!((lp - expected).abs() < 1e-12);
    }

    #[test]
    fn factorization_is_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (r, c) in [(vec![2, 2], vec![2, 2]), (vec![3, 1, 2], vec![2, 4]), (vec![4], vec![1, 3])] {
            let m = mg(&r, &c);
            let e = FactorEvaluator::new(&m, TOL, &Budget::default()).unwrap();
            let bound = p_upper_bound(&m);
            for _ in 0..20 {
                let x = sample_simplex_uniform(m.m(), m.n(), &mut rng);
                let rep = e.report(&x).unwrap();
                assert!(rep.consistency_gap.unwrap() < 1e-9);
                let lp = rep.log_p.value().unwrap();
                assert!(lp >= -1e-10 && lp <= bound + 1e-10);
            }
        }
    }

    #[test]
    fn one_by_one() {
        let m = mg(&[5], &[5]);
        let e = FactorEvaluator::new(&m, TOL, &Budget::default()).unwrap();
        let rep = e.report(&array![[1.0]]).unwrap();
        // f ≡ #(R,C) = 1 and p ≡ 1.
        assert!(rep.log_f.unwrap().abs() < 1e-12);
        assert!(rep.log_p.value().unwrap().abs() < 1e-12);
        assert!(rep.log_phi.abs() < 1e-12);
        assert_eq!(count_tables(&m, &Budget::default()).unwrap().to_string(), "1");
    }

    #[test]
    fn multiplier_normalization_does_not_matter() {
        let m = mg(&[3, 2], &[1, 4]);
        let e = PhiEvaluator::new(&m, TOL).unwrap();
        let x = project_to_simplex(&array![[0.3, 1.0], [2.0, 0.5]]);
        let mut l = vec![1.0; 2];
        let mut u = vec![1.0; 2];
        e.log_phi_warm(&x, &mut l, &mut u).unwrap();
        let a = e.log_phi_from_multipliers(&l, &u);
        let t = 4.25;
        let l2: Vec<f64> = l.iter().map(|v| v * t).collect();
        let u2: Vec<f64> = u.iter().map(|v| v / t).collect();
        assert!((a - e.log_phi_from_multipliers(&l2, &u2)).abs() < 1e-12);
    }

    #[test]
    fn bracket_above_budget() {
        let m = mg(&[2, 2, 2], &[2, 2, 2]);
        let budget = Budget {
            dp_states: 2,
            ..Budget::default()
        };
        let e = FactorEvaluator::new(&m, TOL, &budget).unwrap();
        assert!(!e.is_exact());
        let x = array![[1.0, 2.0, 3.0], [0.5, 0.5, 4.0], [2.0, 1.0, 1.0]];
        let lp = e.log_p(&x).unwrap();
        let exact = log_p(&x, &m, TOL, &Budget::default()).unwrap().value().unwrap();
        assert!(lp.value().is_none());
        assert!(lp.lower() <= exact && exact <= lp.upper());
        let rep = e.report(&x).unwrap();
        assert!(rep.log_f.is_none());
        let json = serde_json::to_value(&rep).unwrap();
        assert!(json["log_p"]["bracket"]["upper"].is_number());
    }
}
