use ndarray::Array2;
use num_bigint::BigUint;
use num_traits::{One, Zero};

use super::plan::{state_bound, DpPlan};
use super::{Budget, WeightMatrix};
use crate::error::Result;
use crate::logreal::LogReal;
use crate::margins::Margins;
use crate::matrix::{check_positive, check_shape};
use crate::special::ln_factorial;

/// Evaluates sums of the form `Σ_D Π_ij h_ij(d_ij)` over all tables `D`,
/// for one fixed margin pair and many cell weightings.
///
/// Building the state graph is the expensive part; each evaluation is a
/// single forward pass over it in scaled linear arithmetic.
pub struct BlockEvaluator {
    margins: Margins,
    transposed: bool,
    plan: DpPlan,
    /// `Σ ln r_i! + Σ ln c_j!`.
    ln_margin_factorials: f64,
    /// Column sums in the plan's orientation.
    oriented_cols: Vec<u64>,
    max_entry: usize,
}

impl BlockEvaluator {
    pub fn new(margins: &Margins, budget: &Budget) -> Result<Self> {
        let transposed =
            state_bound(margins.cols(), margins.m(), false) < state_bound(margins.rows(), margins.n(), false);
        let oriented = if transposed {
            margins.transpose()
        } else {
            margins.clone()
        };
        let plan = DpPlan::build(oriented.rows(), oriented.cols(), false, budget.dp_states)?;
        let ln_margin_factorials = margins
            .rows()
            .iter()
            .chain(margins.cols())
            .map(|&v| ln_factorial(v))
            .sum();
        let max_entry = *oriented.cols().iter().max().unwrap() as usize;
        Ok(BlockEvaluator {
            margins: margins.clone(),
            transposed,
            plan,
            ln_margin_factorials,
            oriented_cols: oriented.cols().to_vec(),
            max_entry,
        })
    }

    pub fn margins(&self) -> &Margins {
        &self.margins
    }

    /// `ln per A(X)` where block `(i, j)` of `A(X)` is an `r_i x c_j` block
    /// filled with `x_ij`.
    pub fn log_per_block(&self, x: &Array2<f64>) -> Result<LogReal> {
        check_shape(x, self.margins.m(), self.margins.n())?;
        check_positive(x)?;
        Ok(LogReal::from_ln(self.ln_per_block_unchecked(x)))
    }

    /// As [`Self::log_per_block`] without validating `x`.
    pub fn ln_per_block_unchecked(&self, x: &Array2<f64>) -> f64 {
        let inner = self.forward(x, |v, d, prev| prev * v / d as f64);
        inner + self.ln_margin_factorials
    }

    /// `T(R,C;W) = Σ_D Π w_ij^d_ij` with `0^0 = 1`.
    pub fn log_weighted(&self, weights: &WeightMatrix) -> Result<LogReal> {
        let w = weights.as_array();
        check_shape(w, self.margins.m(), self.margins.n())?;
        Ok(LogReal::from_ln(self.forward(w, |v, _, prev| prev * v)))
    }

    /// `T(R,C;W)` for integer weights, in exact arithmetic.
    pub fn weighted_exact(&self, weights: &Array2<u64>) -> Result<BigUint> {
        check_shape(weights, self.margins.m(), self.margins.n())?;
        let w = self.orient(weights);
        let (m, n) = (self.plan.m, self.plan.n());
        let stride = self.max_entry + 1;
        let mut powers = Vec::with_capacity(m * n * stride);
        for i in 0..m {
            for j in 0..n {
                let base = BigUint::from(w[[i, j]]);
                let mut p = BigUint::one();
                for _ in 0..stride {
                    powers.push(p.clone());
                    p *= &base;
                }
            }
        }
        let mut vals = vec![BigUint::one()];
        for j in 0..n {
            let layer = &self.plan.layers[j];
            let mut next = vec![BigUint::zero(); self.plan.layer_sizes[j + 1]];
            for (s, &(a, b)) in layer.ranges.iter().enumerate() {
                if vals[s].is_zero() {
                    continue;
                }
                for t in a as usize..b as usize {
                    let mut p = vals[s].clone();
                    for (i, &d) in layer.split(t, m).iter().enumerate() {
                        p *= &powers[(i * n + j) * stride + d as usize];
                    }
                    next[layer.to[t] as usize] += p;
                }
            }
            vals = next;
        }
        Ok(vals.swap_remove(0))
    }

    fn orient<T: Clone>(&self, a: &Array2<T>) -> Array2<T> {
        if self.transposed {
            a.t().as_standard_layout().to_owned()
        } else {
            a.clone()
        }
    }

    /// `ln Σ_D Π_ij h(a_ij, d_ij)` where `h(v, d)` is built by the recurrence
    /// `h(v, d) = step(v, d, h(v, d - 1))` from `h(v, 0) = 1`. Each column is
    /// divided by its largest entry first; `h` must be homogeneous of degree
    /// `d` in `v` for that to be undone exactly.
    fn forward(&self, a: &Array2<f64>, step: impl Fn(f64, usize, f64) -> f64) -> f64 {
        let a = self.orient(a);
        let (m, n) = (self.plan.m, self.plan.n());
        let stride = self.max_entry + 1;
        let mut table = vec![0.0; m * n * stride];
        let mut ln_scale = 0.0;
        for j in 0..n {
            let col_max = a.column(j).iter().copied().fold(0.0, f64::max);
            if col_max == 0.0 {
                return f64::NEG_INFINITY;
            }
            ln_scale += self.oriented_cols[j] as f64 * col_max.ln();
            for i in 0..m {
                let v = a[[i, j]] / col_max;
                let cell = &mut table[(i * n + j) * stride..(i * n + j + 1) * stride];
                cell[0] = 1.0;
                for d in 1..stride {
                    cell[d] = step(v, d, cell[d - 1]);
                }
            }
        }

        let mut vals = vec![1.0f64];
        for j in 0..n {
            let layer = &self.plan.layers[j];
            let mut next = vec![0.0; self.plan.layer_sizes[j + 1]];
            for (s, &(lo, hi)) in layer.ranges.iter().enumerate() {
                let v = vals[s];
                if v == 0.0 {
                    continue;
                }
                for t in lo as usize..hi as usize {
                    let mut p = v;
                    for (i, &d) in layer.split(t, m).iter().enumerate() {
                        p *= table[(i * n + j) * stride + d as usize];
                    }
                    next[layer.to[t] as usize] += p;
                }
            }
            let max = next.iter().copied().fold(0.0, f64::max);
            if max == 0.0 {
                return f64::NEG_INFINITY;
            }
            for v in &mut next {
                *v /= max;
            }
            ln_scale += max.ln();
            vals = next;
        }
        ln_scale + vals[0].ln()
    }
}

/// `T(R,C;W)` in the log domain.
pub fn count_weighted(margins: &Margins, weights: &WeightMatrix, budget: &Budget) -> Result<LogReal> {
    BlockEvaluator::new(margins, budget)?.log_weighted(weights)
}

/// `T(R,C;W)` for integer weights, exactly.
pub fn count_weighted_exact(margins: &Margins, weights: &Array2<u64>, budget: &Budget) -> Result<BigUint> {
    BlockEvaluator::new(margins, budget)?.weighted_exact(weights)
}

/// `per A(X)` for a strictly positive `X`, via
/// `per A(X) = Π r_i! Π c_j! Σ_D Π x_ij^d_ij / d_ij!`.
pub fn per_block(margins: &Margins, x: &Array2<f64>, budget: &Budget) -> Result<LogReal> {
    BlockEvaluator::new(margins, budget)?.log_per_block(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{count_tables, per_ryser};
    use crate::error::Error;
    use ndarray::array;

    fn mg(r: &[u64], c: &[u64]) -> Margins {
        Margins::new(r.to_vec(), c.to_vec()).unwrap()
    }

    /// Explicit `A(X)`: block (i, j) is `r_i x c_j` filled with `x_ij`.
    fn block_matrix(m: &Margins, x: &Array2<f64>) -> Array2<f64> {
        let n_total = m.total() as usize;
        let row_of: Vec<usize> = m.rows().iter().enumerate().flat_map(|(i, &r)| std::iter::repeat_n(i, r as usize)).collect();
        let col_of: Vec<usize> = m.cols().iter().enumerate().flat_map(|(j, &c)| std::iter::repeat_n(j, c as usize)).collect();
        Array2::from_shape_fn((n_total, n_total), |(a, b)| x[[row_of[a], col_of[b]]])
    }

    #[test]
    fn two_by_two_weighted() {
        let m = mg(&[1, 1], &[1, 1]);
        let (a, b, c, d) = (2.0, 3.0, 5.0, 7.0);
        let w = WeightMatrix::new(array![[a, b], [c, d]]).unwrap();
        let t = count_weighted(&m, &w, &Budget::default()).unwrap();
        assert!((t.value() - (a * d + b * c)).abs() < 1e-12);
        let p = per_block(&m, &array![[a, b], [c, d]], &Budget::default()).unwrap();
        assert!((p.value() - (a * d + b * c)).abs() < 1e-12);
    }

    #[test]
    fn single_row_block() {
        // A(X) = [[x, y], [x, y]], per = 2xy.
        let m = mg(&[2], &[1, 1]);
        let p = per_block(&m, &array![[0.3, 1.7]], &Budget::default()).unwrap();
        assert!((p.value() - 2.0 * 0.3 * 1.7).abs() < 1e-14);
    }

    #[test]
    fn ones_weight_gives_count() {
        for (r, c) in [(vec![3, 3, 3], vec![3, 3, 3]), (vec![4, 1, 2], vec![2, 2, 3])] {
            let m = mg(&r, &c);
            let exact = count_tables(&m, &Budget::default()).unwrap();
            let w = count_weighted(&m, &WeightMatrix::ones(m.m(), m.n()), &Budget::default()).unwrap();
            assert!((w.ln() - exact.ln()).abs() < 1e-12);
            let ones = Array2::from_elem((m.m(), m.n()), 1u64);
            assert_eq!(count_weighted_exact(&m, &ones, &Budget::default()).unwrap(), exact.0);
        }
    }

    #[test]
    fn zero_weights() {
        // Forced diagonal: only the identity table survives.
        let m = mg(&[1, 1], &[1, 1]);
        let w = WeightMatrix::new(array![[1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert!((count_weighted(&m, &w, &Budget::default()).unwrap().value() - 1.0).abs() < 1e-15);
        // A zero row blocks every table.
        let m = mg(&[2, 1], &[1, 2]);
        let w = WeightMatrix::new(array![[0.0, 0.0], [1.0, 1.0]]).unwrap();
        assert!(count_weighted(&m, &w, &Budget::default()).unwrap().is_zero());
        let wi = array![[0u64, 0], [1, 1]];
        assert!(count_weighted_exact(&m, &wi, &Budget::default()).unwrap().is_zero());
    }

    #[test]
    fn rejects_bad_matrices() {
        let m = mg(&[1, 1], &[1, 1]);
        assert!(matches!(
            per_block(&m, &array![[1.0, 0.0], [1.0, 1.0]], &Budget::default()),
            Err(Error::InvalidEntry { .. })
        ));
        assert!(matches!(
            per_block(&m, &array![[1.0, 1.0]], &Budget::default()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn agrees_with_ryser_on_uniform_matrix() {
        let m = mg(&[2, 3, 1], &[3, 3]);
        let k = (m.cells()) as f64;
        let x = Array2::from_elem((3, 2), 1.0 / k);
        let a = block_matrix(&m, &x);
        let p = per_block(&m, &x, &Budget::default()).unwrap();
        let q = per_ryser(&a, &Budget::default()).unwrap();
        assert!((p.ln() - q.ln()).abs() < 1e-12);
        // All N! permutations contribute (1/mn)^N.
        let expected = crate::special::ln_factorial(6) - 6.0 * k.ln();
        assert!((p.ln() - expected).abs() < 1e-12);
    }

    #[test]
    fn transposed_orientation_matches() {
        let m = mg(&[4, 4], &[1, 2, 1, 2, 1, 1]);
        let x = Array2::from_shape_fn((2, 6), |(i, j)| 0.1 + 0.07 * (i * 6 + j) as f64);
        let a = block_matrix(&m, &x);
        let p = per_block(&m, &x, &Budget::default()).unwrap();
        let q = per_ryser(&a, &Budget::default()).unwrap();
        assert!(((p.ln() - q.ln()) / q.ln()).abs() < 1e-10);
        let pt = per_block(&m.transpose(), &x.t().to_owned(), &Budget::default()).unwrap();
        assert!((p.ln() - pt.ln()).abs() < 1e-12);
    }
}
