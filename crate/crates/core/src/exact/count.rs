use ndarray::Array2;
use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;

use super::plan::{state_bound, DpPlan};
use super::{BigCount, Budget, ContingencyTable};
use crate::error::Result;
use crate::margins::Margins;

/// Completion counts of the table DP, kept for repeated uniform sampling.
///
/// Immutable once built; share it across threads and give each sampler its
/// own random stream.
pub struct TableCounter {
    margins: Margins,
    transposed: bool,
    plan: DpPlan,
    /// `completions[j][s]`: tables for the remaining columns from state `s`.
    completions: Vec<Vec<BigUint>>,
}

impl TableCounter {
    pub fn new(margins: &Margins, budget: &Budget) -> Result<Self> {
        Self::with_options(margins, budget, true)
    }

    /// `canonical` merges DP states that are row permutations of each other.
    pub fn with_options(margins: &Margins, budget: &Budget, canonical: bool) -> Result<Self> {
        let transposed = state_bound(margins.cols(), margins.m(), canonical)
            < state_bound(margins.rows(), margins.n(), canonical);
        let oriented = if transposed {
            margins.transpose()
        } else {
            margins.clone()
        };
        let plan = DpPlan::build(oriented.rows(), oriented.cols(), canonical, budget.dp_states)?;

        let n = plan.n();
        let mut completions: Vec<Vec<BigUint>> = Vec::with_capacity(n + 1);
        completions.resize_with(n + 1, Vec::new);
        completions[n] = vec![BigUint::one()];
        for j in (0..n).rev() {
            let layer = &plan.layers[j];
            let next = &completions[j + 1];
            let here = layer
                .ranges
                .iter()
                .map(|&(a, b)| {
                    (a..b).fold(BigUint::zero(), |acc, t| acc + &next[layer.to[t as usize] as usize])
                })
                .collect();
            completions[j] = here;
        }
        Ok(TableCounter {
            margins: margins.clone(),
            transposed,
            plan,
            completions,
        })
    }

    pub fn margins(&self) -> &Margins {
        &self.margins
    }

    pub fn count(&self) -> BigCount {
        BigCount(self.completions[0][0].clone())
    }

    pub fn state_count(&self) -> usize {
        self.plan.state_count()
    }

    /// Draws a table uniformly from all tables with these margins.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ContingencyTable {
        let plan = &self.plan;
        let m = plan.m;
        let n = plan.n();
        let oriented_rows: Vec<u32> = if self.transposed {
            self.margins.cols().iter().map(|&c| c as u32).collect()
        } else {
            self.margins.rows().iter().map(|&r| r as u32).collect()
        };
        let mut remaining = oriented_rows;
        let mut entries = Array2::<u64>::zeros((m, n));
        let mut order: Vec<usize> = (0..m).collect();
        let mut state = 0usize;

        for j in 0..n {
            let layer = &plan.layers[j];
            let (a, b) = layer.ranges[state];
            let next = &self.completions[j + 1];
            let mut u = random_below(rng, &self.completions[j][state]);
            let mut chosen = b as usize - 1;
            for t in a as usize..b as usize {
                let w = &next[layer.to[t] as usize];
                if u < *w {
                    chosen = t;
                    break;
                }
                u -= w;
            }
            let split = layer.split(chosen, m);
            if plan.canonical {
                // Sorted state position k corresponds to row order[k].
                order.sort_by_key(|&i| remaining[i]);
                for (k, &d) in split.iter().enumerate() {
                    entries[[order[k], j]] = d as u64;
                    remaining[order[k]] -= d;
                }
            } else {
                for (i, &d) in split.iter().enumerate() {
                    entries[[i, j]] = d as u64;
                    remaining[i] -= d;
                }
            }
            state = layer.to[chosen] as usize;
        }
        let entries = if self.transposed {
            entries.reversed_axes().as_standard_layout().to_owned()
        } else {
            entries
        };
        ContingencyTable::from_entries_unchecked(entries)
    }
}

/// Uniform integer in `[0, bound)`; `bound` must be positive.
fn random_below<R: Rng + ?Sized>(rng: &mut R, bound: &BigUint) -> BigUint {
    if let Some(b) = bound.to_u64() {
        return BigUint::from(rng.random_range(0..b));
    }
    let bits = bound.bits();
    let words = bits.div_ceil(32) as usize;
    let top_bits = bits - 32 * (words as u64 - 1);
    let mask = if top_bits == 32 {
        u32::MAX
    } else {
        (1u32 << top_bits) - 1
    };
    loop {
        let mut digits: Vec<u32> = (0..words).map(|_| rng.random()).collect();
        *digits.last_mut().unwrap() &= mask;
        let v = BigUint::new(digits);
        if &v < bound {
            return v;
        }
    }
}

/// `#(R,C)`, exactly.
pub fn count_tables(margins: &Margins, budget: &Budget) -> Result<BigCount> {
    Ok(TableCounter::new(margins, budget)?.count())
}

pub fn sample_table_uniform<R: Rng + ?Sized>(
    margins: &Margins,
    budget: &Budget,
    rng: &mut R,
) -> Result<ContingencyTable> {
    Ok(TableCounter::new(margins, budget)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;
    use crate::error::Error;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mg(r: &[u64], c: &[u64]) -> Margins {
        Margins::new(r.to_vec(), c.to_vec()).unwrap()
    }

    fn count(r: &[u64], c: &[u64]) -> u64 {
        count_tables(&mg(r, c), &Budget::default())
            .unwrap()
            .0
            .to_u64()
            .unwrap()
    }

    /// Independent oracle: every matrix whose rows are compositions of `r_i`,
    /// filtered by column sums.
    fn brute_force(r: &[u64], c: &[u64]) -> u64 {
        fn compositions(total: u64, parts: usize, caps: &[u64]) -> Vec<Vec<u64>> {
            if parts == 1 {
                return if total <= caps[0] { vec![vec![total]] } else { vec![] };
            }
            let mut out = Vec::new();
            for d in 0..=total.min(caps[0]) {
                for mut rest in compositions(total - d, parts - 1, &caps[1..]) {
                    rest.insert(0, d);
                    out.push(rest);
                }
            }
            out
        }
        fn go(r: &[u64], left: &mut Vec<u64>) -> u64 {
            match r.split_first() {
                None => left.iter().all(|&x| x == 0) as u64,
                Some((&ri, rest)) => {
                    let mut total = 0;
                    for row in compositions(ri, left.len(), &left.clone()) {
                        for (l, d) in left.iter_mut().zip(&row) {
                            *l -= d;
                        }
                        total += go(rest, left);
                        for (l, d) in left.iter_mut().zip(&row) {
                            *l += d;
                        }
                    }
                    total
                }
            }
        }
        go(r, &mut c.to_vec())
    }

    #[test]
    fn known_values() {
        assert_eq!(count(&[1, 1], &[1, 1]), 2);
        assert_eq!(count(&[2, 2, 2], &[2, 2, 2]), 21);
        assert_eq!(count(&[3, 3, 3], &[3, 3, 3]), 55);
        assert_eq!(count(&[7], &[7]), 1);
        assert_eq!(count(&[2, 3], &[5]), 1);
        let mut fact = 1;
        for n in 1..=7u64 {
            fact *= n;
            let ones = vec![1; n as usize];
            assert_eq!(count(&ones, &ones), fact);
        }
    }

    #[test]
    fn matches_brute_force() {
        for (r, c) in [
            (vec![2, 2, 2], vec![2, 2, 2]),
            (vec![3, 1, 2], vec![1, 4, 1]),
            (vec![5, 1], vec![2, 2, 2]),
            (vec![1, 2, 3, 2], vec![4, 4]),
        ] {
            assert_eq!(count(&r, &c), brute_force(&r, &c), "{r:?} {c:?}");
        }
    }

    #[test]
    fn canonical_and_plain_agree() {
        let m = mg(&[3, 2, 3, 1], &[2, 4, 3]);
        let a = TableCounter::with_options(&m, &Budget::default(), true).unwrap();
        let b = TableCounter::with_options(&m, &Budget::default(), false).unwrap();
        assert_eq!(a.count(), b.count());
        assert!(a.state_count() <= b.state_count());
    }

    #[test]
    fn large_counts_are_exact() {
        // 25 x 25 permutation matrices: 25! overflows u64.
        let ones = vec![1u64; 25];
        let c = count_tables(&mg(&ones, &ones), &Budget::default()).unwrap();
        let fact: BigUint = (1..=25u32).map(BigUint::from).product();
        assert_eq!(c.0, fact);
        assert_eq!(count(&[4; 4], &[4; 4]), brute_force(&[4; 4], &[4; 4]));
    }

    #[test]
    fn budget_is_enforced() {
        let budget = Budget {
            dp_states: 10,
            ..Budget::default()
        };
        let err = count_tables(&mg(&[3, 3, 3], &[3, 3, 3]), &budget).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
    }

    #[test]
    fn uniform_sampling_two_outcomes() {
        for (r, c) in [(vec![1, 1], vec![1, 1]), (vec![2, 1], vec![2, 1])] {
            let counter = TableCounter::new(&mg(&r, &c), &Budget::default()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let draws = 10_000;
            let mut freq: HashMap<Vec<u64>, usize> = HashMap::new();
            for _ in 0..draws {
                let t = counter.sample(&mut rng);
                *freq.entry(t.entries().iter().copied().collect()).or_default() += 1;
            }
            assert_eq!(freq.len(), 2);
            let sigma = (0.25f64 / draws as f64).sqrt();
            for &k in freq.values() {
                assert!((k as f64 / draws as f64 - 0.5).abs() <= 3.0 * sigma);
            }
        }
    }

    #[test]
    fn samples_respect_margins_when_transposed() {
        // Wide margins make the counter run on the transpose.
        let m = mg(&[6, 6], &[1, 2, 3, 2, 1, 3]);
        let counter = TableCounter::new(&m, &Budget::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let t = counter.sample(&mut rng);
            ContingencyTable::new(t.into_entries(), &m).unwrap();
        }
    }

    #[test]
    fn random_below_big_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bound = BigUint::from(3u32).pow(60);
        for _ in 0..100 {
            assert!(random_below(&mut rng, &bound) < bound);
        }
    }
}
