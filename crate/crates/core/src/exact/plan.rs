//! The state graph of the column dynamic program.
//!
//! Layer `j` holds the distinct vectors of row sums remaining before column
//! `j` is filled; a transition is one way to split `c_j` across the rows.
//! With `canonical` set, states are stored sorted, which merges states that
//! differ only by a permutation of rows. That is valid only when the value
//! attached to a path does not depend on row identity (plain counting).

use std::collections::HashMap;

use crate::error::{Error, Result};

pub(crate) struct Layer {
    pub from: Vec<u32>,
    pub to: Vec<u32>,
    /// `m` entries per transition.
    pub splits: Vec<u32>,
    /// Transitions leaving state `s` are `ranges[s].0..ranges[s].1`.
    pub ranges: Vec<(u32, u32)>,
}

impl Layer {
    pub fn len(&self) -> usize {
        self.from.len()
    }

    pub fn split(&self, t: usize, m: usize) -> &[u32] {
        &self.splits[t * m..(t + 1) * m]
    }
}

pub(crate) struct DpPlan {
    pub m: usize,
    pub canonical: bool,
    pub layers: Vec<Layer>,
    /// Number of states in each of the `n + 1` layers.
    pub layer_sizes: Vec<usize>,
}

/// Upper bound on the number of states the plan can visit.
pub(crate) fn state_bound(rows: &[u64], n: usize, canonical: bool) -> f64 {
    let product: f64 = rows.iter().map(|&r| r as f64 + 1.0).product();
    let mut bound = product;
    if canonical {
        // Sorted vectors of length m with entries in 0..=r_+.
        let m = rows.len() as f64;
        let r_plus = *rows.iter().max().unwrap() as f64;
        let multisets = (crate::special::ln_gamma(r_plus + m + 1.0)
            - crate::special::ln_gamma(r_plus + 1.0)
            - crate::special::ln_gamma(m + 1.0))
        .exp();
        bound = bound.min(multisets.round());
    }
    bound * n as f64
}

impl DpPlan {
    pub fn build(rows: &[u64], cols: &[u64], canonical: bool, budget: u64) -> Result<Self> {
        let bound = state_bound(rows, cols.len(), canonical);
        if bound > budget as f64 {
            return Err(Error::BudgetExceeded {
                what: "exact dynamic program",
                required: bound.min(u128::MAX as f64) as u128,
                budget: budget as u128,
            });
        }
        let m = rows.len();
        let mut start: Vec<u32> = rows
            .iter()
            .map(|&r| u32::try_from(r))
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidParameter("row sum exceeds u32 range".into()))?;
        if canonical {
            start.sort_unstable();
        }

        let mut layers = Vec::with_capacity(cols.len());
        let mut layer_sizes = vec![1usize];
        let mut current: Vec<Box<[u32]>> = vec![start.into_boxed_slice()];
        let mut visited: u64 = 1;
        let mut split = vec![0u32; m];
        let mut suffix = vec![0u64; m + 1];

        for &c in cols {
            let c = c as u32;
            let mut index: HashMap<Box<[u32]>, u32> = HashMap::new();
            let mut next_states: Vec<Box<[u32]>> = Vec::new();
            let mut layer = Layer {
                from: Vec::new(),
                to: Vec::new(),
                splits: Vec::new(),
                ranges: Vec::with_capacity(current.len()),
            };
            for (si, state) in current.iter().enumerate() {
                let begin = layer.len() as u32;
                for i in (0..m).rev() {
                    suffix[i] = suffix[i + 1] + state[i] as u64;
                }
                let mut overflow = false;
                enumerate_splits(state, &suffix, c, 0, &mut split, &mut |d| {
                    let mut next: Box<[u32]> = state.iter().zip(d).map(|(s, d)| s - d).collect();
                    if canonical {
                        next.sort_unstable();
                    }
                    let to = match index.get(&next) {
                        Some(&k) => k,
                        None => {
                            visited += 1;
                            if visited > budget {
                                overflow = true;
                            }
                            let k = next_states.len() as u32;
                            index.insert(next.clone(), k);
                            next_states.push(next);
                            k
                        }
                    };
                    layer.from.push(si as u32);
                    layer.to.push(to);
                    layer.splits.extend_from_slice(d);
                });
                if overflow {
                    return Err(Error::BudgetExceeded {
                        what: "exact dynamic program",
                        required: visited as u128,
                        budget: budget as u128,
                    });
                }
                layer.ranges.push((begin, layer.len() as u32));
            }
            layer_sizes.push(next_states.len());
            layers.push(layer);
            current = next_states;
        }
        debug_assert!(current.len() == 1 && current[0].iter().all(|&s| s == 0));
        Ok(DpPlan {
            m,
            canonical,
            layers,
            layer_sizes,
        })
    }

    pub fn n(&self) -> usize {
        self.layers.len()
    }

    pub fn state_count(&self) -> usize {
        self.layer_sizes.iter().sum()
    }
}

/// Calls `emit` with every `d` such that `Σ d = amount` and `d_i <= state_i`.
fn enumerate_splits(
    state: &[u32],
    suffix: &[u64],
    amount: u32,
    i: usize,
    split: &mut [u32],
    emit: &mut dyn FnMut(&[u32]),
) {
    let m = state.len();
    if i + 1 == m {
        if amount <= state[i] {
            split[i] = amount;
            emit(split);
        }
        return;
    }
    let rest = suffix[i + 1];
    let low = (amount as u64).saturating_sub(rest) as u32;
    let high = amount.min(state[i]);
    for d in low..=high {
        split[i] = d;
        enumerate_splits(state, suffix, amount - d, i + 1, split, emit);
    }
}
