//! Brute-force oracles shared by the integration tests. Nothing here calls
//! into the library's numerical routines.

#![allow(dead_code)]

use rand::Rng;
use statrs::function::gamma::ln_gamma;

/// All compositions of `total` into `parts` positive integers.
pub fn compositions(total: u64, parts: usize) -> Vec<Vec<u64>> {
    fn go(left: u64, parts: usize, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if parts == 1 {
            if left >= 1 {
                cur.push(left);
                out.push(cur.clone());
                cur.pop();
            }
            return;
        }
        for first in 1..left {
            cur.push(first);
            go(left - first, parts - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if parts > 0 {
        go(total, parts, &mut Vec::new(), &mut out);
    }
    out
}

/// Calls `f` on every non-negative integer table with the given margins.
pub fn for_each_table(rows: &[u64], cols: &[u64], mut f: impl FnMut(&[Vec<u64>])) {
    fn fill(
        rows: &[u64],
        i: usize,
        j: usize,
        row_left: u64,
        col_left: &mut Vec<u64>,
        table: &mut Vec<Vec<u64>>,
        f: &mut dyn FnMut(&[Vec<u64>]),
    ) {
        let n = col_left.len();
        if i == rows.len() {
            if col_left.iter().all(|&c| c == 0) {
                f(table);
            }
            return;
        }
        if j == n - 1 {
            if row_left > col_left[j] {
                return;
            }
            table[i][j] = row_left;
            col_left[j] -= row_left;
            let next = rows.get(i + 1).copied().unwrap_or(0);
            fill(rows, i + 1, 0, next, col_left, table, f);
            col_left[j] += row_left;
            return;
        }
        for v in 0..=row_left.min(col_left[j]) {
            table[i][j] = v;
            col_left[j] -= v;
            fill(rows, i, j + 1, row_left - v, col_left, table, f);
            col_left[j] += v;
        }
    }
    let mut table = vec![vec![0; cols.len()]; rows.len()];
    let mut col_left = cols.to_vec();
    fill(rows, 0, 0, rows[0], &mut col_left, &mut table, &mut f);
}

pub fn brute_count(rows: &[u64], cols: &[u64]) -> u64 {
    let mut count = 0;
    for_each_table(rows, cols, |_| count += 1);
    count
}

pub fn all_tables(rows: &[u64], cols: &[u64]) -> Vec<Vec<Vec<u64>>> {
    let mut out = Vec::new();
    for_each_table(rows, cols, |t| out.push(t.to_vec()));
    out
}

/// Permanent by inclusion-exclusion over all column subsets.
pub fn permanent(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut total = 0.0;
    for mask in 1u32..(1 << n) {
        let mut prod = 1.0;
        for row in a {
            prod *= (0..n).filter(|j| mask >> j & 1 == 1).map(|j| row[j]).sum::<f64>();
        }
        let sign = if (n - mask.count_ones() as usize).is_multiple_of(2) { 1.0 } else { -1.0 };
        total += sign * prod;
    }
    total
}

/// The `N x N` matrix whose `(i, j)` block is `r_i x c_j` and filled with
/// `x[i][j]`.
pub fn block_matrix(x: &[Vec<f64>], rows: &[u64], cols: &[u64]) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for (i, &r) in rows.iter().enumerate() {
        let line: Vec<f64> = cols
            .iter()
            .enumerate()
            .flat_map(|(j, &c)| std::iter::repeat_n(x[i][j], c as usize))
            .collect();
        for _ in 0..r {
            out.push(line.clone());
        }
    }
    out
}

/// Alternating row and column normalization until the margins match to
/// `1e-13` relative.
pub fn scale(x: &[Vec<f64>], rows: &[u64], cols: &[u64]) -> Vec<Vec<f64>> {
    let mut y = x.to_vec();
    let (m, n) = (rows.len(), cols.len());
    for _ in 0..1_000_000 {
        for i in 0..m {
            let s: f64 = y[i].iter().sum();
            for v in &mut y[i] {
                *v *= rows[i] as f64 / s;
            }
        }
        let mut worst: f64 = 0.0;
        for j in 0..n {
            let s: f64 = (0..m).map(|i| y[i][j]).sum();
            worst = worst.max((s / cols[j] as f64 - 1.0).abs());
            for row in y.iter_mut() {
                row[j] *= cols[j] as f64 / s;
            }
        }
        if worst < 1e-13 {
            return y;
        }
    }
    panic!("scaling did not converge");
}

pub fn ln_factorial(n: u64) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

pub fn lgamma(x: f64) -> f64 {
    ln_gamma(x)
}

/// Positive margins with `m, n <= max_dim` and `N <= max_total`.
pub fn random_margins<R: Rng>(rng: &mut R, max_dim: usize, max_total: u64) -> (Vec<u64>, Vec<u64>) {
    let m = rng.random_range(1..=max_dim);
    let n = rng.random_range(1..=max_dim);
    let total = rng.random_range(m.max(n) as u64..=max_total);
    (random_composition(rng, total, m), random_composition(rng, total, n))
}

pub fn random_composition<R: Rng>(rng: &mut R, total: u64, parts: usize) -> Vec<u64> {
    let mut v = vec![1; parts];
    for _ in 0..total - parts as u64 {
        v[rng.random_range(0..parts)] += 1;
    }
    v
}

pub fn random_matrix<R: Rng>(rng: &mut R, m: usize, n: usize, spread: f64) -> Vec<Vec<f64>> {
    (0..m)
        .map(|_| (0..n).map(|_| rng.random_range(-spread..spread).exp()).collect())
        .collect()
}

pub fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}
