//! Hit-and-run Metropolis chain on `Δ_δ = {X in Δ : x_ij >= δ}` with
//! stationary density proportional to `φ`.
//!
//! From the current point a direction is drawn from the standard Gaussian
//! projected onto the zero-sum hyperplane, a point is drawn uniformly on the
//! chord of `Δ_δ` along that direction, and the move is accepted with
//! probability `min(1, φ(proposal) / φ(current))`. The proposal kernel is
//! symmetric, so `ν_δ ∝ φ 1_{Δ_δ}` is stationary.

use std::io::Write;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::margins::Margins;
use crate::matrix::to_nested;
use crate::rng::{substream, Purpose};
use crate::scaling::{PhiEvaluator, DEFAULT_TOL};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainConfig {
    pub burn_in: usize,
    pub thinning: usize,
    pub delta_interior: f64,
    /// Length of the windows over which acceptance rates are recorded.
    pub step_count: usize,
    pub seed: u64,
    /// Independent chains; samples are split evenly between them.
    pub chains: usize,
}

impl ChainConfig {
    pub const DEFAULT_BURN_IN: usize = 1000;
    pub const DEFAULT_THINNING: usize = 10;
    pub const DEFAULT_WINDOW: usize = 1000;
    pub const DEFAULT_CHAINS: usize = 4;

    /// `δ = 1 / (1000 mn (N + mn))`, which keeps the `f`-mass outside `Δ_δ`
    /// below about 0.1%.
    pub fn default_delta(margins: &Margins) -> f64 {
        let cells = margins.cells() as f64;
        1.0 / (1000.0 * cells * (margins.total() as f64 + cells))
    }

    pub fn for_margins(margins: &Margins, seed: u64) -> Self {
        ChainConfig {
            burn_in: Self::DEFAULT_BURN_IN,
            thinning: Self::DEFAULT_THINNING,
            delta_interior: Self::default_delta(margins),
            step_count: Self::DEFAULT_WINDOW,
            seed,
            chains: Self::DEFAULT_CHAINS,
        }
    }

    pub fn validate(&self, margins: &Margins) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.thinning == 0 {
            return bad("thinning must be at least 1".into());
        }
        if self.chains == 0 {
            return bad("at least one chain is required".into());
        }
        if self.step_count == 0 {
            return bad("step_count must be at least 1".into());
        }
        let limit = 1.0 / margins.cells() as f64;
        if !(self.delta_interior > 0.0 && self.delta_interior < limit) {
            return bad(format!("delta_interior must lie in (0, {limit}), got {}", self.delta_interior));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NuSample {
    pub chain: usize,
    /// Step index within the chain, counting burn-in.
    pub step: usize,
    pub x: Array2<f64>,
    pub log_phi: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ChainStats {
    pub chain: usize,
    pub steps: usize,
    pub proposals: usize,
    pub accepted: usize,
    /// Restarts from the barycenter after a degenerate chord.
    pub restarts: usize,
    pub window_rates: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainDiagnostics {
    pub acceptance_rate: f64,
    pub proposals: usize,
    pub accepted: usize,
    pub restarts: usize,
    pub chains: Vec<ChainStats>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NuRun {
    /// Ordered by chain, then step.
    pub samples: Vec<NuSample>,
    pub diagnostics: ChainDiagnostics,
}

impl NuRun {
    /// Samples grouped by chain.
    pub fn by_chain(&self) -> Vec<&[NuSample]> {
        let mut out = Vec::new();
        let mut start = 0;
        for k in 1..=self.samples.len() {
            if k == self.samples.len() || self.samples[k].chain != self.samples[start].chain {
                out.push(&self.samples[start..k]);
                start = k;
            }
        }
        out
    }
}

/// Runs `config.chains` independent chains and returns `count` states in
/// total, taken every `thinning` steps after `burn_in`.
pub fn sample_nu(margins: &Margins, config: &ChainConfig, count: usize) -> Result<NuRun> {
    config.validate(margins)?;
    let phi = PhiEvaluator::new(margins, DEFAULT_TOL)?;
    let results: Vec<Result<(Vec<NuSample>, ChainStats)>> = (0..config.chains)
        .into_par_iter()
        .map(|c| {
            let share = count / config.chains + usize::from(c < count % config.chains);
            run_chain(&phi, config, c, share)
        })
        .collect();
    let mut samples = Vec::with_capacity(count);
    let mut chains = Vec::with_capacity(config.chains);
    for r in results {
        let (s, stats) = r?;
        samples.extend(s);
        chains.push(stats);
    }
    let proposals = chains.iter().map(|c| c.proposals).sum();
    let accepted = chains.iter().map(|c| c.accepted).sum();
    Ok(NuRun {
        samples,
        diagnostics: ChainDiagnostics {
            acceptance_rate: if proposals > 0 {
                accepted as f64 / proposals as f64
            } else {
                0.0
            },
            proposals,
            accepted,
            restarts: chains.iter().map(|c| c.restarts).sum(),
            chains,
        },
    })
}

struct State {
    x: Array2<f64>,
    log_phi: f64,
    lambda: Vec<f64>,
    mu: Vec<f64>,
}

impl State {
    fn barycenter(phi: &PhiEvaluator) -> Result<State> {
        let (m, n) = (phi.margins().m(), phi.margins().n());
        let x = Array2::from_elem((m, n), 1.0 / (m * n) as f64);
        let mut lambda = vec![1.0; m];
        let mut mu = vec![1.0; n];
        let log_phi = phi.log_phi_warm(&x, &mut lambda, &mut mu)?;
        Ok(State { x, log_phi, lambda, mu })
    }
}

/// `ln` of the Metropolis ratio `φ(proposal) / φ(current)`.
pub(crate) fn log_acceptance_ratio(current: f64, proposal: f64) -> f64 {
    proposal - current
}

/// Parameter interval `[lo, hi]` of `{x + t u >= floor}`; `u` sums to zero.
fn chord(x: &Array2<f64>, u: &Array2<f64>, floor: f64) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for (&xi, &ui) in x.iter().zip(u) {
        let t = (floor - xi) / ui;
        if ui > 0.0 {
            lo = lo.max(t);
        } else if ui < 0.0 {
            hi = hi.min(t);
        }
    }
    (lo.min(0.0), hi.max(0.0))
}

fn run_chain(
    phi: &PhiEvaluator,
    config: &ChainConfig,
    chain: usize,
    count: usize,
) -> Result<(Vec<NuSample>, ChainStats)> {
    let mut stats = ChainStats {
        chain,
        ..ChainStats::default()
    };
    if count == 0 {
        return Ok((Vec::new(), stats));
    }
    let mut rng = substream(config.seed, Purpose::Chain, chain as u64);
    // Proposals are kept a hair inside Δ_δ so rounding never leaves it.
    let floor = config.delta_interior * (1.0 + 1e-12);
    let total_steps = config.burn_in + config.thinning * count;
    let mut state = State::barycenter(phi)?;
    let mut proposal = state.x.clone();
    let mut direction = state.x.clone();
    let mut lambda = state.lambda.clone();
    let mut mu = state.mu.clone();
    let mut samples = Vec::with_capacity(count);
    let mut window_accepted = 0usize;
    let mut window_len = 0usize;

    // A single cell leaves nothing to move.
    let frozen = state.x.len() == 1;

    for step in 1..=total_steps {
        if frozen {
            if step > config.burn_in && (step - config.burn_in).is_multiple_of(config.thinning) {
                samples.push(NuSample {
                    chain,
                    step,
                    x: state.x.clone(),
                    log_phi: state.log_phi,
                });
            }
            continue;
        }
        direction.mapv_inplace(|_| StandardNormal.sample(&mut rng));
        let mean = direction.mean().unwrap();
        direction -= mean;
        let (lo, hi) = chord(&state.x, &direction, floor);
        if !(hi - lo > 0.0 && lo.is_finite() && hi.is_finite()) {
            state = State::barycenter(phi)?;
            stats.restarts += 1;
        } else {
            let t = rng.random_range(lo..=hi);
            proposal.assign(&state.x);
            proposal.scaled_add(t, &direction);
            proposal.mapv_inplace(|v| v.max(floor));
            let total = proposal.sum();
            proposal /= total;
            lambda.copy_from_slice(&state.lambda);
            mu.copy_from_slice(&state.mu);
            let log_phi = phi.log_phi_warm(&proposal, &mut lambda, &mut mu)?;
            stats.proposals += 1;
            window_len += 1;
            let u: f64 = rng.random();
            if u.ln() < log_acceptance_ratio(state.log_phi, log_phi) {
                std::mem::swap(&mut state.x, &mut proposal);
                std::mem::swap(&mut state.lambda, &mut lambda);
                std::mem::swap(&mut state.mu, &mut mu);
                state.log_phi = log_phi;
                stats.accepted += 1;
                window_accepted += 1;
            }
            if window_len == config.step_count {
                stats.window_rates.push(window_accepted as f64 / window_len as f64);
                window_accepted = 0;
                window_len = 0;
            }
        }
        if step > config.burn_in && (step - config.burn_in).is_multiple_of(config.thinning) {
            samples.push(NuSample {
                chain,
                step,
                x: state.x.clone(),
                log_phi: state.log_phi,
            });
        }
    }
    stats.steps = total_steps;
    Ok((samples, stats))
}

/// Writes one JSON object per sample: chain id, step index, `ln φ` and the
/// matrix.
pub fn write_jsonl<W: Write>(run: &NuRun, mut out: W) -> std::io::Result<()> {
    #[derive(Serialize)]
    struct Line {
        chain: usize,
        step: usize,
        log_phi: f64,
        x: Vec<Vec<f64>>,
    }
    for s in &run.samples {
        let line = Line {
            chain: s.chain,
            step: s.step,
            log_phi: s.log_phi,
            x: to_nested(&s.x),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mg(r: &[u64], c: &[u64]) -> Margins {
        Margins::new(r.to_vec(), c.to_vec()).unwrap()
    }

    #[test]
    fn samples_stay_in_interior() {
        let m = mg(&[3, 1, 2], &[2, 2, 2]);
        let mut cfg = ChainConfig::for_margins(&m, 3);
        cfg.burn_in = 200;
        cfg.step_count = 100;
        let run = sample_nu(&m, &cfg, 400).unwrap();
        assert_eq!(run.samples.len(), 400);
        for s in &run.samples {
            assert!(s.x.iter().all(|&v| v >= cfg.delta_interior));
            assert!((s.x.sum() - 1.0).abs() < 1e-12);
        }
        for c in &run.diagnostics.chains {
            assert!(!c.window_rates.is_empty());
            assert!(c.window_rates.iter().all(|&r| r > 0.0 && r < 1.0));
        }
        assert_eq!(run.by_chain().len(), 4);
    }

    #[test]
    fn reproducible_and_pool_independent() {
        let m = mg(&[2, 2], &[1, 3]);
        let mut cfg = ChainConfig::for_margins(&m, 17);
        cfg.burn_in = 50;
        let a = sample_nu(&m, &cfg, 40).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(2)
            .build()
            .unwrap()
            .install(|| sample_nu(&m, &cfg, 40).unwrap());
        assert_eq!(a, b);
        let mut buf = Vec::new();
        write_jsonl(&a, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 40);
    }

    #[test]
    fn ratio_is_antisymmetric() {
        for (a, b) in [(0.3, -1.2), (5.0, 5.0), (-7.5, 2.25)] {
            assert_eq!(log_acceptance_ratio(a, b), -log_acceptance_ratio(b, a));
        }
    }

    #[test]
    fn chord_contains_current_point() {
        let x = Array2::from_elem((2, 2), 0.25);
        let u = ndarray::array![[1.0, -1.0], [0.5, -0.5]];
        let (lo, hi) = chord(&x, &u, 0.05);
        assert!((lo - (-0.2)).abs() < 1e-15 && (hi - 0.2).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_config() {
        let m = mg(&[1, 1], &[1, 1]);
        let mut cfg = ChainConfig::for_margins(&m, 0);
        cfg.delta_interior = 0.25;
        assert!(sample_nu(&m, &cfg, 1).is_err());
        cfg.delta_interior = 0.01;
        cfg.thinning = 0;
        assert!(sample_nu(&m, &cfg, 1).is_err());
    }
}
