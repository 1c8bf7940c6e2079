//! The i.i.d. random environment induced by a MERW and its exact machinery:
//! closed-form expectations and speed, backtracking bounds, a quenched
//! hitting-probability solver and Monte Carlo cross-checks.
//!
//! A site of the induced environment is `p` with probability `(1-p)^2` and
//! `1/2` otherwise, independently per site. Everything here requires
//! `p < 1`; the degenerate `p = 1` walk is handled by plain simulation only.

use serde::Serialize;
use thiserror::Error;

use crate::cookie::CookieRule;
use crate::rng::{indexed_unit_f64, trial_seed, SplitMix64};
use crate::walk::Trajectory;

#[derive(Debug, Error, PartialEq)]
pub enum RwreError {
    #[error("drift p must lie in [1/2, 1) for the induced environment, got {0}")]
    DriftOutOfRange(f64),
    #[error("environment value must lie in (0, 1], got {0}")]
    OmegaOutOfRange(f64),
    #[error("backtracking window must contain at least one interior site")]
    EmptyWindow,
}

/// Site-indexed right-step probabilities.
pub trait Environment {
    fn omega(&self, site: i64) -> f64;
}

/// The induced environment: lazily evaluated, deterministic in the seed, and
/// independent of query order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InducedEnvironment {
    p: f64,
    seed: u64,
}

impl InducedEnvironment {
    pub fn sample(p: f64, seed: u64) -> Result<Self, RwreError> {
        if !(0.5..1.0).contains(&p) {
            return Err(RwreError::DriftOutOfRange(p));
        }
        Ok(InducedEnvironment { p, seed })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Probability that a site carries the drift value `p`.
    pub fn p_site_probability(&self) -> f64 {
        (1.0 - self.p) * (1.0 - self.p)
    }

    pub fn materialize(&self, lo: i64, hi: i64) -> Vec<f64> {
        (lo..hi).map(|s| self.omega(s)).collect()
    }
}

impl Environment for InducedEnvironment {
    #[inline]
    fn omega(&self, site: i64) -> f64 {
        if indexed_unit_f64(self.seed, site) < self.p_site_probability() {
            self.p
        } else {
            0.5
        }
    }
}

/// The closed forms attached to the induced environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RwreClosedForms {
    pub p: f64,
    /// `E[(1 - omega) / omega] = (1-p)^3/p + p(2-p)`.
    pub e_rho: f64,
    /// `E[1/omega] = 2p(2-p) + (1-p)^2/p`.
    pub e_inv_omega: f64,
    /// `(1 - E[rho]) / E[1/omega]`.
    pub speed: f64,
}

impl RwreClosedForms {
    /// The fully simplified speed `(1-p)^2 (2p-1) / (2p^2(2-p) + (1-p)^2)`;
    /// agrees with the ratio form to machine precision.
    pub fn speed_simplified(&self) -> f64 {
        let p = self.p;
        let q = 1.0 - p;
        q * q * (2.0 * p - 1.0) / (2.0 * p * p * (2.0 - p) + q * q)
    }
}

pub fn closed_forms(p: f64) -> Result<RwreClosedForms, RwreError> {
    if !(0.5..1.0).contains(&p) {
        return Err(RwreError::DriftOutOfRange(p));
    }
    let q = 1.0 - p;
    let e_rho = q * q * q / p + p * (2.0 - p);
    let e_inv_omega = 2.0 * p * (2.0 - p) + q * q / p;
    Ok(RwreClosedForms {
        p,
        e_rho,
        e_inv_omega,
        speed: one_minus_e_rho(p) / e_inv_omega,
    })
}

/// `1 - E[rho]`, evaluated through its exact rearrangement
/// `(1-p)^2 (2p-1) / p`. The literal subtraction cancels catastrophically
/// for p near 1, where `E[rho]` hugs 1; this form is subtraction-free
/// (`1 - p` and `2p - 1` are both exact in binary64 on [1/2, 1]).
fn one_minus_e_rho(p: f64) -> f64 {
    let q = 1.0 - p;
    q * q * (2.0 * p - 1.0) / p
}

/// Outcome of one quenched walk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RwreRun {
    pub final_position: i64,
    pub speed: f64,
    pub horizon: u64,
}

/// Nearest-neighbour walk from 0 with right probability `omega(site)`.
pub fn simulate_rwre(env: &impl Environment, horizon: u64, seed: u64) -> RwreRun {
    assert!(horizon >= 1, "horizon must be at least 1");
    let mut rng = SplitMix64::new(seed);
    let mut pos = 0i64;
    for _ in 0..horizon {
        let q = env.omega(pos);
        pos += if rng.next_f64() < q { 1 } else { -1 };
    }
    RwreRun {
        final_position: pos,
        speed: pos as f64 / horizon as f64,
        horizon,
    }
}

/// Annealed bound `2 (E[rho])^k` on backtracking `k` steps before reaching
/// `+1`. Returned as-is even when vacuous (`> 1`).
pub fn backtrack_bound(p: f64, k: u32) -> Result<f64, RwreError> {
    let forms = closed_forms(p)?;
    Ok(2.0 * forms.e_rho.powi(k as i32))
}

/// Exact quenched probability of hitting `-k` before `+1` from 0.
///
/// `omegas[i]` is the environment at site `-k + 1 + i`, so the slice covers
/// the interior `-k+1 ..= 0` and has length `k`. Solves the first-passage
/// recursion with boundaries `v(1) = 0`, `v(-k) = 1` in closed product form,
/// O(k) and subtraction-free.
pub fn quenched_backtrack_prob(omegas: &[f64]) -> Result<f64, RwreError> {
    if omegas.is_empty() {
        return Err(RwreError::EmptyWindow);
    }
    for &w in omegas {
        if !(w > 0.0 && w <= 1.0) {
            return Err(RwreError::OmegaOutOfRange(w));
        }
    }
    // v(0) = prod(rho) / sum_{z} prod_{i <= z}(rho), products over interior
    // sites left to right, empty product = 1.
    let mut prod = 1.0;
    let mut sum = 1.0;
    for &w in omegas {
        let rho = (1.0 - w) / w;
        prod *= rho;
        sum += prod;
    }
    Ok(prod / sum)
}

/// [`quenched_backtrack_prob`] on a sampled environment window.
pub fn quenched_backtrack_prob_env(env: &impl Environment, k: u32) -> Result<f64, RwreError> {
    if k == 0 {
        return Err(RwreError::EmptyWindow);
    }
    let k = k as i64;
    let omegas: Vec<f64> = (-k + 1..=0).map(|s| env.omega(s)).collect();
    quenched_backtrack_prob(&omegas)
}

/// Monte Carlo estimate of an annealed probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BacktrackMc {
    pub probability: f64,
    pub stderr: f64,
    pub pairs: u64,
}

/// Annealed `P(tau_{-k} < tau_1)` over independent environment/walk pairs.
pub fn annealed_backtrack_mc(
    p: f64,
    k: u32,
    pairs: u64,
    seed: u64,
) -> Result<BacktrackMc, RwreError> {
    if k == 0 {
        return Err(RwreError::EmptyWindow);
    }
    let target = -(k as i64);
    let mut hits = 0u64;
    for i in 0..pairs {
        let env = InducedEnvironment::sample(p, trial_seed(seed, 2 * i))?;
        let mut rng = SplitMix64::new(trial_seed(seed, 2 * i + 1));
        let mut pos = 0i64;
        // Drift points right on average, so this loop terminates quickly;
        // the cap only guards against a pathological stall and counts as a
        // hit, which can only inflate the estimate a bound must dominate.
        for _ in 0..100_000_000u64 {
            pos += if rng.next_f64() < env.omega(pos) {
                1
            } else {
                -1
            };
            if pos == 1 || pos == target {
                break;
            }
        }
        if pos != 1 {
            hits += 1;
        }
    }
    let p_hat = hits as f64 / pairs as f64;
    Ok(BacktrackMc {
        probability: p_hat,
        stderr: (p_hat * (1.0 - p_hat) / pairs as f64).sqrt(),
        pairs,
    })
}

/// The two speed upper bounds `(2p - 1, (2p-1)/(2p+1))`; the second is the
/// tighter one on `(1/2, 1)`.
pub fn speed_upper_bounds(p: f64) -> Result<(f64, f64), RwreError> {
    if !(0.5..1.0).contains(&p) {
        return Err(RwreError::DriftOutOfRange(p));
    }
    let drift = 2.0 * p - 1.0;
    Ok((drift, drift / (2.0 * p + 1.0)))
}

/// The intersection environment read off a recorded MERW trajectory.
///
/// Site `x >= 0` resolves at the first time the left front passes beyond
/// `x + 1` (i.e. reaches `x + 2`); it takes the value `p` when both walkers
/// have occupied `x` at least `m` times by then, else `1/2`. Returns the
/// values for `x = 0, 1, ...` in order, one per resolved site.
pub fn intersection_environment(traj: &Trajectory, rule: &CookieRule) -> Vec<f64> {
    let xs = traj.xs();
    let ys = traj.ys();
    let m = rule.m();
    let mut counts_x = std::collections::HashMap::new();
    let mut counts_y = std::collections::HashMap::new();
    counts_x.insert(0i32, 1u32);
    counts_y.insert(0i32, 1u32);
    let mut max_x = 0i32;
    let mut max_y = 0i32;
    let mut resolved = Vec::new();
    let mut next_site = 0i32;
    for t in 1..xs.len() {
        *counts_x.entry(xs[t]).or_insert(0) += 1;
        *counts_y.entry(ys[t]).or_insert(0) += 1;
        max_x = max_x.max(xs[t]);
        max_y = max_y.max(ys[t]);
        let left = max_x.min(max_y);
        while left >= next_site + 2 {
            let cx = counts_x.get(&next_site).copied().unwrap_or(0);
            let cy = counts_y.get(&next_site).copied().unwrap_or(0);
            resolved.push(if cx >= m && cy >= m { rule.p() } else { 0.5 });
            next_site += 1;
        }
    }
    resolved
}
