//! Regeneration times and the renewal-ratio speed estimator.
//!
//! A time `t` is a regeneration when the walkers coincide, every earlier
//! recorded position of both walkers is strictly left of it and every later
//! one strictly right. Such times split the trajectory into independent
//! blocks, and the speed is the ratio of mean block displacement to mean
//! block duration.
//!
//! On a finite record the "every later" clause is checked against all
//! recorded data, and times inside the final `censor_window` steps are never
//! accepted: too little future has been seen there to trust them. Enlarging
//! the window therefore only removes acceptances. Time 0 satisfies the past
//! clause vacuously, so it is reported in a separate flag rather than counted.

use std::io::{self, Write};

use serde::Serialize;
use thiserror::Error;

use crate::walk::{detect_fresh_epochs, Trajectory};

#[derive(Debug, Error, PartialEq)]
pub enum RegenError {
    #[error("need at least 2 accepted regenerations, found {found}")]
    TooFewRegenerations { found: usize },
    #[error("no uncensored fresh epoch in the trajectory")]
    NoFreshEpochs,
}

/// Accepted regeneration times of one trajectory plus the gap table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegenerationRecord {
    /// Accepted times, strictly increasing, all >= 1.
    pub times: Vec<u64>,
    /// Walker position at each accepted time (walkers coincide there).
    pub positions: Vec<i64>,
    /// Per-gap displacement `X(tau_{i+1}) - X(tau_i)`.
    pub gap_dx: Vec<i64>,
    /// Per-gap duration `tau_{i+1} - tau_i`.
    pub gap_dt: Vec<u64>,
    pub censor_window: u64,
    pub horizon: u64,
    /// Times that satisfied the definition but fell in the censored tail.
    pub censored_candidates: u64,
    /// Whether time 0 satisfies the coincidence and future clauses
    /// (its past clause is vacuous, so it is reported, not counted).
    pub origin_is_regeneration: bool,
}

impl RegenerationRecord {
    pub fn count(&self) -> usize {
        self.times.len()
    }

    pub fn gap_count(&self) -> usize {
        self.gap_dx.len()
    }

    /// CSV gap table `(i, tau_i, dX_i, dtau_i)`: gap `i` spans
    /// `[tau_i, tau_{i+1})`.
    pub fn write_gap_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "i,tau,dx,dt")?;
        for i in 0..self.gap_dx.len() {
            writeln!(
                out,
                "{},{},{},{}",
                i + 1,
                self.times[i],
                self.gap_dx[i],
                self.gap_dt[i]
            )?;
        }
        Ok(())
    }
}

/// Scan a trajectory for regeneration times.
///
/// Linear time: one right-to-left pass builds suffix minima, one
/// left-to-right pass maintains prefix maxima and emits acceptances.
pub fn detect_regenerations(traj: &Trajectory, censor_window: u64) -> RegenerationRecord {
    let xs = traj.xs();
    let ys = traj.ys();
    let n = xs.len() - 1; // horizon
    let last_eligible = n as i64 - censor_window as i64; // accept t <= this

    // suffix_min[t] = min over s in (t, n]; sentinel at t = n.
    let mut suffix_min_x = vec![i32::MAX; n + 1];
    let mut suffix_min_y = vec![i32::MAX; n + 1];
    for t in (0..n).rev() {
        suffix_min_x[t] = suffix_min_x[t + 1].min(xs[t + 1]);
        suffix_min_y[t] = suffix_min_y[t + 1].min(ys[t + 1]);
    }

    let origin_ok = xs[0] == ys[0] && suffix_min_x[0] > xs[0] && suffix_min_y[0] > ys[0];
    let origin_is_regeneration = origin_ok && last_eligible >= 0;

    let mut times = Vec::new();
    let mut positions = Vec::new();
    let mut censored = 0u64;
    let mut prefix_max_x = xs[0];
    let mut prefix_max_y = ys[0];
    for t in 1..=n {
        let coincide = xs[t] == ys[t];
        let past_ok = prefix_max_x < xs[t] && prefix_max_y < ys[t];
        let future_ok = suffix_min_x[t] > xs[t] && suffix_min_y[t] > ys[t];
        if coincide && past_ok && future_ok {
            if (t as i64) <= last_eligible {
                times.push(t as u64);
                positions.push(xs[t] as i64);
            } else {
                censored += 1;
            }
        }
        prefix_max_x = prefix_max_x.max(xs[t]);
        prefix_max_y = prefix_max_y.max(ys[t]);
    }

    let mut gap_dx = Vec::new();
    let mut gap_dt = Vec::new();
    for i in 1..times.len() {
        gap_dx.push(positions[i] - positions[i - 1]);
        gap_dt.push(times[i] - times[i - 1]);
    }

    RegenerationRecord {
        times,
        positions,
        gap_dx,
        gap_dt,
        censor_window,
        horizon: n as u64,
        censored_candidates: censored,
        origin_is_regeneration,
    }
}

/// Renewal-ratio speed estimate with a delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpeedEstimate {
    pub speed: f64,
    pub stderr: f64,
    pub gaps: usize,
}

/// `mean(dX) / mean(dt)` over the gaps between consecutive accepted
/// regenerations, treating gaps as i.i.d.
pub fn regeneration_speed(record: &RegenerationRecord) -> Result<SpeedEstimate, RegenError> {
    regeneration_speed_opts(record, false)
}

/// Same, optionally dropping the first gap as burn-in.
pub fn regeneration_speed_opts(
    record: &RegenerationRecord,
    skip_first_gap: bool,
) -> Result<SpeedEstimate, RegenError> {
    let start = usize::from(skip_first_gap);
    if record.gap_dx.len() < start + 1 {
        return Err(RegenError::TooFewRegenerations {
            found: record.times.len(),
        });
    }
    let dx = &record.gap_dx[start..];
    let dt = &record.gap_dt[start..];
    let n = dx.len() as f64;
    let mean_dx = dx.iter().map(|&v| v as f64).sum::<f64>() / n;
    let mean_dt = dt.iter().map(|&v| v as f64).sum::<f64>() / n;
    let speed = mean_dx / mean_dt;
    // Delta method for a ratio of means: residuals a_i - speed * b_i have
    // zero mean by construction.
    let mut ss = 0.0;
    for i in 0..dx.len() {
        let e = dx[i] as f64 - speed * dt[i] as f64;
        ss += e * e;
    }
    let stderr = if dx.len() >= 2 {
        (ss / (n - 1.0)).sqrt() / (n.sqrt() * mean_dt)
    } else {
        0.0
    };
    Ok(SpeedEstimate {
        speed,
        stderr,
        gaps: dx.len(),
    })
}

/// Fraction of uncensored fresh epochs that are regeneration times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioEstimate {
    pub ratio: f64,
    pub stderr: f64,
    pub fresh_epochs: usize,
    pub regenerations: usize,
}

pub fn fresh_to_regen_ratio(
    traj: &Trajectory,
    censor_window: u64,
) -> Result<RatioEstimate, RegenError> {
    let horizon = traj.horizon();
    let cutoff = horizon.saturating_sub(censor_window);
    let fresh: Vec<u64> = detect_fresh_epochs(traj)
        .into_iter()
        .filter(|&t| t <= cutoff && censor_window <= horizon)
        .collect();
    if fresh.is_empty() {
        return Err(RegenError::NoFreshEpochs);
    }
    let record = detect_regenerations(traj, censor_window);
    debug_assert!(
        record.times.iter().all(|t| fresh.binary_search(t).is_ok()),
        "every regeneration time must be a fresh epoch"
    );
    let n = fresh.len() as f64;
    let ratio = record.times.len() as f64 / n;
    Ok(RatioEstimate {
        ratio,
        stderr: (ratio * (1.0 - ratio) / n).sqrt(),
        fresh_epochs: fresh.len(),
        regenerations: record.times.len(),
    })
}
