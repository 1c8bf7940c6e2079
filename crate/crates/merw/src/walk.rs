//! Exact MERW dynamics: two walkers on the integer line, simultaneous
//! nearest-neighbour moves, each walker's drift at its current site switching
//! on once the other walker has occupied that site `m` times.
//!
//! Conventions fixed here and relied on everywhere else:
//!
//! * Visit counts include time-0 occupancy: both walkers start on 0 and each
//!   already counts one visit of the other there.
//! * A step is simultaneous. Both move probabilities are evaluated in the
//!   pre-step state, then both walkers move and both arrival counts are
//!   bumped.
//! * A draw `u` in `[0, 1)` moves a walker right exactly when `u < q`, where
//!   `q` is its right-step probability.
//! * Running maxima (and hence the fronts) include time 0, so the front
//!   starts at 0.

use std::io::{self, Write};

use serde::Serialize;
use thiserror::Error;

use crate::cookie::CookieRule;
use crate::rng::{trial_seed, SplitMix64};

/// Recording a trajectory stores two `i32` positions per step; longer runs
/// must use summary-only mode.
pub const MAX_RECORDED_HORIZON: u64 = 100_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum WalkError {
    #[error("horizon {horizon} exceeds the recording limit {limit}; run summary-only instead")]
    HorizonTooLongToRecord { horizon: u64, limit: u64 },
}

/// Occupancy counts over a contiguous band of sites, grown on demand.
/// Cells saturate at `cap`; the drift schedule never distinguishes counts
/// above `m`, so nothing is lost.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteCounts {
    base: i64,
    cells: Vec<u8>,
    cap: u8,
}

impl SiteCounts {
    fn new(cap: u8) -> Self {
        SiteCounts {
            base: -64,
            cells: vec![0; 129],
            cap,
        }
    }

    #[inline]
    pub fn get(&self, site: i64) -> u32 {
        let idx = site - self.base;
        if idx >= 0 && (idx as usize) < self.cells.len() {
            self.cells[idx as usize] as u32
        } else {
            0
        }
    }

    #[inline]
    fn bump(&mut self, site: i64) {
        self.ensure(site);
        let cell = &mut self.cells[(site - self.base) as usize];
        if *cell < self.cap {
            *cell += 1;
        }
    }

    fn ensure(&mut self, site: i64) {
        if site < self.base {
            let grow = (self.base - site).max(self.cells.len() as i64) as usize;
            let mut next = vec![0u8; self.cells.len() + grow];
            next[grow..].copy_from_slice(&self.cells);
            self.base -= grow as i64;
            self.cells = next;
        } else if site >= self.base + self.cells.len() as i64 {
            let need = (site - self.base) as usize + 1 - self.cells.len();
            let grow = need.max(self.cells.len());
            self.cells.resize(self.cells.len() + grow, 0);
        }
    }
}

/// Full two-walker configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct MerwState {
    step_index: u64,
    x: i64,
    y: i64,
    max_x: i64,
    max_y: i64,
    visits_x: SiteCounts,
    visits_y: SiteCounts,
    fresh_epochs: u64,
}

impl MerwState {
    /// Both walkers on 0, each counting its time-0 occupancy.
    pub fn initial(rule: &CookieRule) -> Self {
        let cap = rule.m().min(200) as u8;
        let mut visits_x = SiteCounts::new(cap);
        let mut visits_y = SiteCounts::new(cap);
        visits_x.bump(0);
        visits_y.bump(0);
        MerwState {
            step_index: 0,
            x: 0,
            y: 0,
            max_x: 0,
            max_y: 0,
            visits_x,
            visits_y,
            fresh_epochs: 0,
        }
    }

    pub fn step_index(&self) -> u64 {
        self.step_index
    }

    pub fn x(&self) -> i64 {
        self.x
    }

    pub fn y(&self) -> i64 {
        self.y
    }

    pub fn max_x(&self) -> i64 {
        self.max_x
    }

    pub fn max_y(&self) -> i64 {
        self.max_y
    }

    pub fn right_front(&self) -> i64 {
        self.max_x.max(self.max_y)
    }

    pub fn left_front(&self) -> i64 {
        self.max_x.min(self.max_y)
    }

    /// Capped occupancy count of walker X at `site` (including time 0).
    pub fn visits_x(&self, site: i64) -> u32 {
        self.visits_x.get(site)
    }

    pub fn visits_y(&self, site: i64) -> u32 {
        self.visits_y.get(site)
    }

    /// Times `t` so far with `R(t) = X(t) = Y(t) = R(t-1) + 1`.
    pub fn fresh_epoch_count(&self) -> u64 {
        self.fresh_epochs
    }

    /// X's right-step probability in the current state: the drift schedule
    /// evaluated at Y's count on X's site.
    #[inline]
    pub fn right_prob_x(&self, rule: &CookieRule) -> f64 {
        rule.drift_prob(self.visits_y.get(self.x))
    }

    #[inline]
    pub fn right_prob_y(&self, rule: &CookieRule) -> f64 {
        rule.drift_prob(self.visits_x.get(self.y))
    }

    /// One simultaneous step driven by two independent uniforms.
    #[inline]
    pub fn step(&mut self, rule: &CookieRule, u_x: f64, u_y: f64) {
        let q_x = self.right_prob_x(rule);
        let q_y = self.right_prob_y(rule);
        let prev_front = self.right_front();
        self.x += if u_x < q_x { 1 } else { -1 };
        self.y += if u_y < q_y { 1 } else { -1 };
        self.visits_x.bump(self.x);
        self.visits_y.bump(self.y);
        if self.x > self.max_x {
            self.max_x = self.x;
        }
        if self.y > self.max_y {
            self.max_y = self.y;
        }
        self.step_index += 1;
        let front = self.right_front();
        if self.x == self.y && self.x == front && front == prev_front + 1 {
            self.fresh_epochs += 1;
        }
    }
}

/// Recorded positions of both walkers, index 0 holding the start.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    x: Vec<i32>,
    y: Vec<i32>,
}

impl Trajectory {
    /// Build from explicit position sequences (mostly for tests and tools).
    ///
    /// # Panics
    /// If the sequences are empty, of different lengths, or contain a
    /// non-unit step.
    pub fn from_positions(x: Vec<i32>, y: Vec<i32>) -> Self {
        assert!(!x.is_empty() && x.len() == y.len());
        for t in 1..x.len() {
            assert!((x[t] - x[t - 1]).abs() == 1, "non-unit X step at {t}");
            assert!((y[t] - y[t - 1]).abs() == 1, "non-unit Y step at {t}");
        }
        Trajectory { x, y }
    }

    pub fn horizon(&self) -> u64 {
        (self.x.len() - 1) as u64
    }

    #[inline]
    pub fn x(&self, t: u64) -> i64 {
        self.x[t as usize] as i64
    }

    #[inline]
    pub fn y(&self, t: u64) -> i64 {
        self.y[t as usize] as i64
    }

    pub fn xs(&self) -> &[i32] {
        &self.x
    }

    pub fn ys(&self) -> &[i32] {
        &self.y
    }

    /// CSV rows `n,x,y,R,L` with the running fronts.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "n,x,y,R,L")?;
        let mut max_x = i32::MIN;
        let mut max_y = i32::MIN;
        for t in 0..self.x.len() {
            max_x = max_x.max(self.x[t]);
            max_y = max_y.max(self.y[t]);
            writeln!(
                out,
                "{},{},{},{},{}",
                t,
                self.x[t],
                self.y[t],
                max_x.max(max_y),
                max_x.min(max_y)
            )?;
        }
        Ok(())
    }

    /// Binary stream of signed 8-bit step pairs `(dx, dy)`, one pair per step.
    pub fn write_binary_steps<W: Write>(&self, out: &mut W) -> io::Result<()> {
        for t in 1..self.x.len() {
            let pair = [
                (self.x[t] - self.x[t - 1]) as i8 as u8,
                (self.y[t] - self.y[t - 1]) as i8 as u8,
            ];
            out.write_all(&pair)?;
        }
        Ok(())
    }
}

/// Summary of one simulated trial, reproducible from the embedded seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub horizon: u64,
    pub final_x: i64,
    pub final_y: i64,
    pub max_x: i64,
    pub max_y: i64,
    pub right_front: i64,
    pub left_front: i64,
    pub speed_x: f64,
    pub speed_y: f64,
    pub fresh_epochs: u64,
    pub master_seed: u64,
    pub trial_index: u64,
}

impl RunSummary {
    fn from_state(state: &MerwState, horizon: u64, master_seed: u64, trial_index: u64) -> Self {
        RunSummary {
            horizon,
            final_x: state.x(),
            final_y: state.y(),
            max_x: state.max_x(),
            max_y: state.max_y(),
            right_front: state.right_front(),
            left_front: state.left_front(),
            speed_x: state.x() as f64 / horizon as f64,
            speed_y: state.y() as f64 / horizon as f64,
            fresh_epochs: state.fresh_epoch_count(),
            master_seed,
            trial_index,
        }
    }
}

/// Run one trial summary-only. Deterministic in `(rule, horizon, master_seed,
/// trial_index)` on every platform and under any parallel layout.
pub fn run(rule: &CookieRule, horizon: u64, master_seed: u64, trial_index: u64) -> RunSummary {
    assert!(horizon >= 1, "horizon must be at least 1");
    let mut rng = SplitMix64::new(trial_seed(master_seed, trial_index));
    let mut state = MerwState::initial(rule);
    for _ in 0..horizon {
        let u_x = rng.next_f64();
        let u_y = rng.next_f64();
        state.step(rule, u_x, u_y);
    }
    RunSummary::from_state(&state, horizon, master_seed, trial_index)
}

/// Like [`run`] but recording the full trajectory.
pub fn run_recorded(
    rule: &CookieRule,
    horizon: u64,
    master_seed: u64,
    trial_index: u64,
) -> Result<(RunSummary, Trajectory), WalkError> {
    assert!(horizon >= 1, "horizon must be at least 1");
    if horizon > MAX_RECORDED_HORIZON {
        return Err(WalkError::HorizonTooLongToRecord {
            horizon,
            limit: MAX_RECORDED_HORIZON,
        });
    }
    let mut rng = SplitMix64::new(trial_seed(master_seed, trial_index));
    let mut state = MerwState::initial(rule);
    let mut xs = Vec::with_capacity(horizon as usize + 1);
    let mut ys = Vec::with_capacity(horizon as usize + 1);
    xs.push(0i32);
    ys.push(0i32);
    for _ in 0..horizon {
        let u_x = rng.next_f64();
        let u_y = rng.next_f64();
        state.step(rule, u_x, u_y);
        xs.push(state.x() as i32);
        ys.push(state.y() as i32);
    }
    let summary = RunSummary::from_state(&state, horizon, master_seed, trial_index);
    Ok((summary, Trajectory { x: xs, y: ys }))
}

/// All times `t >= 1` with `R(t) = X(t) = Y(t) = R(t-1) + 1`, increasing.
pub fn detect_fresh_epochs(traj: &Trajectory) -> Vec<u64> {
    let mut out = Vec::new();
    let mut max_x = traj.x[0];
    let mut max_y = traj.y[0];
    for t in 1..traj.x.len() {
        let prev_front = max_x.max(max_y);
        max_x = max_x.max(traj.x[t]);
        max_y = max_y.max(traj.y[t]);
        let front = max_x.max(max_y);
        if traj.x[t] == traj.y[t] && traj.x[t] == front && front == prev_front + 1 {
            out.push(t as u64);
        }
    }
    out
}
