//! The truncated two-walker process: any walker that falls `k` or more
//! sites behind the shared right front is forced to step right. Tracking the
//! walkers and the capped visit counts relative to the front makes this a
//! finite Markov chain whose exact long-run speed `v_k` is computable, both
//! by a direct stationary solve and by deterministic drift iteration.
//!
//! State bookkeeping, fixed here:
//!
//! * Offsets are distances behind the front, `0` meaning "at the front".
//!   With simultaneous moves a walker at offset `k - 1` can step left while
//!   the front advances and land at `k + 1`, so offsets range over
//!   `{0, ..., k+1}`; anything at offset `>= k` moves right surely, which
//!   closes the range.
//! * Visit counts are kept for the window of offsets `0 ..= k+1` and capped
//!   at `m`. When the front advances the window shifts: a zero column enters
//!   at the front and the deepest column is discarded.
//! * `k` must be even; the truncated construction uses even depths by
//!   convention and odd depths are rejected for consistency, not because
//!   anything breaks.

mod model;
mod scan;
mod solve;

pub use model::{enumerate_reachable, ChainModel, DEFAULT_STATE_BUDGET};
pub use scan::{
    nonmonotonicity_scan, scan_curve, CurvePoint, DropCertificate, ScanOptions, ScanResult,
    SolverKind,
};
pub use solve::{
    closed_classes, iterated_drift_speed, stationary_speed, stationary_speed_with_limit,
    IteratedSolution, StationarySolution, DEFAULT_DIRECT_SOLVE_LIMIT,
};

use serde::Serialize;
use thiserror::Error;

use crate::cookie::{CookieRule, RuleError};

/// Widest supported count window (`k + 2` columns), which bounds `k` at 14.
pub const MAX_WINDOW: usize = 16;

#[derive(Debug, Error, PartialEq)]
pub enum ChainError {
    #[error(
        "truncation depth k must be even (construction convention, not a \
         mathematical obstruction), got {k}"
    )]
    OddK { k: u32 },
    #[error("truncation depth k must be at least 2, got {k}")]
    KTooSmall { k: u32 },
    #[error("cookie rule: {0}")]
    Rule(#[from] RuleError),
    #[error("state space for k={k}, m={m} does not fit the packed encoding")]
    KeySpaceTooWide { k: u32, m: u32 },
    #[error("state budget exceeded: {reached} states reached (budget {budget})")]
    BudgetExceeded { reached: usize, budget: usize },
    #[error("offset {offset} escaped the truncation window 0..={max}")]
    OffsetOverflow { offset: u32, max: u32 },
    #[error(
        "chain has {count} closed communicating classes (expected exactly one); \
         representative states: {representatives:?}"
    )]
    MultipleClosedClasses {
        count: usize,
        representatives: Vec<usize>,
    },
    #[error("closed class has {states} states, above the direct-solve limit {limit}")]
    ClassTooLargeForDirectSolve { states: usize, limit: usize },
    #[error(
        "drift iteration stuck at spread {spread:e} after {iterations} iterations \
         (tolerance {tolerance:e})"
    )]
    NoConvergence {
        spread: f64,
        iterations: u64,
        tolerance: f64,
    },
    #[error("p-grid must be strictly increasing inside (1/2, 1)")]
    InvalidGrid,
    #[error("operation requires an enumerated model, not a hand-built one")]
    NotEnumerated,
}

/// Parameters of the truncated chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainParams {
    k: u32,
    rule: CookieRule,
}

impl ChainParams {
    pub fn new(k: u32, m: u32, p: f64) -> Result<Self, ChainError> {
        if k < 2 {
            return Err(ChainError::KTooSmall { k });
        }
        if !k.is_multiple_of(2) {
            return Err(ChainError::OddK { k });
        }
        let rule = CookieRule::new(m, p)?;
        let params = ChainParams { k, rule };
        if params.window() > MAX_WINDOW || params.key_bound().is_none() {
            return Err(ChainError::KeySpaceTooWide { k, m });
        }
        Ok(params)
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn m(&self) -> u32 {
        self.rule.m()
    }

    pub fn p(&self) -> f64 {
        self.rule.p()
    }

    pub fn rule(&self) -> &CookieRule {
        &self.rule
    }

    /// Number of count columns tracked per walker.
    pub fn window(&self) -> usize {
        self.k as usize + 2
    }

    /// Exclusive upper bound of the packed key range, if it fits in u64.
    fn key_bound(&self) -> Option<u64> {
        let w = self.window() as u128;
        let radix = self.rule.m() as u128 + 1;
        let mut bound = w * w;
        for _ in 0..2 * self.window() {
            bound = bound.checked_mul(radix)?;
        }
        u64::try_from(bound).ok()
    }
}

/// One state of the truncated chain: both offsets plus the capped visit
/// counts of both walkers over the offset window.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct TruncatedState {
    dx: u8,
    dy: u8,
    cx: Vec<u8>,
    cy: Vec<u8>,
}

impl TruncatedState {
    /// Canonical start: both walkers at the front, each having visited it
    /// once, all other counts zero.
    pub fn initial(params: &ChainParams) -> Self {
        let w = params.window();
        let mut cx = vec![0u8; w];
        let mut cy = vec![0u8; w];
        cx[0] = 1;
        cy[0] = 1;
        TruncatedState {
            dx: 0,
            dy: 0,
            cx,
            cy,
        }
    }

    pub fn offsets(&self) -> (u32, u32) {
        (self.dx as u32, self.dy as u32)
    }

    /// X's capped visit counts, index = offset behind the front.
    pub fn counts_x(&self) -> &[u8] {
        &self.cx
    }

    pub fn counts_y(&self) -> &[u8] {
        &self.cy
    }

    /// The walker-exchange image `(dx, cx) <-> (dy, cy)`.
    pub fn swapped(&self) -> Self {
        TruncatedState {
            dx: self.dy,
            dy: self.dx,
            cx: self.cy.clone(),
            cy: self.cx.clone(),
        }
    }

    /// Fixed-radix packed key, unique per state: offsets first, then the
    /// count digits of X and Y most-significant-first.
    pub fn pack(&self, params: &ChainParams) -> u64 {
        let w = params.window() as u64;
        let radix = params.m() as u64 + 1;
        let mut key = self.dx as u64 * w + self.dy as u64;
        for &c in &self.cx {
            key = key * radix + c as u64;
        }
        for &c in &self.cy {
            key = key * radix + c as u64;
        }
        key
    }

    pub fn unpack(mut key: u64, params: &ChainParams) -> Self {
        let w = params.window();
        let radix = params.m() as u64 + 1;
        let mut cy = vec![0u8; w];
        for o in (0..w).rev() {
            cy[o] = (key % radix) as u8;
            key /= radix;
        }
        let mut cx = vec![0u8; w];
        for o in (0..w).rev() {
            cx[o] = (key % radix) as u8;
            key /= radix;
        }
        let dy = (key % w as u64) as u8;
        let dx = (key / w as u64) as u8;
        TruncatedState { dx, dy, cx, cy }
    }

    /// Structural sanity: offsets inside the window, counts capped, and each
    /// walker has visited its own current site.
    pub fn is_well_formed(&self, params: &ChainParams) -> bool {
        let w = params.window();
        let m = params.m() as u8;
        self.cx.len() == w
            && self.cy.len() == w
            && (self.dx as usize) < w
            && (self.dy as usize) < w
            && self.cx.iter().all(|&c| c <= m)
            && self.cy.iter().all(|&c| c <= m)
            && self.cx[self.dx as usize] >= 1
            && self.cy[self.dy as usize] >= 1
    }
}

/// X's expected displacement in `state`: `2q - 1` for its right probability
/// `q`, which is `1` exactly when X is forced (`offset >= k`).
pub fn drift_x(state: &TruncatedState, params: &ChainParams) -> f64 {
    2.0 * right_prob_x(state, params) - 1.0
}

pub fn drift_y(state: &TruncatedState, params: &ChainParams) -> f64 {
    2.0 * right_prob_y(state, params) - 1.0
}

#[inline]
fn right_prob_x(state: &TruncatedState, params: &ChainParams) -> f64 {
    if state.dx as u32 >= params.k() {
        1.0
    } else {
        params.rule().drift_prob(state.cy[state.dx as usize] as u32)
    }
}

#[inline]
fn right_prob_y(state: &TruncatedState, params: &ChainParams) -> f64 {
    if state.dy as u32 >= params.k() {
        1.0
    } else {
        params.rule().drift_prob(state.cx[state.dy as usize] as u32)
    }
}

/// All successors of `state` with their probabilities (at most four).
///
/// Joint move: each walker steps right with its own probability (forced when
/// its offset reaches `k`); if a walker at the front steps right the front
/// advances, every offset grows by one and the count window shifts; then both
/// arrival counts are bumped, capped at `m`.
pub fn transition(
    state: &TruncatedState,
    params: &ChainParams,
) -> Result<Vec<(TruncatedState, f64)>, ChainError> {
    let k = params.k() as i32;
    let w = params.window();
    let m = params.m() as u8;
    let q_x = right_prob_x(state, params);
    let q_y = right_prob_y(state, params);
    let mut out: Vec<(TruncatedState, f64)> = Vec::with_capacity(4);
    for (step_x, prob_x) in [(1i32, q_x), (-1, 1.0 - q_x)] {
        if prob_x <= 0.0 {
            continue;
        }
        for (step_y, prob_y) in [(1i32, q_y), (-1, 1.0 - q_y)] {
            if prob_y <= 0.0 {
                continue;
            }
            let mut ndx = state.dx as i32 - step_x;
            let mut ndy = state.dy as i32 - step_y;
            let advance = ndx < 0 || ndy < 0;
            if advance {
                ndx += 1;
                ndy += 1;
            }
            if ndx > k + 1 || ndy > k + 1 {
                return Err(ChainError::OffsetOverflow {
                    offset: ndx.max(ndy) as u32,
                    max: (k + 1) as u32,
                });
            }
            let (mut cx, mut cy) = if advance {
                let mut cx = vec![0u8; w];
                let mut cy = vec![0u8; w];
                cx[1..].copy_from_slice(&state.cx[..w - 1]);
                cy[1..].copy_from_slice(&state.cy[..w - 1]);
                (cx, cy)
            } else {
                (state.cx.clone(), state.cy.clone())
            };
            if cx[ndx as usize] < m {
                cx[ndx as usize] += 1;
            }
            if cy[ndy as usize] < m {
                cy[ndy as usize] += 1;
            }
            let succ = TruncatedState {
                dx: ndx as u8,
                dy: ndy as u8,
                cx,
                cy,
            };
            let prob = prob_x * prob_y;
            if let Some(entry) = out.iter_mut().find(|(s, _)| *s == succ) {
                entry.1 += prob;
            } else {
                out.push((succ, prob));
            }
        }
    }
    Ok(out)
}
