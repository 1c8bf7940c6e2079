//! Reachable-set enumeration and the sparse chain model.
//!
//! Enumeration runs breadth-first over packed state keys. The model then
//! sorts the keys and builds compressed sparse rows against the sorted
//! order, so state indexing is canonical no matter how the frontier was
//! expanded.

use std::collections::{HashSet, VecDeque};
use std::io::{self, Write};

use super::{drift_x, drift_y, ChainError, ChainParams, TruncatedState, MAX_WINDOW};

pub const DEFAULT_STATE_BUDGET: usize = 20_000_000;

/// Allocation-free mirror of [`TruncatedState`] used in the hot loops.
#[derive(Clone, Copy)]
struct FastState {
    dx: u8,
    dy: u8,
    cx: [u8; MAX_WINDOW],
    cy: [u8; MAX_WINDOW],
}

impl FastState {
    fn from_state(state: &TruncatedState, params: &ChainParams) -> Self {
        let w = params.window();
        let (dx, dy) = state.offsets();
        let mut cx = [0u8; MAX_WINDOW];
        let mut cy = [0u8; MAX_WINDOW];
        cx[..w].copy_from_slice(state.counts_x());
        cy[..w].copy_from_slice(state.counts_y());
        FastState {
            dx: dx as u8,
            dy: dy as u8,
            cx,
            cy,
        }
    }

    #[inline]
    fn pack(&self, params: &ChainParams) -> u64 {
        let w = params.window();
        let radix = params.m() as u64 + 1;
        let mut key = self.dx as u64 * w as u64 + self.dy as u64;
        for o in 0..w {
            key = key * radix + self.cx[o] as u64;
        }
        for o in 0..w {
            key = key * radix + self.cy[o] as u64;
        }
        key
    }

    fn unpack(mut key: u64, params: &ChainParams) -> Self {
        let w = params.window();
        let radix = params.m() as u64 + 1;
        let mut cy = [0u8; MAX_WINDOW];
        let mut cx = [0u8; MAX_WINDOW];
        for o in (0..w).rev() {
            cy[o] = (key % radix) as u8;
            key /= radix;
        }
        for o in (0..w).rev() {
            cx[o] = (key % radix) as u8;
            key /= radix;
        }
        FastState {
            dy: (key % w as u64) as u8,
            dx: (key / w as u64) as u8,
            cx,
            cy,
        }
    }
}

/// Successor keys and probabilities without heap traffic.
#[inline]
fn fast_successors(
    state: &FastState,
    params: &ChainParams,
    out: &mut [(u64, f64); 4],
) -> Result<usize, ChainError> {
    let k = params.k() as i32;
    let w = params.window();
    let m = params.m() as u8;
    let q_x = if state.dx as i32 >= k {
        1.0
    } else {
        params.rule().drift_prob(state.cy[state.dx as usize] as u32)
    };
    let q_y = if state.dy as i32 >= k {
        1.0
    } else {
        params.rule().drift_prob(state.cx[state.dy as usize] as u32)
    };
    let mut len = 0usize;
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
            let mut succ = FastState {
                dx: ndx as u8,
                dy: ndy as u8,
                cx: state.cx,
                cy: state.cy,
            };
            if advance {
                succ.cx.copy_within(0..w - 1, 1);
                succ.cy.copy_within(0..w - 1, 1);
                succ.cx[0] = 0;
                succ.cy[0] = 0;
            }
            if succ.cx[ndx as usize] < m {
                succ.cx[ndx as usize] += 1;
            }
            if succ.cy[ndy as usize] < m {
                succ.cy[ndy as usize] += 1;
            }
            out[len] = (succ.pack(params), prob_x * prob_y);
            len += 1;
        }
    }
    Ok(len)
}

/// Enumerated reachable state set with sparse transition rows and per-state
/// drifts, indexed in sorted key order.
#[derive(Debug, Clone)]
pub struct ChainModel {
    params: Option<ChainParams>,
    keys: Vec<u64>,
    row_offsets: Vec<u32>,
    succ: Vec<u32>,
    prob: Vec<f64>,
    drift: Vec<f64>,
    initial: usize,
}

impl ChainModel {
    pub fn state_count(&self) -> usize {
        self.keys.len()
    }

    pub fn params(&self) -> Option<&ChainParams> {
        self.params.as_ref()
    }

    /// Index of the canonical start state (enumerated models).
    pub fn initial_index(&self) -> usize {
        self.initial
    }

    /// Decode state `index`; only meaningful for enumerated models.
    pub fn state(&self, index: usize) -> Option<TruncatedState> {
        self.params
            .as_ref()
            .map(|p| TruncatedState::unpack(self.keys[index], p))
    }

    pub fn index_of(&self, state: &TruncatedState) -> Option<usize> {
        let params = self.params.as_ref()?;
        self.keys.binary_search(&state.pack(params)).ok()
    }

    #[inline]
    pub fn successors(&self, index: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.row_offsets[index] as usize;
        let hi = self.row_offsets[index + 1] as usize;
        self.succ[lo..hi]
            .iter()
            .zip(&self.prob[lo..hi])
            .map(|(&s, &p)| (s as usize, p))
    }

    /// Number of successors of state `index`.
    #[inline]
    pub fn degree(&self, index: usize) -> usize {
        (self.row_offsets[index + 1] - self.row_offsets[index]) as usize
    }

    /// Successor `edge` (0-based within the row) of state `index`.
    #[inline]
    pub fn successor(&self, index: usize, edge: usize) -> (usize, f64) {
        let at = self.row_offsets[index] as usize + edge;
        (self.succ[at] as usize, self.prob[at])
    }

    pub fn row_sum(&self, index: usize) -> f64 {
        self.successors(index).map(|(_, p)| p).sum()
    }

    /// X's drift per state, aligned with state indices.
    pub fn drifts(&self) -> &[f64] {
        &self.drift
    }

    /// Y's drift per state, recomputed on demand (enumerated models).
    pub fn drifts_y(&self) -> Result<Vec<f64>, ChainError> {
        let params = self.params.as_ref().ok_or(ChainError::NotEnumerated)?;
        Ok(self
            .keys
            .iter()
            .map(|&key| drift_y(&TruncatedState::unpack(key, params), params))
            .collect())
    }

    /// Same reachable set reweighted for a new drift `p`.
    ///
    /// Valid because reachability does not depend on `p` while every
    /// unforced probability stays inside (0, 1), i.e. for `p` in [1/2, 1).
    pub fn reweighted(&self, p: f64) -> Result<ChainModel, ChainError> {
        let params = self.params.as_ref().ok_or(ChainError::NotEnumerated)?;
        if !(0.5..1.0).contains(&p) || params.p() >= 1.0 {
            return Err(ChainError::InvalidGrid);
        }
        let new_params = ChainParams::new(params.k(), params.m(), p)?;
        build_model(new_params, self.keys.clone(), self.initial)
    }

    /// Hand-built model for embedding custom chains (tests, experiments).
    /// Rows must be non-empty with probabilities summing to 1.
    pub fn from_raw(transitions: Vec<Vec<(usize, f64)>>, drift: Vec<f64>) -> ChainModel {
        let n = transitions.len();
        assert_eq!(drift.len(), n);
        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut succ = Vec::new();
        let mut prob = Vec::new();
        row_offsets.push(0u32);
        for row in &transitions {
            assert!(!row.is_empty(), "every state needs a successor");
            let total: f64 = row.iter().map(|(_, p)| p).sum();
            assert!((total - 1.0).abs() < 1e-9, "row must be stochastic");
            for &(j, p) in row {
                assert!(j < n);
                succ.push(j as u32);
                prob.push(p);
            }
            row_offsets.push(succ.len() as u32);
        }
        ChainModel {
            params: None,
            keys: (0..n as u64).collect(),
            row_offsets,
            succ,
            prob,
            drift,
            initial: 0,
        }
    }

    /// Sparse export: comment header with the parameters, then one triplet
    /// row per transition.
    pub fn write_csv_triplets<W: Write>(&self, out: &mut W) -> io::Result<()> {
        if let Some(p) = &self.params {
            writeln!(
                out,
                "# truncated chain k={} m={} p={} states={}",
                p.k(),
                p.m(),
                p.p(),
                self.state_count()
            )?;
        }
        writeln!(out, "state_index,successor_index,probability")?;
        for i in 0..self.state_count() {
            for (j, pr) in self.successors(i) {
                writeln!(out, "{},{},{}", i, j, pr)?;
            }
        }
        Ok(())
    }
}

/// Breadth-first closure of the transition relation from `initial`.
///
/// Fails with the reached count if the closure exceeds `budget`.
pub fn enumerate_reachable(
    params: &ChainParams,
    initial: &TruncatedState,
    budget: usize,
) -> Result<ChainModel, ChainError> {
    let start = FastState::from_state(initial, params);
    let start_key = start.pack(params);
    let mut seen: HashSet<u64> = HashSet::new();
    let mut queue: VecDeque<u64> = VecDeque::new();
    seen.insert(start_key);
    queue.push_back(start_key);
    let mut scratch = [(0u64, 0f64); 4];
    while let Some(key) = queue.pop_front() {
        let state = FastState::unpack(key, params);
        let len = fast_successors(&state, params, &mut scratch)?;
        for &(succ_key, _) in &scratch[..len] {
            if seen.insert(succ_key) {
                if seen.len() > budget {
                    return Err(ChainError::BudgetExceeded {
                        reached: seen.len(),
                        budget,
                    });
                }
                queue.push_back(succ_key);
            }
        }
    }
    let mut keys: Vec<u64> = seen.into_iter().collect();
    keys.sort_unstable();
    let initial_index = keys.binary_search(&start_key).expect("start key present");
    build_model(*params, keys, initial_index)
}

fn build_model(
    params: ChainParams,
    keys: Vec<u64>,
    initial: usize,
) -> Result<ChainModel, ChainError> {
    let n = keys.len();
    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut succ = Vec::with_capacity(4 * n);
    let mut prob = Vec::with_capacity(4 * n);
    let mut drift = Vec::with_capacity(n);
    let mut scratch = [(0u64, 0f64); 4];
    row_offsets.push(0u32);
    for &key in &keys {
        let state = FastState::unpack(key, &params);
        let len = fast_successors(&state, &params, &mut scratch)?;
        for &(succ_key, p) in &scratch[..len] {
            let j = keys
                .binary_search(&succ_key)
                .expect("key set is closed under transitions");
            succ.push(j as u32);
            prob.push(p);
        }
        row_offsets.push(succ.len() as u32);
        let full = TruncatedState::unpack(key, &params);
        drift.push(drift_x(&full, &params));
    }
    Ok(ChainModel {
        params: Some(params),
        keys,
        row_offsets,
        succ,
        prob,
        drift,
        initial,
    })
}
