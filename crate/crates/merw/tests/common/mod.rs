//! Shared test oracles.

use std::collections::HashMap;

use merw::rng::SplitMix64;
use merw::stats;

/// Walk-level simulator of the truncated process: absolute positions, full
/// per-site occupancy counts, forced right moves at depth `k`. Independent
/// of the chain module's packed-state bookkeeping, so it can arbitrate it.
pub struct TruncatedWalkSim {
    k: i64,
    m: u32,
    p: f64,
    x: i64,
    y: i64,
    front: i64,
    counts_x: HashMap<i64, u32>,
    counts_y: HashMap<i64, u32>,
    rng: SplitMix64,
}

impl TruncatedWalkSim {
    pub fn new(k: u32, m: u32, p: f64, seed: u64) -> Self {
        let mut counts_x = HashMap::new();
        let mut counts_y = HashMap::new();
        counts_x.insert(0, 1);
        counts_y.insert(0, 1);
        TruncatedWalkSim {
            k: k as i64,
            m,
            p,
            x: 0,
            y: 0,
            front: 0,
            counts_x,
            counts_y,
            rng: SplitMix64::new(seed),
        }
    }

    fn drift_prob(&self, other_count: u32) -> f64 {
        if other_count < self.m {
            0.5
        } else {
            self.p
        }
    }

    pub fn step(&mut self) -> i64 {
        let q_x = if self.front - self.x >= self.k {
            1.0
        } else {
            self.drift_prob(self.counts_y.get(&self.x).copied().unwrap_or(0))
        };
        let q_y = if self.front - self.y >= self.k {
            1.0
        } else {
            self.drift_prob(self.counts_x.get(&self.y).copied().unwrap_or(0))
        };
        let dx: i64 = if self.rng.next_f64() < q_x { 1 } else { -1 };
        let dy: i64 = if self.rng.next_f64() < q_y { 1 } else { -1 };
        self.x += dx;
        self.y += dy;
        *self.counts_x.entry(self.x).or_insert(0) += 1;
        *self.counts_y.entry(self.y).or_insert(0) += 1;
        self.front = self.front.max(self.x).max(self.y);
        dx
    }

    /// Speed estimate with a batch-means standard error.
    pub fn speed(&mut self, steps: u64, batches: u64) -> (f64, f64) {
        let batch_len = steps / batches;
        let mut batch_speeds = Vec::with_capacity(batches as usize);
        for _ in 0..batches {
            let start = self.x;
            for _ in 0..batch_len {
                self.step();
            }
            batch_speeds.push((self.x - start) as f64 / batch_len as f64);
        }
        let est = stats::estimate_mean(&batch_speeds);
        (est.mean, est.stderr)
    }
}
