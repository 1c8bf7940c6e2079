//! Cookie rules: the per-site drift schedule.
//!
//! A site hands a walker the symmetric probability 1/2 until the *other*
//! walker has occupied that site `m` times; from then on the site is excited
//! and the walker steps right with probability `p`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RuleError {
    #[error("drift probability must lie in [1/2, 1], got {0}")]
    DriftOutOfRange(f64),
    #[error("cookie count m must lie in [1, 200], got {0}")]
    CookieCountOutOfRange(u32),
}

/// Two-phase drift schedule `(1/2, ..., 1/2, p, p, ...)` with `m` symmetric
/// entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CookieRule {
    m: u32,
    p: f64,
}

impl CookieRule {
    pub fn new(m: u32, p: f64) -> Result<Self, RuleError> {
        if !(0.5..=1.0).contains(&p) {
            return Err(RuleError::DriftOutOfRange(p));
        }
        // Visit counts are tracked in u8 cells capped at m.
        if m == 0 || m > 200 {
            return Err(RuleError::CookieCountOutOfRange(m));
        }
        Ok(CookieRule { m, p })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Right-step probability for a walker at a site the other walker has
    /// occupied `other_visits` times. Total on all counts.
    #[inline]
    pub fn drift_prob(&self, other_visits: u32) -> f64 {
        if other_visits < self.m {
            0.5
        } else {
            self.p
        }
    }
}
