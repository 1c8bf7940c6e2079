//! Mutually excited random walks on the integer line.
//!
//! Two walkers step simultaneously; a walker's site starts drifting right
//! (probability `p`) once the *other* walker has occupied it `m` times. The
//! crate provides:
//!
//! * [`walk`] — exact seeded dynamics, trajectories, fresh epochs;
//! * [`regen`] — regeneration detection and the renewal-ratio speed
//!   estimator;
//! * [`rwre`] — the induced i.i.d. random environment: closed-form speed,
//!   backtracking bounds, quenched solver, Monte Carlo cross-checks;
//! * [`chain`] — the truncated process as a finite Markov chain with its
//!   exact speed `v_k` and a non-monotonicity scan over `p`;
//! * [`campaign`] — reproducible parallel trial batches.
//!
//! Everything is deterministic in `(master_seed, trial_index)` alone.

pub mod campaign;
pub mod chain;
pub mod cookie;
pub mod regen;
pub mod rng;
pub mod rwre;
pub mod stats;
pub mod walk;

pub use cookie::CookieRule;
pub use walk::{run, run_recorded, RunSummary, Trajectory};
