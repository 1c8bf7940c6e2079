//! Parallel campaigns of independent trials.
//!
//! Trial `i` draws from the stream seeded by `trial_seed(master_seed, i)`,
//! so per-trial results are identical for any worker count; aggregation runs
//! over the trial-ordered slice with pairwise summation, which keeps the
//! floating-point output layout-stable too.

use rayon::prelude::*;

use crate::cookie::CookieRule;
use crate::stats::{estimate_mean, MeanEstimate};
use crate::walk::{run, run_recorded, RunSummary, Trajectory, WalkError};

/// Summary-only trials `0..trials`, in trial order.
pub fn run_summaries(
    rule: &CookieRule,
    horizon: u64,
    master_seed: u64,
    trials: u64,
) -> Vec<RunSummary> {
    (0..trials)
        .into_par_iter()
        .map(|trial| run(rule, horizon, master_seed, trial))
        .collect()
}

/// Recorded trials, each handed to `f` and dropped; results in trial order.
pub fn map_recorded_trials<T, F>(
    rule: &CookieRule,
    horizon: u64,
    master_seed: u64,
    trials: u64,
    f: F,
) -> Result<Vec<T>, WalkError>
where
    T: Send,
    F: Fn(&RunSummary, &Trajectory) -> T + Sync,
{
    if horizon > crate::walk::MAX_RECORDED_HORIZON {
        return Err(WalkError::HorizonTooLongToRecord {
            horizon,
            limit: crate::walk::MAX_RECORDED_HORIZON,
        });
    }
    Ok((0..trials)
        .into_par_iter()
        .map(|trial| {
            let (summary, traj) =
                run_recorded(rule, horizon, master_seed, trial).expect("horizon checked");
            f(&summary, &traj)
        })
        .collect())
}

/// Mean and standard error of the direct estimator `X_n / n` across trials.
pub fn direct_speed_estimate(summaries: &[RunSummary]) -> MeanEstimate {
    let speeds: Vec<f64> = summaries.iter().map(|s| s.speed_x).collect();
    estimate_mean(&speeds)
}
