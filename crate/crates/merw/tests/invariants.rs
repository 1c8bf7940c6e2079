//! Cross-module invariants: the coupling behind the induced environment,
//! the truncated chain against an independent walk-level simulator, and
//! property tests over arbitrary randomness streams.

mod common;

use std::collections::HashMap;

use proptest::prelude::*;

use common::TruncatedWalkSim;
use merw::chain::{
    enumerate_reachable, iterated_drift_speed, stationary_speed, ChainParams, TruncatedState,
    DEFAULT_STATE_BUDGET,
};
use merw::cookie::CookieRule;
use merw::regen::detect_regenerations;
use merw::rng::SplitMix64;
use merw::rwre::intersection_environment;
use merw::walk::{detect_fresh_epochs, run_recorded, MerwState, Trajectory};

/// Simultaneous-walk simulation that records, per walker, the uniform used
/// on the first visit to every site. With the "right iff u < q" convention a
/// draw `u >= p` sends a walker left no matter what the site offers, so
/// `u_X >= p` and `u_Y >= p` at the first visits to `x + 1` couple an
/// induced-environment site `omega(x) = p` to guaranteed double backtracks.
fn run_with_first_visit_uniforms(
    rule: &CookieRule,
    horizon: u64,
    seed: u64,
) -> (Trajectory, HashMap<i64, f64>, HashMap<i64, f64>) {
    let mut rng = SplitMix64::new(seed);
    let mut state = MerwState::initial(rule);
    let mut first_x: HashMap<i64, f64> = HashMap::new();
    let mut first_y: HashMap<i64, f64> = HashMap::new();
    let mut xs = vec![0i32];
    let mut ys = vec![0i32];
    first_x.insert(0, 2.0); // time-0 occupancy consumed no uniform; mark unusable
    first_y.insert(0, 2.0);
    for _ in 0..horizon {
        let u_x = rng.next_f64();
        let u_y = rng.next_f64();
        first_x.entry(state.x()).or_insert(u_x);
        first_y.entry(state.y()).or_insert(u_y);
        state.step(rule, u_x, u_y);
        xs.push(state.x() as i32);
        ys.push(state.y() as i32);
    }
    (Trajectory::from_positions(xs, ys), first_x, first_y)
}

#[test]
fn intersection_environment_dominates_the_coupled_induced_one() {
    for (p, seed) in [(0.6, 11u64), (0.8, 12)] {
        let rule = CookieRule::new(2, p).unwrap();
        let (traj, first_x, first_y) = run_with_first_visit_uniforms(&rule, 200_000, seed);
        let xi = intersection_environment(&traj, &rule);
        assert!(xi.len() > 100, "left front advanced too little");
        let mut coupled_p_sites = 0;
        for (x, &xi_value) in xi.iter().enumerate() {
            let z = x as i64 + 1;
            let (Some(&ux), Some(&uy)) = (first_x.get(&z), first_y.get(&z)) else {
                panic!("site {z} resolved but never visited");
            };
            if ux >= p && uy >= p {
                // omega(x) = p under the coupling; domination demands xi = p.
                coupled_p_sites += 1;
                assert_eq!(
                    xi_value, p,
                    "domination failed at site {x} (p = {p}, seed {seed})"
                );
            }
        }
        assert!(coupled_p_sites > 0, "coupling event never fired at p = {p}");
    }
}

#[test]
fn intersection_environment_p_frequency_dominates_induced_law() {
    // Pointwise domination implies the frequency of p-sites in xi is at
    // least (1-p)^2 up to sampling noise.
    let p = 0.7;
    let rule = CookieRule::new(2, p).unwrap();
    let (_, traj) = run_recorded(&rule, 500_000, 21, 0).unwrap();
    let xi = intersection_environment(&traj, &rule);
    let n = xi.len() as f64;
    let freq = xi.iter().filter(|&&w| w == p).count() as f64 / n;
    let induced = (1.0 - p) * (1.0 - p);
    let slack = 4.0 * (induced * (1.0 - induced) / n).sqrt();
    assert!(
        freq >= induced - slack,
        "xi p-frequency {freq} below induced law {induced}"
    );
}

#[test]
fn exact_speed_matches_truncated_walk_simulation() {
    let params = ChainParams::new(2, 2, 0.75).unwrap();
    let model = enumerate_reachable(
        &params,
        &TruncatedState::initial(&params),
        DEFAULT_STATE_BUDGET,
    )
    .unwrap();
    let exact = stationary_speed(&model).unwrap();
    let (mc, se) = TruncatedWalkSim::new(2, 2, 0.75, 404).speed(1_000_000, 100);
    assert!(
        (exact.speed - mc).abs() <= 3.0 * se,
        "exact {} vs walk-level mc {mc} (se {se})",
        exact.speed
    );
}

#[test]
fn truncation_keeps_positive_speed_even_without_drift() {
    // Forced right turns at depth k inject rightward motion at p = 1/2.
    let params = ChainParams::new(2, 2, 0.5).unwrap();
    let model = enumerate_reachable(
        &params,
        &TruncatedState::initial(&params),
        DEFAULT_STATE_BUDGET,
    )
    .unwrap();
    let exact = stationary_speed(&model).unwrap();
    assert!(exact.speed > 0.0);
    let (mc, se) = TruncatedWalkSim::new(2, 2, 0.5, 505).speed(1_000_000, 100);
    assert!((exact.speed - mc).abs() <= 3.0 * se);
}

#[test]
fn symmetric_drift_speed_does_not_depend_on_m() {
    // At p = 1/2 the visit counts never change any probability. The m = 3
    // closed class is past the direct-solve limit, so it goes through the
    // iterated route, which also cross-checks the two solvers.
    let mut speeds = Vec::new();
    for m in [1u32, 2, 3] {
        let params = ChainParams::new(2, m, 0.5).unwrap();
        let model = enumerate_reachable(
            &params,
            &TruncatedState::initial(&params),
            DEFAULT_STATE_BUDGET,
        )
        .unwrap();
        let speed = match stationary_speed(&model) {
            Ok(sol) => sol.speed,
            Err(_) => {
                iterated_drift_speed(&model, 1e-13, 5_000_000)
                    .unwrap()
                    .speed
            }
        };
        speeds.push(speed);
    }
    assert!(
        (speeds[0] - speeds[1]).abs() <= 1e-12,
        "m=1: {} vs m=2: {}",
        speeds[0],
        speeds[1]
    );
    assert!(
        (speeds[0] - speeds[2]).abs() <= 1e-12,
        "m=1: {} vs m=3: {}",
        speeds[0],
        speeds[2]
    );
}

#[test]
fn speed_from_either_walker_drift_matches() {
    let params = ChainParams::new(2, 2, 0.75).unwrap();
    let model = enumerate_reachable(
        &params,
        &TruncatedState::initial(&params),
        DEFAULT_STATE_BUDGET,
    )
    .unwrap();
    let sol = stationary_speed(&model).unwrap();
    let drift_y = model.drifts_y().unwrap();
    let v_y: f64 = sol
        .class
        .iter()
        .zip(&sol.pi)
        .map(|(&i, &w)| w * drift_y[i])
        .sum();
    assert!(
        (sol.speed - v_y).abs() <= 1e-12,
        "v from X {} vs from Y {v_y}",
        sol.speed
    );
}

#[test]
fn fresh_to_regen_ratio_sits_inside_unit_interval_at_scale() {
    for p in [0.6, 0.9] {
        let rule = CookieRule::new(2, p).unwrap();
        let (_, traj) = run_recorded(&rule, 1_000_000, 31, 0).unwrap();
        let est = merw::regen::fresh_to_regen_ratio(&traj, 10_000).unwrap();
        assert!(
            est.ratio > 0.0 && est.ratio < 1.0,
            "p={p}: ratio {}",
            est.ratio
        );
        assert!(est.fresh_epochs > 1000);
    }
}

#[test]
fn iterated_solver_handles_k4() {
    let params = ChainParams::new(4, 2, 0.75).unwrap();
    let model = enumerate_reachable(
        &params,
        &TruncatedState::initial(&params),
        DEFAULT_STATE_BUDGET,
    )
    .unwrap();
    let sol = iterated_drift_speed(&model, 1e-10, 5_000_000).unwrap();
    let (mc, se) = TruncatedWalkSim::new(4, 2, 0.75, 606).speed(2_000_000, 100);
    assert!(
        (sol.speed - mc).abs() <= 3.0 * se,
        "k=4 iterated {} vs mc {mc} (se {se})",
        sol.speed
    );
}

/// Independent route to the quenched first-passage probability: assemble
/// the tridiagonal linear system for `v(z)` on the interior sites and solve
/// it by the Thomas algorithm.
fn backtrack_prob_tridiagonal(omegas: &[f64]) -> f64 {
    let k = omegas.len();
    // Unknowns v(-k+1) .. v(0); boundaries v(-k) = 1, v(1) = 0.
    let mut diag = vec![1.0; k];
    let mut rhs = vec![0.0; k];
    rhs[0] = 1.0 - omegas[0];
    // Forward elimination of the sub-diagonal -(1 - omega_z).
    for i in 1..k {
        let sub = -(1.0 - omegas[i]);
        let factor = sub / diag[i - 1];
        // Super-diagonal of row i-1 is -omega_{i-1}.
        diag[i] -= factor * -omegas[i - 1];
        rhs[i] -= factor * rhs[i - 1];
    }
    // Back substitution; the last unknown is v(0) and its super term is 0.
    let mut v = vec![0.0; k];
    v[k - 1] = rhs[k - 1] / diag[k - 1];
    for i in (0..k - 1).rev() {
        v[i] = (rhs[i] + omegas[i] * v[i + 1]) / diag[i];
    }
    v[k - 1]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quenched_solver_matches_tridiagonal_solve(
        omegas in proptest::collection::vec(0.05f64..=1.0, 1..30),
    ) {
        let product_form = merw::rwre::quenched_backtrack_prob(&omegas).unwrap();
        let linear_solve = backtrack_prob_tridiagonal(&omegas);
        let scale = product_form.abs().max(linear_solve.abs()).max(1e-30);
        prop_assert!(
            (product_form - linear_solve).abs() / scale <= 1e-9,
            "{product_form} vs {linear_solve} for {omegas:?}"
        );
    }

    #[test]
    fn fronts_monotone_and_fresh_epochs_consistent(
        seed in any::<u64>(),
        m in 1u32..4,
        p in 0.5f64..1.0,
        horizon in 1u64..400,
    ) {
        let rule = CookieRule::new(m, p).unwrap();
        let mut rng = SplitMix64::new(seed);
        let mut state = MerwState::initial(&rule);
        let mut xs = vec![0i32];
        let mut ys = vec![0i32];
        let mut prev_front = 0i64;
        for _ in 0..horizon {
            let (ux, uy) = (rng.next_f64(), rng.next_f64());
            state.step(&rule, ux, uy);
            xs.push(state.x() as i32);
            ys.push(state.y() as i32);
            let front = state.right_front();
            prop_assert!(front == prev_front || front == prev_front + 1);
            prop_assert!(state.left_front() <= front);
            prop_assert!(state.x() <= state.max_x());
            prop_assert!(state.y() <= state.max_y());
            prev_front = front;
        }
        let traj = Trajectory::from_positions(xs, ys);
        prop_assert_eq!(
            detect_fresh_epochs(&traj).len() as u64,
            state.fresh_epoch_count()
        );
    }

    #[test]
    fn censoring_is_monotone(seed in any::<u64>(), w1 in 0u64..200, extra in 1u64..200) {
        let rule = CookieRule::new(2, 0.7).unwrap();
        let (_, traj) = run_recorded(&rule, 2_000, seed % 1_000, 0).unwrap();
        let small = detect_regenerations(&traj, w1);
        let large = detect_regenerations(&traj, w1 + extra);
        for t in &large.times {
            prop_assert!(small.times.binary_search(t).is_ok());
        }
    }

    #[test]
    fn packed_keys_roundtrip(
        dx in 0u8..4,
        dy in 0u8..4,
        cells in proptest::collection::vec(0u8..3, 8),
    ) {
        let params = ChainParams::new(2, 2, 0.75).unwrap();
        let mut cx = cells[..4].to_vec();
        let mut cy = cells[4..].to_vec();
        cx[dx as usize] = cx[dx as usize].max(1);
        cy[dy as usize] = cy[dy as usize].max(1);
        let state = rebuild_state(&params, dx, dy, &cx, &cy);
        prop_assert!(state.is_well_formed(&params));
        let key = state.pack(&params);
        prop_assert_eq!(TruncatedState::unpack(key, &params), state);
    }

    #[test]
    fn regeneration_speed_lies_between_zero_and_one(seed in any::<u64>()) {
        let rule = CookieRule::new(2, 0.75).unwrap();
        let (_, traj) = run_recorded(&rule, 20_000, seed % 4_096, 0).unwrap();
        let record = detect_regenerations(&traj, 500);
        if let Ok(est) = merw::regen::regeneration_speed(&record) {
            prop_assert!(est.speed > 0.0 && est.speed <= 1.0);
            prop_assert!(est.stderr >= 0.0);
        }
    }
}

/// Build a TruncatedState through enumeration-free public pieces: pack the
/// digits manually in the documented order and unpack.
fn rebuild_state(params: &ChainParams, dx: u8, dy: u8, cx: &[u8], cy: &[u8]) -> TruncatedState {
    let w = params.window() as u64;
    let radix = params.m() as u64 + 1;
    let mut key = dx as u64 * w + dy as u64;
    for &c in cx {
        key = key * radix + c as u64;
    }
    for &c in cy {
        key = key * radix + c as u64;
    }
    TruncatedState::unpack(key, params)
}
