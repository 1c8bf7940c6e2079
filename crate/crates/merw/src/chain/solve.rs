//! Exact speed of the truncated chain, two independent routes.
//!
//! `stationary_speed` verifies the chain has exactly one closed communicating
//! class, solves the stationary distribution on it by GTH state reduction
//! (a direct, subtraction-free elimination) and returns the
//! probability-weighted drift. `iterated_drift_speed` instead iterates the
//! transition operator on the drift vector, averaged with its predecessor to
//! defeat periodicity, until the iterate flattens to a constant.

use serde::Serialize;

use super::{ChainError, ChainModel};

/// Dense elimination is cubic; classes above this need the iterative route.
pub const DEFAULT_DIRECT_SOLVE_LIMIT: usize = 4000;

/// Strongly connected components with no outgoing edges, each sorted,
/// ordered by smallest member.
pub fn closed_classes(model: &ChainModel) -> Vec<Vec<usize>> {
    let n = model.state_count();
    let comp = tarjan_components(model);
    let comp_count = comp.iter().copied().max().map_or(0, |c| c + 1);
    let mut closed = vec![true; comp_count];
    for i in 0..n {
        for (j, _) in model.successors(i) {
            if comp[j] != comp[i] {
                closed[comp[i]] = false;
            }
        }
    }
    let mut classes: Vec<Vec<usize>> = vec![Vec::new(); comp_count];
    for i in 0..n {
        if closed[comp[i]] {
            classes[comp[i]].push(i);
        }
    }
    let mut out: Vec<Vec<usize>> = classes.into_iter().filter(|c| !c.is_empty()).collect();
    out.sort_by_key(|c| c[0]);
    out
}

/// Iterative Tarjan; recursion would overflow on large models.
fn tarjan_components(model: &ChainModel) -> Vec<usize> {
    let n = model.state_count();
    const UNSET: u32 = u32::MAX;
    let mut index = vec![UNSET; n];
    let mut lowlink = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![usize::MAX; n];
    let mut next_index = 0u32;
    let mut comp_count = 0usize;
    let mut stack: Vec<u32> = Vec::new();
    // (node, edges already consumed)
    let mut call: Vec<(u32, u32)> = Vec::new();

    for root in 0..n {
        if index[root] != UNSET {
            continue;
        }
        call.push((root as u32, 0));
        while let Some(&mut (v, ref mut ei)) = call.last_mut() {
            let v = v as usize;
            if *ei == 0 {
                index[v] = next_index;
                lowlink[v] = next_index;
                next_index += 1;
                stack.push(v as u32);
                on_stack[v] = true;
            }
            let mut descended = false;
            let degree = model.degree(v);
            while (*ei as usize) < degree {
                let (w, _) = model.successor(v, *ei as usize);
                *ei += 1;
                if index[w] == UNSET {
                    call.push((w as u32, 0));
                    descended = true;
                    break;
                } else if on_stack[w] {
                    lowlink[v] = lowlink[v].min(index[w]);
                }
            }
            if descended {
                continue;
            }
            // v is finished
            if lowlink[v] == index[v] {
                loop {
                    let w = stack.pop().expect("tarjan stack") as usize;
                    on_stack[w] = false;
                    comp[w] = comp_count;
                    if w == v {
                        break;
                    }
                }
                comp_count += 1;
            }
            call.pop();
            if let Some(&mut (parent, _)) = call.last_mut() {
                let parent = parent as usize;
                lowlink[parent] = lowlink[parent].min(lowlink[v]);
            }
        }
    }
    comp
}

fn single_closed_class(model: &ChainModel) -> Result<Vec<usize>, ChainError> {
    let classes = closed_classes(model);
    if classes.len() != 1 {
        return Err(ChainError::MultipleClosedClasses {
            count: classes.len(),
            representatives: classes.iter().map(|c| c[0]).collect(),
        });
    }
    Ok(classes.into_iter().next().unwrap())
}

/// Stationary distribution and speed from the direct solve.
#[derive(Debug, Clone, Serialize)]
pub struct StationarySolution {
    pub speed: f64,
    /// `max_j |(pi P)_j - pi_j|` over the closed class.
    pub residual: f64,
    /// States of the closed class (model indices, sorted).
    pub class: Vec<usize>,
    /// Stationary probabilities aligned with `class`.
    pub pi: Vec<f64>,
}

pub fn stationary_speed(model: &ChainModel) -> Result<StationarySolution, ChainError> {
    stationary_speed_with_limit(model, DEFAULT_DIRECT_SOLVE_LIMIT)
}

pub fn stationary_speed_with_limit(
    model: &ChainModel,
    direct_limit: usize,
) -> Result<StationarySolution, ChainError> {
    let class = single_closed_class(model)?;
    let nc = class.len();
    if nc > direct_limit {
        return Err(ChainError::ClassTooLargeForDirectSolve {
            states: nc,
            limit: direct_limit,
        });
    }
    // Dense restriction to the class; rows stay stochastic because the class
    // is closed.
    let mut dense = vec![0.0f64; nc * nc];
    for (ci, &i) in class.iter().enumerate() {
        for (j, p) in model.successors(i) {
            let cj = class.binary_search(&j).expect("closed class");
            dense[ci * nc + cj] += p;
        }
    }
    let pi = gth_stationary(&mut dense, nc);

    // Residual against the original sparse rows.
    let mut flow = vec![0.0f64; nc];
    for (ci, &i) in class.iter().enumerate() {
        for (j, p) in model.successors(i) {
            let cj = class.binary_search(&j).expect("closed class");
            flow[cj] += pi[ci] * p;
        }
    }
    let residual = flow
        .iter()
        .zip(&pi)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);

    let drifts = model.drifts();
    let speed = class
        .iter()
        .zip(&pi)
        .map(|(&i, &w)| w * drifts[i])
        .sum::<f64>();
    Ok(StationarySolution {
        speed,
        residual,
        class,
        pi,
    })
}

/// GTH state reduction on a dense row-major stochastic matrix. Eliminates
/// states n-1, ..., 1, then back-substitutes; no subtractions anywhere, so
/// the result is accurate even for badly conditioned chains.
fn gth_stationary(p: &mut [f64], n: usize) -> Vec<f64> {
    assert_eq!(p.len(), n * n);
    for s in (1..n).rev() {
        let mut departure = 0.0;
        for j in 0..s {
            departure += p[s * n + j];
        }
        debug_assert!(departure > 0.0, "irreducible class cannot stall");
        for i in 0..s {
            p[i * n + s] /= departure;
        }
        let (rows_above, row_s) = p.split_at_mut(s * n);
        let row_s = &row_s[..s];
        for i in 0..s {
            let f = rows_above[i * n + s];
            if f != 0.0 {
                let row_i = &mut rows_above[i * n..i * n + s];
                for j in 0..s {
                    row_i[j] += f * row_s[j];
                }
            }
        }
    }
    let mut pi = vec![0.0f64; n];
    pi[0] = 1.0;
    for s in 1..n {
        let mut acc = 0.0;
        for i in 0..s {
            acc += pi[i] * p[i * n + s];
        }
        pi[s] = acc;
    }
    let total: f64 = pi.iter().sum();
    for v in &mut pi {
        *v /= total;
    }
    pi
}

/// Speed from deterministic drift iteration.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct IteratedSolution {
    pub speed: f64,
    /// Final `max - min` spread of the iterate; bounds the error of `speed`.
    pub spread: f64,
    pub iterations: u64,
}

/// Iterate `s <- (s + P s) / 2` from the drift vector until the spread drops
/// below `tolerance`; the averaging keeps periodic chains converging and
/// leaves the limit unchanged. Returns the midpoint of the final iterate.
pub fn iterated_drift_speed(
    model: &ChainModel,
    tolerance: f64,
    max_iterations: u64,
) -> Result<IteratedSolution, ChainError> {
    single_closed_class(model)?;
    let n = model.state_count();
    let mut s: Vec<f64> = model.drifts().to_vec();
    let mut next = vec![0.0f64; n];
    for iteration in 1..=max_iterations {
        for (i, cell) in next.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, p) in model.successors(i) {
                acc += p * s[j];
            }
            *cell = acc;
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            s[i] = 0.5 * (s[i] + next[i]);
            lo = lo.min(s[i]);
            hi = hi.max(s[i]);
        }
        let spread = hi - lo;
        if spread < tolerance {
            return Ok(IteratedSolution {
                speed: 0.5 * (hi + lo),
                spread,
                iterations: iteration,
            });
        }
    }
    let lo = s.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Err(ChainError::NoConvergence {
        spread: hi - lo,
        iterations: max_iterations,
        tolerance,
    })
}
