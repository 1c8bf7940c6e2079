//! Sweep of the exact truncated-chain speed over a drift grid, hunting for a
//! drop: a pair `p1 < p2` with `v_k(p1) > v_k(p2)`.

use rayon::prelude::*;
use serde::Serialize;

use super::{
    enumerate_reachable, iterated_drift_speed, stationary_speed_with_limit, ChainError,
    ChainParams, TruncatedState, DEFAULT_DIRECT_SOLVE_LIMIT, DEFAULT_STATE_BUDGET,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Direct,
    Iterated,
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolverKind::Direct => "direct",
            SolverKind::Iterated => "iterated",
        })
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CurvePoint {
    pub p: f64,
    pub v: f64,
    pub solver: SolverKind,
    pub residual: f64,
}

/// Witness of non-monotonicity: the pair maximizing the drop.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DropCertificate {
    pub p1: f64,
    pub p2: f64,
    pub v1: f64,
    pub v2: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ScanOptions {
    pub state_budget: usize,
    pub direct_limit: usize,
    pub tolerance: f64,
    pub max_iterations: u64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            state_budget: DEFAULT_STATE_BUDGET,
            direct_limit: DEFAULT_DIRECT_SOLVE_LIMIT,
            tolerance: 1e-10,
            max_iterations: 5_000_000,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanResult {
    pub curve: Vec<CurvePoint>,
    pub certificate: Option<DropCertificate>,
}

/// Best positive drop over a precomputed curve, if any.
pub fn scan_curve(points: &[(f64, f64)]) -> Option<DropCertificate> {
    let mut best: Option<DropCertificate> = None;
    let mut running_max: Option<(f64, f64)> = None;
    for &(p, v) in points {
        if let Some((mp, mv)) = running_max {
            let margin = mv - v;
            if margin > 0.0 && best.is_none_or(|b| margin > b.margin) {
                best = Some(DropCertificate {
                    p1: mp,
                    p2: p,
                    v1: mv,
                    v2: v,
                    margin,
                });
            }
        }
        if running_max.is_none_or(|(_, mv)| v > mv) {
            running_max = Some((p, v));
        }
    }
    best
}

/// Compute `v_k(p)` over the grid and report the maximal drop.
///
/// The reachable set is enumerated once and reweighted per grid point (the
/// support does not depend on `p` inside (1/2, 1)); grid points are solved
/// in parallel, directly when the closed class is small enough and by drift
/// iteration otherwise. The curve is assembled in grid order, so the result
/// does not depend on scheduling.
pub fn nonmonotonicity_scan(
    k: u32,
    m: u32,
    p_grid: &[f64],
    options: ScanOptions,
) -> Result<ScanResult, ChainError> {
    if p_grid.is_empty()
        || p_grid.iter().any(|p| !(*p > 0.5 && *p < 1.0))
        || p_grid.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(ChainError::InvalidGrid);
    }
    let base_params = ChainParams::new(k, m, p_grid[0])?;
    let base = enumerate_reachable(
        &base_params,
        &TruncatedState::initial(&base_params),
        options.state_budget,
    )?;
    let curve: Vec<CurvePoint> = p_grid
        .par_iter()
        .enumerate()
        .map(|(i, &p)| {
            let model = if i == 0 {
                base.clone()
            } else {
                base.reweighted(p)?
            };
            match stationary_speed_with_limit(&model, options.direct_limit) {
                Ok(sol) => Ok(CurvePoint {
                    p,
                    v: sol.speed,
                    solver: SolverKind::Direct,
                    residual: sol.residual,
                }),
                Err(ChainError::ClassTooLargeForDirectSolve { .. }) => {
                    let sol =
                        iterated_drift_speed(&model, options.tolerance, options.max_iterations)?;
                    Ok(CurvePoint {
                        p,
                        v: sol.speed,
                        solver: SolverKind::Iterated,
                        residual: sol.spread,
                    })
                }
                Err(other) => Err(other),
            }
        })
        .collect::<Result<_, ChainError>>()?;
    let certificate = scan_curve(&curve.iter().map(|c| (c.p, c.v)).collect::<Vec<_>>());
    Ok(ScanResult { curve, certificate })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn increasing_curve_has_no_certificate() {
        let curve: Vec<(f64, f64)> = (0..10).map(|i| (0.5 + 0.01 * i as f64, i as f64)).collect();
        assert!(scan_curve(&curve).is_none());
    }

    #[test]
    fn best_drop_is_selected() {
        let curve = [(0.6, 0.1), (0.7, 0.3), (0.8, 0.25), (0.9, 0.4)];
        let cert = scan_curve(&curve).unwrap();
        assert_eq!(cert.p1, 0.7);
        assert_eq!(cert.p2, 0.8);
        assert!((cert.margin - 0.05).abs() < 1e-15);
    }

    #[test]
    fn drop_can_span_nonadjacent_points() {
        let curve = [(0.6, 0.5), (0.7, 0.45), (0.8, 0.48), (0.9, 0.2)];
        let cert = scan_curve(&curve).unwrap();
        assert_eq!((cert.p1, cert.p2), (0.6, 0.9));
        assert!((cert.margin - 0.3).abs() < 1e-15);
    }

    #[test]
    fn grid_validation() {
        let opts = ScanOptions::default();
        assert!(matches!(
            nonmonotonicity_scan(2, 2, &[0.7, 0.6], opts),
            Err(ChainError::InvalidGrid)
        ));
        assert!(matches!(
            nonmonotonicity_scan(2, 2, &[0.5, 0.6], opts),
            Err(ChainError::InvalidGrid)
        ));
        assert!(matches!(
            nonmonotonicity_scan(2, 2, &[], opts),
            Err(ChainError::InvalidGrid)
        ));
    }

    #[test]
    fn k4_scan_produces_a_smooth_curve() {
        let grid: Vec<f64> = (0..9).map(|i| 0.55 + 0.05 * i as f64).collect();
        let result = nonmonotonicity_scan(4, 2, &grid, ScanOptions::default()).unwrap();
        assert_eq!(result.curve.len(), grid.len());
        let jumps: Vec<f64> = result
            .curve
            .windows(2)
            .map(|w| (w[1].v - w[0].v).abs())
            .collect();
        let mut sorted = jumps.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        let max = sorted.last().copied().unwrap();
        assert!(
            max < 10.0 * median.max(1e-12),
            "jumpy curve: max {max}, median {median}"
        );
        for point in &result.curve {
            assert!(point.v > 0.0 && point.v <= 1.0);
        }
    }
}
