//! Subcommand implementations.
//!
//! Every data row is produced by a pure `derive_*_row(config, index)`
//! function of the config echo, used both for bulk emission and by `verify`
//! to re-derive single rows. Bulk paths may parallelize across trials, but
//! row bytes never depend on the layout.

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde_json::{json, Value};

use merw::campaign::{direct_speed_estimate, map_recorded_trials, run_summaries};
use merw::chain::{
    enumerate_reachable, iterated_drift_speed, scan_curve, stationary_speed_with_limit, ChainError,
    ChainModel, ChainParams, TruncatedState,
};
use merw::cookie::CookieRule;
use merw::regen::{
    detect_regenerations, fresh_to_regen_ratio, regeneration_speed, regeneration_speed_opts,
    RegenerationRecord,
};
use merw::rng::{mix64, trial_seed};
use merw::rwre::{closed_forms, speed_upper_bounds};
use merw::stats::{estimate_mean, MeanEstimate};
use merw::walk::{run, run_recorded, RunSummary, Trajectory};

use crate::config::ConfigEcho;
use crate::output::{render_json, render_svg, CsvArtifact, Series};

fn rule_from(config: &ConfigEcho) -> Result<CookieRule> {
    let m = config.m.ok_or_else(|| anyhow!("config has no m"))?;
    let p = config.p.ok_or_else(|| anyhow!("config has no p"))?;
    Ok(CookieRule::new(m, p)?)
}

// ---------------------------------------------------------------- simulate

pub const SIMULATE_HEADER: &str =
    "trial,seed,final_x,final_y,speed_x,speed_y,right_front,left_front,fresh_epochs";

fn simulate_row(summary: &RunSummary) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{}",
        summary.trial_index,
        trial_seed(summary.master_seed, summary.trial_index),
        summary.final_x,
        summary.final_y,
        summary.speed_x,
        summary.speed_y,
        summary.right_front,
        summary.left_front,
        summary.fresh_epochs
    )
}

pub fn derive_simulate_row(config: &ConfigEcho, index: u64) -> Result<String> {
    let rule = rule_from(config)?;
    let horizon = config.horizon.ok_or_else(|| anyhow!("no horizon"))?;
    Ok(simulate_row(&run(&rule, horizon, config.seed, index)))
}

pub fn run_simulate(config: &ConfigEcho) -> Result<String> {
    let rule = rule_from(config)?;
    let horizon = config.horizon.ok_or_else(|| anyhow!("no horizon"))?;
    let trials = config.trials.ok_or_else(|| anyhow!("no trials"))?;
    let summaries = run_summaries(&rule, horizon, config.seed, trials);
    let aggregate = direct_speed_estimate(&summaries);
    match config.format.as_str() {
        "json" => Ok(render_json(
            config,
            json!({ "trials": summaries, "aggregate": aggregate }),
        )),
        _ => {
            let rows = summaries.iter().map(simulate_row).collect();
            Ok(CsvArtifact {
                config: config.clone(),
                header: SIMULATE_HEADER.into(),
                rows,
                trailers: vec![format!(
                    "aggregate estimator=direct mean={} stderr={} trials={}",
                    aggregate.mean, aggregate.stderr, aggregate.n
                )],
            }
            .render())
        }
    }
}

// ------------------------------------------------------------------- sweep

pub const SWEEP_HEADER: &str = "p,m,estimator,estimate,stderr,trials,horizon,seed";

struct SweepPoint {
    p: f64,
    point_seed: u64,
    direct: MeanEstimate,
    regen: MeanEstimate,
}

/// Both estimators for grid point `index`, from one recorded pass.
fn sweep_point(config: &ConfigEcho, index: usize) -> Result<SweepPoint> {
    let grid = config.grid()?;
    let p = *grid
        .get(index)
        .ok_or_else(|| anyhow!("grid point {index} out of range"))?;
    let m = config.m.ok_or_else(|| anyhow!("no m"))?;
    let horizon = config.horizon.ok_or_else(|| anyhow!("no horizon"))?;
    let trials = config.trials.ok_or_else(|| anyhow!("no trials"))?;
    let censor = config.censor.unwrap_or(10_000);
    let rule = CookieRule::new(m, p)?;
    let point_seed = trial_seed(config.seed, index as u64);
    let per_trial = map_recorded_trials(&rule, horizon, point_seed, trials, |summary, traj| {
        let record = detect_regenerations(traj, censor);
        (
            summary.speed_x,
            regeneration_speed(&record).ok().map(|e| e.speed),
        )
    })?;
    let direct: Vec<f64> = per_trial.iter().map(|t| t.0).collect();
    let regen: Vec<f64> = per_trial.iter().filter_map(|t| t.1).collect();
    if regen.is_empty() {
        bail!(
            "no trial at p={p} produced two regenerations within horizon {horizon} \
             (censor {censor}); increase --horizon or lower --censor"
        );
    }
    Ok(SweepPoint {
        p,
        point_seed,
        direct: estimate_mean(&direct),
        regen: estimate_mean(&regen),
    })
}

fn sweep_row(config: &ConfigEcho, point: &SweepPoint, estimator: usize) -> String {
    let (name, est) = match estimator {
        0 => ("direct", &point.direct),
        _ => ("regeneration", &point.regen),
    };
    format!(
        "{},{},{},{},{},{},{},{}",
        point.p,
        config.m.unwrap_or_default(),
        name,
        est.mean,
        est.stderr,
        config.trials.unwrap_or_default(),
        config.horizon.unwrap_or_default(),
        point.point_seed
    )
}

/// Row layout: two rows per grid point, direct first.
pub fn derive_sweep_row(config: &ConfigEcho, index: u64) -> Result<String> {
    let point = sweep_point(config, (index / 2) as usize)?;
    Ok(sweep_row(config, &point, (index % 2) as usize))
}

fn drop_report(label: &str, threshold: f64, trials: u64, curve: &[(f64, f64, f64)]) -> String {
    let mut best: Option<(f64, f64, f64, f64)> = None; // p1 p2 margin excess
    for i in 0..curve.len() {
        for j in i + 1..curve.len() {
            let margin = curve[i].1 - curve[j].1;
            let excess = margin - threshold * (curve[i].2 + curve[j].2);
            if best.is_none_or(|b| excess > b.3) {
                best = Some((curve[i].0, curve[j].0, margin, excess));
            }
        }
    }
    match best {
        Some(_) if trials < 30 => format!(
            "scan estimator={label} significant=unevaluated \
             (normal-approximation rule needs trials >= 30, got {trials})"
        ),
        Some((p1, p2, margin, excess)) => format!(
            "scan estimator={label} rule=\"significant iff v(p1)-v(p2) > {threshold}*(se1+se2)\" \
             significant={} p1={p1} p2={p2} margin={margin} excess={excess}",
            excess > 0.0
        ),
        None => format!("scan estimator={label} significant=false (fewer than two points)"),
    }
}

pub fn run_sweep(config: &ConfigEcho) -> Result<String> {
    let grid = config.grid()?;
    let threshold = config.drop_threshold.unwrap_or(2.0);
    let trials = config.trials.unwrap_or_default();
    let points: Vec<SweepPoint> = (0..grid.len())
        .map(|i| sweep_point(config, i))
        .collect::<Result<_>>()?;
    let direct_curve: Vec<(f64, f64, f64)> = points
        .iter()
        .map(|pt| (pt.p, pt.direct.mean, pt.direct.stderr))
        .collect();
    let regen_curve: Vec<(f64, f64, f64)> = points
        .iter()
        .map(|pt| (pt.p, pt.regen.mean, pt.regen.stderr))
        .collect();
    match config.format.as_str() {
        "svg" => {
            let title = format!("MERW speed vs p (m={})", config.m.unwrap_or_default());
            Ok(render_svg(
                config,
                &title,
                &[
                    Series {
                        label: "direct x/n",
                        color: "#1f77b4",
                        points: direct_curve,
                    },
                    Series {
                        label: "regeneration ratio",
                        color: "#d62728",
                        points: regen_curve,
                    },
                ],
            ))
        }
        "json" => {
            let rows: Vec<Value> = points
                .iter()
                .flat_map(|pt| {
                    [
                        json!({"p": pt.p, "m": config.m, "estimator": "direct",
                               "estimate": pt.direct.mean, "stderr": pt.direct.stderr,
                               "trials": config.trials, "horizon": config.horizon,
                               "seed": pt.point_seed}),
                        json!({"p": pt.p, "m": config.m, "estimator": "regeneration",
                               "estimate": pt.regen.mean, "stderr": pt.regen.stderr,
                               "trials": config.trials, "horizon": config.horizon,
                               "seed": pt.point_seed}),
                    ]
                })
                .collect();
            Ok(render_json(
                config,
                json!({
                    "rows": rows,
                    "scan": {
                        "direct": drop_report("direct", threshold, trials, &direct_curve),
                        "regeneration": drop_report("regeneration", threshold, trials, &regen_curve),
                    }
                }),
            ))
        }
        _ => {
            let mut rows = Vec::with_capacity(2 * points.len());
            for pt in &points {
                rows.push(sweep_row(config, pt, 0));
                rows.push(sweep_row(config, pt, 1));
            }
            Ok(CsvArtifact {
                config: config.clone(),
                header: SWEEP_HEADER.into(),
                rows,
                trailers: vec![
                    drop_report("direct", threshold, trials, &direct_curve),
                    drop_report("regeneration", threshold, trials, &regen_curve),
                ],
            }
            .render())
        }
    }
}

// ------------------------------------------------------------------- chain

pub const CHAIN_HEADER: &str = "p,k,m,v_k,solver,residual";

struct ChainPoint {
    p: f64,
    v: f64,
    solver: &'static str,
    residual: f64,
}

fn chain_model(config: &ConfigEcho, p: f64) -> Result<ChainModel> {
    let k = config.k.ok_or_else(|| anyhow!("no k"))?;
    let m = config.m.ok_or_else(|| anyhow!("no m"))?;
    let budget = config.budget.unwrap_or(merw::chain::DEFAULT_STATE_BUDGET);
    let params = ChainParams::new(k, m, p)?;
    Ok(enumerate_reachable(
        &params,
        &TruncatedState::initial(&params),
        budget,
    )?)
}

fn chain_point(config: &ConfigEcho, p: f64) -> Result<ChainPoint> {
    let tolerance = config.tolerance.unwrap_or(1e-10);
    let model = chain_model(config, p)?;
    match stationary_speed_with_limit(&model, merw::chain::DEFAULT_DIRECT_SOLVE_LIMIT) {
        Ok(sol) => Ok(ChainPoint {
            p,
            v: sol.speed,
            solver: "direct",
            residual: sol.residual,
        }),
        Err(ChainError::ClassTooLargeForDirectSolve { .. }) => {
            let sol = iterated_drift_speed(&model, tolerance, 20_000_000)?;
            Ok(ChainPoint {
                p,
                v: sol.speed,
                solver: "iterated",
                residual: sol.spread,
            })
        }
        Err(other) => Err(other.into()),
    }
}

fn chain_row(config: &ConfigEcho, point: &ChainPoint) -> String {
    format!(
        "{},{},{},{},{},{}",
        point.p,
        config.k.unwrap_or_default(),
        config.m.unwrap_or_default(),
        point.v,
        point.solver,
        point.residual
    )
}

pub fn derive_chain_row(config: &ConfigEcho, index: u64) -> Result<String> {
    let grid = config.grid()?;
    let p = *grid
        .get(index as usize)
        .ok_or_else(|| anyhow!("grid point {index} out of range"))?;
    Ok(chain_row(config, &chain_point(config, p)?))
}

pub fn run_chain(config: &ConfigEcho, model_out: Option<&std::path::Path>) -> Result<String> {
    let grid = config.grid()?;
    // Grid points are independent; results are assembled in grid order.
    let points: Vec<ChainPoint> = grid
        .par_iter()
        .map(|&p| chain_point(config, p))
        .collect::<Result<_>>()?;
    if let Some(path) = model_out {
        let model = chain_model(config, grid[0])?;
        let mut buf = Vec::new();
        model.write_csv_triplets(&mut buf)?;
        std::fs::write(path, buf).with_context(|| format!("writing {}", path.display()))?;
    }
    let certificate = scan_curve(&points.iter().map(|pt| (pt.p, pt.v)).collect::<Vec<_>>());
    let cert_line = match &certificate {
        Some(c) => format!(
            "certificate p1={} p2={} v1={} v2={} margin={}",
            c.p1, c.p2, c.v1, c.v2, c.margin
        ),
        None => "certificate none".to_string(),
    };
    match config.format.as_str() {
        "json" => {
            let rows: Vec<Value> = points
                .iter()
                .map(|pt| {
                    json!({"p": pt.p, "k": config.k, "m": config.m, "v_k": pt.v,
                           "solver": pt.solver, "residual": pt.residual})
                })
                .collect();
            Ok(render_json(
                config,
                json!({ "rows": rows, "certificate": certificate }),
            ))
        }
        _ => Ok(CsvArtifact {
            config: config.clone(),
            header: CHAIN_HEADER.into(),
            rows: points.iter().map(|pt| chain_row(config, pt)).collect(),
            trailers: vec![cert_line],
        }
        .render()),
    }
}

// ------------------------------------------------------------------ bounds

pub const BOUNDS_HEADER: &str =
    "p,e_rho,e_inv_omega,speed_closed_form,bound_2p_minus_1,bound_proposition";

fn bounds_row(p: f64) -> Result<String> {
    let forms = closed_forms(p)?;
    let (drift, prop) = speed_upper_bounds(p)?;
    if forms.speed > drift || forms.speed > prop {
        bail!(
            "closed-form speed {} exceeds a bound at p={p} (drift {drift}, proposition {prop})",
            forms.speed
        );
    }
    Ok(format!(
        "{},{},{},{},{},{}",
        p, forms.e_rho, forms.e_inv_omega, forms.speed, drift, prop
    ))
}

pub fn derive_bounds_row(config: &ConfigEcho, index: u64) -> Result<String> {
    let grid = config.grid()?;
    let p = *grid
        .get(index as usize)
        .ok_or_else(|| anyhow!("grid point {index} out of range"))?;
    bounds_row(p)
}

pub fn run_bounds(config: &ConfigEcho) -> Result<String> {
    let grid = config.grid()?;
    match config.format.as_str() {
        "json" => {
            let rows: Vec<Value> = grid
                .iter()
                .map(|&p| {
                    let forms = closed_forms(p)?;
                    let (drift, prop) = speed_upper_bounds(p)?;
                    Ok(
                        json!({"p": p, "e_rho": forms.e_rho, "e_inv_omega": forms.e_inv_omega,
                               "speed_closed_form": forms.speed, "bound_2p_minus_1": drift,
                               "bound_proposition": prop}),
                    )
                })
                .collect::<Result<_>>()?;
            Ok(render_json(config, json!({ "rows": rows })))
        }
        _ => {
            let rows = grid.iter().map(|&p| bounds_row(p)).collect::<Result<_>>()?;
            Ok(CsvArtifact {
                config: config.clone(),
                header: BOUNDS_HEADER.into(),
                rows,
                trailers: vec![],
            }
            .render())
        }
    }
}

// ------------------------------------------------------------------- regen

pub const REGEN_HEADER: &str = "i,tau,dx,dt";

fn regen_record(config: &ConfigEcho) -> Result<(RunSummary, Trajectory, RegenerationRecord)> {
    let rule = rule_from(config)?;
    let horizon = config.horizon.ok_or_else(|| anyhow!("no horizon"))?;
    let censor = config.censor.unwrap_or(10_000);
    let trial = config.trial.unwrap_or(0);
    let (summary, traj) = run_recorded(&rule, horizon, config.seed, trial)?;
    let record = detect_regenerations(&traj, censor);
    Ok((summary, traj, record))
}

fn regen_row(record: &RegenerationRecord, index: usize) -> Result<String> {
    if index >= record.gap_dx.len() {
        bail!("gap {index} out of range ({} gaps)", record.gap_dx.len());
    }
    Ok(format!(
        "{},{},{},{}",
        index + 1,
        record.times[index],
        record.gap_dx[index],
        record.gap_dt[index]
    ))
}

pub fn derive_regen_row(config: &ConfigEcho, index: u64) -> Result<String> {
    let (_, _, record) = regen_record(config)?;
    regen_row(&record, index as usize)
}

pub fn run_regen(config: &ConfigEcho, traj_out: Option<&std::path::Path>) -> Result<String> {
    let (summary, traj, record) = regen_record(config)?;
    if let Some(path) = traj_out {
        let mut buf = Vec::new();
        if path.extension().is_some_and(|e| e == "csv") {
            traj.write_csv(&mut buf)?;
        } else {
            traj.write_binary_steps(&mut buf)?;
        }
        std::fs::write(path, buf).with_context(|| format!("writing {}", path.display()))?;
    }
    let burn_in = config.burn_in.unwrap_or(false);
    let speed = regeneration_speed_opts(&record, burn_in).ok();
    let ratio = fresh_to_regen_ratio(&traj, record.censor_window).ok();
    match config.format.as_str() {
        "json" => {
            let gaps: Vec<Value> = (0..record.gap_dx.len())
                .map(|i| {
                    json!({"i": i + 1, "tau": record.times[i], "dx": record.gap_dx[i],
                           "dt": record.gap_dt[i]})
                })
                .collect();
            Ok(render_json(
                config,
                json!({
                    "gaps": gaps,
                    "summary": {
                        "regenerations": record.times.len(),
                        "censored_candidates": record.censored_candidates,
                        "origin_is_regeneration": record.origin_is_regeneration,
                        "speed": speed,
                        "fresh_to_regen": ratio,
                        "direct_speed": summary.speed_x,
                    }
                }),
            ))
        }
        _ => {
            let rows = (0..record.gap_dx.len())
                .map(|i| regen_row(&record, i))
                .collect::<Result<_>>()?;
            let mut trailers = vec![format!(
                "summary regenerations={} censored={} origin_is_regeneration={} direct_speed={}",
                record.times.len(),
                record.censored_candidates,
                record.origin_is_regeneration,
                summary.speed_x
            )];
            if let Some(est) = speed {
                trailers.push(format!(
                    "estimate speed={} stderr={} gaps={} burn_in={burn_in}",
                    est.speed, est.stderr, est.gaps
                ));
            } else {
                trailers.push("estimate none (fewer than 2 regenerations)".into());
            }
            if let Some(r) = ratio {
                trailers.push(format!(
                    "fresh_to_regen ratio={} stderr={} fresh={}",
                    r.ratio, r.stderr, r.fresh_epochs
                ));
            }
            Ok(CsvArtifact {
                config: config.clone(),
                header: REGEN_HEADER.into(),
                rows,
                trailers,
            }
            .render())
        }
    }
}

// ------------------------------------------------------------------ verify

pub fn derive_row(config: &ConfigEcho, index: u64) -> Result<String> {
    match config.command.as_str() {
        "simulate" => derive_simulate_row(config, index),
        "sweep" => derive_sweep_row(config, index),
        "chain" => derive_chain_row(config, index),
        "bounds" => derive_bounds_row(config, index),
        "regen" => derive_regen_row(config, index),
        other => bail!("unknown command {other:?} in config echo"),
    }
}

pub struct VerifyOutcome {
    pub row_index: u64,
    pub row_count: usize,
    pub matched: bool,
    pub stored: String,
    pub derived: String,
}

/// Re-derive one row of a CSV or JSON artifact from its embedded config.
pub fn verify_artifact(content: &str, requested_row: Option<u64>) -> Result<VerifyOutcome> {
    if content.trim_start().starts_with('{') {
        verify_json(content, requested_row)
    } else {
        verify_csv(content, requested_row)
    }
}

fn pick_row(seed: u64, rows: usize, requested: Option<u64>) -> Result<u64> {
    if rows == 0 {
        bail!("artifact has no data rows");
    }
    let idx = requested.unwrap_or(mix64(seed) % rows as u64);
    if idx >= rows as u64 {
        bail!("row {idx} out of range ({rows} rows)");
    }
    Ok(idx)
}

fn verify_csv(content: &str, requested_row: Option<u64>) -> Result<VerifyOutcome> {
    let mut config: Option<ConfigEcho> = None;
    let mut data_rows: Vec<&str> = Vec::new();
    let mut seen_header = false;
    for line in content.lines() {
        if let Some(rest) = line.strip_prefix("# config = ") {
            config = Some(serde_json::from_str(rest).context("parsing config echo")?);
        } else if line.starts_with('#') || line.is_empty() {
            continue;
        } else if !seen_header {
            seen_header = true;
        } else {
            data_rows.push(line);
        }
    }
    let config = config.ok_or_else(|| anyhow!("artifact has no `# config =` line"))?;
    let idx = pick_row(config.seed, data_rows.len(), requested_row)?;
    let derived = derive_row(&config, idx)?;
    let stored = data_rows[idx as usize].to_string();
    Ok(VerifyOutcome {
        row_index: idx,
        row_count: data_rows.len(),
        matched: stored == derived,
        stored,
        derived,
    })
}

fn verify_json(content: &str, requested_row: Option<u64>) -> Result<VerifyOutcome> {
    let doc: Value = serde_json::from_str(content).context("parsing JSON artifact")?;
    let config: ConfigEcho = serde_json::from_value(
        doc.get("config")
            .cloned()
            .ok_or_else(|| anyhow!("artifact has no config field"))?,
    )?;
    let rows = doc
        .get("rows")
        .or_else(|| doc.get("trials"))
        .or_else(|| doc.get("gaps"))
        .and_then(Value::as_array)
        .ok_or_else(|| anyhow!("artifact has no rows/trials/gaps array"))?;
    let idx = pick_row(config.seed, rows.len(), requested_row)?;
    let stored = rows[idx as usize].clone();
    let derived = derive_json_row(&config, idx)?;
    Ok(VerifyOutcome {
        row_index: idx,
        row_count: rows.len(),
        matched: stored == derived,
        stored: stored.to_string(),
        derived: derived.to_string(),
    })
}

fn derive_json_row(config: &ConfigEcho, index: u64) -> Result<Value> {
    match config.command.as_str() {
        "simulate" => {
            let rule = rule_from(config)?;
            let horizon = config.horizon.ok_or_else(|| anyhow!("no horizon"))?;
            Ok(serde_json::to_value(run(
                &rule,
                horizon,
                config.seed,
                index,
            ))?)
        }
        "sweep" => {
            let point = sweep_point(config, (index / 2) as usize)?;
            let (name, est) = if index.is_multiple_of(2) {
                ("direct", &point.direct)
            } else {
                ("regeneration", &point.regen)
            };
            Ok(json!({"p": point.p, "m": config.m, "estimator": name,
                      "estimate": est.mean, "stderr": est.stderr,
                      "trials": config.trials, "horizon": config.horizon,
                      "seed": point.point_seed}))
        }
        "chain" => {
            let grid = config.grid()?;
            let p = *grid
                .get(index as usize)
                .ok_or_else(|| anyhow!("grid point out of range"))?;
            let pt = chain_point(config, p)?;
            Ok(json!({"p": pt.p, "k": config.k, "m": config.m, "v_k": pt.v,
                      "solver": pt.solver, "residual": pt.residual}))
        }
        "bounds" => {
            let grid = config.grid()?;
            let p = *grid
                .get(index as usize)
                .ok_or_else(|| anyhow!("grid point out of range"))?;
            let forms = closed_forms(p)?;
            let (drift, prop) = speed_upper_bounds(p)?;
            Ok(
                json!({"p": p, "e_rho": forms.e_rho, "e_inv_omega": forms.e_inv_omega,
                      "speed_closed_form": forms.speed, "bound_2p_minus_1": drift,
                      "bound_proposition": prop}),
            )
        }
        "regen" => {
            let (_, _, record) = regen_record(config)?;
            let i = index as usize;
            if i >= record.gap_dx.len() {
                bail!("gap {i} out of range");
            }
            Ok(
                json!({"i": i + 1, "tau": record.times[i], "dx": record.gap_dx[i],
                      "dt": record.gap_dt[i]}),
            )
        }
        other => bail!("unknown command {other:?} in config echo"),
    }
}
