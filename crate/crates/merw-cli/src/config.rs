//! Experiment configuration: flag parsing helpers and the config echo that
//! every artifact embeds.
//!
//! The echo contains every field that influences the data, so any row can be
//! re-derived from the artifact alone. Execution details that do not change
//! the bytes (worker count, output path) are deliberately not part of it:
//! data files must come out identical for any parallel layout.

use anyhow::{anyhow, bail, Result};
use serde::{Deserialize, Serialize};

/// Schema version stamped into artifacts.
pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub command: String,
    pub version: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_grid: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trial: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub censor: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<bool>,
    pub seed: u64,
    pub format: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drop_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
}

impl ConfigEcho {
    pub fn new(command: &str, seed: u64, format: &str) -> Self {
        ConfigEcho {
            command: command.to_string(),
            version: ARTIFACT_VERSION,
            p: None,
            p_grid: None,
            m: None,
            k: None,
            horizon: None,
            trials: None,
            trial: None,
            censor: None,
            burn_in: None,
            seed,
            format: format.to_string(),
            drop_threshold: None,
            tolerance: None,
            budget: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn grid(&self) -> Result<Vec<f64>> {
        parse_grid(
            self.p_grid
                .as_deref()
                .ok_or_else(|| anyhow!("config has no p-grid"))?,
        )
    }
}

/// Parse `a:step:b` into the inclusive grid `a, a+step, ..., b`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        bail!("grid must look like start:step:end, got {spec:?}");
    }
    let start: f64 = parts[0].parse()?;
    let step: f64 = parts[1].parse()?;
    let end: f64 = parts[2].parse()?;
    let step_ok = step.is_finite() && step > 0.0;
    if !step_ok || !start.is_finite() || !end.is_finite() || end < start {
        bail!("grid {spec:?} must be strictly increasing");
    }
    let mut out = Vec::new();
    let mut i = 0u32;
    loop {
        let p = start + step * i as f64;
        if p > end + 1e-12 {
            break;
        }
        out.push(p);
        i += 1;
        if i > 100_000 {
            bail!("grid {spec:?} has too many points");
        }
    }
    Ok(out)
}
