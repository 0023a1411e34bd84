//! TOML run configuration. Endpoints and tokens are read from the
//! environment only, so unknown keys such as `endpoint` are rejected.

use std::path::Path;

use anyhow::{bail, Context};
use dfactscore::pipeline::{AssignMode, EvalMode};
use dfactscore::retrieval::Backend;
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub k: Option<usize>,
    pub backend: Option<Backend>,
    pub mode: Option<EvalMode>,
    pub assign: Option<AssignMode>,
    pub evidence_passages: Option<usize>,
    pub annotators: Option<Vec<String>>,
    /// Share of doubly-annotated tasks, e.g. `0.1`.
    pub overlap: Option<f64>,
    pub model_tag: Option<String>,
}

impl Config {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Config = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        if let Some(o) = cfg.overlap {
            if !(0.0..=1.0).contains(&o) {
                bail!("overlap must be within [0, 1], got {o}");
            }
        }
        Ok(cfg)
    }
}

/// Overlap share as permille, rounded to the nearest unit.
pub fn overlap_permille(overlap: f64) -> u32 {
    (overlap * 1000.0).round() as u32
}
