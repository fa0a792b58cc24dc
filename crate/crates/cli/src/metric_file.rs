//! JSON written by the metric subcommands and read back by `report`.

use std::collections::BTreeSet;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::args::MetricKind;
use crate::artifact::sha256_hex;
use perceptimetric::stats::Level;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    /// A metric of one model, with an interval when bootstrapped.
    Metric,
    /// A bootstrapped difference between two models.
    Pairwise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricOutput {
    pub kind: OutputKind,
    pub metric: MetricKind,
    /// Aggregation level (spearman, native_effect).
    pub level: Option<Level>,
    /// `french`, `english`, `all`, or `both` for the native effect.
    pub language_group: String,
    pub model: String,
    /// Second model of a pairwise comparison; `value` is model − model_b.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_b: Option<String>,
    pub value: f64,
    pub ci: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub significant: Option<bool>,
    pub n_replicates: usize,
    pub missing: usize,
    pub seed: u64,
    /// SHA-256 of the sorted, newline-joined triplet ids the Δ tables cover.
    pub item_set: String,
    pub n_items: usize,
    pub config: serde_json::Value,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub details: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicates: Option<Vec<Option<f64>>>,
}

impl MetricOutput {
    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut v = serde_json::to_vec_pretty(self)?;
        v.push(b'\n');
        Ok(v)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_slice(&bytes).with_context(|| format!("{} is not a metric output file", path.display()))
    }
}

/// Identity of the item set: hash and size of the sorted triplet ids.
pub fn item_set<'a>(ids: impl IntoIterator<Item = &'a str>) -> (String, usize) {
    let sorted: BTreeSet<&str> = ids.into_iter().collect();
    let joined = sorted.iter().copied().collect::<Vec<_>>().join("\n");
    (sha256_hex(joined.as_bytes()), sorted.len())
}
