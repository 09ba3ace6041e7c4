//! Machine-readable experiment reports.
//!
//! Reports serialize with a fixed field order so that identical runs produce
//! byte-identical files; the only run-dependent data (wall-clock timestamp)
//! is confined to the `meta` block, which comparisons strip.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::estimates::RateConstants;
use crate::problem::SpectralProblem;

/// Run-dependent metadata, excluded from determinism comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub tool: String,
    pub version: String,
    pub unix_time_ms: u128,
}

impl ReportMeta {
    pub fn now() -> Self {
        Self {
            tool: "inman".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            unix_time_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis())
                .unwrap_or_default(),
        }
    }
}

/// Problem summary placed at the head of every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemHeader {
    pub name: String,
    pub hash: String,
    pub modes: usize,
    pub split_index: usize,
    pub lambda1: f64,
    pub lambda_n: f64,
    pub lambda_n1: f64,
    pub k0: f64,
    pub k1: f64,
    pub r_trunc: f64,
    pub degenerate_leading_pair: bool,
    pub constants: RateConstants,
}

impl ProblemHeader {
    pub fn new(name: &str, problem: &SpectralProblem, constants: &RateConstants) -> Self {
        Self {
            name: name.to_string(),
            hash: problem.hash(),
            modes: problem.dim(),
            split_index: problem.split_index(),
            lambda1: problem.lambda1(),
            lambda_n: problem.lambda_n(),
            lambda_n1: problem.lambda_n1(),
            k0: problem.k0(),
            k1: problem.k1(),
            r_trunc: problem.r_trunc(),
            degenerate_leading_pair: problem.has_degenerate_leading_pair(),
            constants: constants.clone(),
        }
    }
}

/// Serialize a report to pretty JSON and write it.
pub fn write_json<T: Serialize, P: AsRef<Path>>(value: &T, path: P) -> Result<()> {
    let json = serde_json::to_string_pretty(value)?;
    std::fs::write(path, json)?;
    Ok(())
}

/// The report content with the `meta` block removed, re-serialized
/// canonically. Two runs of the same config must agree on this string.
pub fn canonical_without_meta(json_text: &str) -> Result<String> {
    let mut value: serde_json::Value = serde_json::from_str(json_text)?;
    if let Some(obj) = value.as_object_mut() {
        obj.remove("meta");
    }
    Ok(serde_json::to_string_pretty(&value)?)
}
