//! On-disk shapes of per-problem outputs.
//!
//! Result files hold only what a replayed run reproduces exactly. Wall-clock
//! numbers go to the separate measurement files.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use evoperf_core::abstraction::Language;
use evoperf_core::execution::CaseStatus;
use evoperf_core::orchestrator::{IterationTrace, OptimizationResult, Termination};
use evoperf_core::selection::Origin;

pub const RESULT_SUFFIX: &str = ".result.json";
pub const MEASUREMENT_SUFFIX: &str = ".measurements.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub rank: usize,
    pub id: String,
    pub origin: Origin,
    pub public_accuracy: f64,
    pub public_statuses: Vec<CaseStatus>,
    pub distance_sum: u64,
    pub code: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub manifest_hash: String,
    pub problem_id: String,
    pub language: Language,
    pub termination: Termination,
    pub iterations_run: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provider_error: Option<String>,
    pub trace: Vec<IterationTrace>,
    pub ranked: Vec<RankedEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateTiming {
    pub id: String,
    pub public_runtime_s: f64,
    pub speedup_public: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementFile {
    pub manifest_hash: String,
    pub problem_id: String,
    pub slow_public_runtime_s: f64,
    pub candidates: Vec<CandidateTiming>,
}

pub fn split(result: &OptimizationResult, language: Language, manifest_hash: &str) -> (ResultFile, MeasurementFile) {
    let ranked = result
        .ranked
        .iter()
        .enumerate()
        .map(|(i, c)| RankedEntry {
            rank: i + 1,
            id: c.id.clone(),
            origin: c.origin,
            public_accuracy: c.record.accuracy,
            public_statuses: c.record.per_case.iter().map(|r| r.status).collect(),
            distance_sum: c.distance_sum,
            code: c.source.text().to_string(),
        })
        .collect();
    let candidates = result
        .ranked
        .iter()
        .map(|c| CandidateTiming {
            id: c.id.clone(),
            public_runtime_s: c.record.mean_runtime_s,
            speedup_public: c.speedup_public,
        })
        .collect();
    (
        ResultFile {
            manifest_hash: manifest_hash.to_string(),
            problem_id: result.problem_id.clone(),
            language,
            termination: result.termination,
            iterations_run: result.iterations_run,
            provider_error: result.provider_error.clone(),
            trace: result.trace.clone(),
            ranked,
        },
        MeasurementFile {
            manifest_hash: manifest_hash.to_string(),
            problem_id: result.problem_id.clone(),
            slow_public_runtime_s: result.slow_public.mean_runtime_s,
            candidates,
        },
    )
}

pub fn result_path(dir: &Path, problem_id: &str) -> PathBuf {
    dir.join(format!("{problem_id}{RESULT_SUFFIX}"))
}

pub fn measurement_path(dir: &Path, problem_id: &str) -> PathBuf {
    dir.join(format!("{problem_id}{MEASUREMENT_SUFFIX}"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// All result files in `dir`, sorted by problem id.
pub fn read_results(dir: &Path) -> anyhow::Result<Vec<ResultFile>> {
    let mut out = Vec::new();
    let entries = std::fs::read_dir(dir).with_context(|| format!("reading results directory {}", dir.display()))?;
    for entry in entries {
        let path = entry?.path();
        if path.to_string_lossy().ends_with(RESULT_SUFFIX) {
            out.push(read_json::<ResultFile>(&path)?);
        }
    }
    out.sort_by(|a, b| a.problem_id.cmp(&b.problem_id));
    Ok(out)
}
