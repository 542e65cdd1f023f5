//! Orchestration: configuration ingestion, data-approximation sequences,
//! the stability and refinement experiments, and result persistence.
//!
//! Every run writes into a caller-chosen directory: `solution_<n>.csv`,
//! `diagnostics_<n>.json`, `report.json`, `profile.csv`. Reports carry a
//! `timestamp` field that byte-level determinism comparisons exclude.

pub mod config;
pub mod refinement;
pub mod sequence;
pub mod stability;

pub use config::{DataConfig, ExperimentConfig, FieldConfig, MeshConfig, Profile, QChoice, SequenceConfig, SequenceKind, SCHEMA_VERSION};
pub use refinement::{run_refinement, RefinementEntry, RefinementPair, RefinementReport};
pub use sequence::{build_sequence, ApproxSequence, SequenceSpec};
pub use stability::{run_stability, ConvergenceReport, StabilityEntry};

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::solver::{ProblemSpec, Solution};

/// Pretty JSON with a trailing newline; struct-field order keeps the output
/// byte-deterministic.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, to_json_string(value)?)?;
    Ok(())
}

/// Seconds since the Unix epoch; excluded from determinism comparisons.
pub fn timestamp_string() -> String {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs().to_string())
        .unwrap_or_else(|_| "0".to_string())
}

/// Writes `solution_<label>.csv` and `diagnostics_<label>.json`.
pub fn persist_solution(dir: &Path, label: &str, problem: &ProblemSpec, solution: &Solution) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut csv = Vec::new();
    solution.u.write_csv(&mut csv)?;
    fs::write(dir.join(format!("solution_{label}.csv")), csv)?;
    write_json(
        &dir.join(format!("diagnostics_{label}.json")),
        &solution.diagnostics(problem),
    )?;
    Ok(())
}
