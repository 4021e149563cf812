//! Artifact plumbing shared by the experiments: directory setup, CSV and
//! JSON writers, and the summary envelope the report command consumes.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::RunError;

pub fn ensure_dir(dir: &Path) -> Result<(), RunError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| RunError::Validation(format!("cannot create {}: {e}", dir.display())))
}

/// Buffered writer for a CSV artifact; the caller writes the header first.
pub fn csv_writer(path: &Path) -> Result<BufWriter<File>, RunError> {
    let f = File::create(path)
        .map_err(|e| RunError::Validation(format!("cannot create {}: {e}", path.display())))?;
    Ok(BufWriter::new(f))
}

pub fn io_fail(path: &Path, e: std::io::Error) -> RunError {
    RunError::Validation(format!("write to {} failed: {e}", path.display()))
}

/// Pretty JSON with a trailing newline, so reruns are comparable with
/// line-oriented tools.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| RunError::Validation(format!("cannot encode {}: {e}", path.display())))?;
    std::fs::write(path, text + "\n").map_err(|e| io_fail(path, e))
}

/// Every experiment's `summary.json` carries this envelope so the report
/// can identify the run and check its files without kind-specific code.
#[derive(Debug, Serialize, serde::Deserialize)]
pub struct SummaryEnvelope<T> {
    pub experiment: String,
    pub seed: u64,
    /// Artifact files this run wrote, relative to its directory.
    pub artifacts: Vec<String>,
    #[serde(flatten)]
    pub body: T,
}

pub fn write_summary<T: Serialize>(
    out: &Path,
    experiment: &str,
    seed: u64,
    artifacts: &[&str],
    body: T,
) -> Result<(), RunError> {
    let env = SummaryEnvelope {
        experiment: experiment.to_string(),
        seed,
        artifacts: artifacts.iter().map(|s| s.to_string()).collect(),
        body,
    };
    write_json(&out.join("summary.json"), &env)
}

/// Sorted recursive listing of `summary.json` files under a directory.
pub fn find_summaries(root: &Path) -> Result<Vec<PathBuf>, RunError> {
    let mut found = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        let entries = std::fs::read_dir(&dir)
            .map_err(|e| RunError::Validation(format!("cannot list {}: {e}", dir.display())))?;
        for entry in entries {
            let entry = entry
                .map_err(|e| RunError::Validation(format!("cannot list {}: {e}", dir.display())))?;
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n == "summary.json") {
                found.push(path);
            }
        }
    }
    found.sort();
    Ok(found)
}

/// Progress notes go to stderr so stdout stays machine-readable.
pub fn note(verbose: bool, msg: &str) {
    if verbose {
        eprintln!("{msg}");
    }
}
