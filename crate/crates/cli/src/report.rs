//! Consolidates every `summary.json` under a directory into one
//! `report.json`, verifying that each run's resolved config and declared
//! artifacts are actually on disk.

use std::path::Path;

use serde_json::{json, Map, Value};

use crate::artifacts::{find_summaries, write_json};
use crate::RunError;

fn rel_label(root: &Path, dir: &Path) -> String {
    let rel = dir.strip_prefix(root).unwrap_or(dir);
    let parts: Vec<String> =
        rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
    if parts.is_empty() {
        ".".to_string()
    } else {
        parts.join("/")
    }
}

pub fn run_report(root: &Path) -> Result<(), RunError> {
    let summaries = find_summaries(root)?;
    if summaries.is_empty() {
        return Err(RunError::Validation(format!(
            "no run artifacts under {}: no summary.json found",
            root.display()
        )));
    }

    let mut missing: Vec<String> = Vec::new();
    let mut runs: Vec<Value> = Vec::new();
    // name -> AND over all runs that report that flag
    let mut checks: Map<String, Value> = Map::new();
    for path in &summaries {
        let dir = path.parent().expect("summary file has a directory");
        let label = rel_label(root, dir);
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::Validation(format!("cannot read {}: {e}", path.display())))?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| RunError::Validation(format!("bad summary {}: {e}", path.display())))?;
        let obj = value
            .as_object()
            .ok_or_else(|| {
                RunError::Validation(format!("summary {} is not an object", path.display()))
            })?
            .clone();
        let artifacts = obj
            .get("artifacts")
            .and_then(Value::as_array)
            .ok_or_else(|| {
                RunError::Validation(format!(
                    "summary {} lacks an artifacts list",
                    path.display()
                ))
            })?
            .clone();

        if !dir.join("config.resolved.json").is_file() {
            missing.push(format!("{label}/config.resolved.json"));
        }
        for a in &artifacts {
            let name = a.as_str().ok_or_else(|| {
                RunError::Validation(format!(
                    "summary {} lists a non-string artifact",
                    path.display()
                ))
            })?;
            // artifacts may be files or whole directories (dataset splits)
            if !dir.join(name).exists() {
                missing.push(format!("{label}/{name}"));
            }
        }

        for (k, v) in &obj {
            if let (true, Some(b)) = (k.ends_with("_pass"), v.as_bool()) {
                let cur = checks.get(k).and_then(Value::as_bool).unwrap_or(true);
                checks.insert(k.clone(), Value::Bool(cur && b));
            }
        }
        runs.push(json!({ "dir": label, "summary": Value::Object(obj) }));
    }
    if !missing.is_empty() {
        missing.sort();
        return Err(RunError::Validation(format!("missing artifacts: {}", missing.join(", "))));
    }

    let all_pass = checks.values().all(|v| v.as_bool() == Some(true));
    let report = json!({
        "n_runs": runs.len(),
        "runs": runs,
        "checks": Value::Object(checks),
        "all_checks_pass": all_pass,
    });
    write_json(&root.join("report.json"), &report)
}
