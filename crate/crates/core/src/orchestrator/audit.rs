use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::pipeline::RunMetadata;
use crate::model::{load_task_registry, Modality, TaskId, SEQUESTERED_DIR};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Path relative to the run workspace.
    pub path: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub violations: Vec<Violation>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Every regular file below `dir`, sorted.
fn files_below(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

fn digest(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

fn has_split_key(value: &serde_json::Value) -> bool {
    match value {
        serde_json::Value::Object(map) => map
            .iter()
            .any(|(k, v)| k == "split" || k == "splits" || has_split_key(v)),
        serde_json::Value::Array(items) => items.iter().any(has_split_key),
        _ => false,
    }
}

/// Task of a file below `algorithm/<task>/`.
fn task_of(rel: &Path) -> Option<TaskId> {
    let mut parts = rel.components();
    parts.next()?;
    let name = parts.next()?.as_os_str().to_str()?;
    let n: u8 = name.strip_prefix('T')?.parse().ok()?;
    TaskId::new(n).ok()
}

/// Checks that the algorithm side of a run saw nothing sequestered: no
/// copy of any sequestered file, no path through a sequestered directory,
/// and no split metadata in vision-task files.
pub fn audit_information_flow(workspace: &Path) -> AuditReport {
    let mut report = AuditReport::default();
    let mut flag =
        |path: String, reason: String| report.violations.push(Violation { path, reason });
    let metadata: RunMetadata = match fs::read(workspace.join("run.json"))
        .map_err(|e| e.to_string())
        .and_then(|b| serde_json::from_slice(&b).map_err(|e| e.to_string()))
    {
        Ok(m) => m,
        Err(e) => {
            flag("run.json".into(), format!("run metadata unreadable: {e}"));
            return report;
        }
    };

    let mut sequestered: BTreeMap<[u8; 32], String> = BTreeMap::new();
    let tasks_dir = metadata.benchmark_root.join("tasks");
    match files_below(&tasks_dir) {
        Ok(files) => {
            for path in files {
                let rel = path.strip_prefix(&metadata.benchmark_root).unwrap_or(&path);
                if rel.components().any(|c| c.as_os_str() == SEQUESTERED_DIR) {
                    if let Ok(bytes) = fs::read(&path) {
                        sequestered
                            .entry(digest(&bytes))
                            .or_insert_with(|| rel.display().to_string());
                    }
                }
            }
        }
        Err(e) => flag("run.json".into(), format!("benchmark unreadable: {e}")),
    }

    let registry = load_task_registry();
    let algorithm_root = workspace.join("algorithm");
    let files = if algorithm_root.exists() {
        match files_below(&algorithm_root) {
            Ok(f) => f,
            Err(e) => {
                flag("algorithm".into(), format!("unreadable: {e}"));
                return report;
            }
        }
    } else {
        Vec::new()
    };
    for path in files {
        let rel_ws = path.strip_prefix(workspace).unwrap_or(&path).to_path_buf();
        let rel = rel_ws.display().to_string();
        let mut reasons = Vec::new();
        if rel_ws
            .components()
            .any(|c| c.as_os_str() == SEQUESTERED_DIR)
        {
            reasons.push("path passes through a sequestered directory".to_string());
        }
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) => {
                flag(rel, format!("unreadable: {e}"));
                continue;
            }
        };
        if let Some(source) = sequestered.get(&digest(&bytes)) {
            reasons.push(format!("copy of sequestered file {source}"));
        }
        let vision =
            task_of(&rel_ws).is_some_and(|t| registry.get(t).modality != Modality::Language);
        if vision && path.extension().is_some_and(|e| e == "json") {
            if let Ok(value) = serde_json::from_slice::<serde_json::Value>(&bytes) {
                if has_split_key(&value) {
                    reasons.push("split metadata in a vision-task file".to_string());
                }
            }
        }
        if !reasons.is_empty() {
            flag(rel, reasons.join("; "));
        }
    }
    report
}
