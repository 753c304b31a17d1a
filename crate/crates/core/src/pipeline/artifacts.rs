//! Run-directory file helpers. Every JSON artifact goes through the canonical
//! writer so reruns produce identical bytes.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::model::to_canonical_json;

#[derive(Debug, thiserror::Error)]
#[error("{path}: {message}")]
pub struct ArtifactIoError {
    pub path: PathBuf,
    pub message: String,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> ArtifactIoError {
    ArtifactIoError {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), ArtifactIoError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf, ArtifactIoError> {
    ensure_dir(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

pub fn write_json<T: Serialize + ?Sized>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, ArtifactIoError> {
    write_text(dir, name, &to_canonical_json(value))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, ArtifactIoError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| io_err(path, e))
}

/// All files under `root` whose name satisfies `pred`, sorted by path.
pub fn find_files(root: &Path, pred: &dyn Fn(&str) -> bool) -> Result<Vec<PathBuf>, ArtifactIoError> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        let entries = std::fs::read_dir(&dir).map_err(|e| io_err(&dir, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| io_err(&dir, e))?;
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().and_then(|n| n.to_str()).is_some_and(pred) {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}
