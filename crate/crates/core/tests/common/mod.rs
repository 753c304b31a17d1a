#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use handmorph::config::Config;
use handmorph::llm::StubProvider;
use handmorph::pipeline::{run_task, RunOptions, RunSummary};

pub const MUG_TASK: &str = "Lift a full coffee mug by its body and set it on a shelf";

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn scenario(name: &str) -> PathBuf {
    fixtures().join("scenarios").join(name)
}

pub fn copy_dir(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.path().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            std::fs::copy(entry.path(), target).unwrap();
        }
    }
}

/// Runs `fixture_dir` through the pipeline into `out`.
pub fn run_fixtures(fixture_dir: &Path, out: &Path, config: &Config) -> (RunSummary, StubProvider) {
    let stub = StubProvider::from_dir(fixture_dir).unwrap();
    let summary = run_task(config, &RunOptions::new(MUG_TASK, out), &stub).unwrap();
    (summary, stub)
}

pub fn run_scenario(name: &str, out: &Path) -> RunSummary {
    run_fixtures(&scenario(name), out, &Config::default()).0
}

/// Relative path -> bytes for every file under `root`, with the manifest's
/// wall-clock field blanked.
pub fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let rel = path.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
            let mut bytes = std::fs::read(&path).unwrap();
            if rel == "manifest.json" {
                let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
                v["started_at"] = serde_json::Value::Null;
                bytes = v.to_string().into_bytes();
            }
            out.insert(rel, bytes);
        }
    }
    out
}

pub fn files_with_suffix(root: &Path, suffix: &str) -> Vec<String> {
    snapshot(root).into_keys().filter(|k| k.ends_with(suffix)).collect()
}

pub fn calls_in(summary: &RunSummary, scope: &str) -> usize {
    handmorph::pipeline::scope_total(&summary.calls, scope)
}

pub fn total_calls(summary: &RunSummary) -> usize {
    summary.calls.values().flat_map(|m| m.values()).sum()
}
