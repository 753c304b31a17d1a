//! Multi-task evaluation in three generation modes: the full pipeline, a
//! zero-shot baseline (one direct parameter prompt per variant) and a random
//! baseline (uniform draws from the normalization ranges).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::artifacts::{write_json, ArtifactIoError};
use super::report::{write_tables, ReportSummary};
use super::{run_task, CallLedger, RunError, RunOptions, NOT_PARAMETERIZED};
use crate::config::Config;
use crate::llm::{LlmProvider, Purpose};
use crate::model::{FilterRecord, FilterResult, GraspType, VariantId};
use crate::params::{generate_params_zero_shot, prepare_and_filter, sample_random_params};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub task: String,
    pub grasp_type_label: GraspType,
}

pub fn load_tasks(path: &Path) -> Result<Vec<TaskSpec>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let tasks: Vec<TaskSpec> = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    if tasks.is_empty() {
        return Err(format!("{}: task list is empty", path.display()));
    }
    Ok(tasks)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchMode {
    Full,
    ZeroShot,
    Random,
}

impl BatchMode {
    /// Method label in the tables.
    pub fn method(self) -> &'static str {
        match self {
            BatchMode::Full => "pipeline",
            BatchMode::ZeroShot => "zero_shot",
            BatchMode::Random => "random",
        }
    }

    pub fn needs_provider(self) -> bool {
        self != BatchMode::Random
    }
}

impl std::str::FromStr for BatchMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(BatchMode::Full),
            "zero-shot" | "zero_shot" => Ok(BatchMode::ZeroShot),
            "random" => Ok(BatchMode::Random),
            _ => Err(format!("unknown batch mode `{s}`")),
        }
    }
}

pub fn task_id(index: usize) -> String {
    format!("t{:02}", index + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub task_id: String,
    pub grasp_type_label: GraspType,
    pub valid: usize,
    pub total: usize,
    /// Set when the task failed before any variant was generated.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutcome {
    pub tasks: Vec<TaskOutcome>,
    pub report: ReportSummary,
    pub calls: BTreeMap<String, BTreeMap<Purpose, usize>>,
    pub tables_dir: PathBuf,
}

fn unparameterized(id: VariantId, label: GraspType) -> FilterRecord {
    FilterRecord {
        variant_id: id,
        grasp_type_label: Some(label),
        params: None,
        geometry: None,
        filter_result: FilterResult {
            passed: false,
            violations: vec![NOT_PARAMETERIZED.into()],
        },
    }
}

fn write_record(task_dir: &Path, record: &FilterRecord) -> Result<(), ArtifactIoError> {
    let v = record.variant_id.to_string();
    write_json(&task_dir.join(&v), &format!("filter_{v}.json"), record)?;
    Ok(())
}

/// Runs every task in `mode`, writing per-task artifacts under
/// `<out>/tasks/tNN` and tables under `<out>/tables`.
pub fn batch_eval(
    config: &Config,
    tasks: &[TaskSpec],
    mode: BatchMode,
    out_dir: &Path,
    provider: Option<&dyn LlmProvider>,
) -> Result<BatchOutcome, RunError> {
    config.check().map_err(|e| RunError::Config(e.0))?;
    if mode.needs_provider() && provider.is_none() {
        return Err(RunError::Config(format!("batch mode {} needs a provider", mode.method())));
    }
    let variants = config.run.variants;
    let mut outcomes = Vec::new();
    let mut calls: BTreeMap<String, BTreeMap<Purpose, usize>> = BTreeMap::new();
    for (i, spec) in tasks.iter().enumerate() {
        let tid = task_id(i);
        let task_dir = out_dir.join("tasks").join(&tid);
        log::info!("{tid} ({}): {}", spec.grasp_type_label, spec.task);
        let mut records = Vec::new();
        let mut error = None;
        match mode {
            BatchMode::Full => {
                let provider = provider.expect("checked above");
                let opts = RunOptions {
                    task: spec.task.clone(),
                    out_dir: task_dir.clone(),
                    scope_prefix: Some(tid.clone()),
                    grasp_label: Some(spec.grasp_type_label),
                };
                match run_task(config, &opts, provider) {
                    Ok(summary) => {
                        for (scope, m) in summary.calls {
                            let slot = calls.entry(format!("{tid}/{scope}")).or_default();
                            for (p, n) in m {
                                *slot.entry(p).or_insert(0) += n;
                            }
                        }
                        records = summary.filter_records;
                    }
                    Err(RunError::Provider(e)) => {
                        log::warn!("{tid} failed: {e}");
                        error = Some(e.to_string());
                        for v in 1..=variants as u32 {
                            let r = unparameterized(VariantId(v), spec.grasp_type_label);
                            write_record(&task_dir, &r)?;
                            records.push(r);
                        }
                    }
                    Err(e) => return Err(e),
                }
            }
            BatchMode::ZeroShot => {
                let ledger = CallLedger::new(provider.expect("checked above"), Some(&tid));
                for v in 1..=variants as u32 {
                    let id = VariantId(v);
                    let scope = format!("{tid}/{id}");
                    let record = match generate_params_zero_shot(&spec.task, Some(&scope), &config.llm, &ledger) {
                        Ok(g) => {
                            let f = prepare_and_filter(&g.params, None, &config.priors, &config.ratios, &config.constraints);
                            FilterRecord {
                                variant_id: id,
                                grasp_type_label: Some(spec.grasp_type_label),
                                params: Some(f.params),
                                geometry: Some(f.geometry),
                                filter_result: f.result,
                            }
                        }
                        Err(e) => {
                            log::warn!("{scope} zero-shot params failed: {e}");
                            unparameterized(id, spec.grasp_type_label)
                        }
                    };
                    write_record(&task_dir, &record)?;
                    records.push(record);
                }
                for (scope, m) in ledger.counts() {
                    calls.insert(format!("{tid}/{scope}"), m);
                }
            }
            BatchMode::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(config.run.seed.wrapping_add(i as u64));
                for v in 1..=variants as u32 {
                    let raw = sample_random_params(&config.norms, &mut rng);
                    let f = prepare_and_filter(&raw, None, &config.priors, &config.ratios, &config.constraints);
                    let record = FilterRecord {
                        variant_id: VariantId(v),
                        grasp_type_label: Some(spec.grasp_type_label),
                        params: Some(f.params),
                        geometry: Some(f.geometry),
                        filter_result: f.result,
                    };
                    write_record(&task_dir, &record)?;
                    records.push(record);
                }
            }
        }
        outcomes.push(TaskOutcome {
            task_id: tid,
            grasp_type_label: spec.grasp_type_label,
            valid: records.iter().filter(|r| r.filter_result.passed).count(),
            total: records.len(),
            error,
        });
    }
    let tables_dir = out_dir.join("tables");
    let report = write_tables(&out_dir.join("tasks"), &tables_dir, mode.method(), config)?;
    write_json(out_dir, "batch.json", &outcomes)?;
    Ok(BatchOutcome {
        tasks: outcomes,
        report,
        calls,
        tables_dir,
    })
}
