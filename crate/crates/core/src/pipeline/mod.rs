//! End-to-end orchestration: schema, per-variant generation on worker
//! threads, then ranking, the optional refinement pass and run metrics after
//! all variants settle.

pub mod artifacts;
pub mod batch;
pub mod rank;
pub mod report;
mod variant;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cad::{emit_scad, ScadTemplate};
use crate::config::Config;
use crate::llm::{render_prompt, request_json, template, ChatRequest, LlmError, LlmProvider, Purpose, SchemaId};
use crate::metrics::{gfl, mvr, task_diversity, DiversityItem, TaskDiversity};
use crate::model::{
    CandidateStatus, DesignCandidate, FilterRecord, GraspType, SemanticSchema, Validate, VariantId,
};
use crate::params::refilter;
use artifacts::{write_json, write_text, ArtifactIoError};
use rank::{
    apply_delta, describe_candidate, design_summary, request_refinement, score_candidate, sort_entries,
    RankEntry, RankInput, RankOutcome,
};
pub use variant::{Rejection, VariantOutcome, NOT_PARAMETERIZED};

/// Process exit codes of the CLI.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const IO: i32 = 1;
    pub const RUN_FAILED: i32 = 2;
    pub const CONFIG: i32 = 3;
    pub const PROVIDER: i32 = 4;
}

/// Scope key under which run-level calls (the schema request) are counted.
pub const RUN_SCOPE: &str = "run";

/// Counts provider calls per scope and purpose on their way through.
pub struct CallLedger<'a> {
    inner: &'a dyn LlmProvider,
    prefix: Option<String>,
    counts: Mutex<BTreeMap<String, BTreeMap<Purpose, usize>>>,
}

impl<'a> CallLedger<'a> {
    /// Scopes equal to `prefix` count as run-level; `prefix/v1` counts as `v1`.
    pub fn new(inner: &'a dyn LlmProvider, prefix: Option<&str>) -> Self {
        CallLedger {
            inner,
            prefix: prefix.map(str::to_string),
            counts: Mutex::new(BTreeMap::new()),
        }
    }

    fn key(&self, scope: Option<&str>) -> String {
        match (scope, &self.prefix) {
            (None, _) => RUN_SCOPE.into(),
            (Some(s), Some(p)) if s == p => RUN_SCOPE.into(),
            (Some(s), Some(p)) => s
                .strip_prefix(p.as_str())
                .and_then(|r| r.strip_prefix('/'))
                .unwrap_or(s)
                .to_string(),
            (Some(s), None) => s.to_string(),
        }
    }

    pub fn counts(&self) -> BTreeMap<String, BTreeMap<Purpose, usize>> {
        self.counts.lock().expect("call ledger poisoned").clone()
    }
}

impl LlmProvider for CallLedger<'_> {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        let key = self.key(request.scope.as_deref());
        *self
            .counts
            .lock()
            .expect("call ledger poisoned")
            .entry(key)
            .or_default()
            .entry(request.purpose)
            .or_insert(0) += 1;
        self.inner.complete(request)
    }
}

/// Total calls of one scope.
pub fn scope_total(counts: &BTreeMap<String, BTreeMap<Purpose, usize>>, scope: &str) -> usize {
    counts.get(scope).map(|m| m.values().sum()).unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub task: String,
    pub out_dir: PathBuf,
    /// Scope prefix for provider requests (a task id inside a batch).
    pub scope_prefix: Option<String>,
    /// Grasp type label from a task file, recorded in filter records.
    pub grasp_label: Option<GraspType>,
}

impl RunOptions {
    pub fn new(task: impl Into<String>, out_dir: impl Into<PathBuf>) -> Self {
        RunOptions {
            task: task.into(),
            out_dir: out_dir.into(),
            scope_prefix: None,
            grasp_label: None,
        }
    }

    fn scope(&self, leaf: Option<&str>) -> Option<String> {
        match (&self.scope_prefix, leaf) {
            (Some(p), Some(l)) => Some(format!("{p}/{l}")),
            (Some(p), None) => Some(p.clone()),
            (None, l) => l.map(str::to_string),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Succeeded,
    /// No variant survived.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSummary {
    pub run_id: String,
    pub task: String,
    pub status: RunStatus,
    pub variants: usize,
    pub survivors: Vec<VariantId>,
    /// Variants whose parameters passed the constraint filter.
    pub valid: usize,
    pub mvr: f64,
    pub diversity: Option<TaskDiversity>,
    pub gfl: BTreeMap<VariantId, f64>,
    pub rank: Option<RankOutcome>,
    pub rejections: Vec<Rejection>,
    /// Provider calls by scope (`run` or a variant id) and purpose.
    pub calls: BTreeMap<String, BTreeMap<Purpose, usize>>,
    #[serde(skip)]
    pub candidates: Vec<DesignCandidate>,
    #[serde(skip)]
    pub filter_records: Vec<FilterRecord>,
}

impl RunSummary {
    pub fn exit_code(&self) -> i32 {
        match self.status {
            RunStatus::Succeeded => exit::SUCCESS,
            RunStatus::Failed => exit::RUN_FAILED,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("schema extraction failed: {0}")]
    Provider(#[source] LlmError),
    #[error("artifact write failed: {0}")]
    Io(#[from] ArtifactIoError),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => exit::CONFIG,
            RunError::Provider(LlmError::Config(_)) => exit::CONFIG,
            RunError::Provider(_) => exit::PROVIDER,
            RunError::Io(_) => exit::IO,
        }
    }
}

/// First 8 hex digits of a hash over task text and seed.
pub fn run_id(task: &str, seed: u64) -> String {
    let digest = Sha256::digest(format!("{task}\n{seed}").as_bytes());
    digest.iter().take(4).map(|b| format!("{b:02x}")).collect()
}

pub fn load_template(config: &Config) -> Result<ScadTemplate, RunError> {
    match &config.cad.template_path {
        Some(p) => ScadTemplate::load(p).map_err(|e| RunError::Config(e.to_string())),
        None => Ok(ScadTemplate::builtin()),
    }
}

pub fn extract_schema(
    task: &str,
    scope: Option<&str>,
    config: &Config,
    provider: &dyn LlmProvider,
) -> Result<SemanticSchema, LlmError> {
    let bindings = BTreeMap::from([("task", task.to_string())]);
    let req = config
        .llm
        .request(Purpose::Schema, render_prompt(template("schema")?, &bindings)?, scope);
    let reply = request_json(provider, &req, SchemaId::Schema)?;
    let schema: SemanticSchema = serde_json::from_value(reply.value).map_err(|e| LlmError::Schema {
        path: String::new(),
        message: e.to_string(),
    })?;
    schema.validate().map_err(|e| LlmError::Schema {
        path: e.path,
        message: e.message,
    })?;
    Ok(schema)
}

#[derive(Serialize)]
struct Manifest<'a> {
    run_id: &'a str,
    task: &'a str,
    /// The only wall-clock value in a run directory.
    started_at: String,
    seed: u64,
    variants: usize,
    grasp_type_label: Option<GraspType>,
    stage_order: [&'static str; 9],
}

pub const STAGE_ORDER: [&str; 9] = [
    "grammar", "validate", "params", "filter", "emit", "render", "describe", "rank", "refine",
];

fn now_rfc3339() -> String {
    time::OffsetDateTime::now_utc()
        .format(&time::format_description::well_known::Rfc3339)
        .unwrap_or_default()
}

/// Runs the whole pipeline for one task and persists every stage artifact
/// under `opts.out_dir`. A run with no surviving variant still returns a
/// summary, with status `Failed`.
pub fn run_task(config: &Config, opts: &RunOptions, provider: &dyn LlmProvider) -> Result<RunSummary, RunError> {
    config.check().map_err(|e| RunError::Config(e.0))?;
    let template = load_template(config)?;
    let ledger = CallLedger::new(provider, opts.scope_prefix.as_deref());
    let run = run_id(&opts.task, config.run.seed);
    let dir = &opts.out_dir;
    artifacts::ensure_dir(dir)?;
    write_json(
        dir,
        "manifest.json",
        &Manifest {
            run_id: &run,
            task: &opts.task,
            started_at: now_rfc3339(),
            seed: config.run.seed,
            variants: config.run.variants,
            grasp_type_label: opts.grasp_label,
            stage_order: STAGE_ORDER,
        },
    )?;

    let schema_scope = opts.scope(None);
    let schema = extract_schema(&opts.task, schema_scope.as_deref(), config, &ledger).map_err(RunError::Provider)?;
    write_json(dir, "schema.json", &schema)?;

    let jobs: Vec<variant::VariantJob<'_>> = (1..=config.run.variants as u32)
        .map(|v| {
            let id = VariantId(v);
            variant::VariantJob {
                id,
                task: &opts.task,
                schema: &schema,
                config,
                template: &template,
                run_id: &run,
                run_dir: dir,
                scope: opts.scope(Some(&id.to_string())).expect("variant scope"),
                grasp_label: opts.grasp_label,
            }
        })
        .collect();
    let outcomes: Vec<VariantOutcome> = if config.run.concurrent && jobs.len() > 1 {
        let ledger = &ledger;
        std::thread::scope(|s| {
            let handles: Vec<_> = jobs
                .iter()
                .map(|job| s.spawn(move || variant::run_variant(job, ledger)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("variant worker panicked"))
                .collect::<Result<Vec<_>, _>>()
        })?
    } else {
        jobs.iter()
            .map(|job| variant::run_variant(job, &ledger))
            .collect::<Result<Vec<_>, _>>()?
    };

    let mut candidates: Vec<DesignCandidate> = outcomes.iter().map(|o| o.candidate.clone()).collect();
    let rationales: BTreeMap<VariantId, String> =
        outcomes.iter().map(|o| (o.candidate.variant_id, o.rationale.clone())).collect();
    let filter_records: Vec<FilterRecord> = outcomes.iter().map(|o| o.filter_record.clone()).collect();
    let rejections: Vec<Rejection> = outcomes.iter().filter_map(|o| o.rejection.clone()).collect();

    let rank = if candidates.iter().any(|c| c.status == CandidateStatus::Survived) {
        let outcome = rank_and_refine(config, opts, &schema, &template, &run, &rationales, &mut candidates, &ledger)?;
        write_json(dir, "rank.json", &outcome)?;
        Some(outcome)
    } else {
        None
    };

    for c in &candidates {
        write_json(&dir.join(c.variant_id.to_string()), &format!("candidate_{}.json", c.variant_id), c)?;
    }

    let survivors: Vec<&DesignCandidate> =
        candidates.iter().filter(|c| c.status == CandidateStatus::Survived).collect();
    let valid = filter_records.iter().filter(|r| r.filter_result.passed).count();
    let diversity = if survivors.len() >= 2 {
        let labels: Vec<String> = survivors.iter().map(|c| c.variant_id.to_string()).collect();
        let items: Vec<DiversityItem<'_>> = survivors
            .iter()
            .zip(&labels)
            .map(|(c, label)| DiversityItem {
                label,
                grammar: c.grammar.as_ref().expect("survivor has grammar"),
                graph: c.graph.as_ref().expect("survivor has graph"),
                params: c.params.as_ref().expect("survivor has params"),
            })
            .collect();
        task_diversity(&items, &config.metrics.diversity_weights, &config.norms).ok()
    } else {
        None
    };
    let gfl_by_variant = survivors
        .iter()
        .map(|c| {
            let g = gfl(
                c.geometry.as_deref().expect("survivor has geometry"),
                c.params.as_ref().expect("survivor has params"),
                &config.metrics.gfl_norms,
                &config.metrics.gfl_weights,
            );
            (c.variant_id, g)
        })
        .collect();
    let summary = RunSummary {
        run_id: run,
        task: opts.task.clone(),
        status: if survivors.is_empty() { RunStatus::Failed } else { RunStatus::Succeeded },
        variants: candidates.len(),
        survivors: survivors.iter().map(|c| c.variant_id).collect(),
        valid,
        mvr: mvr(valid, candidates.len()).unwrap_or(0.0),
        diversity,
        gfl: gfl_by_variant,
        rank,
        rejections,
        calls: ledger.counts(),
        candidates,
        filter_records,
    };
    write_json(dir, "summary.json", &summary)?;
    Ok(summary)
}

fn apply_entry(c: &mut DesignCandidate, e: &RankEntry) {
    c.semantic_score = Some(e.semantic_score);
    c.size_score = Some(e.size_score);
    c.total_score = Some(e.total_score);
    for f in &e.flags {
        if !c.flags.contains(f) {
            c.flags.push(f.clone());
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn rank_and_refine(
    config: &Config,
    opts: &RunOptions,
    schema: &SemanticSchema,
    template: &ScadTemplate,
    run: &str,
    rationales: &BTreeMap<VariantId, String>,
    candidates: &mut [DesignCandidate],
    provider: &dyn LlmProvider,
) -> Result<RankOutcome, RunError> {
    let weights = (config.run.semantic_weight, config.run.size_weight);
    let settings = &config.llm;
    let mut ranked = Vec::new();
    for c in candidates.iter_mut().filter(|c| c.status == CandidateStatus::Survived) {
        let scope = opts.scope(Some(&c.variant_id.to_string()));
        let entry = score_candidate(
            &opts.task,
            schema,
            &RankInput {
                variant_id: c.variant_id,
                rationale: &rationales[&c.variant_id],
                params: c.params.as_ref().expect("survivor has params"),
                geometry: c.geometry.as_deref().expect("survivor has geometry"),
                description: c.description.as_deref().unwrap_or_default(),
            },
            weights,
            scope.as_deref(),
            settings,
            provider,
        );
        apply_entry(c, &entry);
        c.stages.push("rank".into());
        ranked.push(entry);
    }
    sort_entries(&mut ranked);
    let mut outcome = RankOutcome {
        chosen: ranked[0].variant_id,
        ranked,
        refined: false,
        weights,
    };

    let top = outcome.ranked[0].clone();
    if config.run.max_refinements == 0 || top.total_score >= config.run.quality_threshold {
        return Ok(outcome);
    }
    let winner = candidates
        .iter_mut()
        .find(|c| c.variant_id == top.variant_id)
        .expect("ranked candidate exists");
    let id = winner.variant_id;
    let scope = opts.scope(Some(&id.to_string()));
    let vdir = opts.out_dir.join(id.to_string());
    let params = winner.params.clone().expect("survivor has params");
    winner.stages.push("refine".into());
    let delta = match request_refinement(
        &opts.task,
        &params,
        winner.description.as_deref().unwrap_or_default(),
        &top,
        scope.as_deref(),
        settings,
        provider,
    ) {
        Ok(d) => d,
        Err(e) => {
            log::warn!("{id} refinement reply unusable: {e}");
            winner.flags.push("refine_unparseable".into());
            return Ok(outcome);
        }
    };
    write_json(&vdir, &format!("refine_delta_{id}.json"), &delta)?;
    let adjusted = match apply_delta(&params, &delta) {
        Ok(p) => p,
        Err(e) => {
            log::warn!("{id} refinement delta rejected: {e}");
            winner.flags.push("refine_invalid_delta".into());
            return Ok(outcome);
        }
    };
    let filtered = refilter(
        &adjusted,
        Some(schema.grasp_type),
        &config.priors,
        &config.ratios,
        &config.constraints,
    );
    write_json(&vdir, &format!("params_{id}_refined.json"), &filtered.params)?;
    if !filtered.result.passed {
        log::warn!("{id} refined parameters fail the filter; keeping the original");
        winner.flags.push("refine_reverted".into());
        return Ok(outcome);
    }
    let scad = match emit_scad(&filtered.params, &filtered.geometry, template) {
        Ok(s) => s,
        Err(e) => {
            log::warn!("{id} refined parameters failed to emit: {e}");
            winner.flags.push("refine_reverted".into());
            return Ok(outcome);
        }
    };
    let scad_name = format!("hand_{run}_{id}_refined.scad");
    write_text(&vdir, &scad_name, &scad)?;
    let summary = design_summary(&filtered.params, &filtered.geometry, winner.graph.as_ref());
    let description = describe_candidate(&summary, scope.as_deref(), settings, provider);
    if description.fallback {
        winner.flags.push("refined_description_fallback".into());
    }
    write_text(&vdir, &format!("description_{id}_refined.txt"), &format!("{}\n", description.text))?;
    let entry = score_candidate(
        &opts.task,
        schema,
        &RankInput {
            variant_id: id,
            rationale: &rationales[&id],
            params: &filtered.params,
            geometry: &filtered.geometry,
            description: &description.text,
        },
        outcome.weights,
        scope.as_deref(),
        settings,
        provider,
    );
    winner.params = Some(filtered.params);
    winner.geometry = Some(filtered.geometry);
    winner.filter_result = Some(filtered.result);
    winner.description = Some(description.text);
    winner.scad_path = Some(format!("{id}/{scad_name}"));
    winner.flags.push("refined".into());
    apply_entry(winner, &entry);
    for e in outcome.ranked.iter_mut().filter(|e| e.variant_id == id) {
        *e = entry.clone();
    }
    sort_entries(&mut outcome.ranked);
    outcome.chosen = outcome.ranked[0].variant_id;
    outcome.refined = true;
    Ok(outcome)
}

/// Helper for callers that only have a path to a run directory.
pub fn summary_path(run_dir: &Path) -> PathBuf {
    run_dir.join("summary.json")
}
