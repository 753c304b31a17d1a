//! One variant from grammar request to description. Runs on its own worker
//! and hands its result back by value.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::artifacts::{write_json, write_text, ArtifactIoError};
use super::rank::{describe_candidate, design_summary};
use crate::cad::{emit_scad, verify_render, RenderOutcome, ScadTemplate};
use crate::config::Config;
use crate::llm::{render_prompt, request_json, template, LlmError, LlmProvider, Purpose, SchemaId};
use crate::model::{
    to_canonical_json, to_canonical_value, CandidateStatus, DesignCandidate, FilterRecord, FilterResult,
    GraspType, SemanticSchema, VariantId,
};
use crate::params::{chain_summary, generate_params, prepare_and_filter, ParamsContext};
use crate::validator::{revision_loop, RevisionContext};

/// Pseudo check id recorded for variants that never reached the filter.
pub const NOT_PARAMETERIZED: &str = "not_parameterized";

pub(crate) struct VariantJob<'a> {
    pub id: VariantId,
    pub task: &'a str,
    pub schema: &'a SemanticSchema,
    pub config: &'a Config,
    pub template: &'a ScadTemplate,
    pub run_id: &'a str,
    pub run_dir: &'a Path,
    pub scope: String,
    pub grasp_label: Option<GraspType>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rejection {
    pub variant_id: VariantId,
    pub status: CandidateStatus,
    pub stage: String,
    pub reason: String,
    /// Combined validation score of each iteration that ran.
    pub validation_trail: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct VariantOutcome {
    pub candidate: DesignCandidate,
    /// Design rationale shown to the ranker.
    pub rationale: String,
    pub filter_record: FilterRecord,
    pub rejection: Option<Rejection>,
}

fn request_grammar(job: &VariantJob<'_>, cue: &str, provider: &dyn LlmProvider) -> Result<Value, LlmError> {
    let bindings = BTreeMap::from([
        ("task", job.task.to_string()),
        ("schema_json", to_canonical_json(job.schema)),
        ("design_cue", cue.to_string()),
    ]);
    let req = job.config.llm.request(
        Purpose::Grammar,
        render_prompt(template("grammar")?, &bindings)?,
        Some(&job.scope),
    );
    Ok(request_json(provider, &req, SchemaId::Grammar)?.value)
}

struct Worker<'a, 'j> {
    job: &'j VariantJob<'a>,
    dir: std::path::PathBuf,
    candidate: DesignCandidate,
    trail: Vec<f64>,
}

impl Worker<'_, '_> {
    fn name(&self, stem: &str, ext: &str) -> String {
        format!("{stem}_{}.{ext}", self.job.id)
    }

    fn filter_record(&self) -> FilterRecord {
        FilterRecord {
            variant_id: self.job.id,
            grasp_type_label: self.job.grasp_label,
            params: self.candidate.params.clone(),
            geometry: self.candidate.geometry.clone(),
            filter_result: self.candidate.filter_result.clone().unwrap_or(FilterResult {
                passed: false,
                violations: vec![NOT_PARAMETERIZED.into()],
            }),
        }
    }

    fn reject(
        mut self,
        status: CandidateStatus,
        stage: &str,
        reason: String,
        rationale: String,
    ) -> Result<VariantOutcome, ArtifactIoError> {
        log::warn!("{} rejected at {stage}: {reason}", self.job.id);
        self.candidate.status = status;
        let rejection = Rejection {
            variant_id: self.job.id,
            status,
            stage: stage.into(),
            reason,
            validation_trail: self.trail.clone(),
        };
        write_json(&self.dir, &self.name("rejection", "json"), &rejection)?;
        let record = self.filter_record();
        write_json(&self.dir, &self.name("filter", "json"), &record)?;
        Ok(VariantOutcome {
            candidate: self.candidate,
            rationale,
            filter_record: record,
            rejection: Some(rejection),
        })
    }
}

pub(crate) fn run_variant(job: &VariantJob<'_>, provider: &dyn LlmProvider) -> Result<VariantOutcome, ArtifactIoError> {
    let config = job.config;
    let id = job.id;
    let cue = config.run.cue_for(id.0).to_string();
    let mut w = Worker {
        job,
        dir: job.run_dir.join(id.to_string()),
        candidate: DesignCandidate {
            variant_id: id,
            status: CandidateStatus::RejectedValidation,
            design_cue: cue.clone(),
            schema: job.schema.clone(),
            grammar: None,
            graph: None,
            params: None,
            geometry: None,
            filter_result: None,
            description: None,
            semantic_score: None,
            size_score: None,
            total_score: None,
            score_weights: (config.run.semantic_weight, config.run.size_weight),
            scad_path: None,
            flags: Vec::new(),
            stages: Vec::new(),
        },
        trail: Vec::new(),
    };
    let mut rationale = format!("Design cue: {cue}");
    super::artifacts::ensure_dir(&w.dir)?;

    let doc = match request_grammar(job, &cue, provider) {
        Ok(doc) => doc,
        Err(e) => return w.reject(CandidateStatus::RejectedValidation, "grammar", e.to_string(), rationale),
    };
    w.candidate.stages.push("grammar".into());
    write_text(&w.dir, &w.name("grammar_reply", "json"), &to_canonical_value(&doc))?;

    let ctx = RevisionContext {
        task: job.task,
        schema: job.schema,
        scope: Some(&job.scope),
        settings: &config.llm,
        config: &config.validator,
    };
    let mut write_failure = None;
    let dir = w.dir.clone();
    let looped = revision_loop(doc, &ctx, provider, &mut |iteration, report| {
        if let Err(e) = write_json(&dir, &format!("report_{id}_{iteration}.json"), report) {
            write_failure.get_or_insert(e);
        }
    });
    if let Some(e) = write_failure {
        return Err(e);
    }
    w.candidate.stages.push("validate".into());
    let outcome = match looped {
        Ok(o) => o,
        Err(e) => {
            w.trail = e.trail().iter().map(|r| r.combined_score).collect();
            if let Some(g) = e.last_grammar() {
                write_json(&w.dir, &w.name("grammar", "json"), g)?;
                w.candidate.grammar = Some(g.clone());
            }
            return w.reject(CandidateStatus::RejectedValidation, "validate", e.to_string(), rationale);
        }
    };
    w.trail = outcome.trail.iter().map(|r| r.combined_score).collect();
    if outcome.revise_calls > 0 {
        write_text(&w.dir, &w.name("grammar_revised", "json"), &to_canonical_value(&outcome.document))?;
    }
    write_json(&w.dir, &w.name("grammar", "json"), &outcome.grammar)?;
    write_json(&w.dir, &w.name("graph", "json"), &outcome.graph)?;
    rationale = format!("{rationale}\nFinger chains: {}", chain_summary(&outcome.graph));
    w.candidate.grammar = Some(outcome.grammar);
    w.candidate.graph = Some(outcome.graph.clone());

    let pctx = ParamsContext {
        task: job.task,
        design_cue: &cue,
        scope: Some(&job.scope),
        settings: &config.llm,
    };
    let generated = match generate_params(&outcome.graph, job.schema, &pctx, provider) {
        Ok(g) => g,
        Err(e) => return w.reject(CandidateStatus::RejectedParams, "params", e.to_string(), rationale),
    };
    w.candidate.stages.push("params".into());
    write_json(&w.dir, &w.name("params_raw", "json"), &generated.params)?;

    let filtered = prepare_and_filter(
        &generated.params,
        Some(job.schema.grasp_type),
        &config.priors,
        &config.ratios,
        &config.constraints,
    );
    write_json(&w.dir, &w.name("params", "json"), &filtered.params)?;
    w.candidate.params = Some(filtered.params.clone());
    w.candidate.geometry = Some(filtered.geometry.clone());
    w.candidate.filter_result = Some(filtered.result.clone());
    w.candidate.stages.push("filter".into());
    if !filtered.result.passed {
        let reason = format!("constraint violations: {}", filtered.result.violations.join(", "));
        return w.reject(CandidateStatus::RejectedFilter, "filter", reason, rationale);
    }

    let scad = match emit_scad(&filtered.params, &filtered.geometry, job.template) {
        Ok(s) => s,
        Err(e) => return w.reject(CandidateStatus::RejectedFilter, "emit", e.to_string(), rationale),
    };
    let scad_name = format!("hand_{}_{id}.scad", job.run_id);
    let scad_path = write_text(&w.dir, &scad_name, &scad)?;
    w.candidate.scad_path = Some(format!("{id}/{scad_name}"));
    w.candidate.stages.push("emit".into());

    let render = verify_render(&scad_path, &config.cad.renderer);
    if let RenderOutcome::Failed { diagnostics } = &render {
        log::warn!("{id} render check failed: {diagnostics}");
        w.candidate.flags.push("render_failed".into());
    }
    write_json(&w.dir, &w.name("render", "json"), &render)?;
    w.candidate.stages.push("render".into());

    let summary = design_summary(&filtered.params, &filtered.geometry, Some(&outcome.graph));
    let description = describe_candidate(&summary, Some(&job.scope), &config.llm, provider);
    if description.fallback {
        w.candidate.flags.push("description_fallback".into());
    }
    write_text(&w.dir, &w.name("description", "txt"), &format!("{}\n", description.text))?;
    w.candidate.description = Some(description.text);
    w.candidate.stages.push("describe".into());

    w.candidate.status = CandidateStatus::Survived;
    let record = w.filter_record();
    write_json(&w.dir, &w.name("filter", "json"), &record)?;
    Ok(VariantOutcome {
        candidate: w.candidate,
        rationale,
        filter_record: record,
        rejection: None,
    })
}
