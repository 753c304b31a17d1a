//! Model assessment and the bounded validate-revise loop.

use std::collections::BTreeMap;

use serde_json::Value;

use super::{check_grammar_document, decide, ValidatorConfig};
use crate::llm::{
    render_prompt, request_json, template, LlmError, LlmProvider, LlmSettings, Purpose, SchemaId,
};
use crate::model::{to_canonical_json, to_canonical_value, HandGrammar, HandGraph, SemanticSchema, ValidationReport};

/// Everything a validation loop needs besides the grammar and provider.
#[derive(Debug, Clone, Copy)]
pub struct RevisionContext<'a> {
    pub task: &'a str,
    pub schema: &'a SemanticSchema,
    pub scope: Option<&'a str>,
    pub settings: &'a LlmSettings,
    pub config: &'a ValidatorConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assessment {
    /// Model score normalized to [0, 1].
    pub llm_score: f64,
    pub issues: Vec<String>,
    pub suggestions: Vec<String>,
    pub calls: usize,
}

fn base_bindings<'a>(ctx: &RevisionContext<'a>, doc: &Value) -> BTreeMap<&'static str, String> {
    BTreeMap::from([
        ("task", ctx.task.to_string()),
        ("schema_json", to_canonical_json(ctx.schema)),
        ("grammar_json", to_canonical_value(doc)),
    ])
}

/// Asks the model to score a grammar document from 0 to 10.
pub fn assess_structure_llm(
    doc: &Value,
    ctx: &RevisionContext<'_>,
    provider: &dyn LlmProvider,
) -> Result<Assessment, LlmError> {
    let t = template("assess")?;
    let messages = render_prompt(t, &base_bindings(ctx, doc))?;
    let req = ctx.settings.request(Purpose::Assess, messages, ctx.scope);
    let reply = request_json(provider, &req, SchemaId::Assessment)?;
    let a: crate::llm::AssessmentReply =
        serde_json::from_value(reply.value).map_err(|e| LlmError::Schema {
            path: String::new(),
            message: e.to_string(),
        })?;
    Ok(Assessment {
        llm_score: (a.score / 10.0).clamp(0.0, 1.0),
        issues: a.issues,
        suggestions: a.suggestions,
        calls: reply.calls,
    })
}

fn revise(
    doc: &Value,
    report: &ValidationReport,
    ctx: &RevisionContext<'_>,
    provider: &dyn LlmProvider,
) -> Result<(Value, usize), LlmError> {
    let t = template("revise")?;
    let mut b = base_bindings(ctx, doc);
    let findings = if report.findings.is_empty() {
        "(none)".to_string()
    } else {
        report
            .findings
            .iter()
            .map(|f| format!("- {} [{}] {}", f.check_id, severity_name(f), f.message))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let mut notes: Vec<String> = report.llm_issues.iter().map(|s| format!("- issue: {s}")).collect();
    notes.extend(report.llm_suggestions.iter().map(|s| format!("- {s}")));
    let suggestions = if notes.is_empty() { "(none)".to_string() } else { notes.join("\n") };
    b.insert("findings", findings);
    b.insert("suggestions", suggestions);
    let req = ctx.settings.request(Purpose::Revise, render_prompt(t, &b)?, ctx.scope);
    let reply = request_json(provider, &req, SchemaId::Grammar)?;
    Ok((reply.value, reply.calls))
}

fn severity_name(f: &crate::model::Finding) -> &'static str {
    match f.severity {
        crate::model::Severity::Info => "info",
        crate::model::Severity::Warning => "warning",
        crate::model::Severity::Critical => "critical",
    }
}

#[derive(Debug, Clone)]
pub struct LoopOutcome {
    pub grammar: HandGrammar,
    pub graph: HandGraph,
    pub document: Value,
    pub report: ValidationReport,
    /// Reports of every iteration, the accepted one last.
    pub trail: Vec<ValidationReport>,
    pub assess_calls: usize,
    pub revise_calls: usize,
}

impl LoopOutcome {
    pub fn iterations(&self) -> usize {
        self.trail.len()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LoopError {
    #[error("grammar rejected after {} iterations", .trail.len())]
    Exhausted {
        trail: Vec<ValidationReport>,
        last_document: Value,
        last_grammar: Option<HandGrammar>,
        provider_calls: usize,
    },
    #[error("provider failed during validation: {error}")]
    Provider {
        error: LlmError,
        trail: Vec<ValidationReport>,
        last_grammar: Option<HandGrammar>,
        provider_calls: usize,
    },
}

impl LoopError {
    pub fn trail(&self) -> &[ValidationReport] {
        match self {
            LoopError::Exhausted { trail, .. } | LoopError::Provider { trail, .. } => trail,
        }
    }

    pub fn last_grammar(&self) -> Option<&HandGrammar> {
        match self {
            LoopError::Exhausted { last_grammar, .. } | LoopError::Provider { last_grammar, .. } => {
                last_grammar.as_ref()
            }
        }
    }

    pub fn provider_calls(&self) -> usize {
        match self {
            LoopError::Exhausted { provider_calls, .. } | LoopError::Provider { provider_calls, .. } => {
                *provider_calls
            }
        }
    }
}

/// Validates `initial`, revising through the provider until a version is
/// accepted or `max_iterations` assessments have been spent. `on_report` sees
/// each iteration's report (1-based) as soon as it is decided.
pub fn revision_loop(
    initial: Value,
    ctx: &RevisionContext<'_>,
    provider: &dyn LlmProvider,
    on_report: &mut dyn FnMut(usize, &ValidationReport),
) -> Result<LoopOutcome, LoopError> {
    let max = ctx.config.max_iterations.max(1);
    let mut doc = initial;
    let mut trail = Vec::new();
    let mut assess_calls = 0;
    let mut revise_calls = 0;
    let mut last_grammar = None;
    for iteration in 1..=max {
        let (grammar, graph, checks) = check_grammar_document(&doc);
        if grammar.is_some() {
            last_grammar = grammar.clone();
        }
        let assessment = match assess_structure_llm(&doc, ctx, provider) {
            Ok(a) => a,
            Err(error) => {
                return Err(LoopError::Provider {
                    error,
                    trail,
                    last_grammar,
                    provider_calls: assess_calls + revise_calls,
                })
            }
        };
        assess_calls += assessment.calls;
        let mut report = decide(checks.rule_score, assessment.llm_score, checks.findings, ctx.config);
        report.llm_issues = assessment.issues;
        report.llm_suggestions = assessment.suggestions;
        on_report(iteration, &report);
        trail.push(report.clone());
        if report.accepted {
            let (grammar, graph) = match (grammar, graph) {
                (Some(g), Some(h)) => (g, h),
                _ => unreachable!("acceptance requires R0 to pass"),
            };
            return Ok(LoopOutcome {
                grammar,
                graph,
                document: doc,
                report,
                trail,
                assess_calls,
                revise_calls,
            });
        }
        if iteration == max {
            break;
        }
        match revise(&doc, &report, ctx, provider) {
            Ok((next, calls)) => {
                revise_calls += calls;
                doc = next;
            }
            Err(error) => {
                return Err(LoopError::Provider {
                    error,
                    trail,
                    last_grammar,
                    provider_calls: assess_calls + revise_calls,
                })
            }
        }
    }
    Err(LoopError::Exhausted {
        trail,
        last_document: doc,
        last_grammar,
        provider_calls: assess_calls + revise_calls,
    })
}
