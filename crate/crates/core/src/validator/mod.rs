//! Structural validation of hand grammars: programmatic rule checks, model
//! assessment, score combination and the accept-or-revise loop.

mod checks;
mod revise;

use serde::{Deserialize, Serialize};

pub use checks::{check_grammar_document, run_rule_checks, CheckSpec, RuleCheckOutcome, CATALOG};
pub use revise::{
    assess_structure_llm, revision_loop, Assessment, LoopError, LoopOutcome, RevisionContext,
};

use crate::model::{Finding, ValidationReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidatorConfig {
    pub rule_weight: f64,
    pub llm_weight: f64,
    pub threshold: f64,
    pub max_iterations: usize,
}

impl Default for ValidatorConfig {
    fn default() -> Self {
        ValidatorConfig {
            rule_weight: 0.5,
            llm_weight: 0.5,
            threshold: 0.7,
            max_iterations: 3,
        }
    }
}

impl ValidatorConfig {
    pub fn check(&self) -> Result<(), String> {
        if self.rule_weight < 0.0 || self.llm_weight < 0.0 || (self.rule_weight + self.llm_weight - 1.0).abs() > 1e-9 {
            return Err("validator weights must be non-negative and sum to 1".into());
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err("validator threshold must lie in [0, 1]".into());
        }
        if self.max_iterations == 0 {
            return Err("validator max_iterations must be >= 1".into());
        }
        Ok(())
    }
}

/// Combines the two scores and applies the acceptance rule: combined score
/// at or above the threshold and no critical finding.
pub fn decide(
    rule_score: f64,
    llm_score: f64,
    findings: Vec<Finding>,
    config: &ValidatorConfig,
) -> ValidationReport {
    let combined = (config.rule_weight * rule_score + config.llm_weight * llm_score).clamp(0.0, 1.0);
    let mut report = ValidationReport {
        findings,
        rule_score,
        llm_score,
        combined_score: combined,
        threshold: config.threshold,
        accepted: false,
        llm_issues: Vec::new(),
        llm_suggestions: Vec::new(),
    };
    report.accepted = combined >= config.threshold && !report.has_critical();
    report
}
