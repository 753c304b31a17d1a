//! Text description, two-axis scoring, ordering and the single refinement
//! pass for the top candidate.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::grammar::Topology;
use crate::llm::{
    render_prompt, request_json, template, DeltaOp, LlmError, LlmProvider, LlmSettings, ParamDelta,
    Purpose, SchemaId, ScoreReply,
};
use crate::model::{
    format_float, to_canonical_json, DerivedFingerGeometry, FingerParams, HandGraph, OphParams,
    SemanticSchema, Validate, VariantId,
};
use crate::params::footprint;

fn mm(x: f64) -> String {
    format_float(x)
}

/// Deterministic plain-text summary of structure and geometry.
pub fn design_summary(
    params: &OphParams,
    geometry: &[DerivedFingerGeometry],
    graph: Option<&HandGraph>,
) -> String {
    let mut out = format!(
        "Hand with {} fingers on a {} mm wide palm (curvature {}).\n",
        params.finger_count(),
        mm(params.palm_width_mm),
        mm(params.palm_curvature)
    );
    if let Some(g) = graph {
        let topo = Topology::of(g);
        let chains: Vec<String> = topo
            .fingers
            .iter()
            .map(|f| format!("{}J/{}L", f.joints, f.links))
            .collect();
        out.push_str(&format!("Finger chains: {}.\n", chains.join(", ")));
    }
    for (i, (f, g)) in params.fingers.iter().zip(geometry).enumerate() {
        let [p0, p1, p2] = g.segment_lengths_mm;
        let [j0, j1, j2] = g.joint_diameters_mm;
        out.push_str(&format!(
            "Finger {}: mounted at {} mm, angle {} deg, scale {}, metacarpal {} mm, phalanges {}/{}/{} mm, joints {}/{}/{} mm, total {} mm.\n",
            i + 1,
            mm(f.mount_translation_mm),
            mm(f.mount_angle_deg),
            mm(f.scale),
            mm(f.metacarpal_length_mm),
            mm(p0),
            mm(p1),
            mm(p2),
            mm(j0),
            mm(j1),
            mm(j2),
            mm(g.total_length_mm),
        ));
    }
    let [x, y, z] = footprint(params, geometry);
    out.push_str(&format!("Footprint: {} x {} x {} mm.", mm(x), mm(y), mm(z)));
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Description {
    pub text: String,
    /// The provider failed and the raw summary stands in.
    pub fallback: bool,
}

/// Sends the summary through the describe prompt. On provider failure the
/// summary itself becomes the description.
pub fn describe_candidate(
    summary: &str,
    scope: Option<&str>,
    settings: &LlmSettings,
    provider: &dyn LlmProvider,
) -> Description {
    let attempt = || -> Result<String, LlmError> {
        let bindings = BTreeMap::from([("summary", summary.to_string())]);
        let req = settings.request(Purpose::Describe, render_prompt(template("describe")?, &bindings)?, scope);
        provider.complete(&req)
    };
    match attempt() {
        Ok(text) if !text.trim().is_empty() => Description {
            text: text.trim().to_string(),
            fallback: false,
        },
        Ok(_) => Description {
            text: summary.to_string(),
            fallback: true,
        },
        Err(e) => {
            log::warn!("describe failed ({e}); using parameter summary");
            Description {
                text: summary.to_string(),
                fallback: true,
            }
        }
    }
}

/// What the ranker sees of one candidate.
#[derive(Debug, Clone, Copy)]
pub struct RankInput<'a> {
    pub variant_id: VariantId,
    pub rationale: &'a str,
    pub params: &'a OphParams,
    pub geometry: &'a [DerivedFingerGeometry],
    pub description: &'a str,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankEntry {
    pub variant_id: VariantId,
    pub semantic_score: f64,
    pub size_score: f64,
    pub total_score: f64,
    pub semantic_justification: String,
    pub size_justification: String,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankOutcome {
    /// Best first: total descending, then variant id ascending.
    pub ranked: Vec<RankEntry>,
    pub chosen: VariantId,
    pub refined: bool,
    pub weights: (f64, f64),
}

impl RankOutcome {
    pub fn entry(&self, id: VariantId) -> Option<&RankEntry> {
        self.ranked.iter().find(|e| e.variant_id == id)
    }
}

pub fn sort_entries(entries: &mut [RankEntry]) {
    entries.sort_by(|a, b| {
        b.total_score
            .total_cmp(&a.total_score)
            .then(a.variant_id.cmp(&b.variant_id))
    });
}

fn score_axis(
    purpose: Purpose,
    bindings: &BTreeMap<&str, String>,
    scope: Option<&str>,
    settings: &LlmSettings,
    provider: &dyn LlmProvider,
) -> Result<ScoreReply, LlmError> {
    let req = settings.request(purpose, render_prompt(template(purpose.as_str())?, bindings)?, scope);
    let reply = request_json(provider, &req, SchemaId::Score)?;
    serde_json::from_value(reply.value).map_err(|e| LlmError::Schema {
        path: String::new(),
        message: e.to_string(),
    })
}

/// Scores one candidate on both axes. A failing axis scores 0 and is flagged.
pub fn score_candidate(
    task: &str,
    schema: &SemanticSchema,
    input: &RankInput<'_>,
    weights: (f64, f64),
    scope: Option<&str>,
    settings: &LlmSettings,
    provider: &dyn LlmProvider,
) -> RankEntry {
    let params_json = to_canonical_json(input.params);
    let [x, y, z] = footprint(input.params, input.geometry);
    let [ox, oy, oz] = schema.object_size_mm;
    let semantic = BTreeMap::from([
        ("task", task.to_string()),
        ("rationale", input.rationale.to_string()),
        ("params_json", params_json.clone()),
        ("description", input.description.to_string()),
    ]);
    let size = BTreeMap::from([
        ("task", task.to_string()),
        ("object_size", format!("{} x {} x {}", mm(ox), mm(oy), mm(oz))),
        ("params_json", params_json),
        ("footprint", format!("{} x {} x {}", mm(x), mm(y), mm(z))),
        ("description", input.description.to_string()),
    ]);
    let mut flags = Vec::new();
    let mut axis = |purpose: Purpose, b: &BTreeMap<&str, String>| {
        match score_axis(purpose, b, scope, settings, provider) {
            Ok(r) => (r.score.clamp(0.0, 10.0), r.justification),
            Err(e) => {
                flags.push(format!("{}_unscored: {e}", purpose.as_str()));
                (0.0, String::new())
            }
        }
    };
    let (sem, sem_why) = axis(Purpose::RankSemantic, &semantic);
    let (siz, size_why) = axis(Purpose::RankSize, &size);
    RankEntry {
        variant_id: input.variant_id,
        semantic_score: sem,
        size_score: siz,
        total_score: weights.0 * sem + weights.1 * siz,
        semantic_justification: sem_why,
        size_justification: size_why,
        flags,
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DeltaError {
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("finger index {index} out of range for {count} fingers")]
    FingerIndex { index: usize, count: usize },
    #[error("adjusted parameters are invalid: {0}")]
    Invalid(String),
}

fn apply_op(current: f64, op: DeltaOp, value: f64) -> f64 {
    match op {
        DeltaOp::Set => value,
        DeltaOp::Add => current + value,
        DeltaOp::Multiply => current * value,
    }
}

fn finger_field<'a>(f: &'a mut FingerParams, name: &str) -> Option<&'a mut f64> {
    match name {
        "mount_angle_deg" => Some(&mut f.mount_angle_deg),
        "mount_translation_mm" => Some(&mut f.mount_translation_mm),
        "metacarpal_length_mm" => Some(&mut f.metacarpal_length_mm),
        "scale" => Some(&mut f.scale),
        _ => None,
    }
}

/// Applies adjustments in order. Field paths: `palm_width_mm`,
/// `palm_curvature`, `fingers[i].<field>` and `fingers[*].<field>`.
pub fn apply_delta(params: &OphParams, delta: &ParamDelta) -> Result<OphParams, DeltaError> {
    let mut p = params.clone();
    for adj in &delta.adjustments {
        let field = adj.field.trim();
        match field {
            "palm_width_mm" => p.palm_width_mm = apply_op(p.palm_width_mm, adj.op, adj.value),
            "palm_curvature" => p.palm_curvature = apply_op(p.palm_curvature, adj.op, adj.value),
            _ => {
                let unknown = || DeltaError::UnknownField(adj.field.clone());
                let rest = field.strip_prefix("fingers[").ok_or_else(unknown)?;
                let (index, name) = rest.split_once("].").ok_or_else(unknown)?;
                let count = p.fingers.len();
                let targets: Vec<usize> = if index == "*" {
                    (0..count).collect()
                } else {
                    let i: usize = index.parse().map_err(|_| unknown())?;
                    if i >= count {
                        return Err(DeltaError::FingerIndex { index: i, count });
                    }
                    vec![i]
                };
                for i in targets {
                    let slot = finger_field(&mut p.fingers[i], name).ok_or_else(unknown)?;
                    *slot = apply_op(*slot, adj.op, adj.value);
                }
            }
        }
    }
    p.validate().map_err(|e| DeltaError::Invalid(e.to_string()))?;
    Ok(p)
}

/// One refine-purpose call proposing a parameter delta.
pub fn request_refinement(
    task: &str,
    params: &OphParams,
    description: &str,
    entry: &RankEntry,
    scope: Option<&str>,
    settings: &LlmSettings,
    provider: &dyn LlmProvider,
) -> Result<ParamDelta, LlmError> {
    let summary = format!(
        "semantic {} / 10 ({}); size {} / 10 ({}); total {}",
        mm(entry.semantic_score),
        entry.semantic_justification,
        mm(entry.size_score),
        entry.size_justification,
        mm(entry.total_score)
    );
    let bindings = BTreeMap::from([
        ("task", task.to_string()),
        ("params_json", to_canonical_json(params)),
        ("description", description.to_string()),
        ("score_summary", summary),
    ]);
    let req = settings.request(Purpose::Refine, render_prompt(template("refine")?, &bindings)?, scope);
    let reply = request_json(provider, &req, SchemaId::Delta)?;
    serde_json::from_value(reply.value).map_err(|e| LlmError::Schema {
        path: String::new(),
        message: e.to_string(),
    })
}
