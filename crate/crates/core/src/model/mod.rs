//! Shared domain types for the hand-design pipeline.
//!
//! Every type here is plain data: construction, invariant checks and
//! (de)serialization only. Invariants are enforced by [`Validate`], which the
//! artifact reader runs on every value it produces.

mod canonical;

pub use canonical::{
    deserialize_artifact, format_float, from_canonical_json, to_canonical_json, to_canonical_value,
    Artifact, ArtifactError, ArtifactKind, ArtifactType,
};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// A violated type invariant, located by a JSON-style path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvariantViolation {
    pub path: String,
    pub message: String,
}

impl InvariantViolation {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for InvariantViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for InvariantViolation {}

pub trait Validate {
    fn validate(&self) -> Result<(), InvariantViolation>;
}

fn check_finite(path: &str, value: f64) -> Result<(), InvariantViolation> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(InvariantViolation::new(path, "must be a finite number"))
    }
}

fn check_positive(path: &str, value: f64) -> Result<(), InvariantViolation> {
    check_finite(path, value)?;
    if value > 0.0 {
        Ok(())
    } else {
        Err(InvariantViolation::new(path, format!("must be > 0, got {value}")))
    }
}

fn check_unit(path: &str, value: f64, lo: f64, hi: f64) -> Result<(), InvariantViolation> {
    check_finite(path, value)?;
    if (lo..=hi).contains(&value) {
        Ok(())
    } else {
        Err(InvariantViolation::new(
            path,
            format!("must lie in [{lo}, {hi}], got {value}"),
        ))
    }
}

// ---------------------------------------------------------------------------
// Semantic schema

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Low,
    Medium,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraspType {
    ForceBased,
    FineManipulation,
    ToolBased,
}

impl GraspType {
    pub const ALL: [GraspType; 3] = [
        GraspType::ForceBased,
        GraspType::FineManipulation,
        GraspType::ToolBased,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GraspType::ForceBased => "force_based",
            GraspType::FineManipulation => "fine_manipulation",
            GraspType::ToolBased => "tool_based",
        }
    }
}

impl fmt::Display for GraspType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for GraspType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GraspType::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| format!("unknown grasp type `{s}`"))
    }
}

/// Structured task analysis produced from the natural-language instruction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemanticSchema {
    pub task_goal: String,
    pub object_name: String,
    pub object_size_mm: [f64; 3],
    pub object_mass_g: f64,
    pub material: String,
    pub fragility: Level,
    pub surface_friction: Level,
    pub force_level: Level,
    pub precision_level: Level,
    pub grasp_type: GraspType,
}

impl Validate for SemanticSchema {
    fn validate(&self) -> Result<(), InvariantViolation> {
        if self.task_goal.trim().is_empty() {
            return Err(InvariantViolation::new("task_goal", "must be non-empty"));
        }
        for (i, d) in self.object_size_mm.iter().enumerate() {
            check_positive(&format!("object_size_mm[{i}]"), *d)?;
        }
        check_finite("object_mass_g", self.object_mass_g)?;
        if self.object_mass_g < 0.0 {
            return Err(InvariantViolation::new("object_mass_g", "must be >= 0"));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Grammar

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Connector {
    Bidirectional,
    Sequential,
    None,
}

impl Connector {
    pub fn token(self) -> &'static str {
        match self {
            Connector::Bidirectional => "<->",
            Connector::Sequential => "->",
            Connector::None => "",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhsElement {
    pub symbol: String,
    pub connector: Connector,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductionRule {
    pub lhs: String,
    pub rhs: Vec<RhsElement>,
}

impl ProductionRule {
    /// Renders the rule in arrow notation, e.g. `F1 -> J1 <-> L1 <-> J2`.
    pub fn notation(&self) -> String {
        let mut out = format!("{} ->", self.lhs);
        for el in &self.rhs {
            out.push(' ');
            out.push_str(&el.symbol);
            if el.connector != Connector::None {
                out.push(' ');
                out.push_str(el.connector.token());
            }
        }
        out
    }
}

/// Component kind encoded by a terminal symbol's leading letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Palm,
    FingerRoot,
    Joint,
    Link,
    Mount,
    Tendon,
    Connector,
}

impl NodeKind {
    pub fn from_symbol(symbol: &str) -> Option<NodeKind> {
        match symbol.chars().next()? {
            'P' => Some(NodeKind::Palm),
            'F' => Some(NodeKind::FingerRoot),
            'J' => Some(NodeKind::Joint),
            'L' => Some(NodeKind::Link),
            'T' => Some(NodeKind::Tendon),
            'M' => Some(NodeKind::Mount),
            'C' => Some(NodeKind::Connector),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Palm => "palm",
            NodeKind::FingerRoot => "finger_root",
            NodeKind::Joint => "joint",
            NodeKind::Link => "link",
            NodeKind::Mount => "mount",
            NodeKind::Tendon => "tendon",
            NodeKind::Connector => "connector",
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The (N, T, A, R, S) hand grammar plus layout hints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandGrammar {
    pub nonterminals: BTreeSet<String>,
    pub terminals: BTreeSet<String>,
    pub attributes: BTreeMap<String, BTreeMap<String, String>>,
    pub rules: Vec<ProductionRule>,
    pub start_symbol: String,
    pub layout_hints: BTreeMap<String, String>,
}

impl HandGrammar {
    pub fn new(
        nonterminals: BTreeSet<String>,
        terminals: BTreeSet<String>,
        attributes: BTreeMap<String, BTreeMap<String, String>>,
        rules: Vec<ProductionRule>,
        start_symbol: String,
        layout_hints: BTreeMap<String, String>,
    ) -> Result<Self, InvariantViolation> {
        let g = Self {
            nonterminals,
            terminals,
            attributes,
            rules,
            start_symbol,
            layout_hints,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn rule_for(&self, lhs: &str) -> Option<&ProductionRule> {
        self.rules.iter().find(|r| r.lhs == lhs)
    }

    pub fn attribute(&self, symbol: &str, key: &str) -> Option<&str> {
        self.attributes
            .get(symbol)
            .and_then(|a| a.get(key))
            .map(String::as_str)
    }
}

impl Validate for HandGrammar {
    fn validate(&self) -> Result<(), InvariantViolation> {
        if !self.nonterminals.contains(&self.start_symbol) {
            return Err(InvariantViolation::new(
                "start_symbol",
                format!(
                    "start symbol `{}` is not a nonterminal",
                    self.start_symbol
                ),
            ));
        }
        if let Some(both) = self.nonterminals.intersection(&self.terminals).next() {
            return Err(InvariantViolation::new(
                "terminals",
                format!("symbol `{both}` is both terminal and nonterminal"),
            ));
        }
        for t in &self.terminals {
            if NodeKind::from_symbol(t).is_none() {
                return Err(InvariantViolation::new(
                    "terminals",
                    format!("terminal `{t}` must start with one of P, F, J, L, T, M, C"),
                ));
            }
        }
        let start_rules = self
            .rules
            .iter()
            .filter(|r| r.lhs == self.start_symbol)
            .count();
        if start_rules != 1 {
            return Err(InvariantViolation::new(
                "rules",
                format!(
                    "exactly one rule must expand start symbol `{}`, found {start_rules}",
                    self.start_symbol
                ),
            ));
        }
        for (i, rule) in self.rules.iter().enumerate() {
            if !self.nonterminals.contains(&rule.lhs) {
                return Err(InvariantViolation::new(
                    format!("rules[{i}].lhs"),
                    format!("`{}` is not a nonterminal", rule.lhs),
                ));
            }
            if rule.rhs.is_empty() {
                return Err(InvariantViolation::new(
                    format!("rules[{i}].rhs"),
                    "right-hand side must be non-empty",
                ));
            }
            let last = rule.rhs.len() - 1;
            for (j, el) in rule.rhs.iter().enumerate() {
                let path = format!("rules[{i}].rhs[{j}]");
                if !self.nonterminals.contains(&el.symbol) && !self.terminals.contains(&el.symbol)
                {
                    return Err(InvariantViolation::new(
                        format!("{path}.symbol"),
                        format!("symbol `{}` is not defined", el.symbol),
                    ));
                }
                match (j == last, el.connector) {
                    (true, Connector::None) | (false, Connector::Bidirectional | Connector::Sequential) => {}
                    (true, _) => {
                        return Err(InvariantViolation::new(
                            format!("{path}.connector"),
                            "last element must carry connector `none`",
                        ))
                    }
                    (false, Connector::None) => {
                        return Err(InvariantViolation::new(
                            format!("{path}.connector"),
                            "only the last element may carry connector `none`",
                        ))
                    }
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Graph

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Directedness {
    Bidirectional,
    Sequential,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphNode {
    pub id: String,
    pub kind: NodeKind,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphEdge {
    pub a: String,
    pub b: String,
    pub directedness: Directedness,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

impl HandGraph {
    pub fn new(nodes: Vec<GraphNode>, edges: Vec<GraphEdge>) -> Result<Self, InvariantViolation> {
        let g = Self { nodes, edges };
        g.validate()?;
        Ok(g)
    }

    pub fn node(&self, id: &str) -> Option<&GraphNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn count_kind(&self, kind: NodeKind) -> usize {
        self.nodes.iter().filter(|n| n.kind == kind).count()
    }
}

impl Validate for HandGraph {
    fn validate(&self) -> Result<(), InvariantViolation> {
        let mut seen = BTreeSet::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if !seen.insert(n.id.as_str()) {
                return Err(InvariantViolation::new(
                    format!("nodes[{i}].id"),
                    format!("duplicate node id `{}`", n.id),
                ));
            }
        }
        for (i, e) in self.edges.iter().enumerate() {
            for (end, id) in [("a", &e.a), ("b", &e.b)] {
                if !seen.contains(id.as_str()) {
                    return Err(InvariantViolation::new(
                        format!("edges[{i}].{end}"),
                        format!("unknown node `{id}`"),
                    ));
                }
            }
        }
        let palms = self.count_kind(NodeKind::Palm);
        if palms != 1 {
            return Err(InvariantViolation::new(
                "nodes",
                format!("exactly one palm node required, found {palms}"),
            ));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Parameters

/// Maximum finger count representable by [`OphParams`].
pub const MAX_FINGERS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FingerParams {
    pub mount_angle_deg: f64,
    /// Signed offset along the palm width axis, measured from the palm centre line.
    pub mount_translation_mm: f64,
    pub metacarpal_length_mm: f64,
    pub scale: f64,
}

impl FingerParams {
    fn validate_at(&self, path: &str) -> Result<(), InvariantViolation> {
        check_finite(&format!("{path}.mount_angle_deg"), self.mount_angle_deg)?;
        check_finite(&format!("{path}.mount_translation_mm"), self.mount_translation_mm)?;
        check_positive(&format!("{path}.metacarpal_length_mm"), self.metacarpal_length_mm)?;
        check_positive(&format!("{path}.scale"), self.scale)
    }
}

/// Reduced parameter set: four values per finger plus palm width and curvature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OphParams {
    pub fingers: Vec<FingerParams>,
    pub palm_width_mm: f64,
    /// Normalized palm curvature in [0, 1].
    pub palm_curvature: f64,
}

impl OphParams {
    pub fn new(
        fingers: Vec<FingerParams>,
        palm_width_mm: f64,
        palm_curvature: f64,
    ) -> Result<Self, InvariantViolation> {
        let p = Self {
            fingers,
            palm_width_mm,
            palm_curvature,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn finger_count(&self) -> usize {
        self.fingers.len()
    }
}

impl Validate for OphParams {
    fn validate(&self) -> Result<(), InvariantViolation> {
        let n = self.fingers.len();
        if !(1..=MAX_FINGERS).contains(&n) {
            return Err(InvariantViolation::new(
                "fingers",
                format!("finger count must lie in [1, {MAX_FINGERS}], got {n}"),
            ));
        }
        for (i, f) in self.fingers.iter().enumerate() {
            f.validate_at(&format!("fingers[{i}]"))?;
        }
        check_positive("palm_width_mm", self.palm_width_mm)?;
        check_unit("palm_curvature", self.palm_curvature, 0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DerivedFingerGeometry {
    pub metacarpal_length_mm: f64,
    /// Proximal, intermediate, distal.
    pub segment_lengths_mm: [f64; 3],
    pub joint_diameters_mm: [f64; 3],
    pub link_widths_mm: [f64; 3],
    pub total_length_mm: f64,
}

impl DerivedFingerGeometry {
    pub fn phalanx_sum_mm(&self) -> f64 {
        self.segment_lengths_mm.iter().sum()
    }

    pub fn slenderness(&self) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (k, s) in out.iter_mut().enumerate() {
            *s = self.segment_lengths_mm[k] / self.link_widths_mm[k];
        }
        out
    }
}

impl Validate for DerivedFingerGeometry {
    fn validate(&self) -> Result<(), InvariantViolation> {
        for (name, values) in [
            ("segment_lengths_mm", &self.segment_lengths_mm),
            ("joint_diameters_mm", &self.joint_diameters_mm),
            ("link_widths_mm", &self.link_widths_mm),
        ] {
            for (k, v) in values.iter().enumerate() {
                check_positive(&format!("{name}[{k}]"), *v)?;
            }
        }
        check_positive("metacarpal_length_mm", self.metacarpal_length_mm)?;
        check_positive("total_length_mm", self.total_length_mm)?;
        let expected = self.metacarpal_length_mm + self.phalanx_sum_mm();
        // Stored values carry 6 significant digits, so allow that much slack.
        if (self.total_length_mm - expected).abs() > 1e-5 * expected {
            return Err(InvariantViolation::new(
                "total_length_mm",
                format!("must equal metacarpal + phalanges = {expected}"),
            ));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Validation report

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Info,
    Warning,
    Critical,
}

impl Severity {
    pub fn weight(self) -> f64 {
        match self {
            Severity::Info => 1.0,
            Severity::Warning => 2.0,
            Severity::Critical => 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Finding {
    pub check_id: String,
    pub severity: Severity,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
    pub rule_score: f64,
    pub llm_score: f64,
    pub combined_score: f64,
    pub threshold: f64,
    pub accepted: bool,
    #[serde(default)]
    pub llm_issues: Vec<String>,
    #[serde(default)]
    pub llm_suggestions: Vec<String>,
}

impl ValidationReport {
    pub fn has_critical(&self) -> bool {
        self.findings
            .iter()
            .any(|f| f.severity == Severity::Critical)
    }
}

impl Validate for ValidationReport {
    fn validate(&self) -> Result<(), InvariantViolation> {
        check_unit("rule_score", self.rule_score, 0.0, 1.0)?;
        check_unit("llm_score", self.llm_score, 0.0, 1.0)?;
        check_unit("combined_score", self.combined_score, 0.0, 1.0)?;
        check_unit("threshold", self.threshold, 0.0, 1.0)?;
        if self.accepted && (self.combined_score < self.threshold || self.has_critical()) {
            return Err(InvariantViolation::new(
                "accepted",
                "accepted requires combined_score >= threshold and no critical finding",
            ));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Candidates

/// 1-based variant index, rendered as `v1`, `v2`, ...
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VariantId(pub u32);

impl fmt::Display for VariantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

impl std::str::FromStr for VariantId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.strip_prefix('v')
            .and_then(|n| n.parse::<u32>().ok())
            .filter(|n| *n >= 1)
            .map(VariantId)
            .ok_or_else(|| format!("invalid variant id `{s}`"))
    }
}

impl Serialize for VariantId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for VariantId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterResult {
    pub passed: bool,
    /// Violated check ids, sorted and deduplicated.
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateStatus {
    Survived,
    RejectedValidation,
    RejectedParams,
    RejectedFilter,
}

/// Default weights of the semantic and size sub-scores in a candidate's total.
pub const DEFAULT_SEMANTIC_WEIGHT: f64 = 0.6;
pub const DEFAULT_SIZE_WEIGHT: f64 = 0.4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignCandidate {
    pub variant_id: VariantId,
    pub status: CandidateStatus,
    pub design_cue: String,
    pub schema: SemanticSchema,
    /// Last grammar seen for this variant; absent when no reply parsed.
    pub grammar: Option<HandGrammar>,
    pub graph: Option<HandGraph>,
    pub params: Option<OphParams>,
    pub geometry: Option<Vec<DerivedFingerGeometry>>,
    pub filter_result: Option<FilterResult>,
    pub description: Option<String>,
    pub semantic_score: Option<f64>,
    pub size_score: Option<f64>,
    pub total_score: Option<f64>,
    pub score_weights: (f64, f64),
    pub scad_path: Option<String>,
    pub flags: Vec<String>,
    /// Pipeline stages completed for this candidate, in execution order.
    pub stages: Vec<String>,
}

impl Validate for DesignCandidate {
    fn validate(&self) -> Result<(), InvariantViolation> {
        self.schema.validate().map_err(|e| prefix("schema", e))?;
        if let Some(g) = &self.grammar {
            g.validate().map_err(|e| prefix("grammar", e))?;
        }
        if let Some(g) = &self.graph {
            g.validate().map_err(|e| prefix("graph", e))?;
        }
        if let Some(p) = &self.params {
            p.validate().map_err(|e| prefix("params", e))?;
        }
        if let (Some(p), Some(geo)) = (&self.params, &self.geometry) {
            if geo.len() != p.finger_count() {
                return Err(InvariantViolation::new(
                    "geometry",
                    "one geometry entry per finger required",
                ));
            }
            for (i, g) in geo.iter().enumerate() {
                g.validate().map_err(|e| prefix(&format!("geometry[{i}]"), e))?;
            }
        }
        for (name, s) in [
            ("semantic_score", self.semantic_score),
            ("size_score", self.size_score),
            ("total_score", self.total_score),
        ] {
            if let Some(v) = s {
                check_unit(name, v, 0.0, 10.0)?;
            }
        }
        let (w_sem, w_size) = self.score_weights;
        if (w_sem + w_size - 1.0).abs() > 1e-9 || w_sem < 0.0 || w_size < 0.0 {
            return Err(InvariantViolation::new(
                "score_weights",
                "weights must be non-negative and sum to 1",
            ));
        }
        if let (Some(sem), Some(size)) = (self.semantic_score, self.size_score) {
            let expected = w_sem * sem + w_size * size;
            match self.total_score {
                Some(t) if (t - expected).abs() <= 1e-9 => {}
                _ => {
                    return Err(InvariantViolation::new(
                        "total_score",
                        format!("must equal {w_sem}*semantic + {w_size}*size = {expected}"),
                    ))
                }
            }
        }
        Ok(())
    }
}

fn prefix(parent: &str, mut v: InvariantViolation) -> InvariantViolation {
    v.path = if v.path.is_empty() {
        parent.to_string()
    } else {
        format!("{parent}.{}", v.path)
    };
    v
}

/// Filter outcome for one generated parameter set, written by every generation
/// mode (full pipeline, zero-shot, random) so batch MVR can be recomputed from disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterRecord {
    pub variant_id: VariantId,
    pub grasp_type_label: Option<GraspType>,
    pub params: Option<OphParams>,
    pub geometry: Option<Vec<DerivedFingerGeometry>>,
    pub filter_result: FilterResult,
}

impl Validate for FilterRecord {
    fn validate(&self) -> Result<(), InvariantViolation> {
        if let Some(p) = &self.params {
            p.validate().map_err(|e| prefix("params", e))?;
        }
        if self.filter_result.passed && !self.filter_result.violations.is_empty() {
            return Err(InvariantViolation::new(
                "filter_result",
                "a passing result cannot list violations",
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn finger(scale: f64) -> FingerParams {
        FingerParams {
            mount_angle_deg: 0.0,
            mount_translation_mm: 0.0,
            metacarpal_length_mm: 20.0,
            scale,
        }
    }

    #[test]
    fn params_reject_nonpositive_scale() {
        let err = OphParams::new(vec![finger(-1.0)], 60.0, 0.0).unwrap_err();
        assert_eq!(err.path, "fingers[0].scale");
        assert!(OphParams::new(vec![finger(0.0)], 60.0, 0.0).is_err());
    }

    #[test]
    fn params_finger_count_bounds() {
        assert!(OphParams::new(vec![], 60.0, 0.0).is_err());
        assert!(OphParams::new(vec![finger(1.0); 9], 60.0, 0.0).is_err());
        assert!(OphParams::new(vec![finger(1.0); 8], 60.0, 0.0).is_ok());
    }

    #[test]
    fn params_curvature_range() {
        let err = OphParams::new(vec![finger(1.0)], 60.0, 1.5).unwrap_err();
        assert_eq!(err.path, "palm_curvature");
    }

    #[test]
    fn graph_needs_single_palm_and_known_endpoints() {
        let palm = GraphNode {
            id: "P".into(),
            kind: NodeKind::Palm,
            label: "P".into(),
        };
        assert!(HandGraph::new(vec![palm.clone()], vec![]).is_ok());
        assert!(HandGraph::new(vec![], vec![]).is_err());
        let edge = GraphEdge {
            a: "P".into(),
            b: "J1".into(),
            directedness: Directedness::Bidirectional,
        };
        let err = HandGraph::new(vec![palm.clone()], vec![edge]).unwrap_err();
        assert_eq!(err.path, "edges[0].b");
        let err = HandGraph::new(vec![palm.clone(), palm], vec![]).unwrap_err();
        assert_eq!(err.path, "nodes[1].id");
    }

    #[test]
    fn schema_requires_positive_dimensions() {
        let s = SemanticSchema {
            task_goal: "pick up an egg".into(),
            object_name: "egg".into(),
            object_size_mm: [45.0, 45.0, 0.0],
            object_mass_g: 60.0,
            material: "shell".into(),
            fragility: Level::High,
            surface_friction: Level::Low,
            force_level: Level::Low,
            precision_level: Level::High,
            grasp_type: GraspType::FineManipulation,
        };
        assert_eq!(s.validate().unwrap_err().path, "object_size_mm[2]");
        let mut blank = s.clone();
        blank.object_size_mm = [45.0; 3];
        blank.task_goal = "  ".into();
        assert_eq!(blank.validate().unwrap_err().path, "task_goal");
    }

    #[test]
    fn geometry_total_must_match_sum() {
        let g = DerivedFingerGeometry {
            metacarpal_length_mm: 40.0,
            segment_lengths_mm: [30.0, 20.0, 15.0],
            joint_diameters_mm: [12.0, 11.0, 10.0],
            link_widths_mm: [10.0, 9.0, 8.0],
            total_length_mm: 104.0,
        };
        assert_eq!(g.validate().unwrap_err().path, "total_length_mm");
    }

    #[test]
    fn report_acceptance_invariant() {
        let r = ValidationReport {
            findings: vec![Finding {
                check_id: "R1".into(),
                severity: Severity::Critical,
                message: "two palms".into(),
            }],
            rule_score: 1.0,
            llm_score: 1.0,
            combined_score: 1.0,
            threshold: 0.7,
            accepted: true,
            llm_issues: vec![],
            llm_suggestions: vec![],
        };
        assert_eq!(r.validate().unwrap_err().path, "accepted");
    }

    #[test]
    fn variant_id_round_trip() {
        let v: VariantId = "v12".parse().unwrap();
        assert_eq!(v, VariantId(12));
        assert_eq!(v.to_string(), "v12");
        assert!("v0".parse::<VariantId>().is_err());
        assert!("12".parse::<VariantId>().is_err());
        assert!(VariantId(2) < VariantId(10));
    }
}
