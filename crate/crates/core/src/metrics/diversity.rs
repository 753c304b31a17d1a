//! Pairwise design variation at three levels (rule text, graph structure,
//! numeric geometry) and their weighted task-level combination.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{normalize, weights_sum_to_one};
use crate::grammar::{graph_distance, multiset_jaccard, signature};
use crate::model::{Connector, HandGrammar, HandGraph, NodeKind, OphParams};
use crate::params::ParamNorms;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiversityWeights {
    pub text: f64,
    pub graph: f64,
    pub geometry: f64,
}

impl Default for DiversityWeights {
    fn default() -> Self {
        DiversityWeights {
            text: 0.35,
            graph: 0.40,
            geometry: 0.25,
        }
    }
}

impl DiversityWeights {
    pub fn check(&self) -> Result<(), String> {
        weights_sum_to_one("diversity weights", &[self.text, self.graph, self.geometry])
    }
}

/// Token multiset of a grammar's production rules: one `lhs:` token per rule,
/// one kind-prefixed token per right-hand symbol and one token per connector.
pub fn rule_tokens(g: &HandGrammar) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    let mut add = |t: String| *out.entry(t).or_insert(0) += 1;
    for rule in &g.rules {
        add(format!("lhs:{}", rule.lhs));
        for el in &rule.rhs {
            let kind = if g.nonterminals.contains(&el.symbol) {
                "nonterminal"
            } else {
                NodeKind::from_symbol(&el.symbol).map_or("symbol", NodeKind::as_str)
            };
            add(format!("{kind}:{}", el.symbol));
            if el.connector != Connector::None {
                add(format!("conn:{}", el.connector.token()));
            }
        }
    }
    out
}

/// 1 - multiset Jaccard similarity of the rule tokens.
pub fn diversity_text(a: &HandGrammar, b: &HandGrammar) -> f64 {
    (1.0 - multiset_jaccard(&rule_tokens(a), &rule_tokens(b))).clamp(0.0, 1.0)
}

fn finger_vector(p: &OphParams, i: usize, n: &ParamNorms) -> [f64; 4] {
    let f = &p.fingers[i];
    [
        normalize(f.mount_angle_deg, n.mount_angle_deg),
        normalize(f.mount_translation_mm, n.mount_translation_mm),
        normalize(f.metacarpal_length_mm, n.metacarpal_length_mm),
        normalize(f.scale, n.scale),
    ]
}

/// Mean absolute difference of normalized parameter vectors over
/// `4 * max(fingers) + 2` dimensions. Fingers are matched by index; each
/// unmatched finger adds 1 per dimension.
pub fn diversity_geometry(a: &OphParams, b: &OphParams, norms: &ParamNorms) -> f64 {
    let (na, nb) = (a.finger_count(), b.finger_count());
    let max_n = na.max(nb);
    let dims = 4 * max_n + 2;
    let mut sum = 0.0;
    for i in 0..max_n {
        if i < na && i < nb {
            let (va, vb) = (finger_vector(a, i, norms), finger_vector(b, i, norms));
            sum += va.iter().zip(&vb).map(|(x, y)| (x - y).abs()).sum::<f64>();
        } else {
            sum += 4.0;
        }
    }
    sum += (normalize(a.palm_width_mm, norms.palm_width_mm) - normalize(b.palm_width_mm, norms.palm_width_mm)).abs();
    sum += (normalize(a.palm_curvature, norms.palm_curvature) - normalize(b.palm_curvature, norms.palm_curvature)).abs();
    (sum / dims as f64).clamp(0.0, 1.0)
}

/// One design as seen by the diversity measure.
#[derive(Debug, Clone, Copy)]
pub struct DiversityItem<'a> {
    pub label: &'a str,
    pub grammar: &'a HandGrammar,
    pub graph: &'a HandGraph,
    pub params: &'a OphParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDiversity {
    pub a: String,
    pub b: String,
    pub text: f64,
    pub graph: f64,
    pub geometry: f64,
    pub combined: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskDiversity {
    pub score: f64,
    pub pairs: Vec<PairDiversity>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DiversityError {
    #[error("task diversity needs at least 2 variants, got {0}")]
    TooFewVariants(usize),
}

/// Mean weighted distance over all unordered pairs.
pub fn task_diversity(
    items: &[DiversityItem<'_>],
    weights: &DiversityWeights,
    norms: &ParamNorms,
) -> Result<TaskDiversity, DiversityError> {
    if items.len() < 2 {
        return Err(DiversityError::TooFewVariants(items.len()));
    }
    let sigs: Vec<_> = items.iter().map(|i| signature(i.graph)).collect();
    let mut pairs = Vec::new();
    for i in 0..items.len() {
        for j in i + 1..items.len() {
            let text = diversity_text(items[i].grammar, items[j].grammar);
            let graph = graph_distance(&sigs[i], &sigs[j]);
            let geometry = diversity_geometry(items[i].params, items[j].params, norms);
            let combined = weights.text * text + weights.graph * graph + weights.geometry * geometry;
            pairs.push(PairDiversity {
                a: items[i].label.to_string(),
                b: items[j].label.to_string(),
                text,
                graph,
                geometry,
                combined,
            });
        }
    }
    let score = pairs.iter().map(|p| p.combined).sum::<f64>() / pairs.len() as f64;
    Ok(TaskDiversity {
        score: score.clamp(0.0, 1.0),
        pairs,
    })
}
