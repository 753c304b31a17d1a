//! Grammar engine: parsing model-produced grammars, expanding them into
//! component graphs, and relabel-invariant graph comparison.

mod expand;
mod parse;
pub mod topology;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use expand::{expand, MAX_EXPANDED_NODES};
pub use parse::{parse_grammar, parse_grammar_value, to_document, ATTR_ATTACH_TO, ATTR_VIA};
pub use topology::{FingerChain, Topology};

use crate::model::{Directedness, HandGraph, InvariantViolation, NodeKind};

#[derive(Debug, thiserror::Error)]
pub enum GrammarError {
    #[error("grammar is not valid JSON: {0}")]
    Json(String),
    #[error("grammar document is missing the `{0}` section")]
    MissingSection(&'static str),
    #[error("malformed grammar: {0}")]
    Shape(String),
    #[error("no start rule for `{0}`")]
    NoStartRule(String),
    #[error("more than one rule expands `{0}`")]
    DuplicateRule(String),
    #[error("symbol `{0}` is referenced but never defined")]
    UndefinedSymbol(String),
    #[error("unknown connector token `{0}`")]
    UnknownConnector(String),
    #[error("terminal `{0}` must start with one of P, F, J, L, T, M, C")]
    BadTerminal(String),
    #[error("recursive rule cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("expansion exceeded {0} nodes")]
    TooLarge(usize),
    #[error("grammar invariant violated: {0}")]
    Invariant(InvariantViolation),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeLabel {
    pub a: NodeKind,
    pub b: NodeKind,
    pub directedness: Directedness,
}

/// Relabel-invariant summary of a hand graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalGraphSignature {
    pub node_kind_counts: BTreeMap<NodeKind, usize>,
    /// Sorted multiset of edge labels; bidirectional labels have their kinds ordered.
    pub edge_label_multiset: Vec<EdgeLabel>,
    /// Sorted per-finger (joint count, link count).
    pub finger_chain_lengths: Vec<(usize, usize)>,
}

impl CanonicalGraphSignature {
    pub fn node_total(&self) -> usize {
        self.node_kind_counts.values().sum()
    }

    pub fn finger_count(&self) -> usize {
        self.finger_chain_lengths.len()
    }
}

pub fn signature(graph: &HandGraph) -> CanonicalGraphSignature {
    let mut node_kind_counts = BTreeMap::new();
    for n in &graph.nodes {
        *node_kind_counts.entry(n.kind).or_insert(0) += 1;
    }
    let kind_of = |id: &str| graph.node(id).map(|n| n.kind);
    let mut edge_label_multiset: Vec<EdgeLabel> = graph
        .edges
        .iter()
        .filter_map(|e| {
            let (mut a, mut b) = (kind_of(&e.a)?, kind_of(&e.b)?);
            if e.directedness == Directedness::Bidirectional && b < a {
                std::mem::swap(&mut a, &mut b);
            }
            Some(EdgeLabel {
                a,
                b,
                directedness: e.directedness,
            })
        })
        .collect();
    edge_label_multiset.sort();
    let mut finger_chain_lengths: Vec<(usize, usize)> = Topology::of(graph)
        .fingers
        .iter()
        .map(|f| (f.joints, f.links))
        .collect();
    finger_chain_lengths.sort();
    CanonicalGraphSignature {
        node_kind_counts,
        edge_label_multiset,
        finger_chain_lengths,
    }
}

fn counts<T: Ord + Clone>(items: &[T]) -> BTreeMap<T, usize> {
    let mut m = BTreeMap::new();
    for it in items {
        *m.entry(it.clone()).or_insert(0) += 1;
    }
    m
}

/// Multiset Jaccard similarity: sum of minimum counts over sum of maximum
/// counts. Two empty multisets are identical (similarity 1).
pub fn multiset_jaccard<T: Ord + Clone>(a: &BTreeMap<T, usize>, b: &BTreeMap<T, usize>) -> f64 {
    let mut min_sum = 0usize;
    let mut max_sum = 0usize;
    for k in a.keys().chain(b.keys().filter(|k| !a.contains_key(*k))) {
        let x = a.get(k).copied().unwrap_or(0);
        let y = b.get(k).copied().unwrap_or(0);
        min_sum += x.min(y);
        max_sum += x.max(y);
    }
    if max_sum == 0 {
        1.0
    } else {
        min_sum as f64 / max_sum as f64
    }
}

/// Weighted graph-level distance in [0, 1]:
/// `0.4 * node-count term + 0.4 * (1 - edge-label Jaccard) + 0.2 * finger term`.
///
/// The node term is the per-kind count difference over the larger node total
/// (equal to `|Δnodes| / max nodes` when one graph's kind counts dominate the
/// other's); the finger term is `1 - Jaccard` over finger chain shapes (equal
/// to `|Δfingers| / max fingers` when chain shapes agree).
pub fn graph_distance(a: &CanonicalGraphSignature, b: &CanonicalGraphSignature) -> f64 {
    let max_nodes = a.node_total().max(b.node_total());
    let node_term = if max_nodes == 0 {
        0.0
    } else {
        let diff: usize = a
            .node_kind_counts
            .keys()
            .chain(b.node_kind_counts.keys())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .map(|k| {
                let x = a.node_kind_counts.get(k).copied().unwrap_or(0);
                let y = b.node_kind_counts.get(k).copied().unwrap_or(0);
                x.abs_diff(y)
            })
            .sum();
        (diff as f64 / max_nodes as f64).min(1.0)
    };
    let edge_term = 1.0 - multiset_jaccard(&counts(&a.edge_label_multiset), &counts(&b.edge_label_multiset));
    let finger_term = 1.0 - multiset_jaccard(&counts(&a.finger_chain_lengths), &counts(&b.finger_chain_lengths));
    (0.4 * node_term + 0.4 * edge_term + 0.2 * finger_term).clamp(0.0, 1.0)
}
