//! Programmatic rule checks. Check ids are stable: they appear in revision
//! prompts and persisted reports.

use serde_json::Value;

use crate::grammar::{expand, parse_grammar_value, Topology};
use crate::model::{Finding, HandGrammar, HandGraph, Severity, MAX_FINGERS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckSpec {
    pub id: &'static str,
    pub description: &'static str,
    pub severity: Severity,
}

pub const CATALOG: [CheckSpec; 8] = [
    CheckSpec {
        id: "R0",
        description: "grammar parses and expands into a graph",
        severity: Severity::Critical,
    },
    CheckSpec {
        id: "R1",
        description: "exactly one palm node",
        severity: Severity::Critical,
    },
    CheckSpec {
        id: "R2",
        description: "every finger attaches to the palm once, through at most one mount or connector",
        severity: Severity::Critical,
    },
    CheckSpec {
        id: "R3",
        description: "every node is reachable from the palm",
        severity: Severity::Critical,
    },
    CheckSpec {
        id: "R4",
        description: "finger chains alternate joint and link and end in a joint",
        severity: Severity::Warning,
    },
    CheckSpec {
        id: "R5",
        description: "finger count between 1 and 8",
        severity: Severity::Critical,
    },
    CheckSpec {
        id: "R6",
        description: "no duplicate node ids or reused component symbols",
        severity: Severity::Critical,
    },
    CheckSpec {
        id: "R7",
        description: "numeric layout hints parse and are positive",
        severity: Severity::Warning,
    },
];

fn spec(id: &str) -> &'static CheckSpec {
    CATALOG.iter().find(|c| c.id == id).expect("check id is in the catalog")
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleCheckOutcome {
    /// One finding per failed check, in catalog order.
    pub findings: Vec<Finding>,
    pub rule_score: f64,
}

struct Tally {
    findings: Vec<Finding>,
    passed_weight: f64,
}

impl Tally {
    fn new() -> Self {
        Tally {
            findings: Vec::new(),
            passed_weight: 0.0,
        }
    }

    fn record(&mut self, id: &str, problems: Vec<String>) {
        let s = spec(id);
        if problems.is_empty() {
            self.passed_weight += s.severity.weight();
        } else {
            self.findings.push(Finding {
                check_id: s.id.to_string(),
                severity: s.severity,
                message: problems.join("; "),
            });
        }
    }

    fn finish(mut self) -> RuleCheckOutcome {
        let total: f64 = CATALOG.iter().map(|c| c.severity.weight()).sum();
        let order = |f: &Finding| CATALOG.iter().position(|c| c.id == f.check_id);
        self.findings.sort_by_key(order);
        RuleCheckOutcome {
            findings: self.findings,
            rule_score: self.passed_weight / total,
        }
    }
}

fn layout_hint_problems(grammar: &HandGrammar) -> Vec<String> {
    grammar
        .layout_hints
        .iter()
        .filter_map(|(k, v)| {
            let looks_numeric = v
                .trim()
                .starts_with(|c: char| c.is_ascii_digit() || c == '-' || c == '+' || c == '.');
            if !looks_numeric {
                return None;
            }
            match v.trim().parse::<f64>() {
                Ok(x) if x.is_finite() && x > 0.0 => None,
                Ok(x) => Some(format!("layout hint `{k}` must be positive, got {x}")),
                Err(_) => Some(format!("layout hint `{k}` = `{v}` is not a valid number")),
            }
        })
        .collect()
}

fn graph_checks(graph: &HandGraph, tally: &mut Tally) {
    let topo = Topology::of(graph);

    let palms = topo.palms.len();
    tally.record(
        "R1",
        if palms == 1 {
            vec![]
        } else {
            vec![format!("expected exactly one palm node, found {palms}")]
        },
    );

    let mut r2 = Vec::new();
    for f in &topo.fingers {
        let first = &graph.nodes[f.nodes[0]].id;
        if f.palm_edges != 1 {
            r2.push(format!("finger starting at `{first}` has {} palm connections", f.palm_edges));
        }
        if f.mounts_before_chain > 1 {
            r2.push(format!(
                "finger starting at `{first}` attaches through {} mounts/connectors",
                f.mounts_before_chain
            ));
        }
    }
    tally.record("R2", r2);

    let r3 = if graph.nodes.is_empty() {
        vec!["graph has no nodes".to_string()]
    } else if topo.unreachable.is_empty() {
        vec![]
    } else {
        let ids: Vec<&str> = topo.unreachable.iter().map(|&i| graph.nodes[i].id.as_str()).collect();
        vec![format!("nodes not connected to the palm: {}", ids.join(", "))]
    };
    tally.record("R3", r3);

    let r4 = topo
        .fingers
        .iter()
        .filter(|f| !f.alternates_and_ends_in_joint())
        .map(|f| {
            let first = &graph.nodes[f.nodes[0]].id;
            match &f.chain {
                None => format!("finger starting at `{first}` branches or has no joint/link chain"),
                Some(chain) => format!(
                    "finger starting at `{first}` has chain {} (expected alternating joint/link ending in a joint)",
                    chain.iter().map(|k| k.as_str()).collect::<Vec<_>>().join("-")
                ),
            }
        })
        .collect();
    tally.record("R4", r4);

    let n = topo.finger_count();
    tally.record(
        "R5",
        if (1..=MAX_FINGERS).contains(&n) {
            vec![]
        } else {
            vec![format!("finger count {n} outside [1, {MAX_FINGERS}]")]
        },
    );

    let mut r6 = Vec::new();
    let mut ids = std::collections::BTreeSet::new();
    let mut labels = std::collections::BTreeMap::<&str, usize>::new();
    for node in &graph.nodes {
        if !ids.insert(node.id.as_str()) {
            r6.push(format!("duplicate node id `{}`", node.id));
        }
        *labels.entry(node.label.as_str()).or_insert(0) += 1;
    }
    for (label, count) in labels {
        if count > 1 {
            r6.push(format!("component `{label}` is used {count} times"));
        }
    }
    tally.record("R6", r6);
}

/// Runs R1 to R7 on an expanded graph (R0 passes: the graph exists).
pub fn run_rule_checks(graph: &HandGraph, grammar: &HandGrammar) -> RuleCheckOutcome {
    let mut tally = Tally::new();
    tally.record("R0", vec![]);
    graph_checks(graph, &mut tally);
    tally.record("R7", layout_hint_problems(grammar));
    tally.finish()
}

/// Parses and expands a grammar document, then runs the catalog. When
/// parsing or expansion fails, R0 is reported and every graph check counts
/// as failed without a finding of its own.
pub fn check_grammar_document(
    doc: &Value,
) -> (Option<HandGrammar>, Option<HandGraph>, RuleCheckOutcome) {
    let grammar = match parse_grammar_value(doc) {
        Ok(g) => g,
        Err(e) => {
            let mut tally = Tally::new();
            tally.record("R0", vec![format!("grammar does not parse: {e}")]);
            return (None, None, tally.finish());
        }
    };
    match expand(&grammar) {
        Ok(graph) => {
            let outcome = run_rule_checks(&graph, &grammar);
            (Some(grammar), Some(graph), outcome)
        }
        Err(e) => {
            let mut tally = Tally::new();
            tally.record("R0", vec![format!("grammar does not expand: {e}")]);
            tally.record("R7", layout_hint_problems(&grammar));
            (Some(grammar), None, tally.finish())
        }
    }
}
