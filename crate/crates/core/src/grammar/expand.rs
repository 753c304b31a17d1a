//! One-pass expansion of a hand grammar into a component graph.
//!
//! Every nonterminal is expanded exactly once; later references reuse the
//! same subgraph. A rule whose right-hand side contains a palm terminal is a
//! hub: the palm connects to the entry node of each other element (through the
//! finger's `via` mount when one is declared). Any other rule is a chain:
//! adjacent elements are joined exit-to-entry with the stated connector.

use std::collections::{BTreeMap, HashMap};

use super::parse::ATTR_VIA;
use super::GrammarError;
use crate::model::{
    Connector, Directedness, GraphEdge, GraphNode, HandGrammar, HandGraph, NodeKind,
    ProductionRule,
};

/// Runaway guard on expanded graph size.
pub const MAX_EXPANDED_NODES: usize = 10_000;

#[derive(Debug, Clone, Copy)]
struct Span {
    entry: usize,
    exit: usize,
}

struct Expander<'g> {
    grammar: &'g HandGrammar,
    nodes: Vec<GraphNode>,
    edges: Vec<(usize, usize, Directedness)>,
    done: HashMap<&'g str, Span>,
    stack: Vec<&'g str>,
    instances: BTreeMap<String, usize>,
}

pub fn expand(grammar: &HandGrammar) -> Result<HandGraph, GrammarError> {
    let mut ex = Expander {
        grammar,
        nodes: Vec::new(),
        edges: Vec::new(),
        done: HashMap::new(),
        stack: Vec::new(),
        instances: BTreeMap::new(),
    };
    ex.symbol(&grammar.start_symbol)?;
    let Expander { nodes, edges, .. } = ex;
    let edges = edges
        .into_iter()
        .map(|(a, b, directedness)| GraphEdge {
            a: nodes[a].id.clone(),
            b: nodes[b].id.clone(),
            directedness,
        })
        .collect();
    // Palm count is deliberately not enforced here: the validator reports it.
    Ok(HandGraph { nodes, edges })
}

fn directedness(c: Connector) -> Directedness {
    match c {
        Connector::Sequential => Directedness::Sequential,
        // `None` only appears on the last element and never produces an edge
        // on its own; callers pick the connector of the preceding element.
        Connector::Bidirectional | Connector::None => Directedness::Bidirectional,
    }
}

impl<'g> Expander<'g> {
    fn symbol(&mut self, sym: &'g str) -> Result<Span, GrammarError> {
        if self.grammar.terminals.contains(sym) {
            let n = self.terminal(sym)?;
            return Ok(Span { entry: n, exit: n });
        }
        if let Some(span) = self.done.get(sym) {
            return Ok(*span);
        }
        if let Some(pos) = self.stack.iter().position(|s| *s == sym) {
            let mut cycle: Vec<String> = self.stack[pos..].iter().map(|s| s.to_string()).collect();
            cycle.push(sym.to_string());
            return Err(GrammarError::Cycle(cycle));
        }
        let rule = self
            .grammar
            .rule_for(sym)
            .ok_or_else(|| GrammarError::UndefinedSymbol(sym.to_string()))?;
        self.stack.push(sym);
        let span = self.rule(rule)?;
        self.stack.pop();
        self.done.insert(sym, span);
        Ok(span)
    }

    fn terminal(&mut self, sym: &str) -> Result<usize, GrammarError> {
        if self.nodes.len() >= MAX_EXPANDED_NODES {
            return Err(GrammarError::TooLarge(MAX_EXPANDED_NODES));
        }
        let kind = NodeKind::from_symbol(sym).ok_or_else(|| GrammarError::BadTerminal(sym.to_string()))?;
        let count = self.instances.entry(sym.to_string()).or_insert(0);
        *count += 1;
        let id = if *count == 1 {
            sym.to_string()
        } else {
            format!("{sym}#{count}")
        };
        self.nodes.push(GraphNode {
            id,
            kind,
            label: sym.to_string(),
        });
        Ok(self.nodes.len() - 1)
    }

    fn is_palm(&self, sym: &str) -> bool {
        self.grammar.terminals.contains(sym) && NodeKind::from_symbol(sym) == Some(NodeKind::Palm)
    }

    fn rule(&mut self, rule: &'g ProductionRule) -> Result<Span, GrammarError> {
        let palm_pos = rule.rhs.iter().position(|el| self.is_palm(&el.symbol));
        match palm_pos {
            Some(p) if rule.rhs.len() > 1 => self.hub(rule, p),
            _ => self.chain(rule),
        }
    }

    fn hub(&mut self, rule: &'g ProductionRule, palm_pos: usize) -> Result<Span, GrammarError> {
        let palm = self.symbol(&rule.rhs[palm_pos].symbol)?;
        for (i, el) in rule.rhs.iter().enumerate() {
            if i == palm_pos {
                continue;
            }
            // The connector written between this element and its neighbour on the palm side.
            let conn = if i > palm_pos {
                rule.rhs[i - 1].connector
            } else {
                el.connector
            };
            let dir = directedness(conn);
            let via = self.grammar.attribute(&el.symbol, ATTR_VIA);
            let mut from = palm.exit;
            if let Some(via) = via {
                let via = self
                    .grammar
                    .terminals
                    .get(via)
                    .ok_or_else(|| GrammarError::UndefinedSymbol(via.to_string()))?;
                let m = self.terminal(via)?;
                self.edges.push((from, m, dir));
                from = m;
            }
            let sub = self.symbol(&el.symbol)?;
            self.edges.push((from, sub.entry, dir));
        }
        Ok(palm)
    }

    fn chain(&mut self, rule: &'g ProductionRule) -> Result<Span, GrammarError> {
        let mut first: Option<Span> = None;
        let mut prev: Option<(Span, Connector)> = None;
        for el in &rule.rhs {
            let span = self.symbol(&el.symbol)?;
            if let Some((p, conn)) = prev {
                self.edges.push((p.exit, span.entry, directedness(conn)));
            }
            first.get_or_insert(span);
            prev = Some((span, el.connector));
        }
        let first = first.expect("rule right-hand sides are non-empty");
        let last = prev.expect("rule right-hand sides are non-empty").0;
        Ok(Span {
            entry: first.entry,
            exit: last.exit,
        })
    }
}
