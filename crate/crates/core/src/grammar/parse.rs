//! Parser for the grammar document format emitted by the language model.
//!
//! ```json
//! {
//!   "start": "S",
//!   "components": {"P": {"role": "palm"}, "J1": {}, "L1": {}, ...},
//!   "structure_rules": [{"lhs": "S", "rhs": "P <-> F1 <-> F2"}, ...],
//!   "connection_rules": [{"finger": "F1", "attach_to": "P", "via": "M1"}],
//!   "layout_hints": {"finger_spacing_mm": "22"}
//! }
//! ```
//!
//! `rhs` is either arrow notation (`<->` bidirectional, `->` sequential) or an
//! array of tokens in the same notation. Full description in
//! `docs/grammar-format.md`.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{Map, Value};

use super::GrammarError;
use crate::model::{Connector, HandGrammar, NodeKind, ProductionRule, RhsElement, Validate};

const SECTIONS: [&str; 4] = [
    "components",
    "structure_rules",
    "connection_rules",
    "layout_hints",
];

/// Attribute key recording which palm a finger attaches to.
pub const ATTR_ATTACH_TO: &str = "attach_to";
/// Attribute key recording the mount/connector a finger attaches through.
pub const ATTR_VIA: &str = "via";

pub fn parse_grammar(text: &str) -> Result<HandGrammar, GrammarError> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| GrammarError::Json(e.to_string()))?;
    parse_grammar_value(&value)
}

pub fn parse_grammar_value(value: &Value) -> Result<HandGrammar, GrammarError> {
    let obj = value
        .as_object()
        .ok_or_else(|| GrammarError::Shape("grammar document must be a JSON object".into()))?;
    for section in SECTIONS {
        if !obj.contains_key(section) {
            return Err(GrammarError::MissingSection(section));
        }
    }
    for key in obj.keys() {
        if key != "start" && !SECTIONS.contains(&key.as_str()) {
            return Err(GrammarError::Shape(format!("unknown top-level field `{key}`")));
        }
    }
    let start = match obj.get("start") {
        None => "S".to_string(),
        Some(Value::String(s)) if !s.trim().is_empty() => s.trim().to_string(),
        Some(_) => return Err(GrammarError::Shape("`start` must be a non-empty string".into())),
    };

    let mut attributes = parse_components(&obj["components"])?;
    let defined: BTreeSet<String> = attributes.keys().cloned().collect();

    let rules = parse_rules(&obj["structure_rules"])?;
    if rules.is_empty() {
        return Err(GrammarError::NoStartRule(start));
    }
    let mut nonterminals = BTreeSet::new();
    for rule in &rules {
        if !nonterminals.insert(rule.lhs.clone()) {
            return Err(GrammarError::DuplicateRule(rule.lhs.clone()));
        }
    }
    if !nonterminals.contains(&start) {
        return Err(GrammarError::NoStartRule(start));
    }

    for rule in &rules {
        for el in &rule.rhs {
            if !nonterminals.contains(&el.symbol) && !defined.contains(&el.symbol) {
                return Err(GrammarError::UndefinedSymbol(el.symbol.clone()));
            }
        }
    }
    let terminals: BTreeSet<String> = defined.difference(&nonterminals).cloned().collect();
    for t in &terminals {
        if NodeKind::from_symbol(t).is_none() {
            return Err(GrammarError::BadTerminal(t.clone()));
        }
    }

    apply_connection_rules(&obj["connection_rules"], &nonterminals, &terminals, &mut attributes)?;
    let layout_hints = parse_string_map(&obj["layout_hints"], "layout_hints")?;

    let grammar = HandGrammar {
        nonterminals,
        terminals,
        attributes,
        rules,
        start_symbol: start,
        layout_hints,
    };
    grammar.validate().map_err(GrammarError::Invariant)?;
    Ok(grammar)
}

fn scalar_to_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

fn parse_string_map(v: &Value, section: &str) -> Result<BTreeMap<String, String>, GrammarError> {
    let obj = v
        .as_object()
        .ok_or_else(|| GrammarError::Shape(format!("`{section}` must be an object")))?;
    obj.iter()
        .map(|(k, v)| {
            scalar_to_string(v)
                .map(|s| (k.clone(), s))
                .ok_or_else(|| GrammarError::Shape(format!("`{section}.{k}` must be a scalar")))
        })
        .collect()
}

fn parse_components(v: &Value) -> Result<BTreeMap<String, BTreeMap<String, String>>, GrammarError> {
    let mut out = BTreeMap::new();
    match v {
        Value::Object(map) => {
            for (symbol, attrs) in map {
                let attrs = match attrs {
                    Value::Null => BTreeMap::new(),
                    Value::String(desc) => BTreeMap::from([("description".to_string(), desc.clone())]),
                    Value::Object(_) => parse_string_map(attrs, &format!("components.{symbol}"))?,
                    _ => {
                        return Err(GrammarError::Shape(format!(
                            "`components.{symbol}` must be an object, string or null"
                        )))
                    }
                };
                out.insert(check_symbol(symbol)?, attrs);
            }
        }
        // A bare list of symbol names is accepted as well.
        Value::Array(items) => {
            for item in items {
                let symbol = item
                    .as_str()
                    .ok_or_else(|| GrammarError::Shape("`components` entries must be strings".into()))?;
                out.insert(check_symbol(symbol)?, BTreeMap::new());
            }
        }
        _ => return Err(GrammarError::Shape("`components` must be an object".into())),
    }
    Ok(out)
}

fn check_symbol(s: &str) -> Result<String, GrammarError> {
    let s = s.trim();
    if s.is_empty() || !s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return Err(GrammarError::Shape(format!("invalid symbol name `{s}`")));
    }
    Ok(s.to_string())
}

fn parse_rules(v: &Value) -> Result<Vec<ProductionRule>, GrammarError> {
    let items = v
        .as_array()
        .ok_or_else(|| GrammarError::Shape("`structure_rules` must be an array".into()))?;
    items.iter().enumerate().map(|(i, r)| parse_rule(i, r)).collect()
}

fn parse_rule(index: usize, v: &Value) -> Result<ProductionRule, GrammarError> {
    let obj: &Map<String, Value> = v
        .as_object()
        .ok_or_else(|| GrammarError::Shape(format!("`structure_rules[{index}]` must be an object")))?;
    let lhs = obj
        .get("lhs")
        .and_then(Value::as_str)
        .ok_or_else(|| GrammarError::Shape(format!("`structure_rules[{index}].lhs` missing")))?;
    let lhs = check_symbol(lhs)?;
    let tokens: Vec<String> = match obj.get("rhs") {
        Some(Value::String(s)) => s.split_whitespace().map(str::to_string).collect(),
        Some(Value::Array(items)) => {
            let mut toks = Vec::new();
            for it in items {
                let s = it.as_str().ok_or_else(|| {
                    GrammarError::Shape(format!("`structure_rules[{index}].rhs` tokens must be strings"))
                })?;
                toks.extend(s.split_whitespace().map(str::to_string));
            }
            toks
        }
        _ => {
            return Err(GrammarError::Shape(format!(
                "`structure_rules[{index}].rhs` must be a string or array"
            )))
        }
    };
    let rhs = tokenize_rhs(&tokens)?;
    if rhs.is_empty() {
        return Err(GrammarError::Shape(format!("rule for `{lhs}` has an empty right-hand side")));
    }
    Ok(ProductionRule { lhs, rhs })
}

fn connector_token(tok: &str) -> Option<Connector> {
    match tok {
        "<->" | "↔" | "<=>" => Some(Connector::Bidirectional),
        "->" | "→" | "=>" => Some(Connector::Sequential),
        _ => None,
    }
}

fn looks_like_connector(tok: &str) -> bool {
    !tok.is_empty() && tok.chars().all(|c| "<>-=~|↔→←".contains(c))
}

/// Splits `A <-> B -> C` into symbol/connector pairs; the last symbol gets `None`.
fn tokenize_rhs(tokens: &[String]) -> Result<Vec<RhsElement>, GrammarError> {
    let mut out = Vec::new();
    let mut expect_symbol = true;
    for tok in tokens {
        if expect_symbol {
            if looks_like_connector(tok) {
                return Err(GrammarError::Shape(format!("expected a symbol, found `{tok}`")));
            }
            out.push(RhsElement {
                symbol: check_symbol(tok)?,
                connector: Connector::None,
            });
        } else {
            let conn = connector_token(tok).ok_or_else(|| GrammarError::UnknownConnector(tok.clone()))?;
            if let Some(last) = out.last_mut() {
                last.connector = conn;
            }
        }
        expect_symbol = !expect_symbol;
    }
    if expect_symbol && !out.is_empty() {
        return Err(GrammarError::Shape("right-hand side ends with a connector".into()));
    }
    Ok(out)
}

fn apply_connection_rules(
    v: &Value,
    nonterminals: &BTreeSet<String>,
    terminals: &BTreeSet<String>,
    attributes: &mut BTreeMap<String, BTreeMap<String, String>>,
) -> Result<(), GrammarError> {
    let items = v
        .as_array()
        .ok_or_else(|| GrammarError::Shape("`connection_rules` must be an array".into()))?;
    for (i, item) in items.iter().enumerate() {
        let obj = item
            .as_object()
            .ok_or_else(|| GrammarError::Shape(format!("`connection_rules[{i}]` must be an object")))?;
        for key in obj.keys() {
            if !["finger", "attach_to", "via"].contains(&key.as_str()) {
                return Err(GrammarError::Shape(format!(
                    "unknown field `{key}` in connection_rules[{i}]"
                )));
            }
        }
        let get = |k: &str| obj.get(k).and_then(Value::as_str).map(str::trim);
        let finger = get("finger")
            .ok_or_else(|| GrammarError::Shape(format!("`connection_rules[{i}].finger` missing")))?;
        if !nonterminals.contains(finger) && !terminals.contains(finger) {
            return Err(GrammarError::UndefinedSymbol(finger.to_string()));
        }
        let entry = attributes.entry(finger.to_string()).or_default();
        if let Some(target) = get("attach_to") {
            if !terminals.contains(target) {
                return Err(GrammarError::UndefinedSymbol(target.to_string()));
            }
            if NodeKind::from_symbol(target) != Some(NodeKind::Palm) {
                return Err(GrammarError::Shape(format!(
                    "connection_rules[{i}]: fingers attach to a palm, not `{target}`"
                )));
            }
            entry.insert(ATTR_ATTACH_TO.to_string(), target.to_string());
        }
        if let Some(via) = get("via").filter(|s| !s.is_empty()) {
            if !terminals.contains(via) {
                return Err(GrammarError::UndefinedSymbol(via.to_string()));
            }
            if !matches!(
                NodeKind::from_symbol(via),
                Some(NodeKind::Mount | NodeKind::Connector)
            ) {
                return Err(GrammarError::Shape(format!(
                    "connection_rules[{i}]: `via` must be a mount or connector, got `{via}`"
                )));
            }
            entry.insert(ATTR_VIA.to_string(), via.to_string());
        }
    }
    Ok(())
}

/// Renders a grammar back into the document format accepted by
/// [`parse_grammar_value`]. `parse_grammar_value(&to_document(g)) == g`.
pub fn to_document(grammar: &HandGrammar) -> Value {
    let is_link_key = |k: &str| k == ATTR_ATTACH_TO || k == ATTR_VIA;
    let mut components = Map::new();
    for t in &grammar.terminals {
        components.insert(t.clone(), Value::Object(Map::new()));
    }
    let mut connections = Vec::new();
    for (symbol, attrs) in &grammar.attributes {
        let own: Map<String, Value> = attrs
            .iter()
            .filter(|(k, _)| !is_link_key(k))
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect();
        if !own.is_empty() || grammar.terminals.contains(symbol) {
            components.insert(symbol.clone(), Value::Object(own));
        }
        if attrs.keys().any(|k| is_link_key(k)) {
            let mut c = Map::new();
            c.insert("finger".into(), Value::String(symbol.clone()));
            for key in [ATTR_ATTACH_TO, ATTR_VIA] {
                if let Some(v) = attrs.get(key) {
                    c.insert(key.into(), Value::String(v.clone()));
                }
            }
            connections.push(Value::Object(c));
        }
    }
    let rules = grammar
        .rules
        .iter()
        .map(|r| {
            let mut rhs = String::new();
            for el in &r.rhs {
                if !rhs.is_empty() {
                    rhs.push(' ');
                }
                rhs.push_str(&el.symbol);
                if el.connector != Connector::None {
                    rhs.push(' ');
                    rhs.push_str(el.connector.token());
                }
            }
            serde_json::json!({"lhs": r.lhs, "rhs": rhs})
        })
        .collect();
    let hints: Map<String, Value> = grammar
        .layout_hints
        .iter()
        .map(|(k, v)| (k.clone(), Value::String(v.clone())))
        .collect();
    serde_json::json!({
        "start": grammar.start_symbol,
        "components": components,
        "structure_rules": Value::Array(rules),
        "connection_rules": Value::Array(connections),
        "layout_hints": hints,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(rules: &str) -> String {
        format!(
            r#"{{"components": {{"P": {{}}, "J1": {{}}, "L1": {{}}, "J2": {{}}}},
               "structure_rules": {rules},
               "connection_rules": [],
               "layout_hints": {{}}}}"#
        )
    }

    #[test]
    fn missing_section_named() {
        let err = parse_grammar(r#"{"components": {}, "structure_rules": [], "layout_hints": {}}"#)
            .unwrap_err();
        assert!(matches!(err, GrammarError::MissingSection("connection_rules")));
    }

    #[test]
    fn empty_rules_means_no_start_rule() {
        let err = parse_grammar(&doc("[]")).unwrap_err();
        assert!(err.to_string().contains("no start rule"), "{err}");
    }

    #[test]
    fn undefined_symbol_named() {
        let err = parse_grammar(&doc(r#"[{"lhs": "S", "rhs": "P <-> F9"}]"#)).unwrap_err();
        assert!(matches!(err, GrammarError::UndefinedSymbol(ref s) if s == "F9"));
        assert!(err.to_string().contains("F9"));
    }

    #[test]
    fn unknown_connector_rejected() {
        let err = parse_grammar(&doc(r#"[{"lhs": "S", "rhs": "P <~> J1"}]"#)).unwrap_err();
        assert!(matches!(err, GrammarError::UnknownConnector(ref t) if t == "<~>"));
    }

    #[test]
    fn token_array_and_unicode_arrows() {
        let g = parse_grammar(&doc(r#"[{"lhs": "S", "rhs": ["P", "↔", "J1", "→", "L1"]}]"#)).unwrap();
        let rule = &g.rules[0];
        assert_eq!(rule.rhs[0].connector, Connector::Bidirectional);
        assert_eq!(rule.rhs[1].connector, Connector::Sequential);
        assert_eq!(rule.rhs[2].connector, Connector::None);
    }

    #[test]
    fn duplicate_rule_rejected() {
        let err = parse_grammar(&doc(
            r#"[{"lhs": "S", "rhs": "P"}, {"lhs": "S", "rhs": "P <-> J1"}]"#,
        ))
        .unwrap_err();
        assert!(matches!(err, GrammarError::DuplicateRule(_)));
    }

    #[test]
    fn bad_terminal_prefix() {
        let text = r#"{"components": {"P": {}, "X1": {}},
            "structure_rules": [{"lhs": "S", "rhs": "P <-> X1"}],
            "connection_rules": [], "layout_hints": {}}"#;
        assert!(matches!(parse_grammar(text).unwrap_err(), GrammarError::BadTerminal(_)));
    }

    #[test]
    fn connection_rule_records_mount() {
        let text = r#"{"components": {"P": {}, "M1": {}, "J1": {}},
            "structure_rules": [{"lhs": "S", "rhs": "P <-> F1"}, {"lhs": "F1", "rhs": "J1"}],
            "connection_rules": [{"finger": "F1", "attach_to": "P", "via": "M1"}],
            "layout_hints": {"finger_spacing_mm": 22}}"#;
        let g = parse_grammar(text).unwrap();
        assert_eq!(g.attribute("F1", ATTR_VIA), Some("M1"));
        assert_eq!(g.layout_hints["finger_spacing_mm"], "22");
    }

    #[test]
    fn document_round_trip() {
        let text = r#"{"components": {"P": {"role": "palm"}, "M1": {}, "J1": {}, "L1": {}, "F9": {"note": "x"}},
            "structure_rules": [{"lhs": "S", "rhs": "P <-> F1 <-> F9"}, {"lhs": "F1", "rhs": "J1 -> L1 <-> J1"},
                                {"lhs": "F9", "rhs": "J1"}],
            "connection_rules": [{"finger": "F1", "attach_to": "P", "via": "M1"}],
            "layout_hints": {"finger_spacing_mm": 22}}"#;
        let g = parse_grammar(text).unwrap();
        let back = parse_grammar_value(&to_document(&g)).unwrap();
        assert_eq!(back, g);
    }
}
