//! Pulls the JSON object out of a model reply and checks it against the
//! reply schema registered for the stage.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{ChatRequest, LlmError, LlmProvider, Message};
use crate::model::{OphParams, SemanticSchema, Validate};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemaId {
    Schema,
    Grammar,
    Assessment,
    Params,
    Score,
    Delta,
}

impl SchemaId {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemaId::Schema => "semantic_schema",
            SchemaId::Grammar => "grammar",
            SchemaId::Assessment => "assessment",
            SchemaId::Params => "params",
            SchemaId::Score => "score",
            SchemaId::Delta => "delta",
        }
    }

    pub fn parse(s: &str) -> Option<SchemaId> {
        [
            SchemaId::Schema,
            SchemaId::Grammar,
            SchemaId::Assessment,
            SchemaId::Params,
            SchemaId::Score,
            SchemaId::Delta,
        ]
        .into_iter()
        .find(|id| id.as_str() == s)
    }
}

/// Structural shape of a grammar reply. Semantic problems (undefined
/// symbols, cycles) are left to the validator so they feed revision.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct GrammarShape {
    #[serde(default)]
    start: Option<String>,
    components: Value,
    structure_rules: Vec<Value>,
    connection_rules: Vec<Value>,
    layout_hints: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssessmentReply {
    /// 0 to 10.
    pub score: f64,
    #[serde(default)]
    pub issues: Vec<String>,
    #[serde(default)]
    pub suggestions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreReply {
    pub score: f64,
    #[serde(default)]
    pub justification: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaOp {
    Set,
    Add,
    Multiply,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Adjustment {
    /// `palm_width_mm`, `palm_curvature`, `fingers[i].<field>` or `fingers[*].<field>`.
    pub field: String,
    pub op: DeltaOp,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamDelta {
    pub adjustments: Vec<Adjustment>,
    #[serde(default)]
    pub rationale: String,
}

fn typed<T: DeserializeOwned>(value: &Value) -> Result<T, LlmError> {
    serde_path_to_error::deserialize(value.clone()).map_err(|e| {
        let path = e.path().to_string();
        LlmError::Schema {
            path: if path == "." { String::new() } else { path },
            message: e.into_inner().to_string(),
        }
    })
}

fn invariant<T: Validate>(v: &T) -> Result<(), LlmError> {
    v.validate().map_err(|e| LlmError::Schema {
        path: e.path,
        message: e.message,
    })
}

fn score_range(score: f64) -> Result<(), LlmError> {
    if score.is_finite() {
        Ok(())
    } else {
        Err(LlmError::Schema {
            path: "score".into(),
            message: "score must be a finite number".into(),
        })
    }
}

/// Checks `value` against the schema registered for `id`.
pub fn check_schema(value: &Value, id: SchemaId) -> Result<(), LlmError> {
    match id {
        SchemaId::Schema => invariant(&typed::<SemanticSchema>(value)?),
        SchemaId::Params => invariant(&typed::<OphParams>(value)?),
        SchemaId::Grammar => typed::<GrammarShape>(value).map(|_| ()),
        SchemaId::Assessment => {
            let a: AssessmentReply = typed(value)?;
            score_range(a.score)?;
            if !(0.0..=10.0).contains(&a.score) {
                return Err(LlmError::Schema {
                    path: "score".into(),
                    message: format!("score must lie in [0, 10], got {}", a.score),
                });
            }
            Ok(())
        }
        SchemaId::Score => score_range(typed::<ScoreReply>(value)?.score),
        SchemaId::Delta => {
            let d: ParamDelta = typed(value)?;
            for (i, a) in d.adjustments.iter().enumerate() {
                if !a.value.is_finite() {
                    return Err(LlmError::Schema {
                        path: format!("adjustments[{i}].value"),
                        message: "must be finite".into(),
                    });
                }
            }
            Ok(())
        }
    }
}

/// Fenced code blocks, in order of appearance.
fn fenced_blocks(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find("```") {
        let after = &rest[open + 3..];
        // Skip the info string (e.g. `json`) up to the end of the line.
        let body_start = after.find('\n').map(|i| i + 1).unwrap_or(after.len());
        let body = &after[body_start..];
        match body.find("```") {
            Some(close) => {
                out.push(&body[..close]);
                rest = &body[close + 3..];
            }
            None => break,
        }
    }
    out
}

/// The first `{...}` span with balanced braces outside string literals.
fn balanced_objects(text: &str) -> impl Iterator<Item = &str> {
    text.char_indices()
        .filter(|(_, c)| *c == '{')
        .filter_map(move |(start, _)| {
            let mut depth = 0usize;
            let mut in_str = false;
            let mut escaped = false;
            for (i, c) in text[start..].char_indices() {
                if in_str {
                    match c {
                        _ if escaped => escaped = false,
                        '\\' => escaped = true,
                        '"' => in_str = false,
                        _ => {}
                    }
                    continue;
                }
                match c {
                    '"' => in_str = true,
                    '{' => depth += 1,
                    '}' => {
                        depth -= 1;
                        if depth == 0 {
                            return Some(&text[start..start + i + 1]);
                        }
                    }
                    _ => {}
                }
            }
            None
        })
}

fn locate(reply: &str) -> Option<Value> {
    let parse_obj = |s: &str| -> Option<Value> {
        serde_json::from_str::<Value>(s.trim()).ok().filter(Value::is_object)
    };
    for block in fenced_blocks(reply) {
        if let Some(v) = parse_obj(block) {
            return Some(v);
        }
        if let Some(v) = balanced_objects(block).find_map(parse_obj) {
            return Some(v);
        }
    }
    balanced_objects(reply).find_map(parse_obj)
}

/// Finds the first JSON object in `reply` and validates it against `schema`.
pub fn extract_json(reply: &str, schema: SchemaId) -> Result<Value, LlmError> {
    let value = locate(reply).ok_or(LlmError::NoJson)?;
    check_schema(&value, schema)?;
    Ok(value)
}

#[derive(Debug, Clone, PartialEq)]
pub struct JsonReply {
    pub value: Value,
    /// Raw reply text the value came from.
    pub raw: String,
    /// Provider calls spent (1, or 2 after a repair).
    pub calls: usize,
}

fn repair_request(original: &ChatRequest, bad_reply: &str, error: &str) -> ChatRequest {
    let mut req = original.clone();
    req.messages.push(Message::user(format!(
        "Your previous reply could not be used.\n\nPrevious reply:\n{bad_reply}\n\nProblem: {error}\n\n\
         Reply again with the corrected JSON object only, with no surrounding text."
    )));
    req
}

/// Sends one follow-up request quoting the bad reply and the error, and
/// extracts again. Never repairs more than once.
pub fn repair_roundtrip(
    provider: &dyn LlmProvider,
    original: &ChatRequest,
    bad_reply: &str,
    error: &str,
    schema: SchemaId,
) -> Result<JsonReply, LlmError> {
    let second = provider.complete(&repair_request(original, bad_reply, error))?;
    match extract_json(&second, schema) {
        Ok(value) => Ok(JsonReply {
            value,
            raw: second,
            calls: 1,
        }),
        Err(e) => Err(LlmError::RepairFailed {
            first: bad_reply.to_string(),
            second,
            error: e.to_string(),
        }),
    }
}

/// Complete, extract, and repair once on failure.
pub fn request_json(
    provider: &dyn LlmProvider,
    request: &ChatRequest,
    schema: SchemaId,
) -> Result<JsonReply, LlmError> {
    let first = provider.complete(request)?;
    match extract_json(&first, schema) {
        Ok(value) => Ok(JsonReply {
            value,
            raw: first,
            calls: 1,
        }),
        Err(e) => {
            log::info!("{} reply rejected ({e}); requesting repair", request.purpose);
            let mut fixed = repair_roundtrip(provider, request, &first, &e.to_string(), schema)?;
            fixed.calls += 1;
            Ok(fixed)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{LlmSettings, Purpose, StubProvider};

    const SCHEMA: &str = r#"{"task_goal": "lift a mug", "object_name": "mug",
        "object_size_mm": [80, 80, 95], "object_mass_g": 350, "material": "ceramic",
        "fragility": "medium", "surface_friction": "medium", "force_level": "medium",
        "precision_level": "low", "grasp_type": "force_based"}"#;

    #[test]
    fn fenced_block_inside_prose() {
        let reply = format!("Here is the design:\n```json\n{SCHEMA}\n```\nLet me know.");
        let v = extract_json(&reply, SchemaId::Schema).unwrap();
        assert_eq!(v["grasp_type"], "force_based");
    }

    #[test]
    fn bare_json_and_idempotence() {
        let v = extract_json(SCHEMA, SchemaId::Schema).unwrap();
        let again = extract_json(&v.to_string(), SchemaId::Schema).unwrap();
        assert_eq!(v, again);
    }

    #[test]
    fn braces_inside_strings_do_not_confuse_the_scanner() {
        let reply = r#"Note {this} first. {"score": 7, "issues": ["odd } brace", "quote \" {"], "suggestions": []} end"#;
        let v = extract_json(reply, SchemaId::Assessment).unwrap();
        assert_eq!(v["score"], 7);
        assert_eq!(v["issues"][1], "quote \" {");
    }

    #[test]
    fn missing_field_is_named() {
        let bad = SCHEMA.replace(r#", "grasp_type": "force_based""#, "");
        match extract_json(&bad, SchemaId::Schema) {
            Err(LlmError::Schema { message, .. }) => assert!(message.contains("grasp_type"), "{message}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_field_and_bad_enum_rejected() {
        let extra = SCHEMA.replace("\"mug\",", "\"mug\", \"colour\": \"blue\",");
        assert!(matches!(extract_json(&extra, SchemaId::Schema), Err(LlmError::Schema { .. })));
        let bad_enum = SCHEMA.replace("force_based", "power_grip");
        match extract_json(&bad_enum, SchemaId::Schema) {
            Err(LlmError::Schema { path, .. }) => assert_eq!(path, "grasp_type"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn no_json_at_all() {
        assert!(matches!(extract_json("I cannot help", SchemaId::Score), Err(LlmError::NoJson)));
        assert!(matches!(extract_json("[1, 2]", SchemaId::Score), Err(LlmError::NoJson)));
    }

    #[test]
    fn assessment_score_range() {
        assert!(extract_json(r#"{"score": 11}"#, SchemaId::Assessment).is_err());
        assert!(extract_json(r#"{"score": 10}"#, SchemaId::Assessment).is_ok());
    }

    #[test]
    fn delta_schema() {
        let ok = r#"{"adjustments": [{"field": "fingers[*].scale", "op": "multiply", "value": 0.9}], "rationale": "r"}"#;
        extract_json(ok, SchemaId::Delta).unwrap();
        let bad = ok.replace("multiply", "divide");
        assert!(extract_json(&bad, SchemaId::Delta).is_err());
    }

    fn req() -> ChatRequest {
        LlmSettings::default().request(Purpose::Schema, vec![Message::user("task")], None)
    }

    #[test]
    fn repair_bad_then_good() {
        let stub = StubProvider::from_memory([("schema_1", "not json"), ("schema_2", SCHEMA)]);
        let r = request_json(&stub, &req(), SchemaId::Schema).unwrap();
        assert_eq!(r.calls, 2);
        assert_eq!(stub.call_count(), 2);
    }

    #[test]
    fn repair_bad_twice_is_terminal() {
        let stub = StubProvider::from_memory([("schema_1", "{\"x\": 1}"), ("schema_2", "still bad")]);
        match request_json(&stub, &req(), SchemaId::Schema) {
            Err(LlmError::RepairFailed { first, second, .. }) => {
                assert_eq!(first, "{\"x\": 1}");
                assert_eq!(second, "still bad");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(stub.call_count(), 2);
    }

    #[test]
    fn good_reply_needs_no_repair() {
        let stub = StubProvider::from_memory([("schema_1", SCHEMA)]);
        let r = request_json(&stub, &req(), SchemaId::Schema).unwrap();
        assert_eq!(r.calls, 1);
        assert_eq!(stub.call_count(), 1);
    }
}
