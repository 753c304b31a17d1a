//! Canonical JSON for run artifacts: sorted keys, two-space indentation,
//! floats rounded to 6 significant digits, trailing newline.

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use super::{
    DesignCandidate, FilterRecord, HandGrammar, HandGraph, InvariantViolation, OphParams,
    SemanticSchema, Validate, ValidationReport,
};

#[derive(Debug, thiserror::Error)]
pub enum ArtifactError {
    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Malformed {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema mismatch at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("invariant violated at `{}`: {}", .0.path, .0.message)]
    Invariant(InvariantViolation),
}

impl ArtifactError {
    /// JSON path the error refers to, when known.
    pub fn path(&self) -> Option<&str> {
        match self {
            ArtifactError::Malformed { .. } => None,
            ArtifactError::Schema { path, .. } => Some(path),
            ArtifactError::Invariant(v) => Some(&v.path),
        }
    }
}

/// Domain types that can be persisted as run artifacts.
pub trait ArtifactType: Serialize + DeserializeOwned + Validate {
    const KIND: ArtifactKind;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArtifactKind {
    Schema,
    Grammar,
    Graph,
    Params,
    Report,
    Candidate,
    FilterRecord,
}

impl ArtifactKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ArtifactKind::Schema => "schema",
            ArtifactKind::Grammar => "grammar",
            ArtifactKind::Graph => "graph",
            ArtifactKind::Params => "params",
            ArtifactKind::Report => "report",
            ArtifactKind::Candidate => "candidate",
            ArtifactKind::FilterRecord => "filter",
        }
    }
}

impl std::str::FromStr for ArtifactKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            ArtifactKind::Schema,
            ArtifactKind::Grammar,
            ArtifactKind::Graph,
            ArtifactKind::Params,
            ArtifactKind::Report,
            ArtifactKind::Candidate,
            ArtifactKind::FilterRecord,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
        .ok_or_else(|| format!("unknown artifact kind `{s}`"))
    }
}

macro_rules! artifact_types {
    ($($ty:ident => $kind:ident),* $(,)?) => {
        $(impl ArtifactType for $ty {
            const KIND: ArtifactKind = ArtifactKind::$kind;
        })*

        /// A deserialized artifact of any kind.
        #[derive(Debug, Clone, PartialEq)]
        pub enum Artifact {
            $($kind($ty),)*
        }

        /// Parses `text` as the artifact type named by `kind`.
        pub fn deserialize_artifact(text: &str, kind: ArtifactKind) -> Result<Artifact, ArtifactError> {
            match kind {
                $(ArtifactKind::$kind => from_canonical_json::<$ty>(text).map(Artifact::$kind),)*
            }
        }
    };
}

artifact_types! {
    SemanticSchema => Schema,
    HandGrammar => Grammar,
    HandGraph => Graph,
    OphParams => Params,
    ValidationReport => Report,
    DesignCandidate => Candidate,
    FilterRecord => FilterRecord,
}

/// Formats a float rounded to 6 significant digits using the shortest
/// representation that round-trips the rounded value. Always contains a `.`
/// so the value reads back as a float.
pub fn format_float(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return "0.0".to_string();
    }
    let rounded: f64 = format!("{x:.5e}").parse().unwrap_or(x);
    let mut s = format!("{rounded}");
    if !s.contains('.') && !s.contains('e') {
        s.push_str(".0");
    }
    s
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&format_float(n.as_f64().unwrap_or(0.0)));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("string serialization is infallible"))
        }
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                newline(out, indent + 1);
                write_value(out, item, indent + 1);
            }
            newline(out, indent);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                newline(out, indent + 1);
                out.push_str(&serde_json::to_string(k).expect("string serialization is infallible"));
                out.push_str(": ");
                write_value(out, &map[k.as_str()], indent + 1);
            }
            newline(out, indent);
            out.push('}');
        }
    }
}

fn newline(out: &mut String, indent: usize) {
    out.push('\n');
    for _ in 0..indent {
        out.push_str("  ");
    }
}

/// Canonical text of an arbitrary JSON value.
pub fn to_canonical_value(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, 0);
    out.push('\n');
    out
}

/// Canonical text of any serializable value.
pub fn to_canonical_json<T: Serialize + ?Sized>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("domain types serialize to JSON");
    to_canonical_value(&v)
}

/// Strict typed parse: unknown fields rejected, error paths reported, then
/// the type's invariants are checked.
pub fn from_canonical_json<T: DeserializeOwned + Validate>(text: &str) -> Result<T, ArtifactError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value: T = match serde_path_to_error::deserialize(&mut de) {
        Ok(v) => v,
        Err(err) => {
            let path = err.path().to_string();
            let inner = err.into_inner();
            return Err(classify(inner, path));
        }
    };
    de.end().map_err(|e| classify(e, String::new()))?;
    value.validate().map_err(ArtifactError::Invariant)?;
    Ok(value)
}

fn classify(err: serde_json::Error, path: String) -> ArtifactError {
    use serde_json::error::Category;
    match err.classify() {
        Category::Syntax | Category::Eof | Category::Io => ArtifactError::Malformed {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        },
        Category::Data => ArtifactError::Schema {
            path: if path == "." { String::new() } else { path },
            message: err.to_string(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FingerParams;

    fn three_finger() -> OphParams {
        let fingers = [(-20.0, -18.0), (0.0, 0.0), (20.0, 18.0)]
            .into_iter()
            .map(|(angle, t)| FingerParams {
                mount_angle_deg: angle,
                mount_translation_mm: t,
                metacarpal_length_mm: 20.0,
                scale: 1.0,
            })
            .collect();
        OphParams::new(fingers, 60.0, 0.35).unwrap()
    }

    #[test]
    fn float_formatting_rounds_to_six_digits() {
        assert_eq!(format_float(60.0), "60.0");
        assert_eq!(format_float(0.85), "0.85");
        assert_eq!(format_float(1.0 / 3.0), "0.333333");
        assert_eq!(format_float(123456789.0), "123457000.0");
        assert_eq!(format_float(-2.5), "-2.5");
        assert_eq!(format_float(-0.0), "0.0");
        assert_eq!(format_float(1e-7), "0.0000001");
    }

    #[test]
    fn one_finger_params_echo_palm_width() {
        let p = OphParams::new(
            vec![FingerParams {
                mount_angle_deg: 0.0,
                mount_translation_mm: 0.0,
                metacarpal_length_mm: 20.0,
                scale: 1.0,
            }],
            60.0,
            0.0,
        )
        .unwrap();
        let text = to_canonical_json(&p);
        assert!(text.contains("\"palm_width_mm\": 60.0"), "{text}");
    }

    #[test]
    fn keys_sorted_and_reparse_is_identical() {
        let text = to_canonical_json(&three_finger());
        let fingers_at = text.find("\"fingers\"").unwrap();
        let palm_at = text.find("\"palm_curvature\"").unwrap();
        assert!(fingers_at < palm_at);
        let back: OphParams = from_canonical_json(&text).unwrap();
        assert_eq!(to_canonical_json(&back), text);
    }

    #[test]
    fn three_finger_params_golden() {
        let golden = include_str!("../../tests/golden/params_three_finger.json");
        assert_eq!(to_canonical_json(&three_finger()), golden);
    }

    #[test]
    fn negative_scale_reports_path() {
        let text = to_canonical_json(&three_finger()).replacen("\"scale\": 1.0", "\"scale\": -1.0", 1);
        let err = from_canonical_json::<OphParams>(&text).unwrap_err();
        assert!(matches!(err, ArtifactError::Invariant(_)));
        assert_eq!(err.path(), Some("fingers[0].scale"));
    }

    #[test]
    fn unknown_fields_rejected_with_path() {
        let text = r#"{"fingers": [{"mount_angle_deg": 0.0, "mount_translation_mm": 0.0,
            "metacarpal_length_mm": 20.0, "scale": 1.0, "colour": "red"}],
            "palm_width_mm": 60.0, "palm_curvature": 0.1}"#;
        let err = from_canonical_json::<OphParams>(text).unwrap_err();
        match &err {
            ArtifactError::Schema { path, message } => {
                assert_eq!(path, "fingers[0].colour");
                assert!(message.contains("colour"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_json_is_reported() {
        let err = from_canonical_json::<OphParams>("{\"fingers\": [").unwrap_err();
        assert!(matches!(err, ArtifactError::Malformed { .. }));
        let err = from_canonical_json::<OphParams>("{} trailing").unwrap_err();
        assert!(matches!(err, ArtifactError::Malformed { .. } | ArtifactError::Schema { .. }));
    }

    #[test]
    fn dynamic_kind_dispatch() {
        let text = to_canonical_json(&three_finger());
        match deserialize_artifact(&text, ArtifactKind::Params).unwrap() {
            Artifact::Params(p) => assert_eq!(p.finger_count(), 3),
            other => panic!("wrong kind {other:?}"),
        }
        assert!(deserialize_artifact(&text, ArtifactKind::Schema).is_err());
        assert_eq!("grammar".parse::<ArtifactKind>().unwrap(), ArtifactKind::Grammar);
    }
}
