//! OpenSCAD emission by placeholder substitution into a parameter template,
//! plus optional render verification through an external binary.

mod render;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{format_float, DerivedFingerGeometry, OphParams};

pub use render::{verify_render, RenderOutcome, RendererConfig};

const DEFAULT_TEMPLATE: &str = include_str!("../../templates/oph_hand.scad");
const DEFAULT_MANIFEST: &str = include_str!("../../templates/oph_hand.toml");

#[derive(Debug, thiserror::Error)]
pub enum CadError {
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("template token `{0}` is not declared in the manifest")]
    Undeclared(String),
    #[error("manifest placeholder `{0}` does not occur in the template")]
    Unused(String),
    #[error("no value source for placeholder `{0}`")]
    Unfilled(String),
    #[error("placeholder `{name}` is declared as {declared} but its source yields {actual}")]
    TypeMismatch {
        name: String,
        declared: SlotType,
        actual: SlotType,
    },
    #[error("{got} fingers exceed the template capacity of {capacity}")]
    Capacity { got: usize, capacity: usize },
    #[error("{0} geometry entries for {1} fingers")]
    GeometryCount(usize, usize),
    #[error("unterminated `{{{{` in template")]
    Unterminated,
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotType {
    Int,
    Scalar,
    /// One number per finger.
    List,
    /// One triple per finger.
    List3,
}

impl std::fmt::Display for SlotType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SlotType::Int => "int",
            SlotType::Scalar => "scalar",
            SlotType::List => "list",
            SlotType::List3 => "list3",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaceholderSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub slot_type: SlotType,
    pub unit: String,
    /// Value source; defaults to `name`.
    #[serde(default)]
    pub source: Option<String>,
}

impl PlaceholderSpec {
    pub fn source(&self) -> &str {
        self.source.as_deref().unwrap_or(&self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub name: String,
    pub max_fingers: usize,
    #[serde(rename = "placeholder")]
    pub placeholders: Vec<PlaceholderSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScadTemplate {
    pub text: String,
    pub manifest: Manifest,
}

/// Tokens between `{{` and `}}`, in order of appearance.
fn tokens(text: &str) -> Result<Vec<String>, CadError> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find("{{") {
        let after = &rest[open + 2..];
        let close = after.find("}}").ok_or(CadError::Unterminated)?;
        out.push(after[..close].trim().to_string());
        rest = &after[close + 2..];
    }
    Ok(out)
}

impl ScadTemplate {
    /// Parses the manifest and checks that manifest names and template
    /// tokens match one to one.
    pub fn parse(text: &str, manifest_toml: &str) -> Result<ScadTemplate, CadError> {
        let manifest: Manifest =
            toml::from_str(manifest_toml).map_err(|e| CadError::Manifest(e.to_string()))?;
        if manifest.max_fingers == 0 {
            return Err(CadError::Manifest("max_fingers must be >= 1".into()));
        }
        let mut declared = BTreeSet::new();
        for p in &manifest.placeholders {
            if !declared.insert(p.name.as_str()) {
                return Err(CadError::Manifest(format!("placeholder `{}` declared twice", p.name)));
            }
        }
        let used: BTreeSet<String> = tokens(text)?.into_iter().collect();
        if let Some(t) = used.iter().find(|t| !declared.contains(t.as_str())) {
            return Err(CadError::Undeclared(t.clone()));
        }
        if let Some(d) = declared.iter().find(|d| !used.contains(**d)) {
            return Err(CadError::Unused(d.to_string()));
        }
        Ok(ScadTemplate {
            text: text.to_string(),
            manifest,
        })
    }

    pub fn builtin() -> ScadTemplate {
        ScadTemplate::parse(DEFAULT_TEMPLATE, DEFAULT_MANIFEST).expect("shipped template is consistent")
    }

    /// Loads `<stem>.scad` with its manifest `<stem>.toml`.
    pub fn load(scad_path: &Path) -> Result<ScadTemplate, CadError> {
        let read = |p: &Path| {
            std::fs::read_to_string(p).map_err(|e| CadError::Io {
                path: p.display().to_string(),
                message: e.to_string(),
            })
        };
        let text = read(scad_path)?;
        let manifest = read(&scad_path.with_extension("toml"))?;
        ScadTemplate::parse(&text, &manifest)
    }
}

enum SlotValue {
    Int(usize),
    Scalar(f64),
    List(Vec<f64>),
    List3(Vec<[f64; 3]>),
}

impl SlotValue {
    fn slot_type(&self) -> SlotType {
        match self {
            SlotValue::Int(_) => SlotType::Int,
            SlotValue::Scalar(_) => SlotType::Scalar,
            SlotValue::List(_) => SlotType::List,
            SlotValue::List3(_) => SlotType::List3,
        }
    }

    fn render(&self) -> String {
        let list = |v: &[f64]| format!("[{}]", v.iter().map(|x| format_float(*x)).collect::<Vec<_>>().join(", "));
        match self {
            SlotValue::Int(n) => n.to_string(),
            SlotValue::Scalar(x) => format_float(*x),
            SlotValue::List(v) => list(v),
            SlotValue::List3(v) => format!("[{}]", v.iter().map(|t| list(t)).collect::<Vec<_>>().join(", ")),
        }
    }
}

fn source_value(source: &str, p: &OphParams, g: &[DerivedFingerGeometry]) -> Option<SlotValue> {
    let per_finger = |f: fn(&crate::model::FingerParams) -> f64| SlotValue::List(p.fingers.iter().map(f).collect());
    let per_geo = |f: fn(&DerivedFingerGeometry) -> [f64; 3]| SlotValue::List3(g.iter().map(f).collect());
    Some(match source {
        "finger_count" => SlotValue::Int(p.finger_count()),
        "palm_width" => SlotValue::Scalar(p.palm_width_mm),
        "palm_curvature" => SlotValue::Scalar(p.palm_curvature),
        "mount_angles" => per_finger(|f| f.mount_angle_deg),
        "mount_translations" => per_finger(|f| f.mount_translation_mm),
        "metacarpal_lengths" => per_finger(|f| f.metacarpal_length_mm),
        "finger_scales" => per_finger(|f| f.scale),
        "segment_lengths" => per_geo(|g| g.segment_lengths_mm),
        "joint_diameters" => per_geo(|g| g.joint_diameters_mm),
        "link_widths" => per_geo(|g| g.link_widths_mm),
        _ => return None,
    })
}

/// Value sources a manifest may bind.
pub const SOURCES: [&str; 10] = [
    "finger_count",
    "palm_width",
    "palm_curvature",
    "mount_angles",
    "mount_translations",
    "metacarpal_lengths",
    "finger_scales",
    "segment_lengths",
    "joint_diameters",
    "link_widths",
];

/// Substitutes every placeholder. Numbers use 6 significant digits.
pub fn emit_scad(
    params: &OphParams,
    geometry: &[DerivedFingerGeometry],
    template: &ScadTemplate,
) -> Result<String, CadError> {
    let n = params.finger_count();
    if n > template.manifest.max_fingers {
        return Err(CadError::Capacity {
            got: n,
            capacity: template.manifest.max_fingers,
        });
    }
    if geometry.len() != n {
        return Err(CadError::GeometryCount(geometry.len(), n));
    }
    let mut values = BTreeMap::new();
    for spec in &template.manifest.placeholders {
        let v = source_value(spec.source(), params, geometry)
            .ok_or_else(|| CadError::Unfilled(spec.name.clone()))?;
        if v.slot_type() != spec.slot_type {
            return Err(CadError::TypeMismatch {
                name: spec.name.clone(),
                declared: spec.slot_type,
                actual: v.slot_type(),
            });
        }
        values.insert(spec.name.as_str(), v.render());
    }

    let mut out = String::with_capacity(template.text.len() + 512);
    let mut rest = template.text.as_str();
    while let Some(open) = rest.find("{{") {
        out.push_str(&rest[..open]);
        let after = &rest[open + 2..];
        let close = after.find("}}").ok_or(CadError::Unterminated)?;
        let name = after[..close].trim();
        let v = values.get(name).ok_or_else(|| CadError::Unfilled(name.to_string()))?;
        out.push_str(v);
        rest = &after[close + 2..];
    }
    out.push_str(rest);
    Ok(out)
}
