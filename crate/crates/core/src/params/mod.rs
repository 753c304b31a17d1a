//! Reduced parameter generation: model-proposed parameters for an accepted
//! structure, grasp-type priors, ratio-based finger geometry and the
//! morphological constraint filter.

mod config;

use std::collections::{BTreeMap, BTreeSet};

use crate::grammar::Topology;
use crate::llm::{
    render_prompt, repair_roundtrip, request_json, template, LlmError, LlmProvider, LlmSettings,
    Purpose, SchemaId,
};
use crate::model::{
    to_canonical_json, DerivedFingerGeometry, FilterResult, FingerParams, GraspType, HandGraph,
    OphParams, SemanticSchema,
};

pub use config::{ConstraintConfig, GraspPrior, GraspPriorTable, ParamNorms, RatioConfig};

pub const CHECK_FINGER_COUNT: &str = "finger_count";
pub const CHECK_JOINT_DIAMETER: &str = "joint_diameter";
pub const CHECK_LINK_WIDTH: &str = "link_width";
pub const CHECK_SLENDERNESS: &str = "slenderness";
pub const CHECK_FINGER_LENGTH: &str = "finger_length";
pub const CHECK_MOUNT_ANGLE: &str = "mount_angle";
pub const CHECK_MOUNT_SEPARATION: &str = "mount_separation";
pub const CHECK_FOOTPRINT: &str = "footprint";

/// Smallest metacarpal length a prior offset may produce.
pub const METACARPAL_FLOOR_MM: f64 = 1.0;

/// Scales fingers, offsets metacarpals and clamps palm curvature.
pub fn apply_priors(params: &OphParams, prior: &GraspPrior) -> OphParams {
    let fingers = params
        .fingers
        .iter()
        .map(|f| FingerParams {
            scale: f.scale * prior.finger_scale_multiplier,
            metacarpal_length_mm: (f.metacarpal_length_mm + prior.bone_length_offset_mm)
                .max(METACARPAL_FLOOR_MM),
            ..f.clone()
        })
        .collect();
    let [lo, hi] = prior.curvature_range;
    OphParams {
        fingers,
        palm_width_mm: params.palm_width_mm,
        palm_curvature: params.palm_curvature.clamp(lo, hi),
    }
}

pub fn derive_geometry(finger: &FingerParams, ratios: &RatioConfig) -> DerivedFingerGeometry {
    let s = finger.scale;
    let mut segments = [0.0; 3];
    let mut joints = [0.0; 3];
    let mut widths = [0.0; 3];
    for k in 0..3 {
        segments[k] = s * ratios.base_phalanx_lengths_mm[k] * ratios.phalanx_ratios[k];
        joints[k] = s * ratios.base_joint_diameter_mm * ratios.joint_ratios[k];
        widths[k] = s * ratios.base_link_width_mm * ratios.link_width_ratios[k];
    }
    DerivedFingerGeometry {
        metacarpal_length_mm: finger.metacarpal_length_mm,
        segment_lengths_mm: segments,
        joint_diameters_mm: joints,
        link_widths_mm: widths,
        total_length_mm: finger.metacarpal_length_mm + segments.iter().sum::<f64>(),
    }
}

pub fn derive_all(params: &OphParams, ratios: &RatioConfig) -> Vec<DerivedFingerGeometry> {
    params.fingers.iter().map(|f| derive_geometry(f, ratios)).collect()
}

/// Conservative axis-aligned box (x, y, z) around the hand. Fingers may
/// splay to either side of the palm, so x and y add twice the longest
/// phalanx chain; z stacks that chain on the thickest joint. Metacarpals run
/// inside the palm body and are not counted as reach.
pub fn footprint(params: &OphParams, geometry: &[DerivedFingerGeometry]) -> [f64; 3] {
    let reach = geometry
        .iter()
        .map(DerivedFingerGeometry::phalanx_sum_mm)
        .fold(0.0, f64::max);
    let thickest = geometry
        .iter()
        .flat_map(|g| g.joint_diameters_mm)
        .fold(0.0, f64::max);
    let planar = params.palm_width_mm + 2.0 * reach;
    [planar, planar, reach + thickest]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub check_id: &'static str,
    pub detail: String,
}

fn within(v: f64, [lo, hi]: [f64; 2]) -> bool {
    lo <= v && v <= hi
}

/// Every violated predicate with a human-readable detail, sorted by check id.
pub fn constraint_violations(
    params: &OphParams,
    geometry: &[DerivedFingerGeometry],
    config: &ConstraintConfig,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |check_id, detail: String| out.push(Violation { check_id, detail });

    let n = params.finger_count();
    let [cmin, cmax] = config.finger_count_range;
    if n < cmin || n > cmax {
        push(CHECK_FINGER_COUNT, format!("{n} fingers outside [{cmin}, {cmax}]"));
    }

    for (i, g) in geometry.iter().enumerate() {
        for k in 0..3 {
            let d = g.joint_diameters_mm[k];
            if !within(d, config.joint_diameter_range_mm) {
                push(CHECK_JOINT_DIAMETER, format!("finger {i} joint {k}: {d:.2} mm"));
            }
            let w = g.link_widths_mm[k];
            if !within(w, config.link_width_range_mm) {
                push(CHECK_LINK_WIDTH, format!("finger {i} link {k}: {w:.2} mm"));
            }
            let r = g.segment_lengths_mm[k] / w;
            if !within(r, config.slenderness_range) {
                push(CHECK_SLENDERNESS, format!("finger {i} link {k}: ratio {r:.2}"));
            }
        }
        if !within(g.total_length_mm, config.finger_total_length_range_mm) {
            push(CHECK_FINGER_LENGTH, format!("finger {i}: {:.2} mm", g.total_length_mm));
        }
    }

    for (i, f) in params.fingers.iter().enumerate() {
        if f.mount_angle_deg.abs() > config.mount_angle_abs_max_deg {
            push(CHECK_MOUNT_ANGLE, format!("finger {i}: {:.1} deg", f.mount_angle_deg));
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let gap = (params.fingers[i].mount_translation_mm - params.fingers[j].mount_translation_mm).abs();
            if gap < config.min_mount_separation_mm {
                push(CHECK_MOUNT_SEPARATION, format!("fingers {i} and {j}: {gap:.2} mm apart"));
            }
        }
    }

    let bbox = footprint(params, geometry);
    if bbox.iter().zip(&config.build_volume_mm).any(|(b, v)| b > v) {
        push(
            CHECK_FOOTPRINT,
            format!("box {:.1} x {:.1} x {:.1} mm exceeds build volume", bbox[0], bbox[1], bbox[2]),
        );
    }

    // Stable sort keeps finger order within a check for readable details.
    out.sort_by(|a, b| a.check_id.cmp(b.check_id));
    out
}

/// Pass/fail plus the sorted, deduplicated set of violated check ids.
pub fn check_constraints(
    params: &OphParams,
    geometry: &[DerivedFingerGeometry],
    config: &ConstraintConfig,
) -> FilterResult {
    let ids: BTreeSet<String> = constraint_violations(params, geometry, config)
        .into_iter()
        .map(|v| v.check_id.to_string())
        .collect();
    FilterResult {
        passed: ids.is_empty(),
        violations: ids.into_iter().collect(),
    }
}

/// Prior lookup, ratio adjustment, geometry and filter in one step.
#[derive(Debug, Clone, PartialEq)]
pub struct Filtered {
    pub params: OphParams,
    pub geometry: Vec<DerivedFingerGeometry>,
    pub result: FilterResult,
}

/// Applies the prior for `grasp` (identity when `None`) to model-proposed
/// parameters, derives geometry with the prior's joint and link multipliers
/// and runs the filter.
pub fn prepare_and_filter(
    raw: &OphParams,
    grasp: Option<GraspType>,
    priors: &GraspPriorTable,
    ratios: &RatioConfig,
    constraints: &ConstraintConfig,
) -> Filtered {
    let identity = GraspPrior::identity();
    let prior = grasp.map(|g| priors.get(g)).unwrap_or(&identity);
    let params = apply_priors(raw, prior);
    let geometry = derive_all(&params, &ratios.with_prior(prior));
    let result = check_constraints(&params, &geometry, constraints);
    Filtered {
        params,
        geometry,
        result,
    }
}

/// Geometry and filter for already-prior-adjusted parameters (used after
/// refinement, where the parameters on record already carry the prior).
pub fn refilter(
    params: &OphParams,
    grasp: Option<GraspType>,
    priors: &GraspPriorTable,
    ratios: &RatioConfig,
    constraints: &ConstraintConfig,
) -> Filtered {
    let identity = GraspPrior::identity();
    let prior = grasp.map(|g| priors.get(g)).unwrap_or(&identity);
    let geometry = derive_all(params, &ratios.with_prior(prior));
    let result = check_constraints(params, &geometry, constraints);
    Filtered {
        params: params.clone(),
        geometry,
        result,
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ParamsError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("reply has {got} fingers but the structure has {expected}")]
    CountMismatch { expected: usize, got: usize },
    #[error("structure has no fingers")]
    EmptyStructure,
}

#[derive(Debug, Clone, Copy)]
pub struct ParamsContext<'a> {
    pub task: &'a str,
    pub design_cue: &'a str,
    pub scope: Option<&'a str>,
    pub settings: &'a LlmSettings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedParams {
    pub params: OphParams,
    pub calls: usize,
}

/// "3 joints / 2 links; ..." in palm-adjacency order.
pub fn chain_summary(graph: &HandGraph) -> String {
    Topology::of(graph)
        .fingers
        .iter()
        .map(|f| format!("{} joints / {} links", f.joints, f.links))
        .collect::<Vec<_>>()
        .join("; ")
}

fn parse_params(value: serde_json::Value) -> Result<OphParams, LlmError> {
    serde_json::from_value(value).map_err(|e| LlmError::Schema {
        path: String::new(),
        message: e.to_string(),
    })
}

/// Asks the model for parameters matching the structure's finger count.
/// At most two provider calls: a reply that fails to parse or has the wrong
/// finger count gets one repair prompt.
pub fn generate_params(
    structure: &HandGraph,
    schema: &SemanticSchema,
    ctx: &ParamsContext<'_>,
    provider: &dyn LlmProvider,
) -> Result<GeneratedParams, ParamsError> {
    let expected = Topology::of(structure).finger_count();
    if expected == 0 {
        return Err(ParamsError::EmptyStructure);
    }
    let bindings = BTreeMap::from([
        ("task", ctx.task.to_string()),
        ("schema_json", to_canonical_json(schema)),
        ("finger_count", expected.to_string()),
        ("chain_summary", chain_summary(structure)),
        ("design_cue", ctx.design_cue.to_string()),
    ]);
    let req = ctx
        .settings
        .request(Purpose::Params, render_prompt(template("params")?, &bindings)?, ctx.scope);
    let reply = request_json(provider, &req, SchemaId::Params)?;
    let mut calls = reply.calls;
    let mut params = parse_params(reply.value)?;
    if params.finger_count() != expected {
        if calls > 1 {
            return Err(ParamsError::CountMismatch {
                expected,
                got: params.finger_count(),
            });
        }
        let msg = format!(
            "\"fingers\" has {} entries but the structure has {expected} fingers",
            params.finger_count()
        );
        log::info!("params reply rejected ({msg}); requesting repair");
        let fixed = repair_roundtrip(provider, &req, &reply.raw, &msg, SchemaId::Params)?;
        calls += fixed.calls;
        params = parse_params(fixed.value)?;
        if params.finger_count() != expected {
            return Err(ParamsError::CountMismatch {
                expected,
                got: params.finger_count(),
            });
        }
    }
    Ok(GeneratedParams { params, calls })
}

/// Baseline: parameters straight from the task text, with no schema or
/// structure in the prompt and no finger-count contract.
pub fn generate_params_zero_shot(
    task: &str,
    scope: Option<&str>,
    settings: &LlmSettings,
    provider: &dyn LlmProvider,
) -> Result<GeneratedParams, ParamsError> {
    let bindings = BTreeMap::from([("task", task.to_string())]);
    let req = settings.request(
        Purpose::Params,
        render_prompt(template("params_zero_shot")?, &bindings)?,
        scope,
    );
    let reply = request_json(provider, &req, SchemaId::Params)?;
    Ok(GeneratedParams {
        params: parse_params(reply.value)?,
        calls: reply.calls,
    })
}

/// Baseline: uniform draws from the normalization ranges.
pub fn sample_random_params(norms: &ParamNorms, rng: &mut impl rand::Rng) -> OphParams {
    let n = rng.random_range(norms.finger_count[0]..=norms.finger_count[1]);
    let fingers = (0..n)
        .map(|_| FingerParams {
            mount_angle_deg: rng.random_range(norms.mount_angle_deg[0]..=norms.mount_angle_deg[1]),
            mount_translation_mm: rng
                .random_range(norms.mount_translation_mm[0]..=norms.mount_translation_mm[1]),
            metacarpal_length_mm: rng
                .random_range(norms.metacarpal_length_mm[0]..=norms.metacarpal_length_mm[1]),
            scale: rng.random_range(norms.scale[0]..=norms.scale[1]),
        })
        .collect();
    OphParams {
        fingers,
        palm_width_mm: rng.random_range(norms.palm_width_mm[0]..=norms.palm_width_mm[1]),
        palm_curvature: rng.random_range(norms.palm_curvature[0]..=norms.palm_curvature[1]),
    }
}

#[cfg(test)]
mod tests;
