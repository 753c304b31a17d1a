//! Constraint, ratio, prior and normalization tables. Every number here is a
//! default that the TOML config can override.

use serde::{Deserialize, Serialize};

use crate::model::GraspType;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstraintConfig {
    pub finger_count_range: [usize; 2],
    pub joint_diameter_range_mm: [f64; 2],
    pub link_width_range_mm: [f64; 2],
    /// Link length over link width.
    pub slenderness_range: [f64; 2],
    pub finger_total_length_range_mm: [f64; 2],
    pub mount_angle_abs_max_deg: f64,
    pub min_mount_separation_mm: f64,
    /// Printable volume (x, y, z).
    pub build_volume_mm: [f64; 3],
}

impl Default for ConstraintConfig {
    fn default() -> Self {
        ConstraintConfig {
            finger_count_range: [2, 5],
            joint_diameter_range_mm: [8.0, 20.0],
            link_width_range_mm: [8.0, 25.0],
            slenderness_range: [1.5, 6.0],
            finger_total_length_range_mm: [40.0, 140.0],
            mount_angle_abs_max_deg: 75.0,
            min_mount_separation_mm: 12.0,
            build_volume_mm: [220.0, 220.0, 250.0],
        }
    }
}

fn range_ok(name: &str, r: [f64; 2]) -> Result<(), String> {
    if r[0].is_finite() && r[1].is_finite() && r[0] < r[1] {
        Ok(())
    } else {
        Err(format!("{name} must satisfy min < max, got {r:?}"))
    }
}

impl ConstraintConfig {
    pub fn check(&self) -> Result<(), String> {
        if self.finger_count_range[0] >= self.finger_count_range[1] {
            return Err(format!(
                "finger_count_range must satisfy min < max, got {:?}",
                self.finger_count_range
            ));
        }
        range_ok("joint_diameter_range_mm", self.joint_diameter_range_mm)?;
        range_ok("link_width_range_mm", self.link_width_range_mm)?;
        range_ok("slenderness_range", self.slenderness_range)?;
        range_ok("finger_total_length_range_mm", self.finger_total_length_range_mm)?;
        if !(self.mount_angle_abs_max_deg > 0.0) || !(self.min_mount_separation_mm >= 0.0) {
            return Err("mount limits must be positive".into());
        }
        if self.build_volume_mm.iter().any(|v| !(*v > 0.0)) {
            return Err("build_volume_mm entries must be positive".into());
        }
        Ok(())
    }
}

/// Fixed proportions that turn one scale value per finger into full
/// finger geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RatioConfig {
    /// Base length of each phalanx before its ratio (proximal, intermediate, distal).
    pub base_phalanx_lengths_mm: [f64; 3],
    pub phalanx_ratios: [f64; 3],
    pub base_joint_diameter_mm: f64,
    pub joint_ratios: [f64; 3],
    pub base_link_width_mm: f64,
    pub link_width_ratios: [f64; 3],
}

impl Default for RatioConfig {
    fn default() -> Self {
        RatioConfig {
            base_phalanx_lengths_mm: [36.0, 36.0, 36.0],
            phalanx_ratios: [1.0, 0.65, 0.5],
            base_joint_diameter_mm: 13.0,
            joint_ratios: [1.0, 0.9, 0.8],
            base_link_width_mm: 12.0,
            link_width_ratios: [1.0, 0.9, 0.78],
        }
    }
}

impl RatioConfig {
    pub fn check(&self) -> Result<(), String> {
        let all = self
            .base_phalanx_lengths_mm
            .iter()
            .chain(&self.phalanx_ratios)
            .chain(&self.joint_ratios)
            .chain(&self.link_width_ratios)
            .chain([&self.base_joint_diameter_mm, &self.base_link_width_mm]);
        for v in all {
            if !(v.is_finite() && *v > 0.0) {
                return Err(format!("ratio table entries must be positive, got {v}"));
            }
        }
        Ok(())
    }

    /// Ratios with a grasp prior's joint and link multipliers folded in.
    pub fn with_prior(&self, prior: &GraspPrior) -> RatioConfig {
        RatioConfig {
            base_joint_diameter_mm: self.base_joint_diameter_mm * prior.joint_size_multiplier,
            base_link_width_mm: self.base_link_width_mm * prior.link_width_multiplier,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraspPrior {
    pub finger_scale_multiplier: f64,
    pub joint_size_multiplier: f64,
    pub link_width_multiplier: f64,
    pub curvature_range: [f64; 2],
    pub bone_length_offset_mm: f64,
}

impl GraspPrior {
    pub fn identity() -> Self {
        GraspPrior {
            finger_scale_multiplier: 1.0,
            joint_size_multiplier: 1.0,
            link_width_multiplier: 1.0,
            curvature_range: [0.0, 1.0],
            bone_length_offset_mm: 0.0,
        }
    }

    pub fn check(&self) -> Result<(), String> {
        for m in [
            self.finger_scale_multiplier,
            self.joint_size_multiplier,
            self.link_width_multiplier,
        ] {
            if !(m.is_finite() && m > 0.0) {
                return Err(format!("prior multipliers must be positive, got {m}"));
            }
        }
        let [lo, hi] = self.curvature_range;
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return Err(format!("curvature_range must lie within [0, 1] with min <= max, got {:?}", self.curvature_range));
        }
        if !self.bone_length_offset_mm.is_finite() {
            return Err("bone_length_offset_mm must be finite".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraspPriorTable {
    pub force_based: GraspPrior,
    pub fine_manipulation: GraspPrior,
    pub tool_based: GraspPrior,
}

impl Default for GraspPriorTable {
    fn default() -> Self {
        GraspPriorTable {
            force_based: GraspPrior {
                finger_scale_multiplier: 1.2,
                joint_size_multiplier: 1.2,
                link_width_multiplier: 1.25,
                curvature_range: [0.0, 0.6],
                bone_length_offset_mm: 5.0,
            },
            fine_manipulation: GraspPrior {
                finger_scale_multiplier: 0.85,
                joint_size_multiplier: 0.8,
                link_width_multiplier: 0.85,
                curvature_range: [0.4, 1.0],
                bone_length_offset_mm: -5.0,
            },
            tool_based: GraspPrior {
                finger_scale_multiplier: 1.05,
                joint_size_multiplier: 1.1,
                link_width_multiplier: 1.1,
                curvature_range: [0.2, 0.8],
                bone_length_offset_mm: 0.0,
            },
        }
    }
}

impl GraspPriorTable {
    pub fn get(&self, grasp: GraspType) -> &GraspPrior {
        match grasp {
            GraspType::ForceBased => &self.force_based,
            GraspType::FineManipulation => &self.fine_manipulation,
            GraspType::ToolBased => &self.tool_based,
        }
    }

    pub fn check(&self) -> Result<(), String> {
        for g in GraspType::ALL {
            self.get(g).check().map_err(|e| format!("{g}: {e}"))?;
        }
        Ok(())
    }
}

/// Min-max ranges used to normalize raw parameters (geometry diversity) and
/// to sample the random baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamNorms {
    pub mount_angle_deg: [f64; 2],
    pub mount_translation_mm: [f64; 2],
    pub metacarpal_length_mm: [f64; 2],
    pub scale: [f64; 2],
    pub palm_width_mm: [f64; 2],
    pub palm_curvature: [f64; 2],
    /// Finger counts drawn by the random baseline.
    pub finger_count: [usize; 2],
}

impl Default for ParamNorms {
    fn default() -> Self {
        ParamNorms {
            mount_angle_deg: [-90.0, 90.0],
            mount_translation_mm: [-60.0, 60.0],
            metacarpal_length_mm: [5.0, 60.0],
            scale: [0.5, 1.5],
            palm_width_mm: [30.0, 120.0],
            palm_curvature: [0.0, 1.0],
            finger_count: [2, 5],
        }
    }
}

impl ParamNorms {
    pub fn check(&self) -> Result<(), String> {
        range_ok("mount_angle_deg", self.mount_angle_deg)?;
        range_ok("mount_translation_mm", self.mount_translation_mm)?;
        range_ok("metacarpal_length_mm", self.metacarpal_length_mm)?;
        range_ok("scale", self.scale)?;
        range_ok("palm_width_mm", self.palm_width_mm)?;
        range_ok("palm_curvature", self.palm_curvature)?;
        if self.scale[0] <= 0.0 || self.metacarpal_length_mm[0] <= 0.0 || self.palm_width_mm[0] <= 0.0 {
            return Err("scale, metacarpal and palm width ranges must be positive".into());
        }
        if self.palm_curvature[0] < 0.0 || self.palm_curvature[1] > 1.0 {
            return Err("palm_curvature range must lie within [0, 1]".into());
        }
        let [lo, hi] = self.finger_count;
        if lo == 0 || lo > hi || hi > crate::model::MAX_FINGERS {
            return Err("finger_count range must lie within [1, 8]".into());
        }
        Ok(())
    }
}
