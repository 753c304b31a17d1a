//! Grasp force level: a morphology-only heuristic in [0, 1]. Not a physical
//! force estimate.

use serde::{Deserialize, Serialize};

use super::{normalize, weights_sum_to_one};
use crate::model::{DerivedFingerGeometry, OphParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GflWeights {
    pub w_joint: f64,
    pub w_width: f64,
    pub w_length: f64,
    pub w_count: f64,
    pub w_harmony: f64,
}

impl Default for GflWeights {
    fn default() -> Self {
        GflWeights {
            w_joint: 0.30,
            w_width: 0.25,
            w_length: 0.15,
            w_count: 0.15,
            w_harmony: 0.15,
        }
    }
}

impl GflWeights {
    pub fn check(&self) -> Result<(), String> {
        weights_sum_to_one(
            "gfl weights",
            &[self.w_joint, self.w_width, self.w_length, self.w_count, self.w_harmony],
        )
    }
}

/// Ranges each factor is min-max normalized against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GflNorms {
    pub joint_diameter_mm: [f64; 2],
    pub link_width_mm: [f64; 2],
    pub finger_length_mm: [f64; 2],
    pub finger_count: [f64; 2],
}

impl Default for GflNorms {
    fn default() -> Self {
        GflNorms {
            joint_diameter_mm: [8.0, 20.0],
            link_width_mm: [8.0, 25.0],
            finger_length_mm: [40.0, 140.0],
            finger_count: [1.0, 5.0],
        }
    }
}

impl GflNorms {
    pub fn check(&self) -> Result<(), String> {
        for (name, [lo, hi]) in [
            ("joint_diameter_mm", self.joint_diameter_mm),
            ("link_width_mm", self.link_width_mm),
            ("finger_length_mm", self.finger_length_mm),
            ("finger_count", self.finger_count),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(format!("gfl norm {name} must satisfy min < max"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GflFactors {
    pub joint: f64,
    pub width: f64,
    pub length: f64,
    pub count: f64,
    pub harmony: f64,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// The five normalized factors. Empty hands get all-zero factors.
pub fn gfl_factors(geometry: &[DerivedFingerGeometry], params: &OphParams, norms: &GflNorms) -> GflFactors {
    if params.fingers.is_empty() {
        return GflFactors {
            joint: 0.0,
            width: 0.0,
            length: 0.0,
            count: 0.0,
            harmony: 0.0,
        };
    }
    let joint = mean(geometry.iter().flat_map(|g| g.joint_diameters_mm));
    let width = mean(geometry.iter().flat_map(|g| g.link_widths_mm));
    let length = mean(geometry.iter().map(|g| g.total_length_mm));

    let scales: Vec<f64> = params.fingers.iter().map(|f| f.scale).collect();
    let m = mean(scales.iter().copied());
    let sd = mean(scales.iter().map(|s| (s - m) * (s - m))).sqrt();
    let harmony = if m > 0.0 { (1.0 - sd / m).clamp(0.0, 1.0) } else { 0.0 };

    GflFactors {
        joint: normalize(joint, norms.joint_diameter_mm),
        width: normalize(width, norms.link_width_mm),
        length: normalize(length, norms.finger_length_mm),
        count: normalize(params.finger_count() as f64, norms.finger_count),
        harmony,
    }
}

pub fn gfl(
    geometry: &[DerivedFingerGeometry],
    params: &OphParams,
    norms: &GflNorms,
    weights: &GflWeights,
) -> f64 {
    let f = gfl_factors(geometry, params, norms);
    let total = weights.w_joint * f.joint
        + weights.w_width * f.width
        + weights.w_length * f.length
        + weights.w_count * f.count
        + weights.w_harmony * f.harmony;
    total.clamp(0.0, 1.0)
}
