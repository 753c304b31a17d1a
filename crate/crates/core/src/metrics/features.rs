//! Fixed 11-feature design representation used for PCA and CSV export.

use serde::{Deserialize, Serialize};

use crate::model::{DerivedFingerGeometry, OphParams};
use crate::params::footprint;

pub const FEATURE_NAMES: [&str; 11] = [
    "finger_count",
    "mean_finger_scale",
    "mean_metacarpal_mm",
    "palm_width_mm",
    "palm_curvature",
    "mount_angle_spread_deg",
    "mount_translation_spread_mm",
    "mean_joint_diameter_mm",
    "mean_link_slenderness",
    "total_hand_span_mm",
    "mean_finger_total_length_mm",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureVector {
    pub finger_count: f64,
    pub mean_finger_scale: f64,
    pub mean_metacarpal_mm: f64,
    pub palm_width_mm: f64,
    pub palm_curvature: f64,
    /// max - min mount angle.
    pub mount_angle_spread_deg: f64,
    /// max - min mount translation.
    pub mount_translation_spread_mm: f64,
    pub mean_joint_diameter_mm: f64,
    pub mean_link_slenderness: f64,
    /// Planar extent of the footprint box.
    pub total_hand_span_mm: f64,
    pub mean_finger_total_length_mm: f64,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 { 0.0 } else { s / n as f64 }
}

fn spread(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    let min = values.fold(f64::INFINITY, f64::min);
    if max.is_finite() { max - min } else { 0.0 }
}

impl FeatureVector {
    pub fn from_design(params: &OphParams, geometry: &[DerivedFingerGeometry]) -> FeatureVector {
        let f = &params.fingers;
        FeatureVector {
            finger_count: f.len() as f64,
            mean_finger_scale: mean(f.iter().map(|x| x.scale)),
            mean_metacarpal_mm: mean(f.iter().map(|x| x.metacarpal_length_mm)),
            palm_width_mm: params.palm_width_mm,
            palm_curvature: params.palm_curvature,
            mount_angle_spread_deg: spread(f.iter().map(|x| x.mount_angle_deg)),
            mount_translation_spread_mm: spread(f.iter().map(|x| x.mount_translation_mm)),
            mean_joint_diameter_mm: mean(geometry.iter().flat_map(|g| g.joint_diameters_mm)),
            mean_link_slenderness: mean(geometry.iter().flat_map(|g| g.slenderness())),
            total_hand_span_mm: footprint(params, geometry)[0],
            mean_finger_total_length_mm: mean(geometry.iter().map(|g| g.total_length_mm)),
        }
    }

    /// Values in [`FEATURE_NAMES`] order.
    pub fn to_array(&self) -> [f64; 11] {
        [
            self.finger_count,
            self.mean_finger_scale,
            self.mean_metacarpal_mm,
            self.palm_width_mm,
            self.palm_curvature,
            self.mount_angle_spread_deg,
            self.mount_translation_spread_mm,
            self.mean_joint_diameter_mm,
            self.mean_link_slenderness,
            self.total_hand_span_mm,
            self.mean_finger_total_length_mm,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FingerParams;
    use crate::params::{derive_all, RatioConfig};

    #[test]
    fn features_of_a_symmetric_hand() {
        let p = OphParams {
            fingers: [(-20.0, -18.0), (0.0, 0.0), (20.0, 18.0)]
                .into_iter()
                .map(|(a, t)| FingerParams {
                    mount_angle_deg: a,
                    mount_translation_mm: t,
                    metacarpal_length_mm: 20.0,
                    scale: 1.0,
                })
                .collect(),
            palm_width_mm: 60.0,
            palm_curvature: 0.35,
        };
        let g = derive_all(&p, &RatioConfig::default());
        let f = FeatureVector::from_design(&p, &g);
        assert_eq!(f.finger_count, 3.0);
        assert_eq!(f.mount_angle_spread_deg, 40.0);
        assert_eq!(f.mount_translation_spread_mm, 36.0);
        assert!((f.mean_finger_total_length_mm - 97.4).abs() < 1e-9);
        assert!((f.mean_joint_diameter_mm - 13.0 * 2.7 / 3.0).abs() < 1e-9);
        assert!((f.total_hand_span_mm - (60.0 + 2.0 * 77.4)).abs() < 1e-9);
        assert!(f.to_array().iter().all(|v| v.is_finite()));
        assert_eq!(f.to_array()[3], 60.0);
    }
}
