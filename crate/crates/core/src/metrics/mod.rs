//! Quantitative measures over generated designs: validity rate, task-level
//! diversity, the grasp force heuristic, design features and PCA.

mod diversity;
mod features;
mod gfl;
mod pca;

use serde::{Deserialize, Serialize};

pub use diversity::{
    diversity_geometry, diversity_text, rule_tokens, task_diversity, DiversityError, DiversityItem,
    DiversityWeights, PairDiversity, TaskDiversity,
};
pub use features::{FeatureVector, FEATURE_NAMES};
pub use gfl::{gfl, gfl_factors, GflFactors, GflNorms, GflWeights};
pub use pca::{pca_fit, pca_project, symmetric_eigen, PcaError, PcaModel};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MvrError {
    #[error("validity rate of an empty batch is undefined")]
    EmptyBatch,
    #[error("{valid} valid designs out of {total}")]
    MoreValidThanTotal { valid: usize, total: usize },
}

/// Valid-over-total counts. Shards merge by summing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MvrCounts {
    pub valid: usize,
    pub total: usize,
}

impl MvrCounts {
    pub fn record(&mut self, passed: bool) {
        self.total += 1;
        self.valid += usize::from(passed);
    }

    pub fn merge(self, other: MvrCounts) -> MvrCounts {
        MvrCounts {
            valid: self.valid + other.valid,
            total: self.total + other.total,
        }
    }

    pub fn rate(self) -> Result<f64, MvrError> {
        mvr(self.valid, self.total)
    }
}

/// Morphology validity rate: `valid / total`.
pub fn mvr(valid: usize, total: usize) -> Result<f64, MvrError> {
    if total == 0 {
        return Err(MvrError::EmptyBatch);
    }
    if valid > total {
        return Err(MvrError::MoreValidThanTotal { valid, total });
    }
    Ok(valid as f64 / total as f64)
}

/// Metric weights and normalization ranges, overridable from config.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    pub gfl_weights: GflWeights,
    pub gfl_norms: GflNorms,
    pub diversity_weights: DiversityWeights,
}

impl MetricsConfig {
    pub fn check(&self) -> Result<(), String> {
        self.gfl_weights.check()?;
        self.gfl_norms.check()?;
        self.diversity_weights.check()
    }
}

pub(crate) fn weights_sum_to_one(name: &str, ws: &[f64]) -> Result<(), String> {
    if ws.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(format!("{name} must be non-negative"));
    }
    let sum: f64 = ws.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(format!("{name} must sum to 1, got {sum}"));
    }
    Ok(())
}

/// Min-max normalization clamped to [0, 1].
pub(crate) fn normalize(v: f64, [lo, hi]: [f64; 2]) -> f64 {
    ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
}
