//! One TOML file configures every stage. Missing sections fall back to the
//! built-in defaults; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cad::RendererConfig;
use crate::llm::{HttpConfig, LlmSettings};
use crate::metrics::MetricsConfig;
use crate::model::{DEFAULT_SEMANTIC_WEIGHT, DEFAULT_SIZE_WEIGHT};
use crate::params::{ConstraintConfig, GraspPriorTable, ParamNorms, RatioConfig};
use crate::validator::ValidatorConfig;

/// Shipped defaults, identical to `Config::default()`.
pub const DEFAULT_TOML: &str = include_str!("../config/default.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSettings {
    pub variants: usize,
    /// Cycled over variants; an empty list disables cues.
    pub design_cues: Vec<String>,
    pub seed: u64,
    pub semantic_weight: f64,
    pub size_weight: f64,
    pub quality_threshold: f64,
    pub max_refinements: usize,
    /// Run variants on worker threads.
    pub concurrent: bool,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            variants: 3,
            design_cues: vec![
                "Keep the hand easy to print: modular, symmetric fingers with generous clearances.".into(),
                "Make the hand compact, with an asymmetric finger arrangement such as an opposing thumb.".into(),
                "Favor extended reach: longer, more articulated fingers spread wide across the palm.".into(),
            ],
            seed: 7,
            semantic_weight: DEFAULT_SEMANTIC_WEIGHT,
            size_weight: DEFAULT_SIZE_WEIGHT,
            quality_threshold: 7.0,
            max_refinements: 1,
            concurrent: true,
        }
    }
}

impl RunSettings {
    pub fn check(&self) -> Result<(), String> {
        if self.variants == 0 {
            return Err("run.variants must be >= 1".into());
        }
        let (s, z) = (self.semantic_weight, self.size_weight);
        if s < 0.0 || z < 0.0 || (s + z - 1.0).abs() > 1e-9 {
            return Err("run.semantic_weight and run.size_weight must be non-negative and sum to 1".into());
        }
        if !(0.0..=10.0).contains(&self.quality_threshold) {
            return Err("run.quality_threshold must lie in [0, 10]".into());
        }
        if self.max_refinements > 1 {
            return Err("run.max_refinements must be 0 or 1".into());
        }
        Ok(())
    }

    /// Cue for 1-based variant `v`.
    pub fn cue_for(&self, v: u32) -> &str {
        if self.design_cues.is_empty() {
            "(no particular emphasis)"
        } else {
            &self.design_cues[(v as usize - 1) % self.design_cues.len()]
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CadSettings {
    /// Custom `.scad` template; its manifest sits next to it as `.toml`.
    pub template_path: Option<PathBuf>,
    pub renderer: RendererConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub run: RunSettings,
    pub llm: LlmSettings,
    pub http: HttpConfig,
    pub validator: ValidatorConfig,
    pub constraints: ConstraintConfig,
    pub ratios: RatioConfig,
    pub priors: GraspPriorTable,
    pub norms: ParamNorms,
    pub metrics: MetricsConfig,
    pub cad: CadSettings,
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

impl Config {
    pub fn from_toml(text: &str) -> Result<Config, ConfigError> {
        let c: Config = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        c.check()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Config::from_toml(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        let checks = [
            self.run.check(),
            self.validator.check(),
            self.constraints.check(),
            self.ratios.check(),
            self.priors.check(),
            self.norms.check(),
            self.metrics.check(),
        ];
        for c in checks {
            c.map_err(ConfigError)?;
        }
        if self.http.max_attempts == 0 || self.http.max_in_flight == 0 || !(self.http.timeout_s > 0.0) {
            return Err(ConfigError("http limits must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_file_matches_defaults() {
        assert_eq!(Config::from_toml(DEFAULT_TOML).unwrap(), Config::default());
    }

    #[test]
    fn empty_file_is_all_defaults() {
        assert_eq!(Config::from_toml("").unwrap(), Config::default());
    }

    #[test]
    fn partial_override() {
        let c = Config::from_toml("[run]\nvariants = 5\n[constraints]\nmin_mount_separation_mm = 10.0\n").unwrap();
        assert_eq!(c.run.variants, 5);
        assert_eq!(c.constraints.min_mount_separation_mm, 10.0);
        assert_eq!(c.constraints.mount_angle_abs_max_deg, 75.0);
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        let e = Config::from_toml("[run]\nvariantz = 5\n").unwrap_err();
        assert!(e.0.contains("variantz"), "{e}");
        assert!(Config::from_toml("[run]\nsemantic_weight = 0.9\n").is_err());
        assert!(Config::from_toml("[constraints]\nslenderness_range = [6.0, 1.5]\n").is_err());
        assert!(Config::from_toml("[run]\nvariants = 0\n").is_err());
    }

    #[test]
    fn cues_cycle() {
        let r = RunSettings::default();
        assert_eq!(r.cue_for(4), r.cue_for(1));
        assert_ne!(r.cue_for(1), r.cue_for(2));
        let none = RunSettings { design_cues: vec![], ..r };
        assert_eq!(none.cue_for(2), none.cue_for(1));
    }
}
