//! Whole-run configuration: one JSON document wires the structure, coder,
//! learner, correction, and split settings together with the dataset and
//! output locations.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coder::CoderConfig;
use crate::error::Result;
use crate::eval::{Grids, SplitSpec};
use crate::groups::StructureSpec;
use crate::learner::LearnerConfig;
use crate::recommender::CorrectionConfig;

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_passes() -> usize {
    1
}

/// One run's full configuration. Serializes losslessly through JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub structure: StructureSpec,
    /// Coder used at prediction time; defaults to the learner's.
    #[serde(default)]
    pub coder: Option<CoderConfig>,
    pub learner: LearnerConfig,
    #[serde(default)]
    pub correction: CorrectionConfig,
    pub split: SplitSpec,
    pub dataset: PathBuf,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Passes over the training users.
    #[serde(default = "default_passes")]
    pub passes: usize,
    /// Grid definition for the sweep command.
    #[serde(default)]
    pub grids: Option<Grids>,
}

impl RunConfig {
    pub fn prediction_coder(&self) -> &CoderConfig {
        self.coder.as_ref().unwrap_or(&self.learner.coder)
    }

    pub fn validate(&self) -> Result<()> {
        self.structure.build()?;
        self.learner.validate()?;
        if let Some(coder) = &self.coder {
            coder.validate()?;
        }
        self.correction.validate()?;
        self.split.validate()?;
        if self.passes == 0 {
            return Err(crate::error::Error::param("passes must be at least 1"));
        }
        if let Some(grids) = &self.grids {
            grids.validate()?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text)?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_config() -> RunConfig {
        RunConfig {
            structure: StructureSpec::Toroid { d: 10, radius: 4 },
            coder: None,
            learner: LearnerConfig::new(CoderConfig::new(1.0 / 1024.0)),
            correction: CorrectionConfig::default(),
            split: SplitSpec::new(17),
            dataset: PathBuf::from("data/jester.csv"),
            output_dir: PathBuf::from("out"),
            passes: 1,
            grids: None,
        }
    }

    #[test]
    fn json_roundtrip_is_lossless() {
        let cfg = sample_config();
        let json = serde_json::to_string_pretty(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        let cfg = sample_config();
        cfg.save(&path).unwrap();
        let back = RunConfig::load(&path).unwrap();
        assert_eq!(cfg, back);
        assert!(back.validate().is_ok());
    }

    #[test]
    fn minimal_json_uses_defaults() {
        let json = r#"{
            "structure": {"kind": "tree", "levels": 4},
            "learner": {"coder": {"kappa": 0.25}},
            "split": {"seed": 3},
            "dataset": "ratings.csv"
        }"#;
        let cfg: RunConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.passes, 1);
        assert_eq!(cfg.learner.minibatch, 8);
        assert_eq!(cfg.learner.coder.eta, 0.5);
        assert_eq!(cfg.prediction_coder().kappa, 0.25);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn invalid_subconfig_fails_validation() {
        let mut cfg = sample_config();
        cfg.learner.coder.kappa = -1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = sample_config();
        cfg.passes = 0;
        assert!(cfg.validate().is_err());
    }
}
