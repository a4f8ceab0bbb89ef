//! TOML run configuration. Every section is optional and every key inside a
//! section falls back to its default, so a file only needs the values it
//! changes. Command-line flags override file values. The fully resolved
//! configuration is written into each run directory as `config.toml`.
//!
//! ```toml
//! [synth]
//! train_count = 400
//!
//! [synth.scene]          # scene generator
//! span = [80.0, 128.0]
//!
//! [detector]             # toy detector architecture
//! channels = [16, 32, 64, 64, 128, 128]
//!
//! [detector_training]
//! epochs = 30
//!
//! [patch_training]
//! epochs = 200
//! learning_rate = 0.03
//! patch_size = [16, 16]
//! weights = { alpha = 0.01, beta = 2.5, gamma = 0.0 }
//! patch_config = { rel_width = 0.1, rel_height = 0.1, placement = "on_top_center" }
//!
//! [evaluation]
//! match_iou = 0.5
//!
//! [ingest]
//! tile_size = 1024
//! target_class = "plane"
//! ```

use std::path::Path;

use aerocamo_core::detector::DetectorTrainConfig;
use aerocamo_core::eval::EvalConfig;
use aerocamo_core::synth::SynthConfig;
use aerocamo_core::{ToyDetectorConfig, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::annotations::AnnotationFormat;
use crate::error::{self, AppError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub tile_size: usize,
    pub overlap: usize,
    pub min_visible: f64,
    /// Class name that becomes class id 0; tiles without it are dropped.
    pub target_class: String,
    pub format: AnnotationFormat,
    pub test_fraction: f64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            tile_size: 1024,
            overlap: 0,
            min_visible: 0.3,
            target_class: "plane".into(),
            format: AnnotationFormat::Dota,
            test_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub scene: SynthConfig,
    pub train_count: usize,
    pub test_count: usize,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self { scene: SynthConfig::default(), train_count: 400, test_count: 100 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub synth: SynthSection,
    pub detector: ToyDetectorConfig,
    pub detector_training: DetectorTrainConfig,
    pub patch_training: TrainConfig,
    pub evaluation: EvalConfig,
    pub ingest: IngestConfig,
}

impl RunConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| AppError::format(path, e.message()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&error::read_string(path)?, path)
    }

    /// Defaults, or the file's values when a path is given.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    /// Propagates the top-level seed to every stage.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.detector_training.seed = seed;
        self.patch_training.seed = seed;
        self.evaluation.seed = seed;
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration serializes to TOML")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg = RunConfig::parse("[patch_training]\nepochs = 7\n", Path::new("c.toml")).unwrap();
        assert_eq!(cfg.patch_training.epochs, 7);
        assert_eq!(cfg.patch_training.learning_rate, TrainConfig::default().learning_rate);
        assert_eq!(cfg.detector, ToyDetectorConfig::default());
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(RunConfig::parse("[patch_training]\nepoch = 7\n", Path::new("c.toml")).is_err());
    }

    #[test]
    fn snapshot_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.set_seed(11);
        cfg.patch_training.target_class = Some(0);
        cfg.evaluation.transform = aerocamo_core::trainer::TransformPolicy::Identity;
        let back = RunConfig::parse(&cfg.to_toml(), Path::new("c.toml")).unwrap();
        assert_eq!(back, cfg);
    }
}
