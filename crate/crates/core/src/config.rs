//! Pipeline configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attacks::AttackKind;
use crate::automaton::MergeParams;
use crate::encoder::{EncoderParams, Feature};
use crate::error::{Error, Result};
use crate::flow::{ColumnMapping, DEFAULT_ERROR_CAP};
use crate::scorer::ScoreParams;
use crate::tracegen::WindowParams;

/// What to do with non-benign rows in the training file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TrainFilter {
    /// Refuse training data containing malicious rows.
    #[default]
    None,
    /// Train on rows labelled benign only.
    BenignOnly,
    /// Drop malicious rows, keep benign and unlabelled ones.
    DropMalicious,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThresholdPolicy {
    /// Percentile of the training traces' own scores, replayed as a stream.
    ValidationPercentile { percentile: f64 },
    Fixed { value: f64 },
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        ThresholdPolicy::ValidationPercentile { percentile: 95.0 }
    }
}

/// Everything that determines a trained model; stored in the bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub features: Vec<Feature>,
    pub encoder: EncoderParams,
    pub window: WindowParams,
    pub merge: MergeParams,
    pub score: ScoreParams,
    pub threshold: ThresholdPolicy,
    pub train_filter: TrainFilter,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            features: Feature::DEFAULT_ORDER.to_vec(),
            encoder: EncoderParams::default(),
            window: WindowParams::default(),
            merge: MergeParams::default(),
            score: ScoreParams::default(),
            threshold: ThresholdPolicy::default(),
            train_filter: TrainFilter::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.features.is_empty() {
            return Err(Error::Config("at least one feature is required".into()));
        }
        let mut seen = self.features.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.features.len() {
            return Err(Error::Config("features are listed twice".into()));
        }
        if self.encoder.bins == 0 || self.encoder.restarts == 0 || self.encoder.clusters == 0 {
            return Err(Error::Config(
                "encoder bins, restarts and clusters must be positive".into(),
            ));
        }
        if self.encoder.clusters_per_feature.values().any(|&k| k == 0) {
            return Err(Error::Config("per-feature cluster counts must be positive".into()));
        }
        if self.window.length == 0 || self.window.stride == 0 {
            return Err(Error::Config("window length and stride must be positive".into()));
        }
        self.merge.validate()?;
        if !(self.score.alpha_smooth >= 0.0 && self.score.alpha_smooth.is_finite()) {
            return Err(Error::Config("smoothing pseudocount must be >= 0".into()));
        }
        if let ThresholdPolicy::ValidationPercentile { percentile } = self.threshold {
            if !(0.0..=100.0).contains(&percentile) {
                return Err(Error::Config("threshold percentile must lie in [0, 100]".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default)]
    pub train: Option<PathBuf>,
    #[serde(default)]
    pub test: Option<PathBuf>,
    #[serde(default = "default_error_cap")]
    pub error_cap: usize,
    pub mapping: ColumnMapping,
}

fn default_error_cap() -> usize {
    DEFAULT_ERROR_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub repetitions: usize,
    pub seed: u64,
    /// Attacked conditions evaluated besides the clean test set.
    pub attacks: Vec<AttackKind>,
    pub frequency_min_count: usize,
    pub attack_window: usize,
    pub out_dir: PathBuf,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            repetitions: 10,
            seed: 0,
            attacks: AttackKind::ALL.to_vec(),
            frequency_min_count: 100,
            attack_window: 10,
            out_dir: PathBuf::from("report"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub data: DataConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text)?;
        cfg.model.validate()?;
        Ok(cfg)
    }

    /// Loads a config file; relative data paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.data.train, &mut cfg.data.test].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always representable as TOML")
    }

    pub fn train_path(&self) -> Result<&Path> {
        self.data
            .train
            .as_deref()
            .ok_or_else(|| Error::Config("no training file configured".into()))
    }

    pub fn test_path(&self) -> Result<&Path> {
        self.data
            .test
            .as_deref()
            .ok_or_else(|| Error::Config("no test file configured".into()))
    }
}
