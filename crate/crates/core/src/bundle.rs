//! Versioned on-disk model: encodings, automaton, training counts and the
//! configuration that produced them.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::automaton::Automaton;
use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::flow::ColumnMapping;
use crate::scorer::TrainingCounts;
use crate::tracegen::EncodingSet;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub flows: usize,
    pub traces: usize,
    pub pta_states: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format_version: u32,
    pub config: ModelConfig,
    pub mapping: ColumnMapping,
    pub encodings: EncodingSet,
    pub automaton: Automaton,
    pub training_counts: TrainingCounts,
    /// Alert threshold derived from the training traces, if the policy asks for one.
    pub validation_threshold: Option<f64>,
    pub summary: TrainSummary,
}

impl ModelBundle {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            format_version: u32,
        }
        let header: Header = serde_json::from_str(text)?;
        if header.format_version != FORMAT_VERSION {
            return Err(Error::BundleVersion {
                found: header.format_version,
                expected: FORMAT_VERSION,
            });
        }
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Threshold that splits alerts from the rest under the configured policy.
    pub fn threshold(&self) -> f64 {
        match self.config.threshold {
            crate::config::ThresholdPolicy::Fixed { value } => value,
            crate::config::ThresholdPolicy::ValidationPercentile { .. } => {
                self.validation_threshold.unwrap_or(f64::INFINITY)
            }
        }
    }
}
