use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::DEFAULT_CLUSTER_THRESHOLD;
use crate::session::{DEFAULT_MAX_SESSION_LEN, DEFAULT_TIMEOUT_MINUTES};
use crate::vague::DEFAULT_ALPHA;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{name} must lie in {range}, got {value}")]
    OutOfRange {
        name: &'static str,
        range: &'static str,
        value: f64,
    },
}

/// Every knob that shapes a trained model. Stored verbatim in the model
/// file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub session_timeout_minutes: u64,
    pub max_session_len: usize,
    pub cluster_threshold: f64,
    pub no_cluster: bool,
    /// Normalized urls describing the browsing context used to pick the
    /// working cluster. Empty selects the largest cluster.
    pub context: Vec<String>,
    pub alpha1: f64,
    pub alpha2: f64,
    pub min_support: f64,
    pub min_confidence: f64,
    pub fallback_popular: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            session_timeout_minutes: DEFAULT_TIMEOUT_MINUTES,
            max_session_len: DEFAULT_MAX_SESSION_LEN,
            cluster_threshold: DEFAULT_CLUSTER_THRESHOLD,
            no_cluster: false,
            context: Vec::new(),
            alpha1: DEFAULT_ALPHA,
            alpha2: DEFAULT_ALPHA,
            min_support: 0.0,
            min_confidence: 0.0,
            fallback_popular: false,
        }
    }
}

impl ModelConfig {
    /// Unpruned, unclustered configuration: every observed pair becomes a
    /// rule.
    pub fn unpruned() -> Self {
        Self {
            no_cluster: true,
            alpha1: 0.0,
            alpha2: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let unit = [
            ("cluster threshold", self.cluster_threshold),
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("min support", self.min_support),
            ("min confidence", self.min_confidence),
        ];
        for (name, value) in unit {
            if !(0.0..=1.0).contains(&value) {
                return Err(ConfigError::OutOfRange {
                    name,
                    range: "[0, 1]",
                    value,
                });
            }
        }
        if self.session_timeout_minutes == 0 {
            return Err(ConfigError::OutOfRange {
                name: "session timeout",
                range: "minutes >= 1",
                value: 0.0,
            });
        }
        if self.max_session_len == 0 {
            return Err(ConfigError::OutOfRange {
                name: "max session length",
                range: ">= 1",
                value: 0.0,
            });
        }
        Ok(())
    }
}
