//! Run configuration: every tunable of the engine and the harness in one
//! serializable document.
//!
//! Resolution order is defaults, then the JSON config file, then CLI flags.
//! [`Config::validate`] reports the first invalid field by its dotted path.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actions::ActionParams;
use crate::harness::GrounderConfig;
use crate::perceptor::PrefixTemplate;
use crate::planner::SearchConfig;
use crate::reward::RewardWeights;

/// An invalid configuration value, named by field path.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }

    /// Prefixes the field path with `parent.`.
    pub fn within(mut self, parent: &str) -> Self {
        self.field = format!("{parent}.{}", self.field);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    /// Deterministic token hashing; needs no assets.
    Mock,
    /// Precomputed `text -> vector` JSON map.
    File,
    /// HTTP embedding service.
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub mock_dimension: usize,
    pub embeddings_file: Option<String>,
    pub endpoint: Option<String>,
    pub timeout_ms: u64,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            kind: ProviderKind::Mock,
            mock_dimension: 256,
            embeddings_file: None,
            endpoint: None,
            timeout_ms: 10_000,
        }
    }
}

impl ProviderConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        match self.kind {
            ProviderKind::Mock if self.mock_dimension == 0 => {
                Err(ConfigError::new("mock_dimension", "must be at least 1"))
            }
            ProviderKind::File if self.embeddings_file.is_none() => {
                Err(ConfigError::new("embeddings_file", "required when kind is \"file\""))
            }
            ProviderKind::Remote if self.endpoint.is_none() => {
                Err(ConfigError::new("endpoint", "required when kind is \"remote\" (or set EMBEDDER_URL)"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub search: SearchConfig,
    pub template: PrefixTemplate,
    pub provider: ProviderConfig,
    pub grounder: GrounderConfig,
    pub parallelism: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            search: SearchConfig::default(),
            template: PrefixTemplate::default(),
            provider: ProviderConfig::default(),
            grounder: GrounderConfig::default(),
            parallelism: 1,
        }
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::new("config", e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("config", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn action_params(&self) -> &ActionParams {
        &self.search.action_params
    }

    pub fn reward_weights(&self) -> &RewardWeights {
        &self.search.reward_weights
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.search.validate().map_err(|e| e.within("search"))?;
        self.provider.validate().map_err(|e| e.within("provider"))?;
        self.grounder.validate().map_err(|e| e.within("grounder"))?;
        if self.parallelism == 0 {
            return Err(ConfigError::new("parallelism", "must be at least 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_carry_published_values() {
        let c = Config::default();
        assert!(c.validate().is_ok());
        assert_eq!(c.search.rollout_budget, 8);
        assert_eq!(c.search.max_depth, 3);
        assert_eq!(c.search.uct_c, 1.0);
        let w = &c.search.reward_weights;
        assert_eq!((w.alpha, w.beta, w.gamma), (0.4, 0.4, 0.2));
        assert_eq!((w.lambda_noninteractive, w.tau), (0.5, 0.1));
        let a = &c.search.action_params;
        assert_eq!(a.focus_top_fraction, 0.15);
        assert_eq!(a.scatter_top_fraction, 0.10);
        assert_eq!(a.scatter_max_expand, 1.5);
        assert_eq!(a.shift_top_fraction, 0.15);
        assert_eq!(a.shift_max_iou, 0.3);
        assert_eq!(a.focus_shrink_ratio, 0.7);
    }

    #[test]
    fn json_round_trip_and_partial_files() {
        let c = Config::default();
        assert_eq!(Config::from_json(&c.to_json()).unwrap(), c);
        let partial = Config::from_json(r#"{"search": {"rollout_budget": 3}}"#).unwrap();
        assert_eq!(partial.search.rollout_budget, 3);
        assert_eq!(partial.search.max_depth, 3);
    }

    #[test]
    fn field_precise_errors() {
        let c = Config::from_json(r#"{"search": {"reward_weights": {"alpha": 0.5}}}"#).unwrap();
        let err = c.validate().unwrap_err();
        assert_eq!(err.field, "search.reward_weights.alpha+beta+gamma");

        let c = Config::from_json(r#"{"search": {"action_params": {"shift_max_iou": 1.0}}}"#).unwrap();
        assert_eq!(c.validate().unwrap_err().field, "search.action_params.shift_max_iou");

        let c = Config::from_json(r#"{"provider": {"kind": "file"}}"#).unwrap();
        assert_eq!(c.validate().unwrap_err().field, "provider.embeddings_file");

        let unknown = Config::from_json(r#"{"search": {"budget": 3}}"#).unwrap_err();
        assert!(unknown.message.contains("unknown field"), "{unknown}");
    }
}
