//! JSON experiment configuration. Command-line flags override these values.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("config field `{field}`: {reason}")]
    OutOfRange { field: &'static str, reason: String },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TsvColumns {
    pub utterance: Option<String>,
    pub parse: Option<String>,
    pub domain: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: Option<u64>,
    /// Mask plans per source sample for `augment`.
    pub mask_factor: Option<usize>,
    /// Low-resource duplication for `mix`.
    pub upsample_factor: Option<usize>,
    pub proposals_per_mask: Option<usize>,
    pub k: Option<usize>,
    pub p_geom: Option<f64>,
    pub separator: Option<String>,
    pub resample_epochs: Option<usize>,
    pub proposer: Option<String>,
    pub oracle: Option<String>,
    pub bridge_url: Option<String>,
    /// Maximum in-flight bridge requests.
    pub concurrency: Option<usize>,
    pub timeout_secs: Option<f64>,
    pub retries: Option<usize>,
    pub jobs: Option<usize>,
    pub strict: Option<bool>,
    pub tsv_columns: Option<TsvColumns>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: shown.clone(),
            source,
        })?;
        let cfg: PipelineConfig =
            serde_json::from_str(&text).map_err(|source| ConfigError::Parse { path: shown, source })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn at_least_one(field: &'static str, v: Option<usize>) -> Result<(), ConfigError> {
            match v {
                Some(0) => Err(ConfigError::OutOfRange {
                    field,
                    reason: "must be at least 1".into(),
                }),
                _ => Ok(()),
            }
        }
        at_least_one("mask_factor", self.mask_factor)?;
        at_least_one("upsample_factor", self.upsample_factor)?;
        at_least_one("proposals_per_mask", self.proposals_per_mask)?;
        at_least_one("k", self.k)?;
        at_least_one("resample_epochs", self.resample_epochs)?;
        at_least_one("concurrency", self.concurrency)?;
        at_least_one("jobs", self.jobs)?;
        if let Some(p) = self.p_geom {
            if !(p > 0.0 && p < 1.0) {
                return Err(ConfigError::OutOfRange {
                    field: "p_geom",
                    reason: format!("{p} not in (0, 1)"),
                });
            }
        }
        if let Some(t) = self.timeout_secs {
            if !(t > 0.0 && t.is_finite()) {
                return Err(ConfigError::OutOfRange {
                    field: "timeout_secs",
                    reason: format!("{t} is not a positive duration"),
                });
            }
        }
        if matches!(&self.separator, Some(s) if s.is_empty()) {
            return Err(ConfigError::OutOfRange {
                field: "separator",
                reason: "must not be empty".into(),
            });
        }
        Ok(())
    }
}
