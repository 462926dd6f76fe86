//! Experiment configuration file.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::montecarlo::McRanges;
use crate::sim::{Policy, SimOptions};
use crate::workload::{validate_config, ValidationErrors, WorkloadConfig};

fn default_policies() -> Vec<Policy> {
    Policy::ALL.to_vec()
}

fn default_cv_interval() -> u64 {
    100
}

fn default_checkpoints() -> Vec<f64> {
    vec![0.25, 0.5, 0.75, 1.0]
}

fn default_draws() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub workload: WorkloadConfig,
    #[serde(default = "default_policies")]
    pub policies: Vec<Policy>,
    /// Perturb actual processing times around the EPT.
    #[serde(default)]
    pub noise: bool,
    /// Scheduling-interval length for the load CV, in ticks.
    #[serde(default = "default_cv_interval")]
    pub cv_interval: u64,
    #[serde(default = "default_checkpoints")]
    pub checkpoints: Vec<f64>,
    #[serde(default = "default_draws")]
    pub draws: usize,
    #[serde(default)]
    pub montecarlo: McRanges,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Invalid(#[from] ValidationErrors),
}

impl ExperimentConfig {
    pub fn new(workload: WorkloadConfig) -> Self {
        ExperimentConfig {
            workload,
            policies: default_policies(),
            noise: false,
            cv_interval: default_cv_interval(),
            checkpoints: default_checkpoints(),
            draws: default_draws(),
            montecarlo: McRanges::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ValidationErrors> {
        let mut errors = match validate_config(&self.workload) {
            Ok(()) => Vec::new(),
            Err(e) => e.0,
        };
        if self.policies.is_empty() {
            errors.push("policies must name at least one scheduler".into());
        }
        if self.cv_interval < 1 {
            errors.push("cv_interval must be >= 1".into());
        }
        if self.checkpoints.iter().any(|&c| !(c > 0.0 && c <= 1.0)) {
            errors.push("checkpoints must lie in (0, 1]".into());
        }
        if self.draws < 1 {
            errors.push("draws must be >= 1".into());
        }
        errors.extend(self.montecarlo.validate());
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ValidationErrors(errors))
        }
    }

    pub fn sim_options(&self) -> Result<SimOptions, ValidationErrors> {
        let mut options = SimOptions::new(self.workload.scheduler_config()?);
        options.noise = self.noise;
        options.noise_seed = self.workload.seed;
        Ok(options)
    }
}
