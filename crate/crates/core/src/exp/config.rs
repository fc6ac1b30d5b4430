use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::{AlphaSchedule, EnvConfig, OrgDistributions};
use crate::error::{Error, Result};
use crate::game::GridSpec;
use crate::marl::TrainerConfig;
use crate::precision::PrecisionSpec;

/// Everything a run needs. Missing keys take their defaults; unknown keys
/// are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub num_orgs: usize,
    /// Slots per episode.
    pub horizon: usize,
    /// Observation window length.
    pub window: usize,
    pub orgs: OrgDistributions,
    pub alpha: AlphaSchedule,
    pub precision: PrecisionSpec,
    /// Grid resolution for the equilibrium oracles.
    pub grid_points: usize,
    pub trainer: TrainerConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let env = EnvConfig::default();
        Self {
            seed: 0,
            num_orgs: env.num_orgs,
            horizon: env.horizon,
            window: env.window,
            orgs: env.orgs,
            alpha: env.alpha,
            precision: env.precision,
            grid_points: GridSpec::default().points(),
            trainer: TrainerConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn env_config(&self) -> EnvConfig {
        EnvConfig {
            num_orgs: self.num_orgs,
            horizon: self.horizon,
            window: self.window,
            orgs: self.orgs,
            alpha: self.alpha,
            precision: self.precision.clone(),
            redistribution: true,
        }
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid_points).map_err(|_| Error::param("grid_points", "must be >= 2"))
    }

    pub fn validate(&self) -> Result<()> {
        self.env_config().validate()?;
        self.grid()?;
        self.trainer.validate()
    }

    pub fn parse(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Ok(Self::default());
        }
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::ConfigParse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn dump(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::parse(&std::fs::read_to_string(path)?)
}
