//! Training configuration file (TOML).
//!
//! ```toml
//! iterations = 300          # optional; defaults to the regimen budget
//! budget_scale = 1.0        # multiplies regimen budgets when `iterations` is absent
//! checkpoint_every = 100
//!
//! [ppo]
//! seed = 7
//! workers = 4
//! learning_rate = 3e-4
//!
//! [reward]                  # optional; defaults derive from the model
//! w_cmd = 0.5
//!
//! [[regimens]]              # optional; overrides or adds regimen tables
//! name = "custom"
//! frequencies = { flat = 0.5, slope = 0.5 }
//! commands = { fixed = { forward = 0.8, lateral = 0.0, turn = 0.0 } }
//! iterations = 2000
//! reference_iterations = 110000
//! ```
//!
//! Omitted sections take their defaults; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::biped::BipedModel;
use crate::checkpoint::Phase;
use crate::error::{Error, Result};
use crate::learning::ppo::PPOConfig;
use crate::learning::regimen::RegimenSpec;
use crate::learning::reward::RewardWeights;
use crate::learning::train::TrainSpec;
use crate::protocol::Thresholds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub iterations: Option<u64>,
    pub budget_scale: f64,
    pub checkpoint_every: u64,
    pub ppo: PPOConfig,
    pub reward: Option<RewardWeights>,
    pub model: BipedModel,
    pub thresholds: Thresholds,
    pub regimens: Vec<RegimenSpec>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: None,
            budget_scale: 1.0,
            checkpoint_every: 100,
            ppo: PPOConfig::default(),
            reward: None,
            model: BipedModel::default(),
            thresholds: Thresholds::default(),
            regimens: Vec::new(),
        }
    }
}

impl TrainConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: TrainConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        TrainConfig::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.budget_scale > 0.0 && self.budget_scale.is_finite()) {
            return Err(Error::Config("budget_scale must be positive".into()));
        }
        self.ppo.validate()?;
        self.model.validate()?;
        self.reward_weights().validate()?;
        for r in &self.regimens {
            r.validate()?;
        }
        Ok(())
    }

    pub fn reward_weights(&self) -> RewardWeights {
        self.reward.unwrap_or_else(|| RewardWeights::for_model(&self.model))
    }

    /// A regimen from the config file, else one of the built-in tables.
    pub fn regimen(&self, name: &str) -> Result<RegimenSpec> {
        match self.regimens.iter().find(|r| r.name == name) {
            Some(r) => Ok(r.clone()),
            None => RegimenSpec::builtin(name),
        }
    }

    pub fn iterations_for(&self, regimen: &RegimenSpec) -> u64 {
        self.iterations
            .unwrap_or_else(|| (regimen.iterations as f64 * self.budget_scale).round() as u64)
    }

    /// Resolve a run. The blind phase always trains on flat ground and takes
    /// no regimen name.
    pub fn train_spec(&self, phase: Phase, regimen: Option<&str>) -> Result<TrainSpec> {
        let regimen = match (phase, regimen) {
            (Phase::Blind, None) => RegimenSpec::flat(),
            (Phase::Blind, Some(name)) => {
                self.regimen(name)?;
                return Err(Error::Config(
                    "the blind phase trains on flat ground only; omit --regimen".into(),
                ));
            }
            (Phase::Visual, Some(name)) => self.regimen(name)?,
            (Phase::Visual, None) => {
                return Err(Error::Config("the visual phase needs --regimen".into()));
            }
        };
        Ok(TrainSpec {
            phase,
            iterations: self.iterations_for(&regimen),
            regimen,
            ppo: self.ppo,
            reward: self.reward_weights(),
            model: self.model.clone(),
            thresholds: self.thresholds,
            checkpoint_every: self.checkpoint_every,
            threads: self.ppo.workers,
        })
    }
}
