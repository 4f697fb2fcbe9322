//! Reward, regimen sampling, rollout collection and PPO training.

pub mod config;
pub mod ppo;
pub mod regimen;
pub mod reward;
pub mod rollout;
pub mod train;

pub use config::TrainConfig;
pub use ppo::{ppo_update, PPOConfig, UpdateStats};
pub use regimen::{sample_terrain, RegimenSpec, TerrainDraw, REGIMEN_NAMES};
pub use reward::{reward, RewardWeights};
pub use rollout::{collect_rollout, gae, Agent, Env, EnvConfig, RolloutBatch};
pub use train::{train, CurveRow, TrainResult, TrainSpec};

/// `ln(2π)`.
pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_5;
