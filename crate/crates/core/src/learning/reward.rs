//! Per-step reward: command tracking, effort economy, and clock adherence.

use serde::{Deserialize, Serialize};

use crate::biped::{BipedModel, BipedState, LEFT, RIGHT};
use crate::controller::{ClockState, Command};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub w_cmd: f64,
    pub w_torque: f64,
    pub w_clock: f64,
    /// Command error scale σ (m/s).
    pub cmd_scale: f64,
    /// Effort scale s in the effort term.
    pub torque_scale: f64,
    /// Reward replacing the step reward when an episode ends in a fall.
    pub fall_penalty: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights::for_model(&BipedModel::default())
    }
}

impl RewardWeights {
    /// Default weights, with the effort scale set to half the norm of the
    /// model's actuator limits.
    pub fn for_model(model: &BipedModel) -> Self {
        let norm = model.effort_limits.iter().map(|l| 2.0 * l * l).sum::<f64>().sqrt();
        RewardWeights {
            w_cmd: 0.5,
            w_torque: 0.2,
            w_clock: 0.3,
            cmd_scale: 0.25,
            torque_scale: 0.5 * norm,
            fall_penalty: -10.0,
        }
    }

    pub fn max(&self) -> f64 {
        self.w_cmd + self.w_torque + self.w_clock
    }

    pub fn validate(&self) -> Result<()> {
        let weights = [self.w_cmd, self.w_torque, self.w_clock];
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Config("reward weights must be finite and non-negative".into()));
        }
        if !(self.cmd_scale > 0.0 && self.torque_scale > 0.0 && self.cmd_scale.is_finite()) {
            return Err(Error::Config("reward scales must be positive".into()));
        }
        if !self.fall_penalty.is_finite() {
            return Err(Error::Config("fall penalty must be finite".into()));
        }
        Ok(())
    }
}

/// Fraction of feet whose contact matches their clock window.
pub fn clock_term(state: &BipedState, clock: &ClockState) -> f64 {
    let hits = [LEFT, RIGHT]
        .iter()
        .filter(|&&leg| state.feet[leg].contact == clock.in_stance(leg))
        .count();
    hits as f64 / 2.0
}

/// Squared command error: heading-frame planar velocity and yaw rate.
pub fn command_error(state: &BipedState, cmd: &Command) -> f64 {
    let (s, c) = state.yaw.sin_cos();
    let v = state.trunk_vel;
    let fwd = c * v.x + s * v.y;
    let lat = -s * v.x + c * v.y;
    (fwd - cmd.forward).powi(2) + (lat - cmd.lateral).powi(2) + (state.yaw_rate - cmd.turn).powi(2)
}

pub fn reward(
    state: &BipedState,
    cmd: &Command,
    forces: &[f64; 6],
    clock: &ClockState,
    w: &RewardWeights,
) -> f64 {
    let tracking = (-command_error(state, cmd) / (w.cmd_scale * w.cmd_scale)).exp();
    let effort = forces.iter().map(|f| f * f).sum::<f64>();
    let economy = (-effort / (w.torque_scale * w.torque_scale)).exp();
    w.w_cmd * tracking + w.w_torque * economy + w.w_clock * clock_term(state, clock)
}
