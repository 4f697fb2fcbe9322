//! The two-layer policy stack: a clock-driven blind controller and a
//! terrain-aware residual controller added on top of it.

use serde::{Deserialize, Serialize};

use crate::biped::{BipedModel, BipedState, PDTarget, CONTROL_DT, LEFT, RIGHT};
use crate::error::{Error, Result};
use crate::nn::{Arch, HeadInit, Network};
use crate::terrain::HeightGrid;

/// Phase resolution: one gait cycle is this many integer units.
pub const PHASE_UNITS: u64 = 1_000_000_000;
pub const BASE_CLOCK_RATE: f64 = 1.25;
pub const SWING_RATIO: f64 = 0.4;
pub const DEFAULT_PHASE_OFFSET: f64 = 0.5;
/// Largest change of the inter-foot phase offset per control step.
pub const OFFSET_RATE_LIMIT: f64 = 0.05;
pub const MULTIPLIER_RANGE: (f64, f64) = (0.5, 2.0);

pub const HIDDEN: usize = 64;
pub const BLIND_OBS: usize = 25;
pub const VISUAL_OBS: usize = BLIND_OBS + HeightGrid::LEN;
pub const BLIND_OUT: usize = 6;
pub const RESIDUAL_OUT: usize = 8;

/// Scale from a unit network output to a PD target offset, per joint.
pub const ACTION_SCALE: [f64; 6] = [0.5, 0.5, 0.2, 0.2, 0.15, 0.15];

/// Periodic gait clock.
///
/// The phase is kept in integer units so whole cycles close exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockState {
    pub phase_units: u64,
    /// Base cadence in cycles per second.
    pub rate: f64,
    pub phase_offset: f64,
    pub swing_ratio: f64,
}

impl Default for ClockState {
    fn default() -> Self {
        ClockState {
            phase_units: 0,
            rate: BASE_CLOCK_RATE,
            phase_offset: DEFAULT_PHASE_OFFSET,
            swing_ratio: SWING_RATIO,
        }
    }
}

impl ClockState {
    pub fn with_phase(phase: f64) -> Self {
        ClockState {
            phase_units: (phase.rem_euclid(1.0) * PHASE_UNITS as f64).round() as u64 % PHASE_UNITS,
            ..ClockState::default()
        }
    }

    pub fn phase(&self) -> f64 {
        self.phase_units as f64 / PHASE_UNITS as f64
    }

    pub fn foot_phase(&self, leg: usize) -> f64 {
        if leg == LEFT {
            self.phase()
        } else {
            (self.phase() + self.phase_offset).rem_euclid(1.0)
        }
    }

    /// Whether `leg` is inside its stance window.
    pub fn in_stance(&self, leg: usize) -> bool {
        self.foot_phase(leg) < 1.0 - self.swing_ratio
    }

    /// Advance by one control period under `action`'s clock modulation.
    pub fn advance(&self, action: &PolicyAction, dt: f64) -> ClockState {
        let mult = action
            .clock_rate_multiplier
            .clamp(MULTIPLIER_RANGE.0, MULTIPLIER_RANGE.1);
        let step = (self.rate * mult * dt * PHASE_UNITS as f64).round() as u64;
        let target = action.phase_offset_target.clamp(0.0, 1.0);
        let delta = (target - self.phase_offset).clamp(-OFFSET_RATE_LIMIT, OFFSET_RATE_LIMIT);
        ClockState {
            phase_units: (self.phase_units + step) % PHASE_UNITS,
            phase_offset: (self.phase_offset + delta).clamp(0.0, 1.0),
            ..*self
        }
    }
}

/// Velocity command.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Command {
    pub forward: f64,
    pub lateral: f64,
    pub turn: f64,
}

impl Command {
    pub fn forward(speed: f64) -> Self {
        Command {
            forward: speed,
            lateral: 0.0,
            turn: 0.0,
        }
    }
}

/// What one control step asks of the robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyAction {
    pub pd_target: PDTarget,
    pub clock_rate_multiplier: f64,
    pub phase_offset_target: f64,
}

impl PolicyAction {
    /// Action that leaves the clock untouched.
    pub fn neutral(pd_target: PDTarget, phase_offset: f64) -> Self {
        PolicyAction {
            pd_target,
            clock_rate_multiplier: 1.0,
            phase_offset_target: phase_offset,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.pd_target.is_finite()
            && self.clock_rate_multiplier.is_finite()
            && self.phase_offset_target.is_finite()
    }
}

/// Observation layout of [`blind_observe`].
pub mod obs {
    pub const JOINT_POS: usize = 0;
    pub const JOINT_VEL: usize = 6;
    pub const TRUNK_VEL: usize = 12;
    pub const YAW_RATE: usize = 15;
    pub const HEIGHT: usize = 16;
    pub const LEFT_PHASE: usize = 17;
    pub const RIGHT_PHASE: usize = 19;
    pub const SWING_RATIO: usize = 21;
    pub const COMMAND: usize = 22;
}

/// Fixed input normalization: `(raw - OBS_OFFSET) / OBS_SCALE`.
pub const OBS_OFFSET: [f64; BLIND_OBS] = [
    0.0, 0.0, 0.0, 0.0, 0.9, 0.9, // joint positions
    0.0, 0.0, 0.0, 0.0, 0.0, 0.0, // joint velocities
    0.0, 0.0, 0.0, 0.0, // trunk velocity, yaw rate
    0.85, // clearance
    0.0, 0.0, 0.0, 0.0, // clock
    0.4, // swing ratio
    0.5, 0.0, 0.0, // command
];
pub const OBS_SCALE: [f64; BLIND_OBS] = [
    0.5, 0.5, 0.2, 0.2, 0.1, 0.1, //
    4.0, 4.0, 2.0, 2.0, 1.0, 1.0, //
    1.0, 0.5, 0.5, 1.0, //
    0.1, //
    1.0, 1.0, 1.0, 1.0, //
    0.1, //
    1.0, 0.3, 0.4,
];
/// Height-grid entries are divided by this before entering the network.
pub const GRID_SCALE: f64 = 0.5;

/// Proprioceptive observation (raw units).
///
/// Layout: 6 joint positions, 6 joint velocities, heading-frame trunk
/// velocity (3), yaw rate, trunk clearance over the ground, `(sin, cos)` of
/// the left then right foot phase, swing ratio, and the three command values.
pub fn blind_observe(state: &BipedState, clock: &ClockState, cmd: &Command) -> [f64; BLIND_OBS] {
    let mut o = [0.0; BLIND_OBS];
    o[obs::JOINT_POS..obs::JOINT_POS + 6].copy_from_slice(&state.joint_positions());
    o[obs::JOINT_VEL..obs::JOINT_VEL + 6].copy_from_slice(&state.joint_velocities());
    let (s, c) = state.yaw.sin_cos();
    let v = state.trunk_vel;
    o[obs::TRUNK_VEL] = c * v.x + s * v.y;
    o[obs::TRUNK_VEL + 1] = -s * v.x + c * v.y;
    o[obs::TRUNK_VEL + 2] = v.z;
    o[obs::YAW_RATE] = state.yaw_rate;
    o[obs::HEIGHT] = state.clearance();
    for (slot, leg) in [(obs::LEFT_PHASE, LEFT), (obs::RIGHT_PHASE, RIGHT)] {
        let angle = std::f64::consts::TAU * clock.foot_phase(leg);
        o[slot] = angle.sin();
        o[slot + 1] = angle.cos();
    }
    o[obs::SWING_RATIO] = clock.swing_ratio;
    o[obs::COMMAND] = cmd.forward;
    o[obs::COMMAND + 1] = cmd.lateral;
    o[obs::COMMAND + 2] = cmd.turn;
    o
}

/// Normalized network input for the blind controller.
pub fn blind_input(raw: &[f64; BLIND_OBS]) -> Vec<f64> {
    raw.iter()
        .zip(OBS_OFFSET.iter().zip(&OBS_SCALE))
        .map(|(v, (o, s))| (v - o) / s)
        .collect()
}

/// Normalized network input for the residual controller: blind input then the
/// flattened grid.
pub fn visual_input(raw: &[f64; BLIND_OBS], grid: &HeightGrid) -> Vec<f64> {
    let mut v = blind_input(raw);
    v.extend(grid.flatten().map(|h| h / GRID_SCALE));
    v
}

pub fn blind_arch() -> Arch {
    Arch {
        input: BLIND_OBS,
        hidden: HIDDEN,
        output: BLIND_OUT,
        log_std: true,
    }
}

pub fn residual_arch() -> Arch {
    Arch {
        input: VISUAL_OBS,
        hidden: HIDDEN,
        output: RESIDUAL_OUT,
        log_std: true,
    }
}

pub fn critic_arch(input: usize) -> Arch {
    Arch {
        input,
        hidden: HIDDEN,
        output: 1,
        log_std: false,
    }
}

/// Fresh blind policy with a small output head.
pub fn new_blind_policy(seed: u64) -> Network {
    Network::init(blind_arch(), seed, HeadInit::Scaled(0.1), (0.3f64).ln())
}

/// Fresh residual policy whose head is zero, so it starts neutral.
pub fn new_residual_policy(seed: u64) -> Network {
    Network::init(residual_arch(), seed, HeadInit::Zero, (0.1f64).ln())
}

/// Map raw blind outputs onto a PD target around the standing pose.
pub fn blind_target(raw: &[f64], model: &BipedModel) -> PDTarget {
    let mut t = model.standing_pose().0;
    for i in 0..6 {
        t[i] += ACTION_SCALE[i] * raw[i];
    }
    PDTarget(t)
}

/// Map raw residual outputs onto a residual action.
///
/// Zero outputs give zero PD residuals, multiplier 1 and offset target 0.5.
pub fn residual_action(raw: &[f64]) -> PolicyAction {
    let mut t = [0.0; 6];
    for i in 0..6 {
        t[i] = ACTION_SCALE[i] * raw[i];
    }
    PolicyAction {
        pd_target: PDTarget(t),
        clock_rate_multiplier: (1.0 + raw[6]).clamp(MULTIPLIER_RANGE.0, MULTIPLIER_RANGE.1),
        phase_offset_target: (DEFAULT_PHASE_OFFSET + raw[7]).clamp(0.0, 1.0 - 1e-9),
    }
}

fn check_arch(net: &Network, expected: Arch, role: &str) -> Result<()> {
    if net.arch.input != expected.input || net.arch.output != expected.output {
        return Err(Error::Contract(format!(
            "{role} network has shape {}->{}, expected {}->{}",
            net.arch.input, net.arch.output, expected.input, expected.output
        )));
    }
    Ok(())
}

/// Blind controller step: deterministic mean output as a PD target.
pub fn blind_act(
    net: &Network,
    raw_obs: &[f64; BLIND_OBS],
    hidden: &mut [f64],
    model: &BipedModel,
) -> Result<PDTarget> {
    check_arch(net, blind_arch(), "blind")?;
    let y = net.step(&blind_input(raw_obs), hidden)?;
    Ok(blind_target(&y, model))
}

/// Residual controller step: deterministic mean output as a residual action.
pub fn visual_act(
    net: &Network,
    raw_obs: &[f64; BLIND_OBS],
    grid: &HeightGrid,
    hidden: &mut [f64],
) -> Result<PolicyAction> {
    check_arch(net, residual_arch(), "residual")?;
    let y = net.step(&visual_input(raw_obs, grid), hidden)?;
    Ok(residual_action(&y))
}

/// Add a residual to a blind target; clock fields come from the residual.
pub fn compose_action(blind: &PDTarget, residual: &PolicyAction, model: &BipedModel) -> PolicyAction {
    let mut t = blind.0;
    for (a, b) in t.iter_mut().zip(residual.pd_target.0) {
        *a += b;
    }
    PolicyAction {
        pd_target: model.clamp_target(&PDTarget(t)),
        ..*residual
    }
}

/// Deterministic controller stack used for evaluation.
#[derive(Debug, Clone)]
pub struct Controller<'a> {
    pub blind: &'a Network,
    pub residual: Option<&'a Network>,
    pub model: &'a BipedModel,
    blind_hidden: Vec<f64>,
    residual_hidden: Vec<f64>,
}

impl<'a> Controller<'a> {
    pub fn new(blind: &'a Network, residual: Option<&'a Network>, model: &'a BipedModel) -> Self {
        Controller {
            blind,
            residual,
            model,
            blind_hidden: blind.hidden_zeros(),
            residual_hidden: residual.map_or_else(Vec::new, |r| r.hidden_zeros()),
        }
    }

    pub fn reset(&mut self) {
        self.blind_hidden.fill(0.0);
        self.residual_hidden.fill(0.0);
    }

    /// One control step. `grid` is required when a residual policy is present.
    pub fn act(
        &mut self,
        state: &BipedState,
        clock: &ClockState,
        cmd: &Command,
        grid: Option<&HeightGrid>,
    ) -> Result<PolicyAction> {
        let raw = blind_observe(state, clock, cmd);
        let blind = blind_act(self.blind, &raw, &mut self.blind_hidden, self.model)?;
        match self.residual {
            None => Ok(PolicyAction::neutral(
                self.model.clamp_target(&blind),
                clock.phase_offset,
            )),
            Some(net) => {
                let grid = grid.ok_or_else(|| {
                    Error::Contract("residual controller needs a height grid".into())
                })?;
                let residual = visual_act(net, &raw, grid, &mut self.residual_hidden)?;
                Ok(compose_action(&blind, &residual, self.model))
            }
        }
    }
}

/// Control-period length used by [`ClockState::advance`] during rollouts.
pub const CLOCK_DT: f64 = CONTROL_DT;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biped::{reset, BipedModel};
    use crate::terrain::{build_standard, StandardKind, StandardParams};

    fn neutral() -> PolicyAction {
        PolicyAction::neutral(BipedModel::default().standing_pose(), 0.5)
    }

    #[test]
    fn clock_wraps() {
        let c = ClockState::with_phase(0.99);
        let n = c.advance(&neutral(), 0.02);
        assert_eq!(n.phase(), 0.015);
    }

    #[test]
    fn identity_modulation() {
        let c = ClockState::with_phase(0.2);
        let n = c.advance(&neutral(), 0.02);
        assert_eq!(n.phase_offset, 0.5);
        assert_eq!(n.phase_units - c.phase_units, 25_000_000);
    }

    #[test]
    fn offset_is_rate_limited() {
        let c = ClockState::default();
        let mut a = neutral();
        a.phase_offset_target = 0.3;
        let n = c.advance(&a, 0.02);
        assert!((n.phase_offset - 0.45).abs() < 1e-15);
    }

    #[test]
    fn clock_closes_whole_cycles() {
        for rate in [1.25, 1.0, 2.5, 0.5] {
            let mut c = ClockState {
                rate,
                ..ClockState::with_phase(0.37)
            };
            let start = c.phase_units;
            let steps = (1.0 / (rate * 0.02)).round() as usize;
            for _ in 0..steps {
                c = c.advance(&neutral(), 0.02);
            }
            assert_eq!(c.phase_units, start, "rate {rate}");
        }
    }

    #[test]
    fn multiplier_is_clamped() {
        let c = ClockState::default();
        let mut a = neutral();
        a.clock_rate_multiplier = 10.0;
        assert_eq!(c.advance(&a, 0.02).phase_units, 50_000_000);
    }

    #[test]
    fn observation_basics() {
        let field = build_standard(StandardKind::Flat, 0, &StandardParams::default()).unwrap();
        let model = BipedModel::default();
        let s = reset(&field, &model, 0.0, 0.0, 0.0, 1).unwrap();
        let o = blind_observe(&s, &ClockState::default(), &Command::default());
        assert!(o[obs::JOINT_VEL..obs::JOINT_VEL + 6].iter().all(|v| v.abs() < 1e-12));
        assert_eq!(o[obs::LEFT_PHASE], 0.0);
        assert_eq!(o[obs::LEFT_PHASE + 1], 1.0);
        assert_eq!(o.len(), 25);
    }

    #[test]
    fn zero_blind_net_stands() {
        let model = BipedModel::default();
        let net = Network::zeros(blind_arch());
        let mut h = net.hidden_zeros();
        let t = blind_act(&net, &[0.3; BLIND_OBS], &mut h, &model).unwrap();
        assert_eq!(t, model.standing_pose());
    }

    #[test]
    fn zero_residual_is_neutral() {
        let net = Network::zeros(residual_arch());
        let mut h = net.hidden_zeros();
        let a = visual_act(&net, &[0.1; BLIND_OBS], &HeightGrid::zeros(), &mut h).unwrap();
        assert_eq!(a.pd_target, PDTarget([0.0; 6]));
        assert_eq!(a.clock_rate_multiplier, 1.0);
        assert_eq!(a.phase_offset_target, 0.5);
        let fresh = new_residual_policy(3);
        let mut h = fresh.hidden_zeros();
        let a = visual_act(&fresh, &[0.7; BLIND_OBS], &HeightGrid::zeros(), &mut h).unwrap();
        assert_eq!(a.pd_target, PDTarget([0.0; 6]));
    }

    #[test]
    fn dimension_mismatch_is_a_contract_violation() {
        let model = BipedModel::default();
        let wrong = Network::zeros(residual_arch());
        let mut h = wrong.hidden_zeros();
        assert!(matches!(
            blind_act(&wrong, &[0.0; BLIND_OBS], &mut h, &model),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn composition() {
        let model = BipedModel::default();
        let blind = model.standing_pose();
        let zero = residual_action(&[0.0; RESIDUAL_OUT]);
        assert_eq!(compose_action(&blind, &zero, &model).pd_target, blind);

        let mut r = zero;
        r.pd_target.0[4] = -0.1;
        let c = compose_action(&blind, &r, &model);
        assert!((c.pd_target.0[4] - 0.8).abs() < 1e-12);

        let mut top = blind;
        top.0[0] = model.pitch_limits.1;
        let mut r = zero;
        r.pd_target.0[0] = 0.3;
        assert_eq!(compose_action(&top, &r, &model).pd_target.0[0], model.pitch_limits.1);
    }
}
