//! Reduced-order biped on a heightfield.
//!
//! The trunk is a point mass with a yaw degree of freedom; pitch and roll are
//! assumed stabilized. Each leg has three actuated coordinates (hip pitch,
//! hip roll, leg length) connecting a hip on the trunk to a point-mass foot.
//! Actuator efforts act as equal and opposite forces on the foot and the hip.
//!
//! Leg coordinates are measured in the heading frame (`x` forward, `y` left,
//! `z` up). With pitch `p`, roll `r` and length `l` the foot sits at
//! `hip + l * (sin p cos r, sin r, -cos p cos r)`.
//!
//! Six-element vectors use the order `[pitch_L, pitch_R, roll_L, roll_R,
//! len_L, len_R]`.

use nalgebra::Vector3;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::controller::PolicyAction;
use crate::error::{Error, Result};
use crate::seed;
use crate::terrain::TerrainField;

pub const PHYSICS_HZ: u64 = 2000;
pub const CONTROL_HZ: u64 = 50;
pub const SUBSTEPS: u64 = PHYSICS_HZ / CONTROL_HZ;
pub const DT: f64 = 1.0 / PHYSICS_HZ as f64;
pub const CONTROL_DT: f64 = 1.0 / CONTROL_HZ as f64;

pub type Vec3 = Vector3<f64>;

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;

/// Index of a coordinate in six-element joint vectors.
pub const fn dof(kind: usize, leg: usize) -> usize {
    2 * kind + leg
}
pub const PITCH: usize = 0;
pub const ROLL: usize = 1;
pub const LENGTH: usize = 2;

/// Physical parameters of the biped and its contact model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BipedModel {
    pub trunk_mass: f64,
    pub foot_mass: f64,
    pub gravity: f64,
    pub yaw_inertia: f64,
    /// Lateral distance from trunk to each hip.
    pub hip_offset: f64,
    pub pitch_limits: (f64, f64),
    pub roll_limits: (f64, f64),
    pub length_limits: (f64, f64),
    /// Effort limits per coordinate kind (N·m, N·m, N).
    pub effort_limits: [f64; 3],
    pub kp: [f64; 3],
    pub kd: [f64; 3],
    pub limit_stiffness: f64,
    pub limit_damping: f64,
    pub contact_stiffness: f64,
    pub contact_damping: f64,
    pub tangential_stiffness: f64,
    pub tangential_damping: f64,
    pub penetration_tolerance: f64,
    pub standing_length: f64,
}

impl Default for BipedModel {
    fn default() -> Self {
        BipedModel {
            trunk_mass: 30.0,
            foot_mass: 1.0,
            gravity: 9.81,
            yaw_inertia: 1.5,
            hip_offset: 0.1,
            pitch_limits: (-1.2, 1.2),
            roll_limits: (-0.5, 0.5),
            length_limits: (0.4, 1.0),
            effort_limits: [200.0, 200.0, 1500.0],
            kp: [400.0, 400.0, 6000.0],
            kd: [15.0, 15.0, 300.0],
            limit_stiffness: 2000.0,
            limit_damping: 50.0,
            contact_stiffness: 5e5,
            contact_damping: 1.5e3,
            tangential_stiffness: 5e4,
            tangential_damping: 1e3,
            penetration_tolerance: 0.002,
            standing_length: 0.9,
        }
    }
}

impl BipedModel {
    pub fn validate(&self) -> Result<()> {
        let ordered = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo < hi;
        if !(self.trunk_mass > 0.0 && self.foot_mass > 0.0 && self.yaw_inertia > 0.0) {
            return Err(Error::Domain("masses and inertia must be positive".into()));
        }
        if !(ordered(self.pitch_limits) && ordered(self.roll_limits) && ordered(self.length_limits))
        {
            return Err(Error::Domain("joint limits must be finite and ordered".into()));
        }
        if self.length_limits.0 <= 0.0 {
            return Err(Error::Domain("leg length limits must be positive".into()));
        }
        if self.kp.iter().chain(&self.kd).any(|g| !(*g >= 0.0)) {
            return Err(Error::Domain("PD gains must be non-negative".into()));
        }
        if self.effort_limits.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::Domain("effort limits must be positive".into()));
        }
        Ok(())
    }

    pub fn total_mass(&self) -> f64 {
        self.trunk_mass + 2.0 * self.foot_mass
    }

    pub fn limits(&self, kind: usize) -> (f64, f64) {
        match kind {
            PITCH => self.pitch_limits,
            ROLL => self.roll_limits,
            _ => self.length_limits,
        }
    }

    /// Standing pose: vertical legs at the standing length.
    pub fn standing_pose(&self) -> PDTarget {
        let l = self.standing_length;
        PDTarget([0.0, 0.0, 0.0, 0.0, l, l])
    }

    /// Clamp a target to the joint limits.
    pub fn clamp_target(&self, target: &PDTarget) -> PDTarget {
        let mut out = target.0;
        for (i, v) in out.iter_mut().enumerate() {
            let (lo, hi) = self.limits(i / 2);
            *v = v.clamp(lo, hi);
        }
        PDTarget(out)
    }
}

/// PD joint targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PDTarget(pub [f64; 6]);

impl PDTarget {
    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Joint coordinates and rates of one leg.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LegJoints {
    pub pitch: f64,
    pub roll: f64,
    pub length: f64,
    pub pitch_rate: f64,
    pub roll_rate: f64,
    pub length_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FootState {
    pub pos: Vec3,
    pub vel: Vec3,
    pub contact: bool,
    pub normal_force: f64,
    pub tangential_force: Vec3,
    /// Stick point of the tangential contact spring while in contact.
    pub anchor: Option<Vec3>,
}

impl FootState {
    fn free(pos: Vec3, vel: Vec3) -> Self {
        FootState {
            pos,
            vel,
            contact: false,
            normal_force: 0.0,
            tangential_force: Vec3::zeros(),
            anchor: None,
        }
    }
}

/// Full dynamic state of the biped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BipedState {
    /// Elapsed physics ticks at 2000 Hz.
    pub tick: u64,
    pub trunk_pos: Vec3,
    pub trunk_vel: Vec3,
    pub yaw: f64,
    pub yaw_rate: f64,
    pub legs: [LegJoints; 2],
    pub feet: [FootState; 2],
    /// Terrain height beneath the trunk.
    pub ground_height: f64,
}

impl BipedState {
    pub fn time(&self) -> f64 {
        self.tick as f64 / PHYSICS_HZ as f64
    }

    pub fn joint_positions(&self) -> [f64; 6] {
        let [l, r] = self.legs;
        [l.pitch, r.pitch, l.roll, r.roll, l.length, r.length]
    }

    pub fn joint_velocities(&self) -> [f64; 6] {
        let [l, r] = self.legs;
        [
            l.pitch_rate,
            r.pitch_rate,
            l.roll_rate,
            r.roll_rate,
            l.length_rate,
            r.length_rate,
        ]
    }

    /// Trunk height above the terrain beneath it.
    pub fn clearance(&self) -> f64 {
        self.trunk_pos.z - self.ground_height
    }

    /// Kinetic plus gravitational potential energy (zero at `z = 0`).
    pub fn mechanical_energy(&self, model: &BipedModel) -> f64 {
        let kinetic = 0.5 * model.trunk_mass * self.trunk_vel.norm_squared()
            + 0.5 * model.yaw_inertia * self.yaw_rate * self.yaw_rate
            + self
                .feet
                .iter()
                .map(|f| 0.5 * model.foot_mass * f.vel.norm_squared())
                .sum::<f64>();
        let potential = model.gravity
            * (model.trunk_mass * self.trunk_pos.z
                + self.feet.iter().map(|f| model.foot_mass * f.pos.z).sum::<f64>());
        kinetic + potential
    }

    fn is_finite(&self) -> bool {
        let v = |x: &Vec3| x.iter().all(|c| c.is_finite());
        v(&self.trunk_pos)
            && v(&self.trunk_vel)
            && self.yaw.is_finite()
            && self.yaw_rate.is_finite()
            && self.feet.iter().all(|f| v(&f.pos) && v(&f.vel))
    }
}

fn to_heading(yaw: f64, v: &Vec3) -> Vec3 {
    let (s, c) = yaw.sin_cos();
    Vec3::new(c * v.x + s * v.y, -s * v.x + c * v.y, v.z)
}

fn to_world(yaw: f64, v: &Vec3) -> Vec3 {
    let (s, c) = yaw.sin_cos();
    Vec3::new(c * v.x - s * v.y, s * v.x + c * v.y, v.z)
}

fn hip_local(model: &BipedModel, leg: usize) -> Vec3 {
    let side = if leg == LEFT { 1.0 } else { -1.0 };
    Vec3::new(0.0, side * model.hip_offset, 0.0)
}

/// Positions and velocities the integrator advances.
#[derive(Debug, Clone, Copy)]
struct Kinematics {
    trunk_pos: Vec3,
    trunk_vel: Vec3,
    yaw: f64,
    yaw_rate: f64,
    foot_pos: [Vec3; 2],
    foot_vel: [Vec3; 2],
}

impl Kinematics {
    fn of(s: &BipedState) -> Self {
        Kinematics {
            trunk_pos: s.trunk_pos,
            trunk_vel: s.trunk_vel,
            yaw: s.yaw,
            yaw_rate: s.yaw_rate,
            foot_pos: [s.feet[0].pos, s.feet[1].pos],
            foot_vel: [s.feet[0].vel, s.feet[1].vel],
        }
    }

    fn hip(&self, model: &BipedModel, leg: usize) -> Vec3 {
        self.trunk_pos + to_world(self.yaw, &hip_local(model, leg))
    }
}

/// Leg geometry in the heading frame.
struct LegFrame {
    joints: LegJoints,
    e_len: Vec3,
    e_pitch: Vec3,
    e_roll: Vec3,
}

fn leg_frame(k: &Kinematics, model: &BipedModel, leg: usize) -> LegFrame {
    let r_hip = hip_local(model, leg);
    let d = to_heading(k.yaw, &(k.foot_pos[leg] - k.hip(model, leg)));
    let length = d.norm().max(1e-9);
    let pitch = d.x.atan2(-d.z);
    let roll = (d.y / length).clamp(-1.0, 1.0).asin();
    let (sp, cp) = pitch.sin_cos();
    let (sr, cr) = roll.sin_cos();
    let e_len = d / length;
    let e_pitch = Vec3::new(cp, 0.0, sp);
    let e_roll = Vec3::new(-sp * sr, cr, cp * sr);
    let omega = Vec3::new(0.0, 0.0, k.yaw_rate);
    let rel = to_heading(k.yaw, &(k.foot_vel[leg] - k.trunk_vel)) - omega.cross(&(r_hip + d));
    let lever = (length * cr).max(1e-9);
    LegFrame {
        joints: LegJoints {
            pitch,
            roll,
            length,
            pitch_rate: rel.dot(&e_pitch) / lever,
            roll_rate: rel.dot(&e_roll) / length,
            length_rate: rel.dot(&e_len),
        },
        e_len,
        e_pitch,
        e_roll,
    }
}

/// Contact force acting on one foot.
#[derive(Debug, Clone, Copy)]
struct Contact {
    touching: bool,
    normal_force: f64,
    force: Vec3,
    tangential: Vec3,
    anchor: Option<Vec3>,
}

fn foot_contact(
    pos: &Vec3,
    vel: &Vec3,
    anchor: Option<Vec3>,
    field: &TerrainField,
    model: &BipedModel,
) -> Result<Contact> {
    let (h, gx, gy) = field
        .height_and_gradient(pos.x, pos.y)
        .map_err(|e| Error::SimulationFault(format!("foot left the terrain: {e}")))?;
    let below = h - pos.z;
    if below < 0.0 {
        return Ok(Contact {
            touching: false,
            normal_force: 0.0,
            force: Vec3::zeros(),
            tangential: Vec3::zeros(),
            anchor: None,
        });
    }
    let n = Vec3::new(-gx, -gy, 1.0).normalize();
    let depth = below * n.z;
    let vn = vel.dot(&n);
    let normal = (model.contact_stiffness * depth - model.contact_damping * vn).max(0.0);
    let anchor = anchor.unwrap_or(*pos);
    let disp = pos - anchor;
    let disp_t = disp - n * disp.dot(&n);
    let vel_t = vel - n * vn;
    let mut tangential = -model.tangential_stiffness * disp_t - model.tangential_damping * vel_t;
    let bound = field.friction * normal;
    let mut new_anchor = anchor;
    let mag = tangential.norm();
    if mag > bound {
        tangential *= if mag > 0.0 { bound / mag } else { 0.0 };
        // Slipping: drag the stick point so the spring alone carries the bound.
        new_anchor = pos + tangential / model.tangential_stiffness;
    }
    Ok(Contact {
        touching: true,
        normal_force: normal,
        force: n * normal + tangential,
        tangential,
        anchor: Some(new_anchor),
    })
}

struct Accelerations {
    trunk: Vec3,
    yaw: f64,
    feet: [Vec3; 2],
    contacts: [Contact; 2],
}

fn accelerations(
    k: &Kinematics,
    efforts: &[f64; 6],
    anchors: [Option<Vec3>; 2],
    field: &TerrainField,
    model: &BipedModel,
) -> Result<Accelerations> {
    let gravity = Vec3::new(0.0, 0.0, -model.gravity);
    let mut trunk_force = Vec3::zeros();
    let mut yaw_torque = 0.0;
    let mut foot_acc = [Vec3::zeros(); 2];
    let mut contacts = [None, None];
    for leg in [LEFT, RIGHT] {
        let f = leg_frame(k, model, leg);
        let j = f.joints;
        let mut tau_pitch = efforts[dof(PITCH, leg)];
        let mut tau_roll = efforts[dof(ROLL, leg)];
        let force_len = efforts[dof(LENGTH, leg)];
        tau_pitch += limit_effort(j.pitch, j.pitch_rate, model.pitch_limits, model);
        tau_roll += limit_effort(j.roll, j.roll_rate, model.roll_limits, model);
        let lever = (j.length * j.roll.cos()).max(1e-9);
        let local = f.e_len * force_len + f.e_pitch * (tau_pitch / lever) + f.e_roll * (tau_roll / j.length);
        let on_foot = to_world(k.yaw, &local);
        let r_hip = to_world(k.yaw, &hip_local(model, leg));
        trunk_force -= on_foot;
        yaw_torque += r_hip.cross(&(-on_foot)).z;
        let c = foot_contact(&k.foot_pos[leg], &k.foot_vel[leg], anchors[leg], field, model)?;
        foot_acc[leg] = (on_foot + c.force) / model.foot_mass + gravity;
        contacts[leg] = Some(c);
    }
    Ok(Accelerations {
        trunk: trunk_force / model.trunk_mass + gravity,
        yaw: yaw_torque / model.yaw_inertia,
        feet: foot_acc,
        contacts: [contacts[0].unwrap(), contacts[1].unwrap()],
    })
}

fn limit_effort(q: f64, qd: f64, (lo, hi): (f64, f64), model: &BipedModel) -> f64 {
    if q > hi {
        -model.limit_stiffness * (q - hi) - model.limit_damping * qd.max(0.0)
    } else if q < lo {
        model.limit_stiffness * (lo - q) - model.limit_damping * qd.min(0.0)
    } else {
        0.0
    }
}

/// Keep every leg length inside its limits without moving the centre of mass.
fn project_leg_lengths(k: &mut Kinematics, model: &BipedModel) {
    let (lo, hi) = model.length_limits;
    let total = model.trunk_mass + model.foot_mass;
    let foot_share = model.trunk_mass / total;
    let trunk_share = model.foot_mass / total;
    for leg in [LEFT, RIGHT] {
        let d = k.foot_pos[leg] - k.hip(model, leg);
        let len = d.norm();
        if len >= lo && len <= hi || len == 0.0 {
            continue;
        }
        let u = d / len;
        let target = len.clamp(lo, hi);
        let shift = u * (target - len);
        k.foot_pos[leg] += shift * foot_share;
        k.trunk_pos -= shift * trunk_share;
        let radial = (k.foot_vel[leg] - k.trunk_vel).dot(&u);
        let escaping = if len > hi { radial > 0.0 } else { radial < 0.0 };
        if escaping {
            k.foot_vel[leg] -= u * (radial * foot_share);
            k.trunk_vel += u * (radial * trunk_share);
        }
    }
}

/// Standing state at `(start_x, start_y)` facing `heading`.
///
/// The trunk sits at the standing leg length above the ground with both feet
/// touching. A seeded perturbation of at most 0.01 m/s per axis is added to
/// the trunk velocity, shared by the feet.
pub fn reset(
    field: &TerrainField,
    model: &BipedModel,
    start_x: f64,
    start_y: f64,
    heading: f64,
    seed: u64,
) -> Result<BipedState> {
    model.validate()?;
    let ground = field.height_at(start_x, start_y)?;
    let mut rng = seed::rng(seed::derive(seed, "reset", &[]));
    let mut perturb = || rng.random_range(-0.01..=0.01);
    let vel = Vec3::new(perturb(), perturb(), perturb());
    let trunk_pos = Vec3::new(start_x, start_y, ground + model.standing_length);
    let mut feet = [FootState::free(Vec3::zeros(), vel); 2];
    for leg in [LEFT, RIGHT] {
        let hip = trunk_pos + to_world(heading, &hip_local(model, leg));
        let h = field.height_at(hip.x, hip.y)?;
        feet[leg].pos = Vec3::new(hip.x, hip.y, h);
    }
    let state = BipedState {
        tick: 0,
        trunk_pos,
        trunk_vel: vel,
        yaw: heading,
        yaw_rate: 0.0,
        legs: [LegJoints::default(); 2],
        feet,
        ground_height: ground,
    };
    finish_state(state, Kinematics::of(&state), field, model)
}

/// Recompute derived fields (joints, contacts, ground height) for `k`.
fn finish_state(
    mut state: BipedState,
    k: Kinematics,
    field: &TerrainField,
    model: &BipedModel,
) -> Result<BipedState> {
    state.trunk_pos = k.trunk_pos;
    state.trunk_vel = k.trunk_vel;
    state.yaw = k.yaw;
    state.yaw_rate = k.yaw_rate;
    for leg in [LEFT, RIGHT] {
        state.legs[leg] = leg_frame(&k, model, leg).joints;
        state.feet[leg].pos = k.foot_pos[leg];
        state.feet[leg].vel = k.foot_vel[leg];
        let c = foot_contact(&k.foot_pos[leg], &k.foot_vel[leg], state.feet[leg].anchor, field, model)?;
        state.feet[leg].contact = c.touching;
    }
    state.ground_height = field
        .height_at(k.trunk_pos.x, k.trunk_pos.y)
        .map_err(|e| Error::SimulationFault(format!("trunk left the terrain: {e}")))?;
    if !state.is_finite() {
        return Err(Error::SimulationFault("non-finite state".into()));
    }
    Ok(state)
}

/// PD efforts for `target`, clamped to the actuator limits.
pub fn pd_forces(state: &BipedState, target: &PDTarget, model: &BipedModel) -> [f64; 6] {
    let target = model.clamp_target(target);
    let q = state.joint_positions();
    let qd = state.joint_velocities();
    let mut out = [0.0; 6];
    for i in 0..6 {
        let kind = i / 2;
        let limit = model.effort_limits[kind];
        out[i] = (model.kp[kind] * (target.0[i] - q[i]) - model.kd[kind] * qd[i]).clamp(-limit, limit);
    }
    out
}

/// Advance one physics tick of length [`DT`].
pub fn step_physics(
    state: &BipedState,
    efforts: &[f64; 6],
    field: &TerrainField,
    model: &BipedModel,
    dt: f64,
) -> Result<BipedState> {
    if dt != DT {
        return Err(Error::Contract(format!("physics step must be {DT} s, got {dt}")));
    }
    if efforts.iter().any(|e| !e.is_finite()) {
        return Err(Error::SimulationFault("non-finite actuator effort".into()));
    }
    let mut k = Kinematics::of(state);
    let anchors = [state.feet[0].anchor, state.feet[1].anchor];
    let half = 0.5 * dt;

    let a0 = accelerations(&k, efforts, anchors, field, model)?;
    k.trunk_vel += a0.trunk * half;
    k.yaw_rate += a0.yaw * half;
    for leg in [LEFT, RIGHT] {
        k.foot_vel[leg] += a0.feet[leg] * half;
    }

    k.trunk_pos += k.trunk_vel * dt;
    k.yaw += k.yaw_rate * dt;
    for leg in [LEFT, RIGHT] {
        k.foot_pos[leg] += k.foot_vel[leg] * dt;
    }
    project_leg_lengths(&mut k, model);

    let a1 = accelerations(&k, efforts, anchors, field, model)?;
    k.trunk_vel += a1.trunk * half;
    k.yaw_rate += a1.yaw * half;
    for leg in [LEFT, RIGHT] {
        k.foot_vel[leg] += a1.feet[leg] * half;
    }

    let mut next = *state;
    next.tick += 1;
    for leg in [LEFT, RIGHT] {
        let c = a1.contacts[leg];
        next.feet[leg].anchor = c.anchor;
        next.feet[leg].normal_force = c.normal_force;
        next.feet[leg].tangential_force = c.tangential;
    }
    finish_state(next, k, field, model)
}

/// Hold `action`'s PD targets for one 50 Hz control period (40 ticks).
pub fn run_control_step(
    state: &BipedState,
    action: &PolicyAction,
    model: &BipedModel,
    field: &TerrainField,
) -> Result<BipedState> {
    run_control_step_with_efforts(state, action, model, field).map(|(s, _)| s)
}

/// [`run_control_step`] that also returns the RMS effort of each actuator
/// over the control period.
pub fn run_control_step_with_efforts(
    state: &BipedState,
    action: &PolicyAction,
    model: &BipedModel,
    field: &TerrainField,
) -> Result<(BipedState, [f64; 6])> {
    if !action.is_finite() {
        return Err(Error::Contract("non-finite policy action".into()));
    }
    let mut s = *state;
    let mut sq = [0.0; 6];
    for _ in 0..SUBSTEPS {
        let efforts = pd_forces(&s, &action.pd_target, model);
        for (acc, e) in sq.iter_mut().zip(efforts) {
            *acc += e * e;
        }
        s = step_physics(&s, &efforts, field, model, DT)?;
    }
    Ok((s, sq.map(|v| (v / SUBSTEPS as f64).sqrt())))
}

/// Static standing equilibrium on flat ground at height 0.
///
/// Both legs vertical under the hips, each carrying half the trunk weight
/// through the length PD spring, each foot sunk just enough for the contact
/// spring to carry its share plus its own weight.
pub fn standing_equilibrium(model: &BipedModel, x: f64, y: f64, heading: f64) -> BipedState {
    let leg_load = 0.5 * model.trunk_mass * model.gravity;
    let length = model.standing_length - leg_load / model.kp[LENGTH];
    let sink = (leg_load + model.foot_mass * model.gravity) / model.contact_stiffness;
    let trunk_pos = Vec3::new(x, y, length - sink);
    let mut feet = [FootState::free(Vec3::zeros(), Vec3::zeros()); 2];
    for leg in [LEFT, RIGHT] {
        let hip = trunk_pos + to_world(heading, &hip_local(model, leg));
        let pos = Vec3::new(hip.x, hip.y, -sink);
        feet[leg] = FootState {
            pos,
            vel: Vec3::zeros(),
            contact: true,
            normal_force: leg_load + model.foot_mass * model.gravity,
            tangential_force: Vec3::zeros(),
            anchor: Some(pos),
        };
    }
    let k = Kinematics {
        trunk_pos,
        trunk_vel: Vec3::zeros(),
        yaw: heading,
        yaw_rate: 0.0,
        foot_pos: [feet[0].pos, feet[1].pos],
        foot_vel: [Vec3::zeros(); 2],
    };
    BipedState {
        tick: 0,
        trunk_pos,
        trunk_vel: Vec3::zeros(),
        yaw: heading,
        yaw_rate: 0.0,
        legs: [
            leg_frame(&k, model, LEFT).joints,
            leg_frame(&k, model, RIGHT).joints,
        ],
        feet,
        ground_height: 0.0,
    }
}
