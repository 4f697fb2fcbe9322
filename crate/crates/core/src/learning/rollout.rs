//! Experience collection across a pool of workers, and GAE.
//!
//! Each worker owns one [`Env`] that persists across iterations, so episodes
//! may span iteration boundaries. A worker's share of the horizon always ends
//! with a truncated step whose value is bootstrapped from the critic, and the
//! next iteration continues the same episode with its hidden state intact.
//! The batch length therefore equals the horizon exactly.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::biped::{reset, run_control_step_with_efforts, BipedModel, BipedState};
use crate::checkpoint::Phase;
use crate::controller::{
    blind_input, blind_observe, blind_target, compose_action, residual_action, visual_input, ClockState,
    Command, PolicyAction, CLOCK_DT,
};
use crate::error::{Error, Result};
use crate::learning::ppo::PPOConfig;
use crate::learning::regimen::{sample_terrain, RegimenSpec, TerrainDraw};
use crate::learning::reward::{reward, RewardWeights};
use crate::nn::Network;
use crate::protocol::{is_fall, sample_start, Thresholds};
use crate::seed::{self, Rng};
use crate::terrain::{TerrainField, TerrainKind};

/// Longest training episode, in control steps (8 s).
pub const MAX_EPISODE_STEPS: usize = 400;

use super::LN_2PI;

/// Networks being trained, plus the frozen blind policy in the visual phase.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub phase: Phase,
    pub blind: Network,
    pub residual: Option<Network>,
    pub critic: Network,
}

impl Agent {
    /// The network whose Gaussian head is sampled.
    pub fn policy(&self) -> &Network {
        match self.phase {
            Phase::Blind => &self.blind,
            Phase::Visual => self.residual.as_ref().expect("visual agent has a residual"),
        }
    }

    pub fn policy_mut(&mut self) -> &mut Network {
        match self.phase {
            Phase::Blind => &mut self.blind,
            Phase::Visual => self.residual.as_mut().expect("visual agent has a residual"),
        }
    }
}

/// Everything the environment needs besides the networks.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub regimen: RegimenSpec,
    pub model: BipedModel,
    pub weights: RewardWeights,
    pub thresholds: Thresholds,
}

/// One simulated episode in progress.
#[derive(Debug, Clone)]
pub struct Env {
    rng: Rng,
    draw: TerrainDraw,
    field: TerrainField,
    state: BipedState,
    clock: ClockState,
    cmd: Command,
    blind_h: Vec<f64>,
    policy_h: Vec<f64>,
    critic_h: Vec<f64>,
    steps: usize,
    ep_return: f64,
}

/// Summary of a finished episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeStat {
    pub kind: TerrainKind,
    pub ret: f64,
    pub len: usize,
    pub fell: bool,
}

impl Env {
    pub fn new(seed: u64, agent: &Agent, cfg: &EnvConfig) -> Result<Self> {
        let mut rng = seed::rng(seed);
        let (draw, field, state, cmd) = Env::start(&mut rng, cfg)?;
        let policy = agent.policy();
        Ok(Env {
            rng,
            draw,
            field,
            state,
            clock: ClockState::default(),
            cmd,
            blind_h: agent.blind.hidden_zeros(),
            policy_h: policy.hidden_zeros(),
            critic_h: agent.critic.hidden_zeros(),
            steps: 0,
            ep_return: 0.0,
        })
    }

    fn start(rng: &mut Rng, cfg: &EnvConfig) -> Result<(TerrainDraw, TerrainField, BipedState, Command)> {
        let draw = sample_terrain(&cfg.regimen, rng);
        let field = draw.build()?;
        let cmd = cfg.regimen.commands.sample(rng);
        let (x, y) = match draw.kind {
            TerrainKind::Obstacle(_) => {
                let (d, l) = sample_start(rng);
                (field.near_edge_x - d, l)
            }
            TerrainKind::Standard(_) => (0.0, 0.0),
        };
        let state = reset(&field, &cfg.model, x, y, 0.0, rng.random())?;
        Ok((draw, field, state, cmd))
    }

    fn restart(&mut self, cfg: &EnvConfig) -> Result<()> {
        let (draw, field, state, cmd) = Env::start(&mut self.rng, cfg)?;
        self.draw = draw;
        self.field = field;
        self.state = state;
        self.cmd = cmd;
        self.clock = ClockState::default();
        self.blind_h.fill(0.0);
        self.policy_h.fill(0.0);
        self.critic_h.fill(0.0);
        self.steps = 0;
        self.ep_return = 0.0;
        Ok(())
    }

    pub fn kind(&self) -> TerrainKind {
        self.draw.kind
    }

    /// Network input and (in the visual phase) frozen blind target for the
    /// current state. `None` when the height grid cannot be sampled.
    fn observe(&mut self, agent: &Agent, model: &BipedModel) -> Result<Option<(Vec<f64>, Option<[f64; 6]>)>> {
        let raw = blind_observe(&self.state, &self.clock, &self.cmd);
        match agent.phase {
            Phase::Blind => Ok(Some((blind_input(&raw), None))),
            Phase::Visual => {
                let p = self.state.trunk_pos;
                let Ok(grid) = self.field.sample_height_grid(p.x, p.y, self.state.yaw) else {
                    return Ok(None);
                };
                let y = agent.blind.step(&blind_input(&raw), &mut self.blind_h)?;
                let target = blind_target(&y, model).0;
                Ok(Some((visual_input(&raw, &grid), Some(target))))
            }
        }
    }
}

/// Per-step training data. Row `i` of every array refers to the same step.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBatch {
    /// Normalized network inputs (the visual input includes the height grid).
    pub obs: Array2<f64>,
    /// Sampled raw policy outputs.
    pub actions: Array2<f64>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    /// Episode ended in a fall: no bootstrap.
    pub terminal: Vec<bool>,
    /// Episode or worker segment cut here: bootstrap from `bootstrap`.
    pub truncated: Vec<bool>,
    pub bootstrap: Vec<f64>,
    /// First step of a contiguous segment (new episode or new worker share).
    pub starts: Vec<bool>,
    /// Recurrent states entering each step, for replay.
    pub policy_h: Array2<f64>,
    pub critic_h: Array2<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    pub episodes: Vec<EpisodeStat>,
    /// Steps spent on each terrain kind.
    pub kind_steps: BTreeMap<TerrainKind, usize>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// Check aligned lengths, finite advantages and segment structure.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        let lens = [
            self.obs.nrows(),
            self.actions.nrows(),
            self.log_probs.len(),
            self.values.len(),
            self.terminal.len(),
            self.truncated.len(),
            self.bootstrap.len(),
            self.starts.len(),
            self.policy_h.nrows(),
            self.critic_h.nrows(),
            self.advantages.len(),
            self.returns.len(),
        ];
        if lens.iter().any(|&l| l != n) {
            return Err(Error::Contract("rollout batch fields have different lengths".into()));
        }
        if self.advantages.iter().chain(&self.returns).any(|v| !v.is_finite()) {
            return Err(Error::Optimization("non-finite advantage".into()));
        }
        if n > 0 && !(self.starts[0] && (self.terminal[n - 1] || self.truncated[n - 1])) {
            return Err(Error::Contract("batch must open a segment and close its last".into()));
        }
        for i in 1..n {
            let closed = self.terminal[i - 1] || self.truncated[i - 1];
            if closed != self.starts[i] {
                return Err(Error::Contract(format!("segment boundary mismatch at step {i}")));
            }
        }
        Ok(())
    }

    /// `(start, len)` of each contiguous segment.
    pub fn segments(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut begin = 0;
        for i in 0..self.len() {
            if self.terminal[i] || self.truncated[i] {
                out.push((begin, i + 1 - begin));
                begin = i + 1;
            }
        }
        out
    }
}

/// Generalized advantage estimation.
///
/// `terminal[t]` ends the chain with a zero next value; `truncated[t]` ends
/// it with `bootstrap[t]`. Returns `(advantages, returns)`.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    terminal: &[bool],
    truncated: &[bool],
    bootstrap: &[f64],
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let (next_value, carry) = if terminal[t] {
            (0.0, 0.0)
        } else if truncated[t] || t + 1 == n {
            (bootstrap[t], 0.0)
        } else {
            (values[t + 1], next_adv)
        };
        let delta = rewards[t] + gamma * next_value - values[t];
        adv[t] = delta + gamma * lambda * carry;
        next_adv = adv[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// Log-density of `a` under a diagonal Gaussian.
pub fn gaussian_log_prob(a: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    a.iter()
        .zip(mean)
        .zip(log_std)
        .map(|((a, m), ls)| {
            let z = (a - m) / ls.exp();
            -0.5 * z * z - ls - 0.5 * LN_2PI
        })
        .sum()
}

/// Worker-local step storage, concatenated into a batch afterwards.
#[derive(Default)]
struct Shard {
    obs: Vec<f64>,
    actions: Vec<f64>,
    log_probs: Vec<f64>,
    rewards: Vec<f64>,
    values: Vec<f64>,
    terminal: Vec<bool>,
    truncated: Vec<bool>,
    bootstrap: Vec<f64>,
    starts: Vec<bool>,
    policy_h: Vec<f64>,
    critic_h: Vec<f64>,
    episodes: Vec<EpisodeStat>,
    kind_steps: BTreeMap<TerrainKind, usize>,
}

fn to_action(agent: &Agent, a: &[f64], blind: Option<[f64; 6]>, env: &Env, model: &BipedModel) -> PolicyAction {
    match blind {
        None => PolicyAction::neutral(model.clamp_target(&blind_target(a, model)), env.clock.phase_offset),
        Some(t) => {
            debug_assert_eq!(agent.phase, Phase::Visual);
            compose_action(&crate::biped::PDTarget(t), &residual_action(a), model)
        }
    }
}

fn run_worker(
    env: &mut Env,
    agent: &Agent,
    cfg: &EnvConfig,
    steps: usize,
    noise_seed: u64,
    value_scale: f64,
) -> Result<Shard> {
    let policy = agent.policy();
    let log_std = policy.log_std().to_vec();
    let mut noise = seed::rng(noise_seed);
    let mut sh = Shard::default();
    let mut segment_start = true;
    for i in 0..steps {
        let last = i + 1 == steps;
        // An episode whose grid cannot be sampled is restarted before acting.
        let (input, blind) = loop {
            match env.observe(agent, &cfg.model)? {
                Some(v) => break v,
                None => env.restart(cfg)?,
            }
        };
        sh.policy_h.extend_from_slice(&env.policy_h);
        sh.critic_h.extend_from_slice(&env.critic_h);
        let mean = policy.step(&input, &mut env.policy_h)?;
        let value = value_scale * agent.critic.step(&input, &mut env.critic_h)?[0];
        let a: Vec<f64> = mean
            .iter()
            .zip(&log_std)
            .map(|(m, ls)| m + ls.exp() * noise.sample::<f64, _>(StandardNormal))
            .collect();
        let logp = gaussian_log_prob(&a, &mean, &log_std);
        let action = to_action(agent, &a, blind, env, &cfg.model);

        let (r, fell) = match run_control_step_with_efforts(&env.state, &action, &cfg.model, &env.field) {
            Ok((next, efforts)) => {
                env.clock = env.clock.advance(&action, CLOCK_DT);
                env.state = next;
                if is_fall(&env.state, &env.field, &cfg.thresholds) {
                    (cfg.weights.fall_penalty, true)
                } else {
                    (reward(&env.state, &env.cmd, &efforts, &env.clock, &cfg.weights), false)
                }
            }
            Err(Error::SimulationFault(_)) => (cfg.weights.fall_penalty, true),
            Err(e) => return Err(e),
        };
        env.steps += 1;
        env.ep_return += r;
        *sh.kind_steps.entry(env.kind()).or_default() += 1;

        let ep_over = fell || env.steps >= MAX_EPISODE_STEPS;
        let truncated = !fell && (ep_over || last);
        let bootstrap = if truncated {
            // Value of the state after this step, continuing the critic's memory.
            // Observing advances the blind memory, which must stay untouched.
            let blind_h = env.blind_h.clone();
            let v = match env.observe(agent, &cfg.model)? {
                Some((next_input, _)) => {
                    let mut h = env.critic_h.clone();
                    value_scale * agent.critic.step(&next_input, &mut h)?[0]
                }
                None => 0.0,
            };
            env.blind_h = blind_h;
            v
        } else {
            0.0
        };
        sh.obs.extend_from_slice(&input);
        sh.actions.extend_from_slice(&a);
        sh.log_probs.push(logp);
        sh.rewards.push(r);
        sh.values.push(value);
        sh.terminal.push(fell);
        sh.truncated.push(truncated);
        sh.bootstrap.push(bootstrap);
        sh.starts.push(segment_start);
        segment_start = truncated || fell;
        if ep_over {
            sh.episodes.push(EpisodeStat {
                kind: env.kind(),
                ret: env.ep_return,
                len: env.steps,
                fell,
            });
            env.restart(cfg)?;
        }
    }
    Ok(sh)
}

/// Step counts per worker: the horizon split as evenly as possible.
pub fn worker_shares(horizon: usize, workers: usize) -> Vec<usize> {
    (0..workers)
        .map(|w| horizon / workers + usize::from(w < horizon % workers))
        .collect()
}

/// Collect `ppo.steps_per_iteration` steps with one worker per env and
/// compute GAE.
///
/// `ppo.seed` and `iteration` determine the action noise; results are
/// identical for a fixed number of envs whatever the pool size.
pub fn collect_rollout(
    agent: &Agent,
    envs: &mut [Env],
    cfg: &EnvConfig,
    ppo: &PPOConfig,
    iteration: u64,
    pool: &rayon::ThreadPool,
) -> Result<RolloutBatch> {
    let horizon = ppo.steps_per_iteration;
    if envs.is_empty() || horizon < envs.len() {
        return Err(Error::Config("horizon must give every worker at least one step".into()));
    }
    let shares = worker_shares(horizon, envs.len());
    let shards: Vec<Shard> = pool.install(|| {
        envs.par_iter_mut()
            .zip(shares.par_iter())
            .enumerate()
            .map(|(w, (env, &steps))| {
                let noise_seed = seed::derive(ppo.seed, "noise", &[iteration, w as u64]);
                run_worker(env, agent, cfg, steps, noise_seed, ppo.value_scale)
            })
            .collect::<Result<_>>()
    })?;
    let in_dim = agent.policy().arch.input;
    let out_dim = agent.policy().arch.output;
    let hidden = agent.policy().arch.hidden;
    let c_hidden = agent.critic.arch.hidden;
    let mut all = Shard::default();
    for sh in shards {
        all.obs.extend(sh.obs);
        all.actions.extend(sh.actions);
        all.log_probs.extend(sh.log_probs);
        all.rewards.extend(sh.rewards);
        all.values.extend(sh.values);
        all.terminal.extend(sh.terminal);
        all.truncated.extend(sh.truncated);
        all.bootstrap.extend(sh.bootstrap);
        all.starts.extend(sh.starts);
        all.policy_h.extend(sh.policy_h);
        all.critic_h.extend(sh.critic_h);
        all.episodes.extend(sh.episodes);
        for (k, v) in sh.kind_steps {
            *all.kind_steps.entry(k).or_default() += v;
        }
    }
    let n = all.rewards.len();
    let (advantages, returns) = gae(
        &all.rewards,
        &all.values,
        &all.terminal,
        &all.truncated,
        &all.bootstrap,
        ppo.gamma,
        ppo.lambda,
    );
    let shape = |rows, cols, v: Vec<f64>| Array2::from_shape_vec((rows, cols), v).expect("shard sizes");
    let batch = RolloutBatch {
        obs: shape(n, in_dim, all.obs),
        actions: shape(n, out_dim, all.actions),
        log_probs: all.log_probs,
        rewards: all.rewards,
        values: all.values,
        terminal: all.terminal,
        truncated: all.truncated,
        bootstrap: all.bootstrap,
        starts: all.starts,
        policy_h: shape(n, hidden, all.policy_h),
        critic_h: shape(n, c_hidden, all.critic_h),
        advantages,
        returns,
        episodes: all.episodes,
        kind_steps: all.kind_steps,
    };
    batch.validate()?;
    Ok(batch)
}
