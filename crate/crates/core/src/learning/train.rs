//! Training driver for the blind and visual phases.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::biped::BipedModel;
use crate::checkpoint::{params_hash, Checkpoint, CheckpointMeta, Phase};
use crate::controller::{critic_arch, new_blind_policy, new_residual_policy, BLIND_OBS, VISUAL_OBS};
use crate::error::{Error, Result};
use crate::learning::ppo::{ppo_update, Optimizers, PPOConfig};
use crate::learning::regimen::RegimenSpec;
use crate::learning::reward::RewardWeights;
use crate::learning::rollout::{collect_rollout, Agent, Env, EnvConfig};
use crate::nn::{HeadInit, Network};
use crate::protocol::Thresholds;
use crate::seed;
use crate::terrain::TerrainKind;

pub const CURVE_FILE: &str = "training.csv";
pub const SAMPLING_FILE: &str = "sampling.csv";
pub const FINAL_CHECKPOINT: &str = "final.gbck";

/// Everything that defines a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSpec {
    pub phase: Phase,
    pub regimen: RegimenSpec,
    pub ppo: PPOConfig,
    pub reward: RewardWeights,
    pub model: BipedModel,
    pub thresholds: Thresholds,
    pub iterations: u64,
    /// Write a checkpoint every this many iterations; 0 writes only the final one.
    pub checkpoint_every: u64,
    /// Threads collecting rollouts. Results depend on `ppo.workers`, not on this.
    pub threads: usize,
}

/// One row of the training curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub iteration: u64,
    /// Cumulative control steps.
    pub steps: u64,
    /// Mean return of episodes finished this iteration.
    pub mean_reward: f64,
    pub mean_ep_len: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub clip_frac: f64,
    pub kl: f64,
}

/// Per-terrain sampling totals of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingRow {
    pub kind: TerrainKind,
    pub episodes: u64,
    pub steps: u64,
    pub step_fraction: f64,
    /// Reference-scale iterations attributed to this terrain by its step share.
    pub reference_iterations: f64,
    /// Reference-scale iterations the regimen table assigns to this terrain.
    pub nominal_reference_iterations: f64,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub checkpoint: Checkpoint,
    pub curve: Vec<CurveRow>,
    pub sampling: Vec<SamplingRow>,
    /// Path of the final checkpoint when an output directory was given.
    pub final_path: Option<PathBuf>,
}

fn initial_agent(spec: &TrainSpec, resume: Option<&Checkpoint>) -> Result<Agent> {
    let s = spec.ppo.seed;
    let fresh_critic = |input| Network::init(critic_arch(input), seed::derive(s, "critic", &[]), HeadInit::Scaled(1.0), 0.0);
    let reuse_critic = |input: usize| {
        resume
            .filter(|ck| ck.meta.phase == spec.phase)
            .and_then(|ck| ck.critic.clone())
            .filter(|c| c.arch == critic_arch(input))
            .unwrap_or_else(|| fresh_critic(input))
    };
    match spec.phase {
        Phase::Blind => Ok(Agent {
            phase: Phase::Blind,
            blind: resume
                .map(|ck| ck.blind.clone())
                .unwrap_or_else(|| new_blind_policy(seed::derive(s, "blind", &[]))),
            residual: None,
            critic: reuse_critic(BLIND_OBS),
        }),
        Phase::Visual => {
            let ck = resume.ok_or_else(|| {
                Error::Config("the visual phase needs a blind checkpoint to resume from".into())
            })?;
            Ok(Agent {
                phase: Phase::Visual,
                blind: ck.blind.clone(),
                residual: Some(
                    ck.residual
                        .clone()
                        .unwrap_or_else(|| new_residual_policy(seed::derive(s, "residual", &[]))),
                ),
                critic: reuse_critic(VISUAL_OBS),
            })
        }
    }
}

fn checkpoint_of(agent: &Agent, spec: &TrainSpec, iterations: u64, parent: Option<String>) -> Checkpoint {
    Checkpoint {
        blind: agent.blind.clone(),
        residual: agent.residual.clone(),
        critic: Some(agent.critic.clone()),
        meta: CheckpointMeta {
            phase: spec.phase,
            regimen: spec.regimen.name.clone(),
            iterations,
            seed: spec.ppo.seed,
            blind_hash: params_hash(&agent.blind.params),
            parent,
            model: spec.model.clone(),
        },
    }
}

/// Train for `spec.iterations` collect-and-update cycles.
///
/// With `out_dir`, writes `training.csv`, `sampling.csv`, periodic
/// checkpoints under `checkpoints/` and `final.gbck`. `progress` sees each
/// curve row as it is produced.
pub fn train(
    spec: &TrainSpec,
    resume: Option<&Checkpoint>,
    out_dir: Option<&Path>,
    mut progress: impl FnMut(&CurveRow),
) -> Result<TrainResult> {
    spec.ppo.validate()?;
    spec.regimen.validate()?;
    spec.reward.validate()?;
    spec.model.validate()?;
    let mut agent = initial_agent(spec, resume)?;
    let frozen = params_hash(&agent.blind.params);
    let parent = resume.map(Checkpoint::id);
    let prior = resume
        .filter(|ck| ck.meta.phase == spec.phase)
        .map_or(0, |ck| ck.meta.iterations);
    let env_cfg = EnvConfig {
        regimen: spec.regimen.clone(),
        model: spec.model.clone(),
        weights: spec.reward,
        thresholds: spec.thresholds,
    };
    let workers = spec.ppo.workers;
    let mut envs = (0..workers)
        .map(|w| Env::new(seed::derive(spec.ppo.seed, "env", &[w as u64, workers as u64]), &agent, &env_cfg))
        .collect::<Result<Vec<_>>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir.join("checkpoints")).map_err(|e| Error::io(dir, e))?;
    }
    let mut opt = Optimizers::new(agent.policy(), &agent.critic, spec.ppo.learning_rate);
    let mut curve = Vec::new();
    let mut episodes: BTreeMap<TerrainKind, u64> = BTreeMap::new();
    let mut kind_steps: BTreeMap<TerrainKind, u64> = BTreeMap::new();
    let mut steps = 0u64;
    let mut curve_writer = match out_dir {
        Some(dir) => Some(csv::Writer::from_path(dir.join(CURVE_FILE))?),
        None => None,
    };
    for it in 0..spec.iterations {
        let batch = collect_rollout(&agent, &mut envs, &env_cfg, &spec.ppo, it, &pool)?;
        for e in &batch.episodes {
            *episodes.entry(e.kind).or_default() += 1;
        }
        for (k, n) in &batch.kind_steps {
            *kind_steps.entry(*k).or_default() += *n as u64;
        }
        steps += batch.len() as u64;
        let arch = agent.critic.arch;
        let mut critic = std::mem::replace(&mut agent.critic, Network::zeros(arch));
        let stats = ppo_update(agent.policy_mut(), &mut critic, &mut opt, &batch, &spec.ppo, it);
        agent.critic = critic;
        let stats = stats?;
        let n_ep = batch.episodes.len().max(1) as f64;
        let (mean_reward, mean_ep_len) = if batch.episodes.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            (
                batch.episodes.iter().map(|e| e.ret).sum::<f64>() / n_ep,
                batch.episodes.iter().map(|e| e.len as f64).sum::<f64>() / n_ep,
            )
        };
        let row = CurveRow {
            iteration: prior + it + 1,
            steps,
            mean_reward,
            mean_ep_len,
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            clip_frac: stats.clip_frac,
            kl: stats.kl,
        };
        progress(&row);
        if let Some(w) = curve_writer.as_mut() {
            w.serialize(row)?;
            w.flush().map_err(|e| Error::io(CURVE_FILE, e))?;
        }
        curve.push(row);
        if let Some(dir) = out_dir {
            let done = it + 1;
            if spec.checkpoint_every > 0 && done % spec.checkpoint_every == 0 && done < spec.iterations {
                let ck = checkpoint_of(&agent, spec, prior + done, parent.clone());
                ck.save(&dir.join("checkpoints").join(format!("iter_{:06}.gbck", prior + done)))?;
            }
        }
    }
    if let Some(w) = curve_writer.as_mut() {
        w.flush().map_err(|e| Error::io(CURVE_FILE, e))?;
    }
    if params_hash(&agent.blind.params) != frozen && spec.phase == Phase::Visual {
        return Err(Error::Contract("blind parameters changed during the visual phase".into()));
    }
    let checkpoint = checkpoint_of(&agent, spec, prior + spec.iterations, parent);
    let sampling = sampling_rows(spec, &episodes, &kind_steps);
    let mut final_path = None;
    if let Some(dir) = out_dir {
        let path = dir.join(FINAL_CHECKPOINT);
        checkpoint.save(&path)?;
        let mut w = csv::Writer::from_path(dir.join(SAMPLING_FILE))?;
        for r in &sampling {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io(SAMPLING_FILE, e))?;
        final_path = Some(path);
    }
    Ok(TrainResult {
        checkpoint,
        curve,
        sampling,
        final_path,
    })
}

fn sampling_rows(
    spec: &TrainSpec,
    episodes: &BTreeMap<TerrainKind, u64>,
    kind_steps: &BTreeMap<TerrainKind, u64>,
) -> Vec<SamplingRow> {
    let total: u64 = kind_steps.values().sum();
    let reference = spec.regimen.to_reference(spec.iterations as f64);
    TerrainKind::ALL
        .iter()
        .filter(|k| spec.regimen.frequency(**k) > 0.0 || kind_steps.contains_key(k))
        .map(|&kind| {
            let steps = kind_steps.get(&kind).copied().unwrap_or(0);
            let fraction = if total == 0 { 0.0 } else { steps as f64 / total as f64 };
            SamplingRow {
                kind,
                episodes: episodes.get(&kind).copied().unwrap_or(0),
                steps,
                step_fraction: fraction,
                reference_iterations: reference * fraction,
                nominal_reference_iterations: reference * spec.regimen.frequency(kind),
            }
        })
        .collect()
}

/// Read a training curve written by [`train`].
pub fn read_curve(path: &Path) -> Result<Vec<CurveRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Mean of the first and last `fraction` of a series, ignoring NaNs.
pub fn window_means(values: &[f64], fraction: f64) -> (f64, f64) {
    let n = values.len();
    let w = ((n as f64 * fraction).ceil() as usize).clamp(1, n.max(1));
    let mean = |s: &[f64]| {
        let v: Vec<f64> = s.iter().copied().filter(|x| x.is_finite()).collect();
        v.iter().sum::<f64>() / v.len().max(1) as f64
    };
    (mean(&values[..w.min(n)]), mean(&values[n.saturating_sub(w)..]))
}
