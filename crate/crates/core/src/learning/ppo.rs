//! Proximal policy optimization over recurrent actor and critic.
//!
//! Segments of the batch are cut into chunks of at most `seq_len` steps. Each
//! chunk is replayed from the hidden states stored during collection, so the
//! gradient flows through time inside a chunk but not across chunks.

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learning::rollout::RolloutBatch;
use crate::nn::{clip_global_norm, Adam, Network};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PPOConfig {
    pub clip: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub minibatches: usize,
    pub max_grad_norm: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub steps_per_iteration: usize,
    pub workers: usize,
    pub seed: u64,
    /// Longest replayed chunk for backpropagation through time.
    pub seq_len: usize,
    /// Return units per critic output unit; value clipping acts on the
    /// critic's own scale.
    pub value_scale: f64,
}

impl Default for PPOConfig {
    fn default() -> Self {
        PPOConfig {
            clip: 0.2,
            gamma: 0.99,
            lambda: 0.95,
            learning_rate: 1e-3,
            epochs: 4,
            minibatches: 4,
            max_grad_norm: 0.5,
            entropy_coef: 0.0,
            value_coef: 0.5,
            steps_per_iteration: 4000,
            workers: 1,
            seed: 0,
            seq_len: 32,
            value_scale: 50.0,
        }
    }
}

impl PPOConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("ppo: {m}")));
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return bad("clip must lie in (0, 1)");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0 && self.lambda > 0.0 && self.lambda <= 1.0) {
            return bad("gamma and lambda must lie in (0, 1]");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be finite and non-negative");
        }
        if !(self.value_scale > 0.0 && self.value_scale.is_finite()) {
            return bad("value_scale must be positive");
        }
        if !(self.max_grad_norm > 0.0 && self.value_coef >= 0.0 && self.entropy_coef >= 0.0) {
            return bad("gradient clip must be positive and coefficients non-negative");
        }
        if self.epochs == 0 || self.minibatches == 0 || self.seq_len == 0 || self.workers == 0 {
            return bad("epochs, minibatches, seq_len and workers must be positive");
        }
        if self.steps_per_iteration < self.workers {
            return bad("steps_per_iteration must be at least the worker count");
        }
        Ok(())
    }
}

/// Averages over all minibatch updates of one call.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_frac: f64,
    /// Mean of `logp_old - logp_new`.
    pub kl: f64,
    pub grad_norm: f64,
}

/// A contiguous run of batch rows replayed from its stored hidden state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Chunk {
    pub start: usize,
    pub len: usize,
}

pub fn chunks(batch: &RolloutBatch, seq_len: usize) -> Vec<Chunk> {
    let mut out = Vec::new();
    for (start, len) in batch.segments() {
        let mut at = 0;
        while at < len {
            let l = seq_len.min(len - at);
            out.push(Chunk { start: start + at, len: l });
            at += l;
        }
    }
    out
}

/// Loss values and gradients for one minibatch.
#[derive(Debug, Clone)]
pub struct LossEval {
    pub stats: UpdateStats,
    /// Total objective `policy + value_coef·value − entropy_coef·entropy`.
    pub total: f64,
    pub policy_grad: Vec<f64>,
    pub critic_grad: Vec<f64>,
}

fn gather(source: &Array2<f64>, group: &[Chunk], t: usize) -> Array2<f64> {
    let mut out = Array2::zeros((group.len(), source.ncols()));
    for (b, c) in group.iter().enumerate() {
        if t < c.len {
            out.row_mut(b).assign(&source.row(c.start + t));
        }
    }
    out
}

/// Evaluate the PPO objective on `group` with `advantages` already
/// normalized, returning gradients with respect to both networks.
pub fn minibatch_loss(
    policy: &Network,
    critic: &Network,
    batch: &RolloutBatch,
    advantages: &[f64],
    group: &[Chunk],
    cfg: &PPOConfig,
) -> LossEval {
    let steps = group.iter().map(|c| c.len).max().unwrap_or(0);
    let inputs: Vec<Array2<f64>> = (0..steps).map(|t| gather(&batch.obs, group, t)).collect();
    let h0_pi = gather(&batch.policy_h, group, 0);
    let h0_v = gather(&batch.critic_h, group, 0);
    let pi = policy.forward_sequence(&inputs, &h0_pi);
    let vf = critic.forward_sequence(&inputs, &h0_v);

    let log_std = policy.log_std().to_vec();
    let dims = log_std.len();
    let inv_var: Vec<f64> = log_std.iter().map(|l| (-2.0 * l).exp()).collect();
    let count = group.iter().map(|c| c.len).sum::<usize>() as f64;
    let entropy_per_step: f64 = log_std.iter().map(|l| l + 0.5 * (1.0 + super::LN_2PI)).sum();

    let mut d_pi: Vec<Array2<f64>> = (0..steps).map(|_| Array2::zeros((group.len(), dims))).collect();
    let mut d_v: Vec<Array2<f64>> = (0..steps).map(|_| Array2::zeros((group.len(), 1))).collect();
    let mut d_log_std = vec![-cfg.entropy_coef; dims];
    let mut st = UpdateStats::default();

    for (b, c) in group.iter().enumerate() {
        for t in 0..c.len {
            let i = c.start + t;
            let mean = pi.outputs[t].row(b);
            let a = batch.actions.row(i);
            let mut logp = 0.0;
            for d in 0..dims {
                let z = (a[d] - mean[d]) * (-log_std[d]).exp();
                logp += -0.5 * z * z - log_std[d] - 0.5 * super::LN_2PI;
            }
            let ratio = (logp - batch.log_probs[i]).exp();
            let adv = advantages[i];
            let clipped = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip);
            let unclipped_obj = ratio * adv;
            let clipped_obj = clipped * adv;
            st.policy_loss -= unclipped_obj.min(clipped_obj) / count;
            st.kl += (batch.log_probs[i] - logp) / count;
            if (ratio - 1.0).abs() > cfg.clip {
                st.clip_frac += 1.0 / count;
            }
            // d(loss)/d(logp); zero where the clipped branch is active and flat.
            let dl_dlogp = if unclipped_obj <= clipped_obj {
                -adv * ratio / count
            } else {
                0.0
            };
            for d in 0..dims {
                let diff = a[d] - mean[d];
                d_pi[t][[b, d]] = dl_dlogp * diff * inv_var[d];
                d_log_std[d] += dl_dlogp * (diff * diff * inv_var[d] - 1.0);
            }

            let v = vf.outputs[t][[b, 0]];
            let v_old = batch.values[i] / cfg.value_scale;
            let ret = batch.returns[i] / cfg.value_scale;
            let v_clip = v_old + (v - v_old).clamp(-cfg.clip, cfg.clip);
            let l1 = (v - ret).powi(2);
            let l2 = (v_clip - ret).powi(2);
            st.value_loss += 0.5 * l1.max(l2) / count;
            let dv = if l1 >= l2 {
                v - ret
            } else if (v - v_old).abs() < cfg.clip {
                v_clip - ret
            } else {
                0.0
            };
            d_v[t][[b, 0]] = cfg.value_coef * dv / count;
        }
    }
    st.entropy = entropy_per_step;

    let mut policy_grad = vec![0.0; policy.params.len()];
    policy.backward_sequence(&pi, &d_pi, &mut policy_grad);
    if let Some(off) = policy.log_std_offset() {
        for (g, d) in policy_grad[off..].iter_mut().zip(&d_log_std) {
            *g += d;
        }
    }
    let mut critic_grad = vec![0.0; critic.params.len()];
    critic.backward_sequence(&vf, &d_v, &mut critic_grad);
    let total = st.policy_loss + cfg.value_coef * st.value_loss - cfg.entropy_coef * st.entropy;
    LossEval {
        stats: st,
        total,
        policy_grad,
        critic_grad,
    }
}

/// Advantages scaled to zero mean and unit standard deviation.
pub fn normalize(adv: &[f64]) -> Vec<f64> {
    let n = adv.len().max(1) as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-8);
    adv.iter().map(|a| (a - mean) / std).collect()
}

/// Optimizer state of both networks.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizers {
    pub policy: Adam,
    pub critic: Adam,
}

impl Optimizers {
    pub fn new(policy: &Network, critic: &Network, lr: f64) -> Self {
        Optimizers {
            policy: Adam::new(policy.params.len(), lr),
            critic: Adam::new(critic.params.len(), lr),
        }
    }
}

/// Run `cfg.epochs` passes of minibatch updates over `batch`.
///
/// On a non-finite loss or gradient both networks are restored to their
/// state at entry and an optimization error is returned.
pub fn ppo_update(
    policy: &mut Network,
    critic: &mut Network,
    opt: &mut Optimizers,
    batch: &RolloutBatch,
    cfg: &PPOConfig,
    iteration: u64,
) -> Result<UpdateStats> {
    batch.validate()?;
    if batch.actions.ncols() != policy.arch.output || batch.obs.ncols() != policy.arch.input {
        return Err(Error::Contract("batch does not match the policy architecture".into()));
    }
    let saved = (policy.params.clone(), critic.params.clone(), opt.clone());
    let adv = normalize(&batch.advantages);
    let mut all = chunks(batch, cfg.seq_len);
    let mut rng = seed::rng(seed::derive(cfg.seed, "minibatch", &[iteration]));
    let groups = cfg.minibatches.min(all.len()).max(1);
    let mut acc = UpdateStats::default();
    let mut updates = 0.0;
    for _ in 0..cfg.epochs {
        all.shuffle(&mut rng);
        for g in 0..groups {
            let group: Vec<Chunk> = all.iter().skip(g).step_by(groups).copied().collect();
            let mut eval = minibatch_loss(policy, critic, batch, &adv, &group, cfg);
            let finite = eval.total.is_finite()
                && eval.policy_grad.iter().chain(&eval.critic_grad).all(|g| g.is_finite());
            if !finite {
                policy.params = saved.0;
                critic.params = saved.1;
                *opt = saved.2;
                return Err(Error::Optimization(format!(
                    "non-finite loss or gradient at iteration {iteration}"
                )));
            }
            let norm = clip_global_norm(
                &mut [&mut eval.policy_grad[..], &mut eval.critic_grad[..]],
                cfg.max_grad_norm,
            );
            opt.policy.step(&mut policy.params, &eval.policy_grad);
            opt.critic.step(&mut critic.params, &eval.critic_grad);
            let s = eval.stats;
            acc.policy_loss += s.policy_loss;
            acc.value_loss += s.value_loss;
            acc.entropy += s.entropy;
            acc.clip_frac += s.clip_frac;
            acc.kl += s.kl;
            acc.grad_norm += norm;
            updates += 1.0;
        }
    }
    Ok(UpdateStats {
        policy_loss: acc.policy_loss / updates,
        value_loss: acc.value_loss / updates,
        entropy: acc.entropy / updates,
        clip_frac: acc.clip_frac / updates,
        kl: acc.kl / updates,
        grad_norm: acc.grad_norm / updates,
    })
}
