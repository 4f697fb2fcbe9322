//! Independent oracles shared by the integration tests and the acceptance
//! target. Nothing here calls the code it checks.

#![allow(dead_code)]

pub mod checks;

use gaitbench::behavior::{Edges, StepEvent};
use gaitbench::controller::CLOCK_DT;
use gaitbench::protocol::{contact_events, Outcome, Record, TrialLog, TrialSpec};
use gaitbench::terrain::{Difficulty, ObstacleKind};
use rand::Rng;

pub const DEBOUNCE: usize = 3;

/// Debounced edges via run-length encoding: a run of at least `debounce`
/// equal flags is stable, and an edge is the start of a stable run whose
/// value differs from the previous stable value.
pub fn rle_edges(flags: &[bool], debounce: usize) -> Vec<(usize, bool)> {
    let mut runs: Vec<(usize, usize, bool)> = Vec::new();
    for (i, &f) in flags.iter().enumerate() {
        match runs.last_mut() {
            Some((_, len, v)) if *v == f => *len += 1,
            _ => runs.push((i, 1, f)),
        }
    }
    let mut out = Vec::new();
    let Some(&first) = flags.first() else { return out };
    let mut stable = first;
    for (start, len, v) in runs {
        if len >= debounce && v != stable {
            out.push((start, v));
            stable = v;
        }
    }
    out
}

/// Steps from a brute-force scan of every record pair.
pub fn brute_force_steps(records: &[Record], debounce: usize) -> Vec<StepEvent> {
    let mut steps = Vec::new();
    for foot in 0..2 {
        let flags: Vec<bool> = records.iter().map(|r| r.contact[foot]).collect();
        let edges = rle_edges(&flags, debounce);
        for (k, &(i, up)) in edges.iter().enumerate() {
            if up {
                let liftoff = edges.iter().skip(k + 1).find(|e| !e.1).map(|e| records[e.0].t);
                let p = records[i].feet[foot];
                steps.push(StepEvent {
                    foot,
                    touchdown_t: records[i].t,
                    touchdown_pos: [p[0], p[1]],
                    liftoff_t: liftoff,
                    step_length: None,
                });
            }
        }
    }
    // Insertion sort by (time, foot), then lengths from the predecessor.
    for i in 1..steps.len() {
        let mut j = i;
        while j > 0 && (steps[j - 1].touchdown_t, steps[j - 1].foot) > (steps[j].touchdown_t, steps[j].foot) {
            steps.swap(j - 1, j);
            j -= 1;
        }
    }
    for k in 1..steps.len() {
        let dx = steps[k].touchdown_pos[0] - steps[k - 1].touchdown_pos[0];
        let dy = steps[k].touchdown_pos[1] - steps[k - 1].touchdown_pos[1];
        steps[k].step_length = Some(dx.hypot(dy));
    }
    steps
}

/// Metric values a synthetic log was built to have.
#[derive(Debug, Clone)]
pub struct Expected {
    pub mid_obstacle_speed: Option<f64>,
    pub approach_speed: Option<f64>,
    pub last_step_placement: Option<f64>,
    /// Planned touchdowns `(record index, foot)` that a correct detector finds.
    pub touchdowns: Vec<(usize, usize)>,
    pub success: bool,
}

pub struct Synthetic {
    pub log: TrialLog,
    pub expected: Expected,
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// A trial log with known metric values.
///
/// The trunk advances by a fixed `dx` per record so the first record past the
/// near edge and the span over the obstacle are known by construction.
/// Contact flags alternate between intervals of at least four records, with
/// short blips that a debounced detector must ignore.
pub fn synthetic_trial<R: Rng>(rng: &mut R, kind: ObstacleKind, difficulty: f64, edges: Edges) -> Synthetic {
    let i_edge: usize = rng.random_range(30..90);
    let on_obstacle: usize = rng.random_range(3..40);
    let dx = (edges.far - edges.near) / (on_obstacle as f64 - 0.5);
    let delta = rng.random_range(0.0..0.45) * dx;
    let full = i_edge + on_obstacle + rng.random_range(1..20);
    let n = match rng.random_range(0..10) {
        0 => rng.random_range(10..i_edge),
        1 => rng.random_range(i_edge + 1..i_edge + on_obstacle),
        _ => full,
    };
    let x_of = |i: usize| edges.near + (i as f64 - i_edge as f64) * dx + delta;

    let mut flags = [vec![true; n], vec![true; n]];
    let mut touchdowns = Vec::new();
    for foot in 0..2 {
        let mut at = 0;
        let mut state = true;
        while at < n {
            let len: usize = rng.random_range(4..14);
            let end = (at + len).min(n);
            flags[foot][at..end].fill(state);
            if at > 0 && state && at + DEBOUNCE <= n {
                touchdowns.push((at, foot));
            }
            // A blip at least DEBOUNCE records after the interval start and
            // one record before its end.
            if end == at + len && len >= DEBOUNCE + 3 && rng.random_bool(0.5) {
                let blip: usize = rng.random_range(1..DEBOUNCE);
                let latest = end - 1 - blip;
                if latest >= at + DEBOUNCE {
                    let p = rng.random_range(at + DEBOUNCE..=latest);
                    flags[foot][p..p + blip].fill(!state);
                }
            }
            at = end;
            state = !state;
        }
    }
    touchdowns.sort_by_key(|&(i, f)| (i, f));

    let records: Vec<Record> = (0..n)
        .map(|i| {
            let x = x_of(i);
            let y = rng.random_range(-0.3..0.3);
            let foot = |rng: &mut R| {
                [x + rng.random_range(-0.45..0.45), y + rng.random_range(-0.2..0.2), 0.0]
            };
            Record {
                t: i as f64 * CLOCK_DT,
                trunk_pos: [x, y, 0.9],
                trunk_vel: [rng.random_range(0.1..1.3), rng.random_range(-0.2..0.2), rng.random_range(-0.1..0.1)],
                yaw: 0.0,
                yaw_rate: 0.0,
                joint_pos: [0.0; 6],
                joint_vel: [0.0; 6],
                feet: [foot(rng), foot(rng)],
                contact: [flags[0][i], flags[1][i]],
                action: None,
                reward: None,
            }
        })
        .collect();
    let speed = |r: &Record| r.trunk_vel[0].hypot(r.trunk_vel[1]);

    let mid: Vec<f64> = (i_edge..(i_edge + on_obstacle).min(n)).map(|i| speed(&records[i])).collect();
    let pre: Vec<usize> = touchdowns
        .iter()
        .filter(|&&(i, f)| records[i].feet[f][0] < edges.near)
        .map(|&(i, _)| i)
        .collect();
    let placement = touchdowns
        .iter()
        .filter(|&&(i, f)| records[i].feet[f][0] < edges.near)
        .last()
        .map(|&(i, f)| edges.near - records[i].feet[f][0]);
    let approach = (pre.len() >= 2).then(|| {
        let start = pre[pre.len() - 2];
        let end = if i_edge < n { start.max(i_edge) } else { n - 1 };
        let v: Vec<f64> = (start..=end).map(|i| speed(&records[i])).collect();
        mean(&v).unwrap()
    });

    let time = records.last().map_or(0.0, |r| r.t);
    let outcome = match rng.random_range(0..3) {
        0 => Outcome::Success { time },
        1 => Outcome::Fall {
            time,
            position: records.last().map_or([0.0; 3], |r| r.trunk_pos),
            fault: false,
        },
        _ => Outcome::Timeout { time },
    };
    let spec = TrialSpec::new(kind, Difficulty::new(difficulty).unwrap(), rng.random());
    let log = TrialLog {
        spec,
        checkpoint_id: "synthetic".into(),
        events: contact_events(&records),
        records,
        outcome,
    };
    Synthetic {
        expected: Expected {
            mid_obstacle_speed: mean(&mid),
            approach_speed: approach,
            last_step_placement: placement,
            touchdowns,
            success: matches!(outcome, Outcome::Success { .. }),
        },
        log,
    }
}

/// Advantages by the explicit discounted sum `Σ (γλ)^k δ_{t+k}` over each
/// uninterrupted chain.
pub fn gae_by_sums(
    rewards: &[f64],
    values: &[f64],
    terminal: &[bool],
    truncated: &[bool],
    bootstrap: &[f64],
    gamma: f64,
    lambda: f64,
) -> Vec<f64> {
    let n = rewards.len();
    let next_value = |t: usize| {
        if terminal[t] {
            0.0
        } else if truncated[t] || t + 1 == n {
            bootstrap[t]
        } else {
            values[t + 1]
        }
    };
    let delta: Vec<f64> = (0..n).map(|t| rewards[t] + gamma * next_value(t) - values[t]).collect();
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            let mut k = t;
            loop {
                sum += (gamma * lambda).powi((k - t) as i32) * delta[k];
                if terminal[k] || truncated[k] || k + 1 == n {
                    break;
                }
                k += 1;
            }
            sum
        })
        .collect()
}

/// Relative difference with an absolute floor, for gradient checks.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}
