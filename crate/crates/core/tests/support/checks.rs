//! Criterion checks that panic on failure. The integration tests wrap each
//! one in a `#[test]`; the acceptance runner calls them directly and times them.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use gaitbench::behavior::{
    approach_speed, detect_steps, last_step_placement, mid_obstacle_speed, read_report, summarize, write_report, Edges,
    Metric,
};
use gaitbench::biped::{
    pd_forces, reset, run_control_step, standing_equilibrium, step_physics, BipedModel, BipedState, PDTarget, Vec3, DT,
    LEFT, RIGHT, SUBSTEPS,
};
use gaitbench::checkpoint::{params_hash, Checkpoint, Phase};
use gaitbench::controller::PolicyAction;
use gaitbench::learning::ppo::{chunks, minibatch_loss, normalize, Optimizers};
use gaitbench::learning::rollout::gaussian_log_prob;
use gaitbench::learning::{gae, ppo_update, sample_terrain, train, PPOConfig, RegimenSpec, RolloutBatch, TrainConfig};
use gaitbench::nn::{Arch, HeadInit, Network};
use gaitbench::protocol::{
    run_sweep, run_trial, trial_seed, SweepManifest, SweepOptions, SweepResult, TrialSpec, FORMAT_VERSION, MANIFEST_NAME,
    SWEEP_FORMAT,
};
use gaitbench::seed;
use gaitbench::terrain::{
    build_obstacle, build_standard, Difficulty, Geometry, ObstacleKind, StandardKind, StandardParams, TerrainField,
    TerrainKind,
};
use ndarray::Array2;
use rand::Rng;

use super::{brute_force_steps, rel_err, synthetic_trial, DEBOUNCE};

/// The committed blind walker.
pub fn walker() -> Checkpoint {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../results/blind/final.gbck");
    Checkpoint::load(&path).unwrap()
}

// Difficulty mapping

/// Governing property by hand: slope in degrees, the rest in metres.
pub fn expected_property(kind: ObstacleKind, d: f64) -> f64 {
    match kind {
        ObstacleKind::Slope => 90.0 * d,
        ObstacleKind::DropOff => 1.5 * d,
        ObstacleKind::Gap => 1.0 * d,
        ObstacleKind::Bridge => 1.02 - 1.00 * d,
    }
}

/// Property read back from the built terrain's geometry.
pub fn built_property(kind: ObstacleKind, d: f64) -> f64 {
    let field = build_obstacle(kind, d, 0).unwrap();
    match (kind, field.geometry) {
        (ObstacleKind::Slope, Geometry::Slope { angle, .. }) => angle.to_degrees(),
        (ObstacleKind::DropOff, Geometry::DropOff { drop }) => drop,
        (ObstacleKind::Gap, Geometry::Gap { width, .. }) => width,
        (ObstacleKind::Bridge, Geometry::Bridge { width, .. }) => {
            let (lo, hi) = field.deck_bounds.unwrap();
            assert!((hi - lo - width).abs() < 1e-12);
            width
        }
        (k, g) => panic!("{k} built unexpected geometry {g:?}"),
    }
}

pub fn difficulty_mapping() {
    for kind in ObstacleKind::ALL {
        for i in 0..=10 {
            let d = i as f64 / 10.0;
            let want = expected_property(kind, d);
            assert!((kind.property(Difficulty::new(d).unwrap()) - want).abs() <= 1e-9, "{kind} d={d}");
            assert!((built_property(kind, d) - want).abs() <= 1e-9, "{kind} d={d} (built)");
        }
    }
}

// Regimen sampling

/// The regimen table typed by hand, in percent, columns flat, hills, ridges, blocks,
/// stairs, slope, drop-off, bridge, gap.
pub const HAND_TABLE: [(&str, [f64; 9]); 7] = [
    ("standard", [3.0, 7.0, 20.0, 35.0, 35.0, 0.0, 0.0, 0.0, 0.0]),
    ("multi-test", [0.0, 0.0, 0.0, 0.0, 0.0, 25.0, 25.0, 25.0, 25.0]),
    ("combined", [1.5, 3.5, 10.0, 18.5, 18.5, 12.5, 12.5, 12.5, 12.5]),
    ("single-test-slope", [0.0, 0.0, 0.0, 0.0, 0.0, 100.0, 0.0, 0.0, 0.0]),
    ("single-test-dropoff", [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 100.0, 0.0, 0.0]),
    ("single-test-bridge", [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 100.0, 0.0]),
    ("single-test-gap", [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 100.0]),
];

const COLUMNS: [&str; 9] = ["flat", "hills", "ridges", "blocks", "stairs", "slope", "dropoff", "bridge", "gap"];

pub fn table_frequencies() {
    const DRAWS: usize = 100_000;
    for (row, (name, pct)) in HAND_TABLE.iter().enumerate() {
        let regimen = RegimenSpec::builtin(name).unwrap();
        let mut rng = seed::rng(seed::derive(2024, "table", &[row as u64]));
        let mut counts: BTreeMap<TerrainKind, usize> = BTreeMap::new();
        for _ in 0..DRAWS {
            *counts.entry(sample_terrain(&regimen, &mut rng).kind).or_default() += 1;
        }
        for (col, want) in COLUMNS.iter().zip(pct) {
            let kind: TerrainKind = col.parse().unwrap();
            let got = counts.get(&kind).copied().unwrap_or(0) as f64 / DRAWS as f64;
            assert!((got - want / 100.0).abs() <= 0.01, "{name}/{col}: sampled {got:.4}, table {want}%");
        }
    }
}

// Behavior metrics

/// Equal within 1e-9, or both absent.
pub fn close(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => (a - b).abs() <= 1e-9,
        (None, None) => true,
        _ => false,
    }
}

/// `logs` synthetic trials: metrics equal their construction and step
/// detection equals the brute-force scan.
pub fn metric_oracles(logs: usize) {
    let mut rng = seed::rng(11);
    let edges = Edges::of(&build_obstacle(ObstacleKind::Gap, 0.3, 0).unwrap());
    let mut with_approach = 0;
    for k in 0..logs {
        let s = synthetic_trial(&mut rng, ObstacleKind::Gap, 0.3, edges);
        let steps = detect_steps(&s.log);
        let found: Vec<(usize, usize)> = steps
            .iter()
            .map(|e| ((e.touchdown_t / 0.02).round() as usize, e.foot))
            .collect();
        assert_eq!(found, s.expected.touchdowns, "log {k}: touchdowns");
        assert_eq!(steps, brute_force_steps(&s.log.records, DEBOUNCE), "log {k}: steps");
        let e = &s.expected;
        assert!(close(mid_obstacle_speed(&s.log.records, edges), e.mid_obstacle_speed), "log {k}: mid");
        assert!(close(approach_speed(&s.log.records, &steps, edges), e.approach_speed), "log {k}: approach");
        assert!(close(last_step_placement(&steps, edges), e.last_step_placement), "log {k}: placement");
        with_approach += usize::from(e.approach_speed.is_some());
    }
    assert!(with_approach > logs / 2, "generator rarely produced an approach window");
}

/// Write a synthetic sweep and check the report against per-level oracles.
pub fn summarize_oracles() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = seed::rng(13);
    let kind = ObstacleKind::DropOff;
    let (levels, trials) = (4, 7);
    let difficulties: Vec<f64> = (0..levels).map(|l| l as f64 / (levels - 1) as f64).collect();
    std::fs::create_dir_all(dir.path().join("logs")).unwrap();
    let mut files = Vec::new();
    let mut outcomes = Vec::new();
    let mut expected = Vec::new();
    for (l, &d) in difficulties.iter().enumerate() {
        let edges = Edges::of(&build_obstacle(kind, d, 0).unwrap());
        let mut row_files = Vec::new();
        let mut row_codes = String::new();
        let mut row_expected = Vec::new();
        for t in 0..trials {
            let s = synthetic_trial(&mut rng, kind, d, edges);
            let name = format!("logs/L{l:03}_T{t:03}.jsonl");
            s.log.write(&dir.path().join(&name)).unwrap();
            row_files.push(name);
            row_codes.push(s.log.outcome.code().as_char());
            row_expected.push(s.expected);
        }
        files.push(row_files);
        outcomes.push(row_codes);
        expected.push(row_expected);
    }
    let manifest = SweepManifest {
        format: SWEEP_FORMAT.into(),
        version: FORMAT_VERSION,
        kind,
        master_seed: 0,
        levels,
        trials,
        checkpoint_id: "synthetic".into(),
        difficulties: difficulties.clone(),
        outcomes: outcomes.clone(),
        files,
    };
    std::fs::write(dir.path().join(MANIFEST_NAME), serde_json::to_string(&manifest).unwrap()).unwrap();
    let sweep = SweepResult::load(dir.path()).unwrap();
    let report = summarize(&[sweep], &[]).unwrap();
    assert_eq!(report.gaps.len(), 3);
    let curves = &report.curves[&kind];
    for l in 0..levels {
        let wins = outcomes[l].chars().filter(|&c| c == 'S').count();
        assert_eq!(curves[&Metric::Success].mean[l], Some(wins as f64 / trials as f64));
        let pick = |f: fn(&super::Expected) -> Option<f64>| {
            let v: Vec<f64> = expected[l].iter().filter_map(f).collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        };
        let mean = |m: Metric| curves[&m].mean[l];
        assert!(close(mean(Metric::MidObstacleSpeed), pick(|e| e.mid_obstacle_speed)));
        assert!(close(mean(Metric::ApproachSpeed), pick(|e| e.approach_speed)));
        assert!(close(mean(Metric::LastStepPlacement), pick(|e| e.last_step_placement)));
    }
    let csv = dir.path().join("report.csv");
    write_report(&csv, &report.rows()).unwrap();
    assert_eq!(read_report(&csv).unwrap(), report.rows());
}

// Physics

fn flat() -> TerrainField {
    build_standard(StandardKind::Flat, 0, &StandardParams::default()).unwrap()
}

/// Airborne copy of `s`, lifted by `height` with the given velocities.
pub fn airborne(s: &BipedState, height: f64, trunk_vel: Vec3, foot_vel: [Vec3; 2]) -> BipedState {
    let mut a = *s;
    let lift = Vec3::new(0.0, 0.0, height);
    a.trunk_pos += lift;
    a.trunk_vel = trunk_vel;
    for leg in [LEFT, RIGHT] {
        a.feet[leg].pos += lift;
        a.feet[leg].vel = foot_vel[leg];
        a.feet[leg].anchor = None;
        a.feet[leg].contact = false;
    }
    a
}

/// Worst energy change relative to the start, per simulated second.
pub fn ballistic_drift(start: BipedState, model: &BipedModel, seconds: f64) -> f64 {
    let field = flat();
    let e0 = start.mechanical_energy(model);
    let mut s = start;
    let ticks = (seconds / DT).round() as usize;
    let mut worst: f64 = 0.0;
    for _ in 0..ticks {
        s = step_physics(&s, &[0.0; 6], &field, model, DT).unwrap();
        assert!(s.feet.iter().all(|f| !f.contact), "left the air");
        worst = worst.max((s.mechanical_energy(model) - e0).abs());
    }
    worst / e0.abs() / seconds
}

pub fn energy_drift() {
    let model = BipedModel::default();
    let base = standing_equilibrium(&model, 0.0, 0.0, 0.0);
    let v = Vec3::new(0.8, -0.3, 4.0);
    let drift = ballistic_drift(airborne(&base, 3.0, v, [v, v]), &model, 1.0);
    assert!(drift < 1e-3, "rigid drift {drift}");
    let feet = [v + Vec3::new(0.15, -0.1, 0.05), v + Vec3::new(-0.1, 0.2, -0.15)];
    let drift = ballistic_drift(airborne(&base, 3.0, v, feet), &model, 0.5);
    assert!(drift < 1e-3, "drift with leg motion {drift}");
}

pub fn penetration_at_double_weight() {
    let field = flat();
    for scale in [1.0, 1.25, 1.5, 1.75, 2.0] {
        let model = BipedModel {
            gravity: 9.81 * scale,
            ..BipedModel::default()
        };
        let mut s = reset(&field, &model, 0.0, 0.0, 0.0, 5).unwrap();
        let hold = PolicyAction::neutral(model.standing_pose(), 0.5);
        let mut worst: f64 = 0.0;
        for step in 0..150 {
            s = run_control_step(&s, &hold, &model, &field).unwrap();
            if step >= 100 {
                for f in &s.feet {
                    worst = worst.max(-f.pos.z);
                }
            }
        }
        assert!(s.feet.iter().all(|f| f.contact));
        assert!(worst <= 0.002, "{scale}x weight: penetration {worst}");
    }
}

/// Random PD targets, checking every physics tick.
fn friction_cone_holds(field: &TerrainField, seed: u64, control_steps: usize) {
    let model = BipedModel::default();
    let mut rng = seed::rng(seed);
    let mut s = reset(field, &model, -1.0, 0.0, 0.0, seed).unwrap();
    let mut contacts = 0;
    for _ in 0..control_steps {
        let mut t = model.standing_pose().0;
        for v in t.iter_mut().take(4) {
            *v += rng.random_range(-0.4..0.4);
        }
        t[4] += rng.random_range(-0.25..0.05);
        t[5] += rng.random_range(-0.25..0.05);
        let target = PDTarget(t);
        for _ in 0..SUBSTEPS {
            let f = pd_forces(&s, &target, &model);
            s = match step_physics(&s, &f, field, &model, DT) {
                Ok(n) => n,
                Err(_) => return,
            };
            for foot in &s.feet {
                let bound = field.friction * foot.normal_force;
                assert!(foot.tangential_force.norm() <= bound * (1.0 + 1e-12) + 1e-12);
                contacts += usize::from(foot.normal_force > 0.0);
            }
        }
    }
    assert!(contacts > 0);
}

pub fn friction_cone() {
    friction_cone_holds(&flat(), 1, 100);
    friction_cone_holds(&flat().with_friction(0.2), 2, 100);
    friction_cone_holds(&build_obstacle(ObstacleKind::Slope, 0.25, 0).unwrap().with_friction(0.4), 3, 100);
}

pub fn trajectory(seed: u64) -> Vec<BipedState> {
    let field = build_obstacle(ObstacleKind::Slope, 0.1, 0).unwrap();
    let model = BipedModel::default();
    let mut rng = seed::rng(seed);
    let mut s = reset(&field, &model, -3.0, 0.1, 0.0, seed).unwrap();
    let mut out = vec![s];
    for _ in 0..150 {
        let mut t = model.standing_pose().0;
        for v in t.iter_mut().take(4) {
            *v += rng.random_range(-0.2..0.2);
        }
        match run_control_step(&s, &PolicyAction::neutral(PDTarget(t), 0.5), &model, &field) {
            Ok(n) => s = n,
            Err(_) => break,
        }
        out.push(s);
    }
    out
}

/// Every number in `states`, as raw bits.
pub fn bits(states: &[BipedState]) -> Vec<u64> {
    fn walk(v: &serde_json::Value, out: &mut Vec<u64>) {
        match v {
            serde_json::Value::Number(n) => out.push(n.as_f64().unwrap().to_bits()),
            serde_json::Value::Array(a) => a.iter().for_each(|x| walk(x, out)),
            serde_json::Value::Object(o) => o.values().for_each(|x| walk(x, out)),
            serde_json::Value::Bool(b) => out.push(u64::from(*b)),
            _ => {}
        }
    }
    let mut out = Vec::new();
    walk(&serde_json::to_value(states).unwrap(), &mut out);
    out
}

pub fn bit_exact_physics() {
    let a = trajectory(21);
    let b = trajectory(21);
    assert_eq!(a.len(), b.len());
    assert_eq!(bits(&a), bits(&b));
    assert_ne!(bits(&a), bits(&trajectory(22)));
}

// PPO

pub fn gae_fixtures() {
    // Hand-computed with gamma 0.9, lambda 0.8:
    // deltas 1.4, 2.35, 1.5; A2 = 1.5, A1 = 2.35 + 0.72 * 1.5, A0 = 1.4 + 0.72 * A1.
    let (adv, ret) = gae(
        &[1.0, 2.0, 3.0],
        &[0.5, 1.0, 1.5],
        &[false, false, true],
        &[false, false, false],
        &[0.0; 3],
        0.9,
        0.8,
    );
    for (a, w) in adv.iter().zip([3.8696, 3.43, 1.5]) {
        assert!((a - w).abs() < 1e-9, "{adv:?}");
    }
    for (r, w) in ret.iter().zip([4.3696, 4.43, 3.0]) {
        assert!((r - w).abs() < 1e-9, "{ret:?}");
    }
    // Truncation bootstraps from 2.0: delta2 = 3 + 0.9 * 2 - 1.5 = 3.3.
    let (adv, _) = gae(
        &[1.0, 2.0, 3.0],
        &[0.5, 1.0, 1.5],
        &[false; 3],
        &[false, false, true],
        &[0.0, 0.0, 2.0],
        0.9,
        0.8,
    );
    for (a, w) in adv.iter().zip([4.80272, 4.726, 3.3]) {
        assert!((a - w).abs() < 1e-9, "{adv:?}");
    }
    let mut terminal = [false; 10];
    terminal[9] = true;
    let (_, ret) = gae(&[1.0; 10], &[0.0; 10], &terminal, &[false; 10], &[0.0; 10], 1.0, 1.0);
    assert_eq!(ret[0], 10.0);
}

const OBS: usize = 3;
const ACT: usize = 2;

pub fn tiny_nets() -> (Network, Network) {
    let policy = Network::init(
        Arch { input: OBS, hidden: 4, output: ACT, log_std: true },
        1,
        HeadInit::Scaled(1.0),
        -0.4,
    );
    let critic = Network::init(
        Arch { input: OBS, hidden: 4, output: 1, log_std: false },
        2,
        HeadInit::Scaled(1.0),
        0.0,
    );
    (policy, critic)
}

/// Eight steps in two segments of four, with stored hidden states and old
/// log-probabilities a little off the current policy.
pub fn tiny_batch(policy: &Network, critic: &Network, spread: f64, seed_value: u64) -> RolloutBatch {
    let n = 8;
    let mut rng = seed::rng(seed_value);
    let mut obs = Array2::zeros((n, OBS));
    let mut actions = Array2::zeros((n, ACT));
    let mut policy_h = Array2::zeros((n, 4));
    let mut critic_h = Array2::zeros((n, 4));
    let mut log_probs = vec![0.0; n];
    let mut values = vec![0.0; n];
    let starts: Vec<bool> = (0..n).map(|i| i % 4 == 0).collect();
    let truncated: Vec<bool> = (0..n).map(|i| i % 4 == 3).collect();
    let (mut hp, mut hv) = (vec![0.0; 4], vec![0.0; 4]);
    for i in 0..n {
        if starts[i] {
            hp = (0..4).map(|_| rng.random_range(-0.5..0.5)).collect();
            hv = (0..4).map(|_| rng.random_range(-0.5..0.5)).collect();
        }
        policy_h.row_mut(i).assign(&ndarray::arr1(&hp));
        critic_h.row_mut(i).assign(&ndarray::arr1(&hv));
        let x: Vec<f64> = (0..OBS).map(|_| rng.random_range(-1.0..1.0)).collect();
        obs.row_mut(i).assign(&ndarray::arr1(&x));
        let mean = policy.step(&x, &mut hp).unwrap();
        let v = critic.step(&x, &mut hv).unwrap()[0];
        let a: Vec<f64> = mean.iter().map(|m| m + rng.random_range(-0.5..0.5)).collect();
        actions.row_mut(i).assign(&ndarray::arr1(&a));
        log_probs[i] = gaussian_log_prob(&a, &mean, policy.log_std()) + rng.random_range(-spread..spread);
        values[i] = v + rng.random_range(-0.05..0.05);
    }
    let rewards: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let bootstrap: Vec<f64> = (0..n).map(|i| if truncated[i] { 0.3 } else { 0.0 }).collect();
    let (advantages, returns) = gae(&rewards, &values, &[false; 8], &truncated, &bootstrap, 0.99, 0.95);
    RolloutBatch {
        obs,
        actions,
        log_probs,
        rewards,
        values,
        terminal: vec![false; n],
        truncated,
        bootstrap,
        starts,
        policy_h,
        critic_h,
        advantages,
        returns,
        episodes: Vec::new(),
        kind_steps: BTreeMap::new(),
    }
}

pub fn tiny_cfg() -> PPOConfig {
    PPOConfig {
        value_scale: 1.0,
        entropy_coef: 0.01,
        seq_len: 4,
        ..PPOConfig::default()
    }
}

/// Analytic gradients of the clipped loss against central differences.
pub fn gradients_match_fd(spread: f64, seed_value: u64) {
    let (policy, critic) = tiny_nets();
    let batch = tiny_batch(&policy, &critic, spread, seed_value);
    let cfg = tiny_cfg();
    let adv = normalize(&batch.advantages);
    let group = chunks(&batch, cfg.seq_len);
    let eval = minibatch_loss(&policy, &critic, &batch, &adv, &group, &cfg);
    assert_eq!(eval.stats.clip_frac > 0.0, spread > 0.5, "clip fraction {}", eval.stats.clip_frac);
    let loss = |p: &Network, c: &Network| minibatch_loss(p, c, &batch, &adv, &group, &cfg).total;
    let h = 1e-6;
    for k in 0..policy.params.len() {
        let (mut up, mut down) = (policy.clone(), policy.clone());
        up.params[k] += h;
        down.params[k] -= h;
        let fd = (loss(&up, &critic) - loss(&down, &critic)) / (2.0 * h);
        let e = rel_err(eval.policy_grad[k], fd);
        assert!(e < 1e-4, "policy param {k}: analytic {} vs fd {fd}", eval.policy_grad[k]);
    }
    for k in 0..critic.params.len() {
        let (mut up, mut down) = (critic.clone(), critic.clone());
        up.params[k] += h;
        down.params[k] -= h;
        let fd = (loss(&policy, &up) - loss(&policy, &down)) / (2.0 * h);
        let e = rel_err(eval.critic_grad[k], fd);
        assert!(e < 1e-4, "critic param {k}: analytic {} vs fd {fd}", eval.critic_grad[k]);
    }
}

pub fn zero_learning_rate() {
    let (mut policy, mut critic) = tiny_nets();
    let batch = tiny_batch(&policy, &critic, 0.3, 5);
    let (p0, c0) = (policy.params.clone(), critic.params.clone());
    let cfg = PPOConfig { learning_rate: 0.0, ..tiny_cfg() };
    let mut opt = Optimizers::new(&policy, &critic, 0.0);
    ppo_update(&mut policy, &mut critic, &mut opt, &batch, &cfg, 0).unwrap();
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&policy.params), bits(&p0));
    assert_eq!(bits(&critic.params), bits(&c0));
}

/// One-step bandit: the action's sign is the arm, and the positive arm pays 1.
/// The better arm's probability is Φ(μ/σ), so μ/σ must rise every update.
pub fn bandit_monotonic(updates: usize) {
    let arch = Arch { input: 1, hidden: 4, output: 1, log_std: true };
    let mut policy = Network::init(arch, 8, HeadInit::Zero, 0.0);
    let mut critic = Network::zeros(Arch { input: 1, hidden: 4, output: 1, log_std: false });
    let cfg = PPOConfig {
        learning_rate: 0.01,
        epochs: 2,
        minibatches: 1,
        max_grad_norm: 10.0,
        value_scale: 1.0,
        seq_len: 1,
        ..PPOConfig::default()
    };
    let mut opt = Optimizers::new(&policy, &critic, cfg.learning_rate);
    let score = |p: &Network| {
        let mean = p.step(&[1.0], &mut p.hidden_zeros()).unwrap()[0];
        mean / p.log_std()[0].exp()
    };
    let mut rng = seed::rng(9);
    let n = 256;
    let mut last = score(&policy);
    for it in 0..updates {
        let mean = policy.step(&[1.0], &mut policy.hidden_zeros()).unwrap()[0];
        let v = critic.step(&[1.0], &mut critic.hidden_zeros()).unwrap()[0];
        let sigma = policy.log_std()[0].exp();
        // Antithetic pairs keep the batch mean of the noise at zero.
        let noise: Vec<f64> = (0..n / 2)
            .flat_map(|_| {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                [z, -z]
            })
            .collect();
        let actions: Vec<f64> = noise.iter().map(|z| mean + sigma * z).collect();
        let rewards: Vec<f64> = actions.iter().map(|&a| f64::from(u8::from(a > 0.0))).collect();
        let terminal = vec![true; n];
        let (advantages, returns) = gae(&rewards, &vec![v; n], &terminal, &vec![false; n], &vec![0.0; n], 0.99, 0.95);
        let batch = RolloutBatch {
            obs: Array2::ones((n, 1)),
            actions: Array2::from_shape_vec((n, 1), actions.clone()).unwrap(),
            log_probs: actions.iter().map(|&a| gaussian_log_prob(&[a], &[mean], policy.log_std())).collect(),
            rewards,
            values: vec![v; n],
            terminal,
            truncated: vec![false; n],
            bootstrap: vec![0.0; n],
            starts: vec![true; n],
            policy_h: Array2::zeros((n, 4)),
            critic_h: Array2::zeros((n, 4)),
            advantages,
            returns,
            episodes: Vec::new(),
            kind_steps: BTreeMap::new(),
        };
        ppo_update(&mut policy, &mut critic, &mut opt, &batch, &cfg, it as u64).unwrap();
        let now = score(&policy);
        assert!(now > last, "update {it}: mu/sigma {last} -> {now}");
        last = now;
    }
    assert!(last > 1.0, "better arm probability barely moved: mu/sigma = {last}");
}

// Residual neutrality

/// A visual checkpoint after zero training iterations.
pub fn untrained_visual(blind: &Checkpoint) -> Checkpoint {
    let mut spec = TrainConfig::default()
        .train_spec(Phase::Visual, Some("multi-test"))
        .unwrap();
    spec.iterations = 0;
    train(&spec, Some(blind), None, |_| {}).unwrap().checkpoint
}

pub fn residual_neutrality(trials: usize) {
    let blind = walker();
    let visual = untrained_visual(&blind);
    assert_eq!(visual.meta.phase, Phase::Visual);
    assert!(visual.residual.is_some());
    assert_eq!(params_hash(&visual.blind.params), blind.meta.blind_hash);
    for i in 0..trials {
        let kind = ObstacleKind::ALL[i % 4];
        let d = Difficulty::new(i as f64 / (trials - 1).max(1) as f64).unwrap();
        let spec = TrialSpec::new(kind, d, trial_seed(77, kind, i, 0));
        let a = run_trial(&blind, &spec).unwrap();
        let b = run_trial(&visual, &spec).unwrap();
        assert_eq!(a.records.len(), b.records.len(), "trial {i}: record counts");
        let text = |log: &gaitbench::protocol::TrialLog| serde_json::to_string(&log.records).unwrap();
        assert_eq!(text(&a), text(&b), "trial {i}: records differ");
        assert_eq!(a.outcome, b.outcome);
        assert_eq!(a.events, b.events);
    }
}

// Sweeps

pub fn log_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir.join("logs")).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

/// Sweeps with 1 and `workers` threads produce byte-identical output.
pub fn worker_invariant_sweep(kind: ObstacleKind, levels: usize, trials: usize, workers: usize) {
    let ck = walker();
    let root = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for w in [1, workers] {
        let dir = root.path().join(format!("w{w}"));
        let opts = SweepOptions { levels, trials, workers: w };
        let result = run_sweep(&ck, kind, 42, &opts, &dir).unwrap();
        assert_eq!(log_files(&dir).len(), levels * trials);
        assert_eq!(result, SweepResult::load(&dir).unwrap());
        runs.push(dir);
    }
    let read = |p: &Path| fs::read(p).unwrap();
    assert_eq!(read(&runs[0].join(MANIFEST_NAME)), read(&runs[1].join(MANIFEST_NAME)));
    for (a, b) in log_files(&runs[0]).iter().zip(log_files(&runs[1])) {
        assert_eq!(read(a), read(&b), "{}", a.display());
    }
}
