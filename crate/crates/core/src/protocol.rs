//! Evaluation protocol: seeded trials in front of a test obstacle, judged for
//! success, fall, or timeout, and swept over evenly spaced difficulty levels.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::biped::{reset, run_control_step_with_efforts, BipedModel, BipedState, LEFT, RIGHT};
use crate::checkpoint::Checkpoint;
use crate::controller::{ClockState, Command, PolicyAction, CLOCK_DT};
use crate::error::{Error, Result};
use crate::learning::reward::{reward, RewardWeights};
use crate::seed;
use crate::terrain::{build_obstacle, Difficulty, ObstacleKind, TerrainField};

pub const TRIAL_SPEED: f64 = 0.8;
pub const START_DISTANCE: (f64, f64) = (3.0, 3.5);
pub const LATERAL_OFFSET: (f64, f64) = (0.0, 0.25);
pub const DEFAULT_LEVELS: usize = 101;
pub const DEFAULT_TRIALS: usize = 50;

pub const LOG_FORMAT: &str = "gaitbench-trial";
pub const SWEEP_FORMAT: &str = "gaitbench-sweep";
pub const FORMAT_VERSION: u32 = 1;

/// Success and fall thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Trunk height above local terrain below which the robot has fallen.
    pub fall_clearance: f64,
    /// Distance past the far edge the trunk must reach.
    pub finish_margin: f64,
    pub time_limit: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            fall_clearance: 0.4,
            finish_margin: 1.0,
            time_limit: 20.0,
        }
    }
}

/// The fall predicate shared by evaluation and training.
///
/// True when the trunk is too close to the terrain below it, or when it is
/// over a void and has sunk below the deck.
pub fn is_fall(state: &BipedState, field: &TerrainField, th: &Thresholds) -> bool {
    let p = state.trunk_pos;
    state.clearance() < th.fall_clearance || (field.is_void(p.x, p.y) && p.z < field.deck_level())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Continue,
    Success,
    Fall,
    Timeout,
}

/// Judge the latest state of a trial in progress.
pub fn judge(state: &BipedState, field: &TerrainField, th: &Thresholds) -> Verdict {
    if is_fall(state, field, th) {
        Verdict::Fall
    } else if state.trunk_pos.x >= field.far_edge_x + th.finish_margin {
        Verdict::Success
    } else if state.time() >= th.time_limit - 1e-9 {
        Verdict::Timeout
    } else {
        Verdict::Continue
    }
}

/// Draw a start offset `(distance before the near edge, lateral shift)`.
pub fn sample_start(rng: &mut seed::Rng) -> (f64, f64) {
    let d = rng.random_range(START_DISTANCE.0..=START_DISTANCE.1);
    let l = rng.random_range(LATERAL_OFFSET.0..=LATERAL_OFFSET.1);
    (d, l)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub obstacle: ObstacleKind,
    pub difficulty: Difficulty,
    pub seed: u64,
    pub start_distance: f64,
    pub lateral_offset: f64,
    pub command: Command,
    pub thresholds: Thresholds,
}

impl TrialSpec {
    /// Spec whose start pose is derived from `seed` alone.
    pub fn new(obstacle: ObstacleKind, difficulty: Difficulty, seed: u64) -> Self {
        let mut rng = seed::rng(seed::derive(seed, "start", &[]));
        let (start_distance, lateral_offset) = sample_start(&mut rng);
        TrialSpec {
            obstacle,
            difficulty,
            seed,
            start_distance,
            lateral_offset,
            command: Command::forward(TRIAL_SPEED),
            thresholds: Thresholds::default(),
        }
    }

    pub fn terrain(&self) -> Result<TerrainField> {
        build_obstacle(self.obstacle, self.difficulty.value(), self.seed)
    }
}

/// One 50 Hz log record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub t: f64,
    pub trunk_pos: [f64; 3],
    pub trunk_vel: [f64; 3],
    pub yaw: f64,
    pub yaw_rate: f64,
    pub joint_pos: [f64; 6],
    pub joint_vel: [f64; 6],
    pub feet: [[f64; 3]; 2],
    pub contact: [bool; 2],
    /// Action applied during the step that ended at this record.
    pub action: Option<PolicyAction>,
    pub reward: Option<f64>,
}

impl Record {
    pub fn of(state: &BipedState, action: Option<PolicyAction>, reward: Option<f64>) -> Self {
        let v3 = |v: &crate::biped::Vec3| [v.x, v.y, v.z];
        Record {
            t: state.time(),
            trunk_pos: v3(&state.trunk_pos),
            trunk_vel: v3(&state.trunk_vel),
            yaw: state.yaw,
            yaw_rate: state.yaw_rate,
            joint_pos: state.joint_positions(),
            joint_vel: state.joint_velocities(),
            feet: [v3(&state.feet[LEFT].pos), v3(&state.feet[RIGHT].pos)],
            contact: [state.feet[LEFT].contact, state.feet[RIGHT].contact],
            action,
            reward,
        }
    }

    /// Horizontal trunk speed.
    pub fn speed(&self) -> f64 {
        self.trunk_vel[0].hypot(self.trunk_vel[1])
    }
}

/// A raw (undebounced) change in one foot's contact flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactEvent {
    pub t: f64,
    pub foot: usize,
    pub contact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Outcome {
    Success { time: f64 },
    Fall { time: f64, position: [f64; 3], fault: bool },
    Timeout { time: f64 },
}

impl Outcome {
    pub fn time(&self) -> f64 {
        match *self {
            Outcome::Success { time } | Outcome::Fall { time, .. } | Outcome::Timeout { time } => time,
        }
    }

    pub fn code(&self) -> OutcomeCode {
        match self {
            Outcome::Success { .. } => OutcomeCode::Success,
            Outcome::Fall { .. } => OutcomeCode::Fall,
            Outcome::Timeout { .. } => OutcomeCode::Timeout,
        }
    }
}

/// Compact outcome, serialized as `S`, `F`, or `T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutcomeCode {
    Success,
    Fall,
    Timeout,
}

impl OutcomeCode {
    pub fn as_char(self) -> char {
        match self {
            OutcomeCode::Success => 'S',
            OutcomeCode::Fall => 'F',
            OutcomeCode::Timeout => 'T',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'S' => Some(OutcomeCode::Success),
            'F' => Some(OutcomeCode::Fall),
            'T' => Some(OutcomeCode::Timeout),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialLog {
    pub spec: TrialSpec,
    pub checkpoint_id: String,
    pub records: Vec<Record>,
    pub events: Vec<ContactEvent>,
    pub outcome: Outcome,
}

#[derive(Serialize, Deserialize)]
struct LogHeader {
    format: String,
    version: u32,
    checkpoint_id: String,
    spec: TrialSpec,
}

#[derive(Serialize, Deserialize)]
struct LogFooter {
    outcome: Outcome,
    events: Vec<ContactEvent>,
}

/// Contact flag changes between consecutive records.
pub fn contact_events(records: &[Record]) -> Vec<ContactEvent> {
    let mut out = Vec::new();
    for pair in records.windows(2) {
        for foot in [LEFT, RIGHT] {
            if pair[0].contact[foot] != pair[1].contact[foot] {
                out.push(ContactEvent {
                    t: pair[1].t,
                    foot,
                    contact: pair[1].contact[foot],
                });
            }
        }
    }
    out
}

impl TrialLog {
    pub fn write(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let header = LogHeader {
            format: LOG_FORMAT.into(),
            version: FORMAT_VERSION,
            checkpoint_id: self.checkpoint_id.clone(),
            spec: self.spec.clone(),
        };
        let io = |e| Error::io(path, e);
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n").map_err(io)?;
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n").map_err(io)?;
        }
        let footer = LogFooter {
            outcome: self.outcome,
            events: self.events.clone(),
        };
        serde_json::to_writer(&mut w, &footer)?;
        w.write_all(b"\n").map_err(io)?;
        w.flush().map_err(io)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let lines: Vec<String> = BufReader::new(file)
            .lines()
            .collect::<std::io::Result<_>>()
            .map_err(|e| Error::io(path, e))?;
        let bad = |msg: String| Error::format(path, msg);
        if lines.len() < 2 {
            return Err(bad("log needs a header and an outcome line".into()));
        }
        let header: LogHeader =
            serde_json::from_str(&lines[0]).map_err(|e| bad(format!("header: {e}")))?;
        if header.format != LOG_FORMAT || header.version != FORMAT_VERSION {
            return Err(bad(format!("unsupported log format {} v{}", header.format, header.version)));
        }
        let footer: LogFooter = serde_json::from_str(&lines[lines.len() - 1])
            .map_err(|e| bad(format!("outcome line: {e}")))?;
        let records = lines[1..lines.len() - 1]
            .iter()
            .enumerate()
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| bad(format!("record {i}: {e}"))))
            .collect::<Result<Vec<Record>>>()?;
        Ok(TrialLog {
            spec: header.spec,
            checkpoint_id: header.checkpoint_id,
            records,
            events: footer.events,
            outcome: footer.outcome,
        })
    }

    /// Check the log invariants: 50 Hz monotone records, a record count that
    /// matches the outcome time, and an outcome the records support.
    pub fn check_consistency(&self, field: &TerrainField) -> Result<()> {
        let fail = |m: String| Err(Error::Contract(m));
        for (k, r) in self.records.iter().enumerate() {
            if (r.t - k as f64 * CLOCK_DT).abs() > 1e-9 {
                return fail(format!("record {k} at t={} breaks the 50 Hz grid", r.t));
            }
        }
        let expected = (self.outcome.time() / CLOCK_DT - 1e-9).ceil() as i64;
        if (self.records.len() as i64 - expected).abs() > 1 {
            return fail(format!(
                "{} records for outcome time {}",
                self.records.len(),
                self.outcome.time()
            ));
        }
        if self.events != contact_events(&self.records) {
            return fail("contact events disagree with records".into());
        }
        let th = &self.spec.thresholds;
        let last = self.records.last().ok_or_else(|| Error::Contract("empty log".into()))?;
        match self.outcome {
            Outcome::Success { .. } if last.trunk_pos[0] < field.far_edge_x + th.finish_margin => {
                fail("success without reaching the finish line".into())
            }
            Outcome::Fall { fault: false, .. } => {
                let fell = self.records.iter().any(|r| record_falls(r, field, th));
                if fell {
                    Ok(())
                } else {
                    fail("fall outcome without a fallen record".into())
                }
            }
            _ => Ok(()),
        }
    }
}

fn record_falls(r: &Record, field: &TerrainField, th: &Thresholds) -> bool {
    let [x, y, z] = r.trunk_pos;
    let ground = field.height_at(x, y).unwrap_or(f64::NEG_INFINITY);
    z - ground < th.fall_clearance || (field.is_void(x, y) && z < field.deck_level())
}

/// Run one evaluation trial with the deterministic controller of `ck`.
pub fn run_trial(ck: &Checkpoint, spec: &TrialSpec) -> Result<TrialLog> {
    let field = spec.terrain()?;
    run_trial_on(ck, spec, &field)
}

/// [`run_trial`] on a prebuilt field.
pub fn run_trial_on(ck: &Checkpoint, spec: &TrialSpec, field: &TerrainField) -> Result<TrialLog> {
    let model: &BipedModel = &ck.meta.model;
    let weights = RewardWeights::for_model(model);
    let th = spec.thresholds;
    let x0 = field.near_edge_x - spec.start_distance;
    let mut state = reset(field, model, x0, spec.lateral_offset, 0.0, spec.seed)?;
    let mut clock = ClockState::default();
    let mut controller = ck.controller();
    let mut records = vec![Record::of(&state, None, None)];
    let fault = |state: &BipedState| Outcome::Fall {
        time: state.time(),
        position: [state.trunk_pos.x, state.trunk_pos.y, state.trunk_pos.z],
        fault: true,
    };
    let outcome = loop {
        let t = state.time();
        match judge(&state, field, &th) {
            Verdict::Continue => {}
            Verdict::Success => break Outcome::Success { time: t },
            Verdict::Timeout => break Outcome::Timeout { time: t },
            Verdict::Fall => {
                let p = state.trunk_pos;
                break Outcome::Fall {
                    time: t,
                    position: [p.x, p.y, p.z],
                    fault: false,
                };
            }
        }
        let grid = match ck.residual {
            Some(_) => match field.sample_height_grid(state.trunk_pos.x, state.trunk_pos.y, state.yaw) {
                Ok(g) => Some(g),
                Err(_) => break fault(&state),
            },
            None => None,
        };
        let action = controller.act(&state, &clock, &spec.command, grid.as_ref())?;
        let (next, efforts) = match run_control_step_with_efforts(&state, &action, model, field) {
            Ok(v) => v,
            Err(Error::SimulationFault(_)) => break fault(&state),
            Err(e) => return Err(e),
        };
        clock = clock.advance(&action, CLOCK_DT);
        let r = reward(&next, &spec.command, &efforts, &clock, &weights);
        state = next;
        records.push(Record::of(&state, Some(action), Some(r)));
    };
    Ok(TrialLog {
        spec: spec.clone(),
        checkpoint_id: ck.id(),
        events: contact_events(&records),
        records,
        outcome,
    })
}

/// Seed of trial `index` at difficulty level `level`.
pub fn trial_seed(master_seed: u64, kind: ObstacleKind, level: usize, index: usize) -> u64 {
    seed::derive(master_seed, "trial", &[kind as u64, level as u64, index as u64])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepOptions {
    pub levels: usize,
    pub trials: usize,
    pub workers: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            levels: DEFAULT_LEVELS,
            trials: DEFAULT_TRIALS,
            workers: 1,
        }
    }
}

/// Result of a sweep: an outcome grid indexed `[level][trial]` plus log paths.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub kind: ObstacleKind,
    pub checkpoint_id: String,
    pub master_seed: u64,
    pub difficulties: Vec<f64>,
    pub outcomes: Vec<Vec<OutcomeCode>>,
    /// Absolute log paths, same shape as `outcomes`.
    pub logs: Vec<Vec<PathBuf>>,
    pub dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepManifest {
    pub format: String,
    pub version: u32,
    pub kind: ObstacleKind,
    pub master_seed: u64,
    pub levels: usize,
    pub trials: usize,
    pub checkpoint_id: String,
    pub difficulties: Vec<f64>,
    /// One string of outcome codes per level.
    pub outcomes: Vec<String>,
    /// Log paths relative to the manifest's directory.
    pub files: Vec<Vec<String>>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

fn log_name(level: usize, index: usize) -> String {
    format!("logs/L{level:03}_T{index:03}.jsonl")
}

/// Run `levels × trials` trials on `kind`, writing logs and a manifest under
/// `dir`. Results do not depend on `workers`.
pub fn run_sweep(
    ck: &Checkpoint,
    kind: ObstacleKind,
    master_seed: u64,
    opts: &SweepOptions,
    dir: &Path,
) -> Result<SweepResult> {
    if opts.levels < 2 || opts.trials == 0 || opts.workers == 0 {
        return Err(Error::Domain("a sweep needs at least 2 levels, 1 trial and 1 worker".into()));
    }
    fs::create_dir_all(dir.join("logs")).map_err(|e| Error::io(dir, e))?;
    let difficulties = (0..opts.levels)
        .map(|l| Difficulty::level(l, opts.levels))
        .collect::<Result<Vec<_>>>()?;
    let fields = difficulties
        .iter()
        .map(|d| build_obstacle(kind, d.value(), master_seed))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..opts.levels)
        .flat_map(|l| (0..opts.trials).map(move |i| (l, i)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let outcomes: Vec<OutcomeCode> = pool.install(|| {
        jobs.par_iter()
            .map(|&(level, index)| {
                let spec = TrialSpec::new(kind, difficulties[level], trial_seed(master_seed, kind, level, index));
                let log = run_trial_on(ck, &spec, &fields[level])?;
                log.write(&dir.join(log_name(level, index)))?;
                Ok(log.outcome.code())
            })
            .collect::<Result<_>>()
    })?;
    let grid: Vec<Vec<OutcomeCode>> = outcomes.chunks(opts.trials).map(<[_]>::to_vec).collect();
    let manifest = SweepManifest {
        format: SWEEP_FORMAT.into(),
        version: FORMAT_VERSION,
        kind,
        master_seed,
        levels: opts.levels,
        trials: opts.trials,
        checkpoint_id: ck.id(),
        difficulties: difficulties.iter().map(|d| d.value()).collect(),
        outcomes: grid.iter().map(|row| row.iter().map(|c| c.as_char()).collect()).collect(),
        files: (0..opts.levels)
            .map(|l| (0..opts.trials).map(|i| log_name(l, i)).collect())
            .collect(),
    };
    let path = dir.join(MANIFEST_NAME);
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    SweepResult::from_manifest(manifest, dir)
}

impl SweepResult {
    /// Load a sweep from the directory holding its manifest.
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_NAME);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: SweepManifest =
            serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;
        if manifest.format != SWEEP_FORMAT || manifest.version != FORMAT_VERSION {
            return Err(Error::format(&path, "unsupported sweep manifest format"));
        }
        SweepResult::from_manifest(manifest, dir)
    }

    fn from_manifest(m: SweepManifest, dir: &Path) -> Result<Self> {
        let bad = |msg: &str| Error::format(dir.join(MANIFEST_NAME), msg);
        if m.outcomes.len() != m.levels || m.files.len() != m.levels || m.difficulties.len() != m.levels {
            return Err(bad("grid does not have one row per level"));
        }
        let outcomes = m
            .outcomes
            .iter()
            .map(|row| {
                let codes: Option<Vec<_>> = row.chars().map(OutcomeCode::from_char).collect();
                codes.filter(|c| c.len() == m.trials).ok_or_else(|| bad("bad outcome row"))
            })
            .collect::<Result<Vec<_>>>()?;
        let logs = m
            .files
            .iter()
            .map(|row| {
                if row.len() != m.trials {
                    return Err(bad("bad file row"));
                }
                Ok(row.iter().map(|f| dir.join(f)).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SweepResult {
            kind: m.kind,
            checkpoint_id: m.checkpoint_id,
            master_seed: m.master_seed,
            difficulties: m.difficulties,
            outcomes,
            logs,
            dir: dir.to_path_buf(),
        })
    }

    pub fn levels(&self) -> usize {
        self.outcomes.len()
    }

    pub fn trials(&self) -> usize {
        self.outcomes.first().map_or(0, Vec::len)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biped::standing_equilibrium;
    use crate::terrain::build_obstacle;

    fn flat_obstacle() -> TerrainField {
        build_obstacle(ObstacleKind::DropOff, 0.0, 0).unwrap()
    }

    #[test]
    fn judge_thresholds() {
        let field = flat_obstacle();
        let model = BipedModel::default();
        let th = Thresholds::default();
        let mut s = standing_equilibrium(&model, -3.0, 0.0, 0.0);
        assert_eq!(judge(&s, &field, &th), Verdict::Continue);
        s.trunk_pos.z = 0.35;
        assert_eq!(judge(&s, &field, &th), Verdict::Fall);
        let mut s = standing_equilibrium(&model, field.far_edge_x + 1.2, 0.0, 0.0);
        assert_eq!(judge(&s, &field, &th), Verdict::Success);
        s.trunk_pos.x = -1.0;
        s.tick = 20 * 2000;
        assert_eq!(judge(&s, &field, &th), Verdict::Timeout);
    }

    #[test]
    fn void_descent_is_a_fall() {
        let field = build_obstacle(ObstacleKind::Gap, 1.0, 0).unwrap();
        let mut s = standing_equilibrium(&BipedModel::default(), 0.75, 0.0, 0.0);
        s.ground_height = field.height_at(0.75, 0.0).unwrap();
        s.trunk_pos.z = -0.1;
        assert!(s.clearance() > 0.4);
        assert_eq!(judge(&s, &field, &Thresholds::default()), Verdict::Fall);
    }

    #[test]
    fn trial_spec_ranges_and_purity() {
        for seed in 0..200 {
            let a = TrialSpec::new(ObstacleKind::Slope, Difficulty::ZERO, seed);
            assert!((3.0..=3.5).contains(&a.start_distance));
            assert!((0.0..=0.25).contains(&a.lateral_offset));
            assert_eq!(a, TrialSpec::new(ObstacleKind::Slope, Difficulty::ZERO, seed));
        }
    }

    #[test]
    fn trial_seed_depends_on_every_coordinate() {
        let base = trial_seed(1, ObstacleKind::Gap, 3, 4);
        assert_ne!(base, trial_seed(2, ObstacleKind::Gap, 3, 4));
        assert_ne!(base, trial_seed(1, ObstacleKind::Slope, 3, 4));
        assert_ne!(base, trial_seed(1, ObstacleKind::Gap, 4, 3));
        assert_eq!(base, trial_seed(1, ObstacleKind::Gap, 3, 4));
    }

    #[test]
    fn contact_events_follow_flags() {
        let model = BipedModel::default();
        let s = standing_equilibrium(&model, 0.0, 0.0, 0.0);
        let mut a = Record::of(&s, None, None);
        let mut b = a.clone();
        b.t = 0.02;
        b.contact = [false, true];
        a.contact = [true, true];
        let ev = contact_events(&[a, b]);
        assert_eq!(ev, vec![ContactEvent { t: 0.02, foot: LEFT, contact: false }]);
    }
}
