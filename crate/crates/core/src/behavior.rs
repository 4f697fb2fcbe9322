//! Behavioral metrics computed from trial logs: success rate, speed over the
//! obstacle, speed over the last two steps before it, and where the last step
//! lands relative to its near edge.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::biped::{LEFT, RIGHT};
use crate::error::{Error, Result};
use crate::protocol::{OutcomeCode, Record, SweepResult, TrialLog};
use crate::terrain::{build_obstacle, ObstacleKind};

/// Records a contact change must persist to count as an edge (60 ms).
pub const DEBOUNCE_RECORDS: usize = 3;

pub const REPORT_SCHEMA: &str = "# gaitbench-report v1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepEvent {
    pub foot: usize,
    pub touchdown_t: f64,
    pub touchdown_pos: [f64; 2],
    /// Next debounced liftoff of the same foot, if the log has one.
    pub liftoff_t: Option<f64>,
    /// Distance from the previous touchdown of either foot.
    pub step_length: Option<f64>,
}

/// Debounced contact edges of one foot: `(record index, new state)`.
///
/// The debounced state starts at the first record's flag. A raw change at
/// record `i` becomes an edge when the new value holds for `debounce`
/// records starting at `i`.
pub fn debounced_edges(flags: &[bool], debounce: usize) -> Vec<(usize, bool)> {
    let mut out = Vec::new();
    let Some(&first) = flags.first() else {
        return out;
    };
    let mut state = first;
    let mut i = 1;
    while i < flags.len() {
        if flags[i] != state {
            let end = i + debounce;
            if end <= flags.len() && flags[i..end].iter().all(|&f| f == flags[i]) {
                state = flags[i];
                out.push((i, state));
                i = end;
                continue;
            }
        }
        i += 1;
    }
    out
}

pub fn detect_steps(log: &TrialLog) -> Vec<StepEvent> {
    detect_steps_in(&log.records, DEBOUNCE_RECORDS)
}

/// [`detect_steps`] over raw records with a chosen debounce.
pub fn detect_steps_in(records: &[Record], debounce: usize) -> Vec<StepEvent> {
    let mut steps = Vec::new();
    for foot in [LEFT, RIGHT] {
        let flags: Vec<bool> = records.iter().map(|r| r.contact[foot]).collect();
        let edges = debounced_edges(&flags, debounce);
        for (k, &(i, up)) in edges.iter().enumerate() {
            if !up {
                continue;
            }
            let liftoff = edges[k + 1..].iter().find(|e| !e.1).map(|e| records[e.0].t);
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
    steps.sort_by(|a, b| a.touchdown_t.total_cmp(&b.touchdown_t).then(a.foot.cmp(&b.foot)));
    for k in 1..steps.len() {
        let [x0, y0] = steps[k - 1].touchdown_pos;
        let [x1, y1] = steps[k].touchdown_pos;
        steps[k].step_length = Some((x1 - x0).hypot(y1 - y0));
    }
    steps
}

/// The four reported metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Success,
    MidObstacleSpeed,
    ApproachSpeed,
    LastStepPlacement,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::Success,
        Metric::MidObstacleSpeed,
        Metric::ApproachSpeed,
        Metric::LastStepPlacement,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Success => "success",
            Metric::MidObstacleSpeed => "mid_obstacle_speed",
            Metric::ApproachSpeed => "approach_speed",
            Metric::LastStepPlacement => "last_step_placement",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Obstacle edges a metric needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edges {
    pub near: f64,
    pub far: f64,
}

impl Edges {
    pub fn of(field: &crate::terrain::TerrainField) -> Self {
        Edges {
            near: field.near_edge_x,
            far: field.far_edge_x,
        }
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Mean horizontal trunk speed over records with the trunk above the obstacle.
pub fn mid_obstacle_speed(records: &[Record], edges: Edges) -> Option<f64> {
    mean(
        records
            .iter()
            .filter(|r| (edges.near..=edges.far).contains(&r.trunk_pos[0]))
            .map(Record::speed),
    )
}

/// Touchdowns landing short of the near edge, in time order.
fn pre_edge(steps: &[StepEvent], near: f64) -> impl Iterator<Item = &StepEvent> {
    steps.iter().filter(move |s| s.touchdown_pos[0] < near)
}

/// Mean trunk speed from the first of the last two pre-edge touchdowns to the
/// first record at or past the near edge (or the end of the log), inclusive.
pub fn approach_speed(records: &[Record], steps: &[StepEvent], edges: Edges) -> Option<f64> {
    let pre: Vec<&StepEvent> = pre_edge(steps, edges.near).collect();
    if pre.len() < 2 {
        return None;
    }
    let t0 = pre[pre.len() - 2].touchdown_t;
    let start = records.iter().position(|r| r.t >= t0)?;
    let end = records[start..]
        .iter()
        .position(|r| r.trunk_pos[0] >= edges.near)
        .map_or(records.len() - 1, |k| start + k);
    mean(records[start..=end].iter().map(Record::speed))
}

/// Distance from the last pre-edge touchdown to the near edge.
pub fn last_step_placement(steps: &[StepEvent], edges: Edges) -> Option<f64> {
    pre_edge(steps, edges.near).last().map(|s| edges.near - s.touchdown_pos[0])
}

/// All four metric values of one trial; success is 1 or 0.
pub fn trial_metrics(log: &TrialLog, edges: Edges) -> BTreeMap<Metric, Option<f64>> {
    let steps = detect_steps(log);
    let success = f64::from(u8::from(log.outcome.code() == OutcomeCode::Success));
    BTreeMap::from([
        (Metric::Success, Some(success)),
        (Metric::MidObstacleSpeed, mid_obstacle_speed(&log.records, edges)),
        (Metric::ApproachSpeed, approach_speed(&log.records, &steps, edges)),
        (Metric::LastStepPlacement, last_step_placement(&steps, edges)),
    ])
}

/// Per-level statistics of one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorCurve {
    pub metric: Metric,
    pub difficulties: Vec<f64>,
    /// `None` where no trial qualified.
    pub mean: Vec<Option<f64>>,
    /// Population standard deviation.
    pub std: Vec<Option<f64>>,
    pub n: Vec<usize>,
}

impl BehaviorCurve {
    /// Curve from per-level samples.
    pub fn from_samples(metric: Metric, difficulties: &[f64], samples: &[Vec<f64>]) -> Self {
        let mut c = BehaviorCurve {
            metric,
            difficulties: difficulties.to_vec(),
            mean: Vec::new(),
            std: Vec::new(),
            n: Vec::new(),
        };
        for s in samples {
            let m = mean(s.iter().copied());
            c.mean.push(m);
            c.std.push(m.map(|m| (s.iter().map(|v| (v - m).powi(2)).sum::<f64>() / s.len() as f64).sqrt()));
            c.n.push(s.len());
        }
        c
    }

    fn empty(metric: Metric, difficulties: &[f64]) -> Self {
        let k = difficulties.len();
        BehaviorCurve {
            metric,
            difficulties: difficulties.to_vec(),
            mean: vec![None; k],
            std: vec![None; k],
            n: vec![0; k],
        }
    }
}

/// Success fraction per level, straight from the sweep's outcome grid.
pub fn success_curve(sweep: &SweepResult) -> BehaviorCurve {
    let samples: Vec<Vec<f64>> = sweep
        .outcomes
        .iter()
        .map(|row| row.iter().map(|c| f64::from(u8::from(*c == OutcomeCode::Success))).collect())
        .collect();
    BehaviorCurve::from_samples(Metric::Success, &sweep.difficulties, &samples)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorReport {
    pub checkpoint_id: String,
    /// Obstacles in report order; missing sweeps carry empty curves.
    pub curves: BTreeMap<ObstacleKind, BTreeMap<Metric, BehaviorCurve>>,
    /// Obstacles with no sweep.
    pub gaps: Vec<ObstacleKind>,
    /// Logs that could not be read and were left out.
    pub skipped: Vec<String>,
}

/// Aggregate sweeps into a report covering `obstacles` (all four when empty).
///
/// Unreadable logs are skipped and listed; the success curve always comes
/// from the manifest outcome grid.
pub fn summarize(sweeps: &[SweepResult], obstacles: &[ObstacleKind]) -> Result<BehaviorReport> {
    let first = sweeps
        .first()
        .ok_or_else(|| Error::Domain("summarize needs at least one sweep".into()))?;
    if let Some(other) = sweeps.iter().find(|s| s.checkpoint_id != first.checkpoint_id) {
        return Err(Error::Domain(format!(
            "sweeps come from different checkpoints ({} and {})",
            first.checkpoint_id, other.checkpoint_id
        )));
    }
    let wanted: Vec<ObstacleKind> = if obstacles.is_empty() {
        ObstacleKind::ALL.to_vec()
    } else {
        obstacles.to_vec()
    };
    let mut curves = BTreeMap::new();
    let mut gaps = Vec::new();
    let mut skipped = Vec::new();
    for kind in wanted {
        let Some(sweep) = sweeps.iter().find(|s| s.kind == kind) else {
            gaps.push(kind);
            let d = &first.difficulties;
            curves.insert(kind, Metric::ALL.iter().map(|m| (*m, BehaviorCurve::empty(*m, d))).collect());
            continue;
        };
        let (per_metric, bad) = sweep_metrics(sweep)?;
        skipped.extend(bad);
        let mut by_metric = BTreeMap::from([(Metric::Success, success_curve(sweep))]);
        for (metric, samples) in per_metric {
            by_metric.insert(metric, BehaviorCurve::from_samples(metric, &sweep.difficulties, &samples));
        }
        curves.insert(kind, by_metric);
    }
    Ok(BehaviorReport {
        checkpoint_id: first.checkpoint_id.clone(),
        curves,
        gaps,
        skipped,
    })
}

type LevelSamples = BTreeMap<Metric, Vec<Vec<f64>>>;

fn sweep_metrics(sweep: &SweepResult) -> Result<(LevelSamples, Vec<String>)> {
    let edges = sweep
        .difficulties
        .iter()
        .map(|d| build_obstacle(sweep.kind, *d, sweep.master_seed).map(|f| Edges::of(&f)))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, &Path)> = sweep
        .logs
        .iter()
        .enumerate()
        .flat_map(|(l, row)| row.iter().map(move |p| (l, p.as_path())))
        .collect();
    let results: Vec<(usize, std::result::Result<BTreeMap<Metric, Option<f64>>, String>)> = jobs
        .par_iter()
        .map(|&(level, path)| {
            let r = TrialLog::read(path)
                .map(|log| trial_metrics(&log, edges[level]))
                .map_err(|e| e.to_string());
            (level, r)
        })
        .collect();
    let levels = sweep.difficulties.len();
    let mut samples: LevelSamples = Metric::ALL[1..]
        .iter()
        .map(|m| (*m, vec![Vec::new(); levels]))
        .collect();
    let mut bad = Vec::new();
    for (level, r) in results {
        match r {
            Ok(values) => {
                for (m, v) in values {
                    if let (Some(v), Some(slot)) = (v, samples.get_mut(&m)) {
                        slot[level].push(v);
                    }
                }
            }
            Err(e) => bad.push(e),
        }
    }
    Ok((samples, bad))
}

/// One line of a report CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub obstacle: String,
    pub metric: String,
    pub difficulty: f64,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub n: usize,
    pub checkpoint_id: String,
}

impl BehaviorReport {
    pub fn rows(&self) -> Vec<ReportRow> {
        let mut out = Vec::new();
        for (kind, by_metric) in &self.curves {
            for metric in Metric::ALL {
                let Some(c) = by_metric.get(&metric) else { continue };
                for k in 0..c.difficulties.len() {
                    out.push(ReportRow {
                        obstacle: kind.name().into(),
                        metric: metric.name().into(),
                        difficulty: c.difficulties[k],
                        mean: c.mean[k],
                        std: c.std[k],
                        n: c.n[k],
                        checkpoint_id: self.checkpoint_id.clone(),
                    });
                }
            }
        }
        out
    }
}

/// Write rows under the schema header line.
pub fn write_report(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    writeln!(file, "{REPORT_SCHEMA}").map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Read a report, checking its schema header.
pub fn read_report(path: &Path) -> Result<Vec<ReportRow>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut header = String::new();
    reader.read_line(&mut header).map_err(|e| Error::io(path, e))?;
    if header.trim_end() != REPORT_SCHEMA {
        return Err(Error::format(
            path,
            format!("schema line `{}`, expected `{REPORT_SCHEMA}`", header.trim_end()),
        ));
    }
    let mut r = csv::Reader::from_reader(reader);
    r.deserialize()
        .map(|row| row.map_err(|e| Error::format(path, e.to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn debounce_ignores_blips() {
        let f = [true, true, false, true, true, false, false, false, true, false];
        assert_eq!(debounced_edges(&f, 3), vec![(5, false)]);
        assert_eq!(debounced_edges(&[], 3), vec![]);
        let g = [false, false, false, true, true, true];
        assert_eq!(debounced_edges(&g, 3), vec![(3, true)]);
        assert_eq!(debounced_edges(&[false, true, true], 3), vec![]);
    }

    #[test]
    fn curve_statistics() {
        let c = BehaviorCurve::from_samples(Metric::ApproachSpeed, &[0.0, 1.0], &[vec![1.0, 3.0], vec![]]);
        assert_eq!(c.mean, vec![Some(2.0), None]);
        assert_eq!(c.std, vec![Some(1.0), None]);
        assert_eq!(c.n, vec![2, 0]);
    }
}
