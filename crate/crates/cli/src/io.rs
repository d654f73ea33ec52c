//! CSV and JSON persistence for runs.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use ettrack_core::metrics::{TmReport, TmTrajectory};
use ettrack_core::reduction::TrajectoryEstimate;
use ettrack_core::sim::TruthTrajectory;
use ettrack_core::types::{Measurement, ShapeState};

/// One row of the estimates/truth CSV schema
/// `run,step,traj_id,start_step,x,y,vx,vy,theta,l1,l2,weight`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub run: usize,
    pub step: usize,
    pub traj_id: u64,
    pub start_step: usize,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub theta: f64,
    pub l1: f64,
    pub l2: f64,
    pub weight: f64,
}

/// Expands extracted trajectories into per-step rows. Colliding identities
/// (possible after heavy merging) are renumbered deterministically.
pub fn estimate_rows(run: usize, estimates: &[TrajectoryEstimate]) -> Vec<TrajectoryRow> {
    let mut seen = std::collections::HashSet::new();
    let mut next_free = estimates.iter().map(|e| e.id).max().unwrap_or(0) + 1;
    let mut rows = Vec::new();
    for e in estimates {
        let mut id = e.id;
        if !seen.insert(id) {
            id = next_free;
            seen.insert(id);
            next_free += 1;
        }
        for (offset, s) in e.states.iter().enumerate() {
            rows.push(TrajectoryRow {
                run,
                step: e.start_time + offset,
                traj_id: id,
                start_step: e.start_time,
                x: s.kin.px,
                y: s.kin.py,
                vx: s.kin.vx,
                vy: s.kin.vy,
                theta: s.shape.theta,
                l1: s.shape.l1,
                l2: s.shape.l2,
                weight: 1.0,
            });
        }
    }
    rows
}

/// Ground-truth trajectories as rows of the same schema (weight fixed at 1).
pub fn truth_rows(run: usize, truth: &[TruthTrajectory]) -> Vec<TrajectoryRow> {
    let mut rows = Vec::new();
    for (id, t) in truth.iter().enumerate() {
        for (offset, (kin, shape)) in t.states.iter().enumerate() {
            rows.push(TrajectoryRow {
                run,
                step: t.birth_step + offset,
                traj_id: id as u64,
                start_step: t.birth_step,
                x: kin.px,
                y: kin.py,
                vx: kin.vx,
                vy: kin.vy,
                theta: shape.theta,
                l1: shape.l1,
                l2: shape.l2,
                weight: 1.0,
            });
        }
    }
    rows
}

pub fn write_trajectory_csv(path: &Path, rows: &[TrajectoryRow]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trajectory CSV back into metric trajectories, grouped by
/// `(run, traj_id)` and checked for contiguous steps.
pub fn read_trajectory_csv(path: &Path) -> anyhow::Result<Vec<TmTrajectory>> {
    let mut r = csv::Reader::from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut grouped: BTreeMap<(usize, u64), Vec<TrajectoryRow>> = BTreeMap::new();
    for row in r.deserialize() {
        let row: TrajectoryRow = row.context("malformed trajectory row")?;
        grouped.entry((row.run, row.traj_id)).or_default().push(row);
    }
    let mut out = Vec::new();
    for ((run, id), mut rows) in grouped {
        rows.sort_by_key(|r| r.step);
        let start = rows[0].step;
        let mut states = Vec::with_capacity(rows.len());
        for (offset, row) in rows.iter().enumerate() {
            if row.step != start + offset {
                bail!(
                    "trajectory {id} of run {run} has a gap at step {}",
                    row.step
                );
            }
            let shape = ShapeState::new(row.theta, row.l1, row.l2);
            states.push((
                nalgebra::Vector2::new(row.x, row.y),
                shape
                    .extent_matrix()
                    .map_err(|e| anyhow::anyhow!("row at step {}: {e}", row.step))?,
            ));
        }
        out.push(TmTrajectory {
            start_time: start,
            states,
        });
    }
    Ok(out)
}

/// Measurement CSV schema `step,x,y`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct MeasurementRow {
    step: usize,
    x: f64,
    y: f64,
}

pub fn write_measurement_csv(path: &Path, scans: &[Vec<Measurement>]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    for (idx, scan) in scans.iter().enumerate() {
        for z in scan {
            w.serialize(MeasurementRow {
                step: idx + 1,
                x: z.x,
                y: z.y,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads `step,x,y` rows into per-step scans covering `1..=duration` (the
/// duration grows to the largest step seen).
pub fn read_measurement_csv(path: &Path, duration: usize) -> anyhow::Result<Vec<Vec<Measurement>>> {
    let mut r = csv::Reader::from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut scans: Vec<Vec<Measurement>> = vec![Vec::new(); duration];
    for row in r.deserialize() {
        let row: MeasurementRow = row.context("malformed measurement row")?;
        if row.step == 0 {
            bail!("measurement steps are 1-based, got step 0");
        }
        if row.step > scans.len() {
            scans.resize(row.step, Vec::new());
        }
        scans[row.step - 1].push(Measurement::new(row.x, row.y));
    }
    Ok(scans)
}

/// Decomposed trajectory-metric block of the metrics report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TmJson {
    pub total: f64,
    pub location: f64,
    pub missed: f64,
    #[serde(rename = "false")]
    pub false_: f64,
    #[serde(rename = "switch")]
    pub switch_: f64,
}

impl From<&TmReport> for TmJson {
    fn from(r: &TmReport) -> Self {
        Self {
            total: r.total,
            location: r.location,
            missed: r.missed,
            false_: r.false_,
            switch_: r.switch_,
        }
    }
}

/// Per-step decomposition series for plots and aggregation.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TmSeries {
    pub location: Vec<f64>,
    pub missed: Vec<f64>,
    #[serde(rename = "false")]
    pub false_: Vec<f64>,
    #[serde(rename = "switch")]
    pub switch_: Vec<f64>,
}

impl From<&TmReport> for TmSeries {
    fn from(r: &TmReport) -> Self {
        Self {
            location: r.per_step.iter().map(|s| s.location).collect(),
            missed: r.per_step.iter().map(|s| s.missed).collect(),
            false_: r.per_step.iter().map(|s| s.false_).collect(),
            switch_: r.per_step.iter().map(|s| s.switch_).collect(),
        }
    }
}

/// The metrics report written by `track`, `evaluate` and `mc`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsJson {
    /// `[truth target][step]` mean GWD; null where no estimate was assigned.
    pub per_step_gwd: Vec<Vec<f64>>,
    pub tm: TmJson,
    pub runtime_s: f64,
    /// Trajectory-metric total normalized per step and per true trajectory.
    pub overall_tm: f64,
    pub per_step_tm: TmSeries,
    pub runs: usize,
    pub failed_runs: usize,
}

pub fn write_metrics_json(path: &Path, metrics: &MetricsJson) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(metrics)?;
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
