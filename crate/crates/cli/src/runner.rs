//! One end-to-end tracking run: predict / partition / update / reduce per
//! step, then final trajectory extraction and evaluation.

use std::str::FromStr;
use std::time::Instant;

use nalgebra::{Matrix2, Vector2};
use rand_chacha::ChaCha12Rng;

use ettrack_core::error::Result as CoreResult;
use ettrack_core::metrics::{gwd, trajectory_metric, TmParams, TmReport, TmTrajectory};
use ettrack_core::motion::build_model;
use ettrack_core::partition::{
    distance_partitions, gate_measurements, linkage_thresholds, threshold_scale,
    with_absorbed_small_cells, DEFAULT_GATE_SIGMAS,
};
use ettrack_core::reduction::{
    estimate_tcphd, estimate_tphd, prune_and_merge, ReductionParams, TrajectoryEstimate,
};
use ettrack_core::sim::{
    generate_ground_truth, generate_measurements_with_rng, jittered_birth, truth_to_tm,
    ExtentSpread, ScenarioConfig, TruthTrajectory,
};
use ettrack_core::tcphd::{tcphd_predict, tcphd_update};
use ettrack_core::tphd::{tphd_predict, tphd_update};
use ettrack_core::types::{CardinalityPmf, Measurement, ModelConfig, TrajectoryMixture};

/// Which recursion drives a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    TphdE,
    TcphdE,
}

impl FilterKind {
    pub fn name(&self) -> &'static str {
        match self {
            FilterKind::TphdE => "tphd-e",
            FilterKind::TcphdE => "tcphd-e",
        }
    }
}

impl FromStr for FilterKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tphd-e" => Ok(FilterKind::TphdE),
            "tcphd-e" => Ok(FilterKind::TcphdE),
            other => Err(format!(
                "unknown filter `{other}` (expected `tphd-e` or `tcphd-e`)"
            )),
        }
    }
}

/// The per-scan partition set: distance partitioning plus the
/// small-cell-absorption variants. With no explicit threshold list, every
/// single-linkage merge event between 1 and 4 measurement-scatter scales is
/// realized.
fn scan_partitions(
    gated: &[Measurement],
    thresholds: Option<&[f64]>,
    model: &ModelConfig,
) -> CoreResult<Vec<ettrack_core::types::Partition>> {
    let base = match thresholds {
        Some(t) => distance_partitions(gated, t)?,
        None => {
            let scale = threshold_scale(model);
            let mut t = linkage_thresholds(gated, scale, 4.0 * scale);
            // experiment hook: subsample the event list
            if let Ok(cap) = std::env::var("ETTRACK_THRESHOLD_CAP") {
                if let Ok(cap) = cap.parse::<usize>() {
                    if cap > 0 && t.len() > cap {
                        let step = t.len() as f64 / cap as f64;
                        t = (0..cap).map(|i| t[(i as f64 * step) as usize]).collect();
                    }
                }
            }
            distance_partitions(gated, &t)?
        }
    };
    Ok(with_absorbed_small_cells(&base, gated, 4, 6))
}

/// Light per-step diagnostics recorded during a run.
#[derive(Debug, Clone)]
pub struct StepStats {
    pub step: usize,
    pub measurements: usize,
    pub components: usize,
    pub mass: f64,
    pub estimated: usize,
}

/// The result of one tracking run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    /// Trajectories extracted at the final step (full histories).
    pub estimates: Vec<TrajectoryEstimate>,
    /// Final cardinality PMF (cardinalized filter only).
    pub pmf: Option<CardinalityPmf>,
    pub step_stats: Vec<StepStats>,
    pub runtime_s: f64,
}

/// Runs one filter over a measurement sequence. `thresholds`, when given,
/// fixes the distance-partitioning thresholds; otherwise they follow the
/// per-scan linkage events.
pub fn run_filter(
    model: &ModelConfig,
    scans: &[Vec<Measurement>],
    filter: FilterKind,
    thresholds: Option<&[f64]>,
    reduction: &ReductionParams,
) -> CoreResult<RunOutput> {
    let start = Instant::now();
    let mut mixture = TrajectoryMixture::empty();
    let mut pmf = CardinalityPmf::delta(0, model.n_max);
    let mut step_stats = Vec::with_capacity(scans.len());
    let mut estimates: Vec<TrajectoryEstimate> = Vec::new();

    for (idx, scan) in scans.iter().enumerate() {
        let k = idx + 1;
        match filter {
            FilterKind::TphdE => {
                let pred = tphd_predict(&mixture, model, k);
                let gated = gate_measurements(&pred, scan, model, DEFAULT_GATE_SIGMAS);
                let parts = scan_partitions(&gated, thresholds, model)?;
                let post = tphd_update(&pred, &gated, &parts, model)?;
                mixture = prune_and_merge(&post, reduction);
                estimates = estimate_tphd(&mixture);
            }
            FilterKind::TcphdE => {
                let (pred, pmf_pred) = tcphd_predict(&mixture, &pmf, model, k)?;
                let gated = gate_measurements(&pred, scan, model, DEFAULT_GATE_SIGMAS);
                let parts = scan_partitions(&gated, thresholds, model)?;
                let (post, pmf_post) = tcphd_update(&pred, &pmf_pred, &gated, &parts, model)?;
                mixture = prune_and_merge(&post, reduction);
                pmf = pmf_post;
                estimates = estimate_tcphd(&mixture, &pmf);
                let mass = mixture.total_weight();
                let mean = pmf.mean();
                if mean > 1.0 && (mass - mean).abs() > 0.15 * mean {
                    log::debug!(
                        "step {k}: PHD mass {mass:.2} vs cardinality mean {mean:.2}"
                    );
                }
            }
        }
        debug_assert!(
            mixture
                .components
                .iter()
                .all(|c| c.start_time + c.len() - 1 == k),
            "end identifier violated at step {k}"
        );
        step_stats.push(StepStats {
            step: k,
            measurements: scan.len(),
            components: mixture.len(),
            mass: mixture.total_weight(),
            estimated: estimates.len(),
        });
    }

    Ok(RunOutput {
        estimates,
        pmf: match filter {
            FilterKind::TcphdE => Some(pmf),
            FilterKind::TphdE => None,
        },
        step_stats,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

/// Everything needed to evaluate one run.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub tm: TmReport,
    /// `[truth target][step]` GWD to the assigned estimate; NaN where the
    /// target had no assigned estimate at that step.
    pub per_step_gwd: Vec<Vec<f64>>,
    /// Mean per-step, per-true-trajectory total cost (the scalar reported
    /// as the overall trajectory metric error).
    pub overall_tm: f64,
}

/// Evaluates estimated trajectories against the ground truth.
pub fn evaluate_run(
    truth: &[TruthTrajectory],
    estimates: &[TrajectoryEstimate],
    params: &TmParams,
) -> CoreResult<Evaluation> {
    let truth_tm: Vec<TmTrajectory> = truth
        .iter()
        .map(truth_to_tm)
        .collect::<CoreResult<Vec<_>>>()?;
    let est_tm: Vec<TmTrajectory> = estimates
        .iter()
        .map(estimate_to_tm)
        .collect::<CoreResult<Vec<_>>>()?;
    let tm = trajectory_metric(&truth_tm, &est_tm, params)?;
    let per_step_gwd = per_step_gwd(&truth_tm, &est_tm)?;
    let steps = tm.per_step.len().max(1);
    let n_truth = truth.len().max(1);
    let overall_tm = tm.total / (steps as f64 * n_truth as f64);
    Ok(Evaluation {
        tm,
        per_step_gwd,
        overall_tm,
    })
}

/// Converts an extracted trajectory into the metric representation.
pub fn estimate_to_tm(e: &TrajectoryEstimate) -> CoreResult<TmTrajectory> {
    let states = e
        .states
        .iter()
        .map(|s| Ok((s.kin.position(), s.shape.extent_matrix()?)))
        .collect::<CoreResult<Vec<_>>>()?;
    Ok(TmTrajectory {
        start_time: e.start_time,
        states,
    })
}

/// Per-step GWD between each truth target and its optimally assigned
/// estimate (assignment minimizes the summed GWD per step; unassigned
/// targets get NaN).
pub fn per_step_gwd(
    truth: &[TmTrajectory],
    estimates: &[TmTrajectory],
) -> CoreResult<Vec<Vec<f64>>> {
    if truth.is_empty() {
        return Ok(Vec::new());
    }
    let first = truth.iter().map(|t| t.start_time).min().unwrap();
    let last = truth.iter().map(|t| t.end_time()).max().unwrap();
    let steps = last - first + 1;
    let mut out = vec![vec![f64::NAN; steps]; truth.len()];

    for k in first..=last {
        let alive_truth: Vec<(usize, &(Vector2<f64>, Matrix2<f64>))> = truth
            .iter()
            .enumerate()
            .filter_map(|(i, t)| state_at(t, k).map(|s| (i, s)))
            .collect();
        let alive_est: Vec<&(Vector2<f64>, Matrix2<f64>)> = estimates
            .iter()
            .filter_map(|e| state_at(e, k))
            .collect();
        if alive_truth.is_empty() || alive_est.is_empty() {
            continue;
        }
        let mut cost = vec![vec![0.0; alive_est.len()]; alive_truth.len()];
        for (a, (_, ts)) in alive_truth.iter().enumerate() {
            for (b, es) in alive_est.iter().enumerate() {
                cost[a][b] = gwd(&ts.0, &ts.1, &es.0, &es.1)?;
            }
        }
        let assignment = min_cost_assignment(&cost);
        for (a, (i, _)) in alive_truth.iter().enumerate() {
            if let Some(b) = assignment[a] {
                out[*i][k - first] = cost[a][b];
            }
        }
    }
    Ok(out)
}

fn state_at(t: &TmTrajectory, k: usize) -> Option<&(Vector2<f64>, Matrix2<f64>)> {
    if k < t.start_time || k > t.end_time() {
        None
    } else {
        Some(&t.states[k - t.start_time])
    }
}

/// Exact min-cost rectangular assignment by recursion; sized for a handful
/// of targets. Matching as many pairs as possible takes priority over cost.
fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<Option<usize>> {
    let n = cost.len();
    let m = if n == 0 { 0 } else { cost[0].len() };
    let mut best: (usize, f64, Vec<Option<usize>>) = (0, f64::INFINITY, vec![None; n]);
    let mut current = vec![None; n];
    let mut used = vec![false; m];

    fn recurse(
        i: usize,
        matched: usize,
        acc: f64,
        cost: &[Vec<f64>],
        current: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
        best: &mut (usize, f64, Vec<Option<usize>>),
    ) {
        let n = cost.len();
        if i == n {
            if matched > best.0 || (matched == best.0 && acc < best.1) {
                *best = (matched, acc, current.clone());
            }
            return;
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                current[i] = Some(j);
                recurse(i + 1, matched + 1, acc + cost[i][j], cost, current, used, best);
                current[i] = None;
                used[j] = false;
            }
        }
        // leave target i unassigned
        recurse(i + 1, matched, acc, cost, current, used, best);
    }

    recurse(0, 0, 0.0, cost, &mut current, &mut used, &mut best);
    best.2
}

/// Simulates one run (per-run birth jitter plus measurement noise) and
/// tracks it. `rng` drives all run randomness.
pub fn simulate_and_track(
    sc: &ScenarioConfig,
    filter: FilterKind,
    reduction: &ReductionParams,
    thresholds_override: Option<&[f64]>,
    spread: ExtentSpread,
    rng: &mut ChaCha12Rng,
) -> CoreResult<(Vec<TruthTrajectory>, RunOutput, ModelConfig)> {
    let truth = generate_ground_truth(sc);
    let mut params = sc.params.clone();
    params.birth = jittered_birth(sc, rng);
    let model = build_model(&params)?;
    let scans = generate_measurements_with_rng(&truth, &model, sc.duration, rng, spread);
    let output = run_filter(&model, &scans, filter, thresholds_override, reduction)?;
    Ok((truth, output, model))
}
