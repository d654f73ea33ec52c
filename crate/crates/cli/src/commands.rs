//! Implementations behind the CLI subcommands.

use std::path::{Path, PathBuf};

use anyhow::Context;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use ettrack_core::metrics::{trajectory_metric, TmParams, TmTrajectory};
use ettrack_core::motion::build_model;
use ettrack_core::sim::{
    generate_ground_truth, generate_measurements_with_rng, jittered_birth, truth_to_tm,
};

use crate::config::RunConfig;
use crate::io::{
    estimate_rows, read_measurement_csv, read_trajectory_csv, truth_rows, write_measurement_csv,
    write_metrics_json, write_trajectory_csv, MetricsJson, TmJson, TmSeries, TrajectoryRow,
};
use crate::mc::{monte_carlo, SimOptions};
use crate::plots::{line_chart_svg, trajectory_overlay_svg};
use crate::runner::{evaluate_run, per_step_gwd, run_filter, FilterKind};

/// Output file paths of a finished tracking run.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub estimates_path: PathBuf,
    pub truth_path: PathBuf,
    pub metrics_path: PathBuf,
    pub runtime_s: f64,
}

/// `simulate`: writes ground truth and measurement CSVs.
pub fn simulate(
    cfg: &RunConfig,
    seed: u64,
    out_dir: &Path,
    opts: &SimOptions,
) -> anyhow::Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(out_dir)?;
    let sc = cfg.scenario()?;
    let truth = generate_ground_truth(&sc);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut params = sc.params.clone();
    params.birth = jittered_birth(&sc, &mut rng);
    let model = build_model(&params)?;
    let scans = generate_measurements_with_rng(&truth, &model, sc.duration, &mut rng, opts.spread());

    let truth_path = out_dir.join("truth.csv");
    let meas_path = out_dir.join("measurements.csv");
    write_trajectory_csv(&truth_path, &truth_rows(0, &truth))?;
    write_measurement_csv(&meas_path, &scans)?;
    Ok((truth_path, meas_path))
}

/// `track`: simulates (or ingests) measurements, runs one filter, writes
/// truth/estimates CSVs and the metrics report.
pub fn run_tracking(
    cfg: &RunConfig,
    filter: FilterKind,
    seed: u64,
    out_dir: &Path,
    opts: &SimOptions,
    external_measurements: Option<&Path>,
    plot: bool,
) -> anyhow::Result<RunArtifacts> {
    std::fs::create_dir_all(out_dir)?;
    let sc = cfg.scenario()?;
    let truth = generate_ground_truth(&sc);

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut params = sc.params.clone();
    params.birth = jittered_birth(&sc, &mut rng);
    let model = build_model(&params)?;
    let scans = match external_measurements {
        Some(path) => read_measurement_csv(path, sc.duration)?,
        None => generate_measurements_with_rng(&truth, &model, sc.duration, &mut rng, opts.spread()),
    };

    let output = run_filter(
        &model,
        &scans,
        filter,
        opts.partition_thresholds.as_deref(),
        &cfg.reduction_params(),
    )?;
    let evaluation = evaluate_run(&truth, &output.estimates, &cfg.tm_params())?;

    let estimates_path = out_dir.join("estimates.csv");
    let truth_path = out_dir.join("truth.csv");
    let metrics_path = out_dir.join("metrics.json");
    write_trajectory_csv(&estimates_path, &estimate_rows(0, &output.estimates))?;
    write_trajectory_csv(&truth_path, &truth_rows(0, &truth))?;
    let metrics = MetricsJson {
        per_step_gwd: evaluation.per_step_gwd.clone(),
        tm: TmJson::from(&evaluation.tm),
        runtime_s: output.runtime_s,
        overall_tm: evaluation.overall_tm,
        per_step_tm: TmSeries::from(&evaluation.tm),
        runs: 1,
        failed_runs: 0,
    };
    write_metrics_json(&metrics_path, &metrics)?;

    let artifacts = RunArtifacts {
        estimates_path,
        truth_path,
        metrics_path,
        runtime_s: output.runtime_s,
    };
    if plot {
        emit_plots(&artifacts, out_dir)?;
    }
    Ok(artifacts)
}

/// `evaluate`: compares two trajectory CSVs and writes the metrics report.
pub fn evaluate_files(
    estimates_path: &Path,
    truth_path: &Path,
    params: &TmParams,
    out_path: &Path,
) -> anyhow::Result<MetricsJson> {
    let estimates = read_trajectory_csv(estimates_path)?;
    let truth = read_trajectory_csv(truth_path)?;
    let tm = trajectory_metric(&truth, &estimates, params)?;
    let gwd_series = per_step_gwd(&truth, &estimates)?;
    let steps = tm.per_step.len().max(1);
    let overall = tm.total / (steps as f64 * truth.len().max(1) as f64);
    let metrics = MetricsJson {
        per_step_gwd: gwd_series,
        tm: TmJson::from(&tm),
        runtime_s: 0.0,
        overall_tm: overall,
        per_step_tm: TmSeries::from(&tm),
        runs: 1,
        failed_runs: 0,
    };
    if let Some(parent) = out_path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    write_metrics_json(out_path, &metrics)?;
    Ok(metrics)
}

/// `mc`: Monte Carlo aggregation; writes the aggregated metrics report and
/// the first run's truth/estimate CSVs as sample artifacts.
pub fn run_monte_carlo(
    cfg: &RunConfig,
    filter: FilterKind,
    runs: usize,
    master_seed: u64,
    out_dir: &Path,
    opts: &SimOptions,
    plot: bool,
) -> anyhow::Result<(MetricsJson, RunArtifacts)> {
    std::fs::create_dir_all(out_dir)?;
    let (metrics, all_runs) = monte_carlo(cfg, filter, runs, master_seed, opts)?;

    let first = &all_runs[0];
    let estimates_path = out_dir.join("estimates.csv");
    let truth_path = out_dir.join("truth.csv");
    let metrics_path = out_dir.join("metrics.json");
    write_trajectory_csv(&estimates_path, &estimate_rows(0, &first.estimates))?;
    write_trajectory_csv(&truth_path, &truth_rows(0, &first.truth))?;
    write_metrics_json(&metrics_path, &metrics)?;

    let artifacts = RunArtifacts {
        estimates_path,
        truth_path,
        metrics_path,
        runtime_s: metrics.runtime_s,
    };
    if plot {
        emit_plots(&artifacts, out_dir)?;
    }
    Ok((metrics, artifacts))
}

/// Renders the three SVG reports next to the given artifacts: trajectory
/// overlay (extent ellipses every 4 steps), GWD over time and the
/// trajectory-metric decomposition.
pub fn emit_plots(artifacts: &RunArtifacts, out_dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let truth = read_trajectory_csv(&artifacts.truth_path)
        .with_context(|| "plots require the truth CSV")?;
    let estimates = read_trajectory_csv(&artifacts.estimates_path)
        .with_context(|| "plots require the estimates CSV")?;
    let metrics_text = std::fs::read_to_string(&artifacts.metrics_path)
        .with_context(|| "plots require the metrics report")?;
    let metrics: MetricsJson = serde_json::from_str(&metrics_text)?;

    let name = |prefix: &str, i: usize| format!("{prefix} {}", i + 1);
    let overlay = trajectory_overlay_svg(
        &label_all(&truth, |i| name("target", i)),
        &label_all(&estimates, |i| name("estimate", i)),
        4,
    );
    let gwd_chart = line_chart_svg(
        "mean GWD per target",
        "GWD",
        &metrics
            .per_step_gwd
            .iter()
            .enumerate()
            .map(|(i, v)| (name("target", i), v.clone()))
            .collect::<Vec<_>>(),
    );
    let tm_chart = line_chart_svg(
        "trajectory metric decomposition",
        "cost",
        &[
            ("location".to_string(), metrics.per_step_tm.location.clone()),
            ("missed".to_string(), metrics.per_step_tm.missed.clone()),
            ("false".to_string(), metrics.per_step_tm.false_.clone()),
            ("switch".to_string(), metrics.per_step_tm.switch_.clone()),
        ],
    );

    let paths = [
        (out_dir.join("trajectories.svg"), overlay),
        (out_dir.join("gwd.svg"), gwd_chart),
        (out_dir.join("tm.svg"), tm_chart),
    ];
    let mut written = Vec::new();
    for (path, text) in paths {
        std::fs::write(&path, text)?;
        written.push(path);
    }
    Ok(written)
}

fn label_all(
    trajectories: &[TmTrajectory],
    name: impl Fn(usize) -> String,
) -> Vec<(String, TmTrajectory)> {
    trajectories
        .iter()
        .enumerate()
        .map(|(i, t)| (name(i), t.clone()))
        .collect()
}

/// Reads estimate rows back (used by the determinism checks in tests).
pub fn read_estimate_rows(path: &Path) -> anyhow::Result<Vec<TrajectoryRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<Vec<_>, _>>()?)
}

/// Ground truth of a configuration as metric trajectories (used by tests).
pub fn truth_tm(cfg: &RunConfig) -> anyhow::Result<Vec<TmTrajectory>> {
    let sc = cfg.scenario()?;
    let truth = generate_ground_truth(&sc);
    Ok(truth
        .iter()
        .map(truth_to_tm)
        .collect::<ettrack_core::error::Result<Vec<_>>>()?)
}

