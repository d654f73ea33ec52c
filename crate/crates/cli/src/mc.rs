//! Monte Carlo driver: independent seeded runs in a worker pool, aggregated
//! into per-step means.

use rand_chacha::ChaCha12Rng;
use rand_chacha::rand_core::SeedableRng;
use rayon::prelude::*;

use ettrack_core::error::Result as CoreResult;
use ettrack_core::reduction::TrajectoryEstimate;
use ettrack_core::sim::{run_seed, ExtentSpread, ScenarioConfig, TruthTrajectory};

use crate::config::RunConfig;
use crate::io::{MetricsJson, TmJson, TmSeries};
use crate::runner::{evaluate_run, simulate_and_track, Evaluation, FilterKind};

/// Options shared by `track` and `mc`.
#[derive(Debug, Clone, Default)]
pub struct SimOptions {
    pub uniform_extent: bool,
    pub partition_thresholds: Option<Vec<f64>>,
}

impl SimOptions {
    pub fn spread(&self) -> ExtentSpread {
        if self.uniform_extent {
            ExtentSpread::UniformOnEllipse
        } else {
            ExtentSpread::MultiplicativeGaussian
        }
    }
}

/// The outcome of one Monte Carlo run.
pub struct McRun {
    pub truth: Vec<TruthTrajectory>,
    pub estimates: Vec<TrajectoryEstimate>,
    pub evaluation: Evaluation,
    pub runtime_s: f64,
}

fn single_run(
    cfg: &RunConfig,
    sc: &ScenarioConfig,
    filter: FilterKind,
    opts: &SimOptions,
    seed: u64,
) -> CoreResult<McRun> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let (truth, output, _) = simulate_and_track(
        sc,
        filter,
        &cfg.reduction_params(),
        opts.partition_thresholds.as_deref(),
        opts.spread(),
        &mut rng,
    )?;
    let evaluation = evaluate_run(&truth, &output.estimates, &cfg.tm_params())?;
    Ok(McRun {
        truth,
        estimates: output.estimates,
        evaluation,
        runtime_s: output.runtime_s,
    })
}

/// Runs `runs` independent seeded simulations with the given filter and
/// aggregates the metrics. Failed runs are counted and excluded from the
/// averages; run order does not affect the aggregate.
pub fn monte_carlo(
    cfg: &RunConfig,
    filter: FilterKind,
    runs: usize,
    master_seed: u64,
    opts: &SimOptions,
) -> anyhow::Result<(MetricsJson, Vec<McRun>)> {
    anyhow::ensure!(runs >= 1, "at least one Monte Carlo run is required");
    let sc = cfg.scenario()?;

    let results: Vec<CoreResult<McRun>> = (0..runs)
        .into_par_iter()
        .map(|r| single_run(cfg, &sc, filter, opts, run_seed(master_seed, r)))
        .collect();

    let mut ok: Vec<McRun> = Vec::new();
    let mut failed = 0usize;
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(run) => ok.push(run),
            Err(e) => {
                log::warn!("run {r} failed and is excluded from averages: {e}");
                failed += 1;
            }
        }
    }
    anyhow::ensure!(!ok.is_empty(), "all {runs} Monte Carlo runs failed");

    Ok((aggregate(&ok, runs, failed), ok))
}

fn aggregate(ok: &[McRun], runs: usize, failed: usize) -> MetricsJson {
    let n_targets = ok
        .iter()
        .map(|r| r.evaluation.per_step_gwd.len())
        .max()
        .unwrap_or(0);
    let steps = ok
        .iter()
        .flat_map(|r| r.evaluation.per_step_gwd.iter().map(Vec::len))
        .max()
        .unwrap_or(0);

    // entrywise mean GWD over the runs where the target was matched
    let mut gwd_sum = vec![vec![0.0f64; steps]; n_targets];
    let mut gwd_count = vec![vec![0usize; steps]; n_targets];
    for run in ok {
        for (t, series) in run.evaluation.per_step_gwd.iter().enumerate() {
            for (k, &v) in series.iter().enumerate() {
                if v.is_finite() {
                    gwd_sum[t][k] += v;
                    gwd_count[t][k] += 1;
                }
            }
        }
    }
    let per_step_gwd: Vec<Vec<f64>> = gwd_sum
        .iter()
        .zip(&gwd_count)
        .map(|(sums, counts)| {
            sums.iter()
                .zip(counts)
                .map(|(&s, &c)| if c > 0 { s / c as f64 } else { f64::NAN })
                .collect()
        })
        .collect();

    let tm_steps = ok
        .iter()
        .map(|r| r.evaluation.tm.per_step.len())
        .max()
        .unwrap_or(0);
    let mut series = TmSeries {
        location: vec![0.0; tm_steps],
        missed: vec![0.0; tm_steps],
        false_: vec![0.0; tm_steps],
        switch_: vec![0.0; tm_steps],
    };
    let mut counts = vec![0usize; tm_steps];
    let n = ok.len() as f64;
    let mut tm = TmJson {
        total: 0.0,
        location: 0.0,
        missed: 0.0,
        false_: 0.0,
        switch_: 0.0,
    };
    let mut overall = 0.0;
    let mut runtime = 0.0;
    for run in ok {
        let r = &run.evaluation.tm;
        tm.total += r.total / n;
        tm.location += r.location / n;
        tm.missed += r.missed / n;
        tm.false_ += r.false_ / n;
        tm.switch_ += r.switch_ / n;
        overall += run.evaluation.overall_tm / n;
        runtime += run.runtime_s / n;
        for (k, s) in r.per_step.iter().enumerate() {
            series.location[k] += s.location;
            series.missed[k] += s.missed;
            series.false_[k] += s.false_;
            series.switch_[k] += s.switch_;
            counts[k] += 1;
        }
    }
    for k in 0..tm_steps {
        let c = counts[k].max(1) as f64;
        series.location[k] /= c;
        series.missed[k] /= c;
        series.false_[k] /= c;
        series.switch_[k] /= c;
    }

    MetricsJson {
        per_step_gwd,
        tm,
        runtime_s: runtime,
        overall_tm: overall,
        per_step_tm: series,
        runs: runs - failed,
        failed_runs: failed,
    }
}
