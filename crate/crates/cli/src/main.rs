use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ettrack_cli::commands;
use ettrack_cli::config::load_config;
use ettrack_cli::mc::SimOptions;
use ettrack_cli::runner::FilterKind;
use ettrack_core::metrics::TmParams;
use ettrack_core::TrackError;

/// Extended-target tracking toolkit: trajectory PHD/CPHD filters with
/// explicit elliptical shape estimation.
#[derive(Parser)]
#[command(name = "ettrack", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct SimArgs {
    /// Built-in scenario name (`scenario1`) or path to a JSON config.
    #[arg(long)]
    config: String,
    /// Master random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Draw target measurement sources uniformly over the ellipse instead
    /// of the multiplicative Gaussian model.
    #[arg(long)]
    uniform_extent: bool,
    /// Explicit distance-partitioning thresholds in meters.
    #[arg(long, value_delimiter = ',')]
    partition_thresholds: Option<Vec<f64>>,
}

impl SimArgs {
    fn options(&self) -> SimOptions {
        SimOptions {
            uniform_extent: self.uniform_extent,
            partition_thresholds: self.partition_thresholds.clone(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate ground truth and measurements.
    Simulate {
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Run one tracking filter over a simulated (or ingested) scenario.
    Track {
        #[command(flatten)]
        sim: SimArgs,
        /// Which filter to run: `tphd-e` or `tcphd-e`.
        #[arg(long)]
        filter: FilterKind,
        /// Track externally produced measurements (CSV `step,x,y`) instead
        /// of simulating them.
        #[arg(long)]
        measurements: Option<PathBuf>,
        /// Also write the SVG plots.
        #[arg(long)]
        plot: bool,
    },
    /// Compare an estimates CSV against a truth CSV.
    Evaluate {
        #[arg(long)]
        estimates: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Output metrics JSON path.
        #[arg(long)]
        out: PathBuf,
        /// Location/extent error cut-off.
        #[arg(long, default_value_t = 40.0)]
        cutoff: f64,
        /// Metric order.
        #[arg(long, default_value_t = 1.0)]
        order: f64,
        /// Track switch cost.
        #[arg(long, default_value_t = 2.0)]
        switch_cost: f64,
    },
    /// Monte Carlo evaluation over independent seeded runs.
    Mc {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long)]
        filter: FilterKind,
        /// Number of runs.
        #[arg(long)]
        runs: usize,
        #[arg(long)]
        plot: bool,
    },
}

fn main() -> ExitCode {
    env_logger::init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err))
        }
    }
}

/// Exit code 3 for numerical failures mid-run, 2 for everything else
/// (configuration, I/O, validation).
fn classify(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(track) = cause.downcast_ref::<TrackError>() {
            match track {
                TrackError::NumericalFailure(_) | TrackError::DegenerateCovariance(_) => {
                    return 3
                }
                _ => return 2,
            }
        }
    }
    2
}

fn run() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate { sim } => {
            let cfg = load_config(&sim.config)?;
            let (truth, meas) = commands::simulate(&cfg, sim.seed, &sim.out, &sim.options())?;
            println!("wrote {} and {}", truth.display(), meas.display());
        }
        Command::Track {
            sim,
            filter,
            measurements,
            plot,
        } => {
            let cfg = load_config(&sim.config)?;
            let artifacts = commands::run_tracking(
                &cfg,
                filter,
                sim.seed,
                &sim.out,
                &sim.options(),
                measurements.as_deref(),
                plot,
            )?;
            println!(
                "tracked with {} in {:.2}s; estimates at {}",
                filter.name(),
                artifacts.runtime_s,
                artifacts.estimates_path.display()
            );
        }
        Command::Evaluate {
            estimates,
            truth,
            out,
            cutoff,
            order,
            switch_cost,
        } => {
            let params = TmParams {
                cutoff,
                order,
                switch_cost,
            };
            let metrics = commands::evaluate_files(&estimates, &truth, &params, &out)?;
            println!(
                "TM total {:.3} (location {:.3}, missed {:.3}, false {:.3}, switch {:.3}); report at {}",
                metrics.tm.total,
                metrics.tm.location,
                metrics.tm.missed,
                metrics.tm.false_,
                metrics.tm.switch_,
                out.display()
            );
        }
        Command::Mc {
            sim,
            filter,
            runs,
            plot,
        } => {
            let cfg = load_config(&sim.config)?;
            let (metrics, artifacts) = commands::run_monte_carlo(
                &cfg,
                filter,
                runs,
                sim.seed,
                &sim.out,
                &sim.options(),
                plot,
            )?;
            println!(
                "{} over {} runs ({} failed): overall TM {:.3}, mean runtime {:.2}s; report at {}",
                filter.name(),
                metrics.runs + metrics.failed_runs,
                metrics.failed_runs,
                metrics.overall_tm,
                metrics.runtime_s,
                artifacts.metrics_path.display()
            );
        }
    }
    Ok(())
}
