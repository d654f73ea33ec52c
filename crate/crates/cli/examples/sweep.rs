use ettrack_cli::config::RunConfig;
use ettrack_cli::mc::{monte_carlo, SimOptions};
use ettrack_cli::runner::FilterKind;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let runs: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(6);
    let mult: Vec<f64> = args.get(2).map(|s| s.split(',').map(|x| x.parse().unwrap()).collect())
        .unwrap_or_else(|| vec![]);
    let cfg = RunConfig::scenario1();
    let base = {
        let sc = cfg.scenario().unwrap();
        let m = ettrack_core::motion::build_model(&sc.params).unwrap();
        ettrack_core::partition::default_thresholds(&m)[0]
    };
    let thresholds: Option<Vec<f64>> = if mult.is_empty() { None } else {
        Some(mult.iter().map(|&k| k * base).collect())
    };
    println!("base {base:.2} thresholds {thresholds:?}");
    for filter in [FilterKind::TphdE, FilterKind::TcphdE] {
        let opts = SimOptions { uniform_extent: false, partition_thresholds: thresholds.clone() };
        let t0 = std::time::Instant::now();
        let (metrics, all) = monte_carlo(&cfg, filter, runs, 12345, &opts).unwrap();
        let mut overalls: Vec<f64> = all.iter().map(|r| r.evaluation.overall_tm).collect();
        overalls.sort_by(|a, b| a.partial_cmp(b).unwrap());
        println!("{}: overall {:.3} (runs: {:?}) loc {:.0} miss {:.0} false {:.0} switch {:.1} wall {:.1}s",
            filter.name(), metrics.overall_tm,
            overalls.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>(),
            metrics.tm.location, metrics.tm.missed, metrics.tm.false_, metrics.tm.switch_,
            t0.elapsed().as_secs_f64());
    }
}
