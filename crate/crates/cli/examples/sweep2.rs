use ettrack_cli::config::RunConfig;
use ettrack_cli::mc::{monte_carlo, SimOptions};
use ettrack_cli::runner::FilterKind;

fn main() {
    let runs: usize = std::env::args().nth(1).map(|s| s.parse().unwrap()).unwrap_or(10);
    let cfg = RunConfig::scenario1();
    let opts = SimOptions::default();
    let mut series = Vec::new();
    for filter in [FilterKind::TphdE, FilterKind::TcphdE] {
        let (metrics, _) = monte_carlo(&cfg, filter, runs, 12345, &opts).unwrap();
        println!("{}: overall {:.3} loc {:.1} miss {:.2} false {:.2} switch {:.2}",
            filter.name(), metrics.overall_tm, metrics.tm.location, metrics.tm.missed, metrics.tm.false_, metrics.tm.switch_);
        series.push(metrics.per_step_tm);
    }
    println!("per-step total cost (tphd vs tcphd):");
    for k in (0..80).step_by(4) {
        let a = series[0].location[k] + series[0].missed[k] + series[0].false_[k] + series[0].switch_[k];
        let b = series[1].location[k] + series[1].missed[k] + series[1].false_[k] + series[1].switch_[k];
        println!("  k={:2} tphd {:6.2} tcphd {:6.2} diff {:+.2}", k + 1, a, b, b - a);
    }
}
