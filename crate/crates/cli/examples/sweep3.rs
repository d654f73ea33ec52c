use ettrack_cli::config::RunConfig;
use ettrack_cli::mc::{monte_carlo, SimOptions};
use ettrack_cli::runner::FilterKind;

fn main() {
    let runs: usize = std::env::args().nth(1).map(|s| s.parse().unwrap()).unwrap_or(8);
    let cap: usize = std::env::args().nth(2).map(|s| s.parse().unwrap()).unwrap_or(0);
    std::env::set_var("ETTRACK_THRESHOLD_CAP", cap.to_string());
    let cfg = RunConfig::scenario1();
    let opts = SimOptions::default();
    for filter in [FilterKind::TphdE, FilterKind::TcphdE] {
        let (metrics, _) = monte_carlo(&cfg, filter, runs, 12345, &opts).unwrap();
        println!("cap {cap} {}: overall {:.3} loc {:.1} miss {:.2} false {:.2}",
            filter.name(), metrics.overall_tm, metrics.tm.location, metrics.tm.missed, metrics.tm.false_);
    }
}
