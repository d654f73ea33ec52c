use ettrack_cli::config::RunConfig;
use ettrack_cli::runner::{run_filter, FilterKind};
use ettrack_core::motion::build_model;
use ettrack_core::partition::threshold_scale;
use ettrack_core::sim::*;
use rand_chacha::ChaCha12Rng;
use rand_chacha::rand_core::SeedableRng;

fn main() {
    let cfg = RunConfig::scenario1();
    let sc = cfg.scenario().unwrap();
    let truth = generate_ground_truth(&sc);
    let model0 = build_model(&sc.params).unwrap();
    let base = threshold_scale(&model0);
    let strategies: Vec<(&str, Option<Vec<f64>>)> = vec![
        ("linkage", None),
        ("fixed4", Some((1..=4).map(|k| k as f64 * base).collect())),
        ("dense7", Some((2..=8).map(|k| k as f64 * 0.5 * base).collect())),
    ];
    for (name, thr) in &strategies {
        for filter in [FilterKind::TcphdE, FilterKind::TphdE] {
            let mut bad_steps = 0usize; let mut total_steps = 0usize; let mut worst = 0usize;
            for run in 0..4usize {
                let seed = run_seed(12345, run);
                let mut rng = ChaCha12Rng::seed_from_u64(seed);
                let mut params = sc.params.clone();
                params.birth = jittered_birth(&sc, &mut rng);
                let model = build_model(&params).unwrap();
                let scans = generate_measurements_with_rng(&truth, &model, sc.duration, &mut rng, ExtentSpread::MultiplicativeGaussian);
                let out = run_filter(&model, &scans, filter, thr.as_deref(), &cfg.reduction_params()).unwrap();
                for s in &out.step_stats {
                    total_steps += 1;
                    if s.estimated != 4 { bad_steps += 1; }
                    worst = worst.max(s.estimated);
                }
            }
            println!("{name:8} {:8}: steps with n!=4: {bad_steps}/{total_steps}, worst n {worst}", filter.name());
        }
    }
}
