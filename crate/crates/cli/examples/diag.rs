use ettrack_cli::config::RunConfig;
use ettrack_cli::runner::{run_filter, FilterKind};
use ettrack_core::motion::build_model;
use ettrack_core::partition::{default_thresholds, distance_partitions};
use ettrack_core::sim::*;
use rand_chacha::ChaCha12Rng;
use rand_chacha::rand_core::SeedableRng;

fn main() {
    let cfg = RunConfig::scenario1();
    let sc = cfg.scenario().unwrap();
    let truth = generate_ground_truth(&sc);
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    let mut params = sc.params.clone();
    params.birth = jittered_birth(&sc, &mut rng);
    let model = build_model(&params).unwrap();
    let scans = generate_measurements_with_rng(&truth, &model, sc.duration, &mut rng, ExtentSpread::MultiplicativeGaussian);
    let thr = default_thresholds(&model);
    println!("thresholds: {thr:?}");
    for k in [0usize, 1, 2, 14] {
        let parts = distance_partitions(&scans[k], &thr).unwrap();
        println!("step {}: |Z|={} partitions={}", k+1, scans[k].len(), parts.len());
        for p in &parts {
            let sizes: Vec<usize> = p.cells.iter().map(|c| c.len()).collect();
            // centroid of each big cell
            let mut info = String::new();
            for c in &p.cells {
                if c.len() >= 5 {
                    let cx: f64 = c.iter().map(|&i| scans[k][i].x).sum::<f64>() / c.len() as f64;
                    let cy: f64 = c.iter().map(|&i| scans[k][i].y).sum::<f64>() / c.len() as f64;
                    info.push_str(&format!(" [{}@({:.0},{:.0})]", c.len(), cx, cy));
                }
            }
            println!("  cells {sizes:?}{info}");
        }
    }
    // run the filter and print online estimates early
    let out = run_filter(&model, &scans, FilterKind::TphdE, &thr, &cfg.reduction_params()).unwrap();
    for s in out.step_stats.iter().take(14) {
        println!("step {}: meas {} comps {} mass {:.2} est {}", s.step, s.measurements, s.components, s.mass, s.estimated);
    }
}
