use ettrack_cli::config::RunConfig;
use ettrack_cli::runner::{run_filter, FilterKind};
use ettrack_core::motion::build_model;
use ettrack_core::sim::*;
use rand_chacha::ChaCha12Rng;
use rand_chacha::rand_core::SeedableRng;

fn main() {
    let cfg = RunConfig::scenario1();
    let sc = cfg.scenario().unwrap();
    let truth = generate_ground_truth(&sc);
    let mut agg = [[0.0f64; 3]; 2]; // [filter][pos_err2, shape_gwd, count]
    for run in 0..6usize {
        let seed = run_seed(12345, run);
        for (fi, filter) in [FilterKind::TphdE, FilterKind::TcphdE].iter().enumerate() {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let mut params = sc.params.clone();
            params.birth = jittered_birth(&sc, &mut rng);
            let model = build_model(&params).unwrap();
            let scans = generate_measurements_with_rng(&truth, &model, sc.duration, &mut rng, ExtentSpread::MultiplicativeGaussian);
            let out = run_filter(&model, &scans, *filter, None, &cfg.reduction_params()).unwrap();
            // final-history states vs truth, steps 20..80, best-match by position
            for k in 20..=80usize {
                for t in &truth {
                    let (tk, ts) = t.state_at(k).unwrap();
                    let best = out.estimates.iter()
                        .filter_map(|e| {
                            let idx = k.checked_sub(e.start_time)?;
                            e.states.get(idx)
                        })
                        .min_by(|a, b| {
                            let da = (a.kin.px - tk.px).powi(2) + (a.kin.py - tk.py).powi(2);
                            let db = (b.kin.px - tk.px).powi(2) + (b.kin.py - tk.py).powi(2);
                            da.partial_cmp(&db).unwrap()
                        });
                    if let Some(s) = best {
                        let pos2 = (s.kin.px - tk.px).powi(2) + (s.kin.py - tk.py).powi(2);
                        let x1 = ts.extent_matrix().unwrap();
                        let x2 = s.shape.extent_matrix().unwrap();
                        let shape_gwd = ettrack_core::metrics::gwd(
                            &nalgebra::Vector2::zeros(), &x1, &nalgebra::Vector2::zeros(), &x2).unwrap();
                        agg[fi][0] += pos2;
                        agg[fi][1] += shape_gwd;
                        agg[fi][2] += 1.0;
                    }
                }
            }
        }
    }
    for (fi, name) in ["tphd", "tcphd"].iter().enumerate() {
        let n = agg[fi][2];
        println!("{name}: mean pos_err2 {:.1} mean extent_gwd {:.1} (per-target gwd {:.1})",
            agg[fi][0] / n, agg[fi][1] / n, (agg[fi][0] + agg[fi][1]) / n);
    }
}
