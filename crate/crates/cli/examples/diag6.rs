use ettrack_cli::config::RunConfig;
use ettrack_core::motion::build_model;
use ettrack_core::partition::*;
use ettrack_core::reduction::prune_and_merge;
use ettrack_core::sim::*;
use ettrack_core::tcphd::*;
use ettrack_core::types::{CardinalityPmf, TrajectoryMixture};
use rand_chacha::ChaCha12Rng;
use rand_chacha::rand_core::SeedableRng;

fn main() {
    let cfg = RunConfig::scenario1();
    let sc = cfg.scenario().unwrap();
    let truth = generate_ground_truth(&sc);
    let seed = run_seed(12345, 0);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut params = sc.params.clone();
    params.birth = jittered_birth(&sc, &mut rng);
    let model = build_model(&params).unwrap();
    let scans = generate_measurements_with_rng(&truth, &model, sc.duration, &mut rng, ExtentSpread::MultiplicativeGaussian);
    let red = cfg.reduction_params();
    let scale = threshold_scale(&model);

    let mut mix = TrajectoryMixture::empty();
    let mut pmf = CardinalityPmf::delta(0, model.n_max);
    for k in 1..=14usize {
        let z = &scans[k - 1];
        let (pred, pmf_pred) = tcphd_predict(&mix, &pmf, &model, k).unwrap();
        let gated = gate_measurements(&pred, z, &model, DEFAULT_GATE_SIGMAS);
        let t = linkage_thresholds(&gated, scale, 4.0 * scale);
        let base = distance_partitions(&gated, &t).unwrap();
        let parts = with_absorbed_small_cells(&base, &gated, 4, 6);
        let coeff = compute_coefficients(&pred, &pmf_pred, &gated, &parts, &model).unwrap();
        let (post, pmf_post) = tcphd_update(&pred, &pmf_pred, &gated, &parts, &model).unwrap();
        if k == 14 {
            println!("pred pmf[3..7] = {:?}", (3..7).map(|n| pmf_pred.prob(n)).collect::<Vec<_>>());
            for (pi, p) in parts.iter().enumerate() {
                let share: f64 = coeff.log_vartheta[pi].iter().zip(&coeff.log_epsilon[pi])
                    .map(|(&t, &e)| (t + e - coeff.log_denominator).exp()).sum();
                if share > 1e-6 || p.num_cells() == 4 {
                    let sizes: Vec<usize> = p.cells.iter().map(|c| c.len()).collect();
                    let varpis: Vec<String> = coeff.log_varpi[pi].iter().map(|v| format!("{v:.0}")).collect();
                    println!("P{pi} |P|={} share {share:.3} sizes {sizes:?}", p.num_cells(), );
                    println!("    log_varpi {varpis:?}");
                    let the: Vec<String> = coeff.log_vartheta[pi].iter().zip(&coeff.log_epsilon[pi])
                        .map(|(&t, &e)| format!("{:.0}", t + e)).collect();
                    println!("    log(theta*eps) {the:?}");
                }
            }
        }
        mix = prune_and_merge(&post, &red);
        pmf = pmf_post;
    }
}
