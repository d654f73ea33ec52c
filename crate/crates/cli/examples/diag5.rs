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
    for k in 1..=20usize {
        let z = &scans[k - 1];
        let (pred, pmf_pred) = tcphd_predict(&mix, &pmf, &model, k).unwrap();
        let gated = gate_measurements(&pred, z, &model, DEFAULT_GATE_SIGMAS);
        let t = linkage_thresholds(&gated, scale, 4.0 * scale);
        let base = distance_partitions(&gated, &t).unwrap();
        let parts = with_absorbed_small_cells(&base, &gated, 4, 6);
        let coeff = compute_coefficients(&pred, &pmf_pred, &gated, &parts, &model).unwrap();
        let (post, pmf_post) = tcphd_update(&pred, &pmf_pred, &gated, &parts, &model).unwrap();
        let argmax = pmf_post.argmax();
        if argmax != 4 || k <= 3 {
            println!("== k={k} |Zg|={} parts={} pred_argmax={} post_argmax={argmax}", gated.len(), parts.len(), pmf_pred.argmax());
            // top hypotheses
            let mut shares: Vec<(f64, usize, usize)> = Vec::new();
            for (pi, p) in parts.iter().enumerate() {
                for ci in 0..p.cells.len() {
                    let s = (coeff.log_vartheta[pi][ci] + coeff.log_epsilon[pi][ci] - coeff.log_denominator).exp();
                    shares.push((s, pi, ci));
                }
            }
            shares.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
            for &(s, pi, ci) in shares.iter().take(4) {
                let p = &parts[pi];
                let sizes: Vec<usize> = p.cells.iter().map(|c| c.len()).collect();
                println!("  share {s:.3} P{pi} |P|={} sizes {:?} C=cell{ci} (|C|={})", p.num_cells(), sizes, p.cells[ci].len());
            }
        }
        mix = prune_and_merge(&post, &red);
        pmf = pmf_post;
        if k > 6 && argmax > 6 { break; }
    }
}
