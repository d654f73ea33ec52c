use ettrack_cli::config::RunConfig;
use ettrack_core::motion::build_model;
use ettrack_core::partition::{default_thresholds, distance_partitions, gate_measurements, DEFAULT_GATE_SIGMAS};
use ettrack_core::reduction::prune_and_merge;
use ettrack_core::sim::*;
use ettrack_core::tcphd::*;
use ettrack_core::tphd::missed_detection_factor;
use ettrack_core::types::{CardinalityPmf, TrajectoryMixture};
use rand_chacha::ChaCha12Rng;
use rand_chacha::rand_core::SeedableRng;

fn ln_fact(n: usize) -> f64 { (1..=n).map(|i| (i as f64).ln()).sum() }

fn main() {
    let cfg = RunConfig::scenario1();
    let sc = cfg.scenario().unwrap();
    let truth = generate_ground_truth(&sc);
    let seed = run_seed(12345, 1);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut params = sc.params.clone();
    params.birth = jittered_birth(&sc, &mut rng);
    let model = build_model(&params).unwrap();
    let scans = generate_measurements_with_rng(&truth, &model, sc.duration, &mut rng, ExtentSpread::MultiplicativeGaussian);
    let thr = default_thresholds(&model);
    let red = cfg.reduction_params();

    let mut mix = TrajectoryMixture::empty();
    let mut pmf = CardinalityPmf::delta(0, model.n_max);
    for k in 1..=6usize {
        let z = &scans[k - 1];
        let (pred, pmf_pred) = tcphd_predict(&mix, &pmf, &model, k).unwrap();
        let gated = gate_measurements(&pred, z, &model, DEFAULT_GATE_SIGMAS);
        let parts = distance_partitions(&gated, &thr).unwrap();
        let coeff = compute_coefficients(&pred, &pmf_pred, &gated, &parts, &model).unwrap();
        let (post, pmf_post) = tcphd_update(&pred, &pmf_pred, &gated, &parts, &model).unwrap();

        let miss_mass: f64 = coeff.kappa * missed_detection_factor(&model) * pred.total_weight();
        let det_mass: f64 = post.total_weight() - miss_mass;
        println!("k={k} pred_mass {:6.2} kappa {:9.3e} miss {:8.3} det {:6.2} pmf_pred_mean {:5.2} post_mean {:5.2}",
            pred.total_weight(), coeff.kappa, miss_mass, det_mass, pmf_pred.mean(), pmf_post.mean());
        for (pi, p) in parts.iter().enumerate() {
            let mut sizes: Vec<usize> = p.cells.iter().map(|c| c.len()).collect();
            sizes.sort_unstable(); sizes.reverse();
            let contrib: f64 = coeff.log_vartheta[pi].iter().zip(&coeff.log_epsilon[pi])
                .map(|(&t, &e)| (t + e - coeff.log_denominator).exp()).sum();
            if contrib > 0.005 {
                println!("   P{pi} |P|={} sizes {:?} denom-share {:.3}", p.num_cells(), &sizes[..sizes.len().min(9)], contrib);
            }
        }
        // replicate the PMF numerator from the public tables
        let ups = upsilon(&model);
        let lambda = model.lambda_clutter;
        let mut total = 0.0;
        for n in 0..=pmf_pred.n_max() {
            let p_n = pmf_pred.prob(n);
            if p_n == 0.0 { continue; }
            let log_gn0 = ln_fact(n) + p_n.ln();
            let mut acc: f64 = 0.0;
            for (pi, p) in parts.iter().enumerate() {
                let cells = p.num_cells();
                for (ci, cell) in p.cells.iter().enumerate() {
                    let t1 = if n >= cells {
                        (-lambda + coeff.log_varpi[pi][ci] - (cells as f64).ln()
                         + (n - cells) as f64 * ups.ln() - ln_fact(n - cells)).exp()
                    } else { 0.0 };
                    let t2 = if n + 1 >= cells {
                        (cell.len() as f64 * lambda.ln() - lambda
                         + (n + 1 - cells) as f64 * ups.ln() - ln_fact(n + 1 - cells)).exp()
                    } else { 0.0 };
                    acc += (coeff.log_vartheta[pi][ci] - coeff.log_denominator).exp() * (t1 + t2);
                }
            }
            total += log_gn0.exp() * acc;
        }
        println!("   sum_n numerator(n)/denominator = {total:.6}");
        mix = prune_and_merge(&post, &red);
        pmf = pmf_post;
    }
}
