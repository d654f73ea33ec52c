use ettrack_cli::config::RunConfig;
use ettrack_core::motion::build_model;
use ettrack_core::partition::{default_thresholds, distance_partitions, gate_measurements, with_absorbed_small_cells, DEFAULT_GATE_SIGMAS};
use ettrack_core::reduction::{estimate_tcphd, prune_and_merge};
use ettrack_core::sim::*;
use ettrack_core::tcphd::*;
use ettrack_core::types::{CardinalityPmf, TrajectoryMixture};
use rand_chacha::ChaCha12Rng;
use rand_chacha::rand_core::SeedableRng;

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
    for k in 1..=sc.duration {
        let z = &scans[k - 1];
        let (pred, pmf_pred) = tcphd_predict(&mix, &pmf, &model, k).unwrap();
        let gated = gate_measurements(&pred, z, &model, DEFAULT_GATE_SIGMAS);
        let base = distance_partitions(&gated, &thr).unwrap();
        let parts = with_absorbed_small_cells(&base, &gated, 3, 5);
        let (post, pmf_post) = tcphd_update(&pred, &pmf_pred, &gated, &parts, &model).unwrap();
        mix = prune_and_merge(&post, &red);
        pmf = pmf_post;
        let est = estimate_tcphd(&mix, &pmf);
        if k <= 6 || est.len() > 5 || k % 8 == 0 {
            println!("k={k:2} |Z| {:3} gated {:3} parts {:2} mass {:6.2} comps {:3} argmax {:2} est {:2}",
                z.len(), gated.len(), parts.len(), mix.total_weight(), mix.len(), pmf.argmax(), est.len());
        }
    }
    let est = estimate_tcphd(&mix, &pmf);
    for e in &est {
        let s = e.states.last().unwrap();
        println!("final est: start {} len {} pos ({:.0},{:.0}) shape ({:.2},{:.1},{:.1})",
            e.start_time, e.states.len(), s.kin.px, s.kin.py, s.shape.theta, s.shape.l1, s.shape.l2);
    }
}
