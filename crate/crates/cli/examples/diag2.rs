use ettrack_cli::config::RunConfig;
use ettrack_core::motion::build_model;
use ettrack_core::partition::{default_thresholds, distance_partitions};
use ettrack_core::reduction::{estimate_tphd, prune_and_merge};
use ettrack_core::sim::*;
use ettrack_core::tphd::*;
use ettrack_core::types::TrajectoryMixture;
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
    let red = cfg.reduction_params();

    let mut mix = TrajectoryMixture::empty();
    for k in 1..=16usize {
        let z = &scans[k - 1];
        let parts = distance_partitions(z, &thr).unwrap();
        let pred = tphd_predict(&mix, &model, k);
        let terms = compute_update_terms(&pred, z, &parts, &model).unwrap();
        let post = tphd_update(&pred, z, &parts, &model).unwrap();
        mix = prune_and_merge(&post, &red);
        let est = estimate_tphd(&mix);
        let wp: Vec<String> = terms.partition_weights.iter().map(|w| format!("{w:.2}")).collect();
        let cells: Vec<String> = parts.iter().map(|p| {
            let mut s: Vec<usize> = p.cells.iter().map(|c| c.len()).filter(|&l| l >= 5).collect();
            s.sort(); format!("{s:?}")
        }).collect();
        let pos: Vec<String> = est.iter().map(|e| {
            let s = e.states.last().unwrap();
            format!("({:.0},{:.0};{:.0},{:.0})", s.kin.px, s.kin.py, s.shape.l1, s.shape.l2)
        }).collect();
        println!("k={k:2} mass {:.2} wP {:?} big-cells {:?}", mix.total_weight(), wp, cells);
        println!("      est: {}", pos.join(" "));
    }
}
