//! Trajectory-metric optimum against exhaustive assignment-sequence
//! enumeration on small instances.

use approx::assert_relative_eq;
use ettrack_core::metrics::{trajectory_metric, TmParams, TmTrajectory};
use ettrack_core::oracle::brute_force_tm;
use nalgebra::{Matrix2, Vector2};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type DenseTraj = Vec<Option<(Vector2<f64>, Matrix2<f64>)>>;

fn random_set(rng: &mut StdRng, count: usize, steps: usize) -> (Vec<TmTrajectory>, Vec<DenseTraj>) {
    let mut compact = Vec::new();
    let mut dense = Vec::new();
    for _ in 0..count {
        let start = rng.random_range(0..steps);
        let end = rng.random_range(start..steps);
        let states: Vec<(Vector2<f64>, Matrix2<f64>)> = (start..=end)
            .map(|_| {
                let r = Vector2::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
                let l1: f64 = rng.random_range(0.5..4.0);
                let l2: f64 = rng.random_range(0.5..4.0);
                (r, Matrix2::new(l1 * l1, 0.0, 0.0, l2 * l2))
            })
            .collect();
        let mut row: DenseTraj = vec![None; steps];
        for (offset, s) in states.iter().enumerate() {
            row[start + offset] = Some(*s);
        }
        compact.push(TmTrajectory {
            start_time: start,
            states,
        });
        dense.push(row);
    }
    (compact, dense)
}

#[test]
fn matches_exhaustive_enumeration() {
    let mut rng = StdRng::seed_from_u64(7);
    let cases = [
        // (truths, estimates, steps, cutoff, switch cost)
        (1, 1, 3, 5.0, 2.0),
        (2, 2, 4, 5.0, 2.0),
        (2, 3, 4, 8.0, 2.0),
        (3, 2, 4, 5.0, 1.0),
        (3, 3, 4, 12.0, 2.0),
        (3, 3, 3, 3.0, 0.5),
        (2, 2, 4, 40.0, 2.0),
        (1, 3, 4, 6.0, 2.0),
    ];
    for &(nt, ne, steps, cutoff, a) in &cases {
        for _ in 0..3 {
            let (truth, truth_dense) = random_set(&mut rng, nt, steps);
            let (est, est_dense) = random_set(&mut rng, ne, steps);
            let params = TmParams {
                cutoff,
                order: 1.0,
                switch_cost: a,
            };
            let got = trajectory_metric(&truth, &est, &params).unwrap();
            let want = brute_force_tm(&truth_dense, &est_dense, cutoff, 1.0, a);
            assert_relative_eq!(got.total, want, max_relative = 1e-9, epsilon = 1e-9);
            // decomposition adds up for p = 1
            assert_relative_eq!(
                got.total,
                got.location + got.missed + got.false_ + got.switch_,
                max_relative = 1e-9,
                epsilon = 1e-9
            );
        }
    }
}

#[test]
fn matches_enumeration_for_higher_order() {
    let mut rng = StdRng::seed_from_u64(13);
    let (truth, truth_dense) = random_set(&mut rng, 2, 3);
    let (est, est_dense) = random_set(&mut rng, 2, 3);
    let params = TmParams {
        cutoff: 6.0,
        order: 2.0,
        switch_cost: 2.0,
    };
    let got = trajectory_metric(&truth, &est, &params).unwrap();
    let want = brute_force_tm(&truth_dense, &est_dense, 6.0, 2.0, 2.0);
    assert_relative_eq!(got.total, want, max_relative = 1e-9, epsilon = 1e-9);
}
