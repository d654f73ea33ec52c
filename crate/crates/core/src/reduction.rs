//! Pruning/merging with decoupled kinematic and shape gates, component
//! capping and trajectory-set extraction.

use nalgebra::Vector3;

use crate::types::{
    wrap_angle, CardinalityPmf, KinematicState, ShapeState, TargetState, TrajectoryComponent,
    TrajectoryMixture,
};

/// Thresholds of the pruning/merging pass.
#[derive(Debug, Clone, Copy)]
pub struct ReductionParams {
    /// Components with weight <= this are dropped.
    pub weight_threshold: f64,
    /// Mahalanobis gate on the current kinematic states (seed covariance).
    pub kinematic_merge_threshold: f64,
    /// Mahalanobis gate on the current shape states (seed covariance).
    pub shape_merge_threshold: f64,
    /// At most this many components survive.
    pub max_components: usize,
}

/// One extracted trajectory: identity, start step and the state history.
#[derive(Debug, Clone)]
pub struct TrajectoryEstimate {
    pub id: u64,
    pub start_time: usize,
    pub states: Vec<TargetState>,
}

impl TrajectoryEstimate {
    pub fn end_time(&self) -> usize {
        self.start_time + self.states.len() - 1
    }
}

/// Prunes components at the weight threshold, then greedily merges around
/// the highest-weight survivor. A component joins the merge set only if it
/// passes BOTH the kinematic and the shape gate; merging conserves weight,
/// weight-averages the current state (orientation differences wrapped) and
/// keeps the seed's history. Finally at most `max_components` components are
/// kept by weight.
pub fn prune_and_merge(mix: &TrajectoryMixture, p: &ReductionParams) -> TrajectoryMixture {
    let mut alive: Vec<usize> = (0..mix.len())
        .filter(|&i| mix.components[i].weight > p.weight_threshold)
        .collect();
    let mut merged: Vec<TrajectoryComponent> = Vec::new();

    while !alive.is_empty() {
        let seed_pos = alive
            .iter()
            .enumerate()
            .max_by(|(_, &a), (_, &b)| {
                mix.components[a]
                    .weight
                    .partial_cmp(&mix.components[b].weight)
                    .unwrap()
                    // ties break to the earlier component
                    .then(b.cmp(&a))
            })
            .map(|(pos, _)| pos)
            .unwrap();
        let seed_idx = alive[seed_pos];
        let seed = &mix.components[seed_idx];
        let seed_state = seed.current_state();

        let inv_kin = seed_state.cov_kin.try_inverse();
        let inv_shape = seed_state.cov_shape.try_inverse();

        let group: Vec<usize> = alive
            .iter()
            .copied()
            .filter(|&i| {
                if i == seed_idx {
                    return true;
                }
                let (Some(ik), Some(is)) = (&inv_kin, &inv_shape) else {
                    return false;
                };
                let si = mix.components[i].current_state();
                let dk = si.kin.as_vector() - seed_state.kin.as_vector();
                let maha_k = (dk.transpose() * ik * dk)[0];
                let ds = Vector3::new(
                    wrap_angle(si.shape.theta - seed_state.shape.theta),
                    si.shape.l1 - seed_state.shape.l1,
                    si.shape.l2 - seed_state.shape.l2,
                );
                let maha_s = (ds.transpose() * is * ds)[0];
                maha_k <= p.kinematic_merge_threshold && maha_s <= p.shape_merge_threshold
            })
            .collect();

        merged.push(merge_group(mix, seed_idx, &group));
        alive.retain(|i| !group.contains(i));
    }

    if merged.len() > p.max_components {
        merged.sort_by(|a, b| b.weight.partial_cmp(&a.weight).unwrap());
        merged.truncate(p.max_components);
    }
    TrajectoryMixture::new(merged)
}

fn merge_group(mix: &TrajectoryMixture, seed_idx: usize, group: &[usize]) -> TrajectoryComponent {
    let seed = &mix.components[seed_idx];
    if group.len() == 1 {
        return seed.clone();
    }
    let seed_state = seed.current_state();
    let total: f64 = group.iter().map(|&i| mix.components[i].weight).sum();

    let mut kin = nalgebra::Vector4::zeros();
    let mut dtheta = 0.0;
    let mut l1 = 0.0;
    let mut l2 = 0.0;
    for &i in group {
        let c = &mix.components[i];
        let s = c.current_state();
        let w = c.weight / total;
        kin += w * s.kin.as_vector();
        dtheta += w * wrap_angle(s.shape.theta - seed_state.shape.theta);
        l1 += w * s.shape.l1;
        l2 += w * s.shape.l2;
    }
    let theta = seed_state.shape.theta + dtheta;
    let shape = ShapeState::new(theta, l1, l2);
    let kin_state = KinematicState::from_vector(&kin);

    let mut cov_kin = nalgebra::Matrix4::zeros();
    let mut cov_shape = nalgebra::Matrix3::zeros();
    for &i in group {
        let c = &mix.components[i];
        let s = c.current_state();
        let w = c.weight / total;
        let dk = kin - s.kin.as_vector();
        let ds = Vector3::new(
            wrap_angle(theta - s.shape.theta),
            l1 - s.shape.l1,
            l2 - s.shape.l2,
        );
        cov_kin += w * (s.cov_kin + dk * dk.transpose());
        cov_shape += w * (s.cov_shape + ds * ds.transpose());
    }

    seed.with_current(total, TargetState::new(kin_state, shape, cov_kin, cov_shape))
}

fn extract_top(mix: &TrajectoryMixture, count: usize) -> Vec<TrajectoryEstimate> {
    let mut order: Vec<usize> = (0..mix.len()).collect();
    order.sort_by(|&a, &b| {
        mix.components[b]
            .weight
            .partial_cmp(&mix.components[a].weight)
            .unwrap()
            .then(a.cmp(&b))
    });
    order
        .into_iter()
        .take(count)
        .map(|i| {
            let c = &mix.components[i];
            TrajectoryEstimate {
                id: c.id,
                start_time: c.start_time,
                states: c.states(),
            }
        })
        .collect()
}

/// PHD-filter estimation: the trajectory count is the rounded total mass
/// (clamped to the component count); the highest-weight components' full
/// histories are returned.
pub fn estimate_tphd(mix: &TrajectoryMixture) -> Vec<TrajectoryEstimate> {
    let n = (mix.total_weight().round().max(0.0) as usize).min(mix.len());
    extract_top(mix, n)
}

/// CPHD-filter estimation: the trajectory count is the cardinality PMF mode
/// (ties to the smaller count), clamped to the component count.
pub fn estimate_tcphd(mix: &TrajectoryMixture, pmf: &CardinalityPmf) -> Vec<TrajectoryEstimate> {
    let n = pmf.argmax().min(mix.len());
    extract_top(mix, n)
}
