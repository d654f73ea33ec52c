//! Trajectory metric: a metric on sets of trajectories decomposing into
//! localization, missed, false and track-switch costs.
//!
//! The per-step base distance is the Gaussian-Wasserstein metric
//! `sqrt(gwd)` with cut-off `c`; a trajectory alive but unassigned at a step
//! costs `c^p / 2`, and an assignment change between consecutive steps costs
//! `a^p` per full switch (half for a change to or from "unassigned"). The
//! multi-frame assignment problem is solved exactly by dynamic programming
//! over per-step assignment states, which matches exhaustive enumeration by
//! construction.

use nalgebra::{Matrix2, Vector2};

use super::gwd;
use crate::error::{Result, TrackError};

/// Trajectory metric configuration.
#[derive(Debug, Clone, Copy)]
pub struct TmParams {
    /// Location/extent error cut-off `c`.
    pub cutoff: f64,
    /// Metric order `p`.
    pub order: f64,
    /// Track switch cost `a`.
    pub switch_cost: f64,
}

impl Default for TmParams {
    fn default() -> Self {
        Self {
            cutoff: 40.0,
            order: 1.0,
            switch_cost: 2.0,
        }
    }
}

/// A trajectory as seen by the metric: start step plus per-step
/// (center, extent matrix) pairs.
#[derive(Debug, Clone)]
pub struct TmTrajectory {
    pub start_time: usize,
    pub states: Vec<(Vector2<f64>, Matrix2<f64>)>,
}

impl TmTrajectory {
    pub fn end_time(&self) -> usize {
        self.start_time + self.states.len() - 1
    }

    fn at(&self, k: usize) -> Option<&(Vector2<f64>, Matrix2<f64>)> {
        if k < self.start_time || k > self.end_time() {
            None
        } else {
            Some(&self.states[k - self.start_time])
        }
    }
}

/// Per-step decomposition in `p`-th power cost units.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TmStepCost {
    pub location: f64,
    pub missed: f64,
    pub false_: f64,
    pub switch_: f64,
}

/// Decomposed trajectory metric. The component fields are `p`-th power cost
/// sums over all steps; for `p = 1` they add up to `total` exactly.
#[derive(Debug, Clone, Default)]
pub struct TmReport {
    pub total: f64,
    pub location: f64,
    pub missed: f64,
    pub false_: f64,
    pub switch_: f64,
    pub per_step: Vec<TmStepCost>,
    /// First time step covered by `per_step`.
    pub first_step: usize,
}

/// Guard against assignment-state explosion (the switch matrix is
/// quadratic in the state count); reached only with far more overlapping
/// trajectories than this evaluation suite targets.
const MAX_STATES: usize = 8_000;

const UNASSIGNED: u8 = u8::MAX;

/// Computes the trajectory metric between two sets of trajectories by exact
/// minimization over per-step assignment sequences.
pub fn trajectory_metric(
    truth: &[TmTrajectory],
    estimates: &[TmTrajectory],
    params: &TmParams,
) -> Result<TmReport> {
    if params.cutoff <= 0.0 || params.order < 1.0 || params.switch_cost < 0.0 {
        return Err(TrackError::InvalidConfig(
            "trajectory metric requires c > 0, p >= 1, a >= 0".into(),
        ));
    }
    if truth.len() > 120 || estimates.len() > 120 {
        return Err(TrackError::InvalidConfig(
            "trajectory metric limited to 120 trajectories per side".into(),
        ));
    }
    if truth.is_empty() && estimates.is_empty() {
        return Ok(TmReport::default());
    }

    let first = truth
        .iter()
        .chain(estimates)
        .map(|t| t.start_time)
        .min()
        .unwrap();
    let last = truth
        .iter()
        .chain(estimates)
        .map(|t| t.end_time())
        .max()
        .unwrap();
    let steps = last - first + 1;
    let p = params.order;
    let half_miss = params.cutoff.powf(p) / 2.0;
    let switch_unit = params.switch_cost.powf(p);

    // pair costs per step (p-th power, cut off), f64::INFINITY when the
    // assignment can never be beneficial at that step
    let n = truth.len();
    let m = estimates.len();
    let mut pair_cost = vec![vec![vec![0.0f64; m]; n]; steps];
    let mut pair_useful = vec![vec![false; m]; n];
    for k in 0..steps {
        for (i, t) in truth.iter().enumerate() {
            for (j, e) in estimates.iter().enumerate() {
                let cost = match (t.at(first + k), e.at(first + k)) {
                    (Some(a), Some(b)) => {
                        let base = gwd(&a.0, &a.1, &b.0, &b.1)?.sqrt();
                        if base < params.cutoff {
                            pair_useful[i][j] = true;
                        }
                        base.min(params.cutoff).powf(p)
                    }
                    (Some(_), None) | (None, Some(_)) => half_miss,
                    (None, None) => 0.0,
                };
                pair_cost[k][i][j] = cost;
            }
        }
    }

    // assignment states over useful pairs only: excluded pairs never cost
    // less than leaving both sides unassigned, at any step or transition
    let states = enumerate_states(n, m, &pair_useful)?;
    let s_count = states.len();

    // doubled half-switch counts between states
    let mut switch2 = vec![0u8; s_count * s_count];
    for (a, sa) in states.iter().enumerate() {
        for (b, sb) in states.iter().enumerate().skip(a + 1) {
            let mut units = 0u8;
            for i in 0..n {
                units += match (sa[i], sb[i]) {
                    (UNASSIGNED, UNASSIGNED) => 0,
                    (UNASSIGNED, _) | (_, UNASSIGNED) => 1,
                    (x, y) if x == y => 0,
                    _ => 2,
                };
            }
            switch2[a * s_count + b] = units;
            switch2[b * s_count + a] = units;
        }
    }

    // per-state step cost
    let alive_truth: Vec<Vec<bool>> = (0..steps)
        .map(|k| truth.iter().map(|t| t.at(first + k).is_some()).collect())
        .collect();
    let alive_est: Vec<Vec<bool>> = (0..steps)
        .map(|k| estimates.iter().map(|e| e.at(first + k).is_some()).collect())
        .collect();
    let state_cost = |k: usize, s: &[u8]| -> f64 {
        let mut cost = 0.0;
        let mut est_used = vec![false; m];
        for i in 0..n {
            match s[i] {
                UNASSIGNED => {
                    if alive_truth[k][i] {
                        cost += half_miss;
                    }
                }
                j => {
                    est_used[j as usize] = true;
                    cost += pair_cost[k][i][j as usize];
                }
            }
        }
        for j in 0..m {
            if alive_est[k][j] && !est_used[j] {
                cost += half_miss;
            }
        }
        cost
    };

    // forward dynamic programming with predecessor tracking
    let mut dp: Vec<f64> = states.iter().map(|s| state_cost(0, s)).collect();
    let mut prev = vec![vec![0u32; s_count]; steps];
    for k in 1..steps {
        let mut next = vec![f64::INFINITY; s_count];
        for (b, sb) in states.iter().enumerate() {
            let step = state_cost(k, sb);
            let mut best = f64::INFINITY;
            let mut best_a = 0u32;
            let row = |a: usize| switch2[a * s_count + b];
            for a in 0..s_count {
                let cand = dp[a] + switch_unit * 0.5 * row(a) as f64;
                if cand < best {
                    best = cand;
                    best_a = a as u32;
                }
            }
            next[b] = best + step;
            prev[k][b] = best_a;
        }
        dp = next;
    }

    let (mut best_state, mut best_cost) = (0usize, f64::INFINITY);
    for (s, &c) in dp.iter().enumerate() {
        if c < best_cost {
            best_cost = c;
            best_state = s;
        }
    }

    // backtrack the optimal assignment sequence
    let mut seq = vec![0usize; steps];
    seq[steps - 1] = best_state;
    for k in (1..steps).rev() {
        seq[k - 1] = prev[k][seq[k]] as usize;
    }

    // decompose along the optimal sequence
    let mut report = TmReport {
        first_step: first,
        per_step: Vec::with_capacity(steps),
        ..TmReport::default()
    };
    let mut total_p = 0.0;
    for k in 0..steps {
        let s = &states[seq[k]];
        let mut step = TmStepCost::default();
        let mut est_used = vec![false; m];
        for i in 0..n {
            match s[i] {
                UNASSIGNED => {
                    if alive_truth[k][i] {
                        step.missed += half_miss;
                    }
                }
                j => {
                    let j = j as usize;
                    est_used[j] = true;
                    match (alive_truth[k][i], alive_est[k][j]) {
                        (true, true) => step.location += pair_cost[k][i][j],
                        (true, false) => step.missed += half_miss,
                        (false, true) => step.false_ += half_miss,
                        (false, false) => {}
                    }
                }
            }
        }
        for j in 0..m {
            if alive_est[k][j] && !est_used[j] {
                step.false_ += half_miss;
            }
        }
        if k > 0 {
            let units = switch2[seq[k - 1] * s_count + seq[k]];
            step.switch_ = switch_unit * 0.5 * units as f64;
        }
        total_p += step.location + step.missed + step.false_ + step.switch_;
        report.location += step.location;
        report.missed += step.missed;
        report.false_ += step.false_;
        report.switch_ += step.switch_;
        report.per_step.push(step);
    }
    debug_assert!(
        (total_p - best_cost).abs() <= 1e-9 * best_cost.abs().max(1.0),
        "decomposition mismatch: {total_p} vs {best_cost}"
    );
    report.total = best_cost.powf(1.0 / p);
    Ok(report)
}

/// All injective partial assignments of truths to estimates restricted to
/// useful pairs.
fn enumerate_states(n: usize, m: usize, useful: &[Vec<bool>]) -> Result<Vec<Vec<u8>>> {
    let mut states = Vec::new();
    let mut current = vec![UNASSIGNED; n];
    let mut used = vec![false; m];
    fn recurse(
        i: usize,
        n: usize,
        m: usize,
        useful: &[Vec<bool>],
        current: &mut Vec<u8>,
        used: &mut Vec<bool>,
        states: &mut Vec<Vec<u8>>,
    ) -> Result<()> {
        if i == n {
            if states.len() >= MAX_STATES {
                return Err(TrackError::NumericalFailure(
                    "trajectory metric assignment state space too large".into(),
                ));
            }
            states.push(current.clone());
            return Ok(());
        }
        current[i] = UNASSIGNED;
        recurse(i + 1, n, m, useful, current, used, states)?;
        for j in 0..m {
            if !used[j] && useful[i][j] {
                used[j] = true;
                current[i] = j as u8;
                recurse(i + 1, n, m, useful, current, used, states)?;
                current[i] = UNASSIGNED;
                used[j] = false;
            }
        }
        Ok(())
    }
    recurse(0, n, m, useful, &mut current, &mut used, &mut states)?;
    Ok(states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn circle_traj(start: usize, centers: &[(f64, f64)], radius: f64) -> TmTrajectory {
        TmTrajectory {
            start_time: start,
            states: centers
                .iter()
                .map(|&(x, y)| (Vector2::new(x, y), Matrix2::identity() * radius * radius))
                .collect(),
        }
    }

    #[test]
    fn identical_sets_cost_nothing() {
        let a = vec![
            circle_traj(0, &[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)], 2.0),
            circle_traj(1, &[(10.0, 5.0), (11.0, 5.0)], 3.0),
        ];
        let r = trajectory_metric(&a, &a, &TmParams::default()).unwrap();
        assert_relative_eq!(r.total, 0.0, epsilon = 1e-12);
        assert_relative_eq!(
            r.total,
            r.location + r.missed + r.false_ + r.switch_,
            epsilon = 1e-9
        );
    }

    #[test]
    fn lone_truth_is_pure_miss() {
        let truth = vec![circle_traj(0, &[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)], 2.0)];
        let params = TmParams::default();
        let r = trajectory_metric(&truth, &[], &params).unwrap();
        assert_relative_eq!(r.location, 0.0, epsilon = 1e-12);
        assert_relative_eq!(r.false_, 0.0, epsilon = 1e-12);
        assert_relative_eq!(r.switch_, 0.0, epsilon = 1e-12);
        assert_relative_eq!(r.missed, 3.0 * params.cutoff / 2.0, epsilon = 1e-12);
        assert_relative_eq!(r.total, r.missed, epsilon = 1e-12);
    }

    #[test]
    fn symmetric_in_arguments() {
        let a = vec![
            circle_traj(0, &[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0)], 2.0),
            circle_traj(0, &[(0.0, 9.0), (1.0, 9.0), (2.0, 9.0), (3.0, 9.0)], 2.5),
        ];
        let b = vec![
            circle_traj(0, &[(0.3, 0.1), (1.2, 0.0), (2.1, -0.2), (3.0, 0.4)], 2.2),
            circle_traj(1, &[(1.0, 8.6), (2.4, 9.2), (3.1, 9.1)], 2.4),
        ];
        let ab = trajectory_metric(&a, &b, &TmParams::default()).unwrap();
        let ba = trajectory_metric(&b, &a, &TmParams::default()).unwrap();
        assert_relative_eq!(ab.total, ba.total, epsilon = 1e-12);
        assert_relative_eq!(ab.location, ba.location, epsilon = 1e-12);
        // missed and false swap roles
        assert_relative_eq!(ab.missed, ba.false_, epsilon = 1e-12);
        assert_relative_eq!(ab.false_, ba.missed, epsilon = 1e-12);
    }

    #[test]
    fn identity_swap_incurs_switch_cost() {
        // two parallel truths; the estimates swap identities mid-way
        let truth = vec![
            circle_traj(0, &[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)], 2.0),
            circle_traj(0, &[(0.0, 6.0), (1.0, 6.0), (2.0, 6.0)], 2.0),
        ];
        let est = vec![
            circle_traj(0, &[(0.0, 0.0), (1.0, 6.0), (2.0, 6.0)], 2.0),
            circle_traj(0, &[(0.0, 6.0), (1.0, 0.0), (2.0, 0.0)], 2.0),
        ];
        let params = TmParams::default();
        let r = trajectory_metric(&truth, &est, &params).unwrap();
        // optimal solution keeps perfect localization and pays two full
        // switches once (both tracks change partner between steps 0 and 1)
        assert_relative_eq!(r.location, 0.0, epsilon = 1e-12);
        assert_relative_eq!(r.switch_, 2.0 * params.switch_cost, epsilon = 1e-12);
        assert_relative_eq!(r.total, r.switch_, epsilon = 1e-12);
    }

    #[test]
    fn far_estimate_costs_like_miss_plus_false() {
        let truth = vec![circle_traj(0, &[(0.0, 0.0), (1.0, 0.0)], 2.0)];
        let est = vec![circle_traj(0, &[(500.0, 0.0), (501.0, 0.0)], 2.0)];
        let params = TmParams::default();
        let r = trajectory_metric(&truth, &est, &params).unwrap();
        assert_relative_eq!(r.total, 2.0 * params.cutoff, epsilon = 1e-12);
    }

    #[test]
    fn staggered_windows_are_padded() {
        let truth = vec![circle_traj(2, &[(0.0, 0.0), (1.0, 0.0)], 2.0)];
        let est = vec![circle_traj(0, &[(0.0, 50.0)], 2.0)];
        let r = trajectory_metric(&truth, &est, &TmParams::default()).unwrap();
        assert_eq!(r.per_step.len(), 4);
        assert_eq!(r.first_step, 0);
    }
}
