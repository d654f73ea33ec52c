//! Shared data model: states, trajectory Gaussians, mixtures, cardinality
//! distributions, measurements and partitions.

use std::sync::Arc;

use nalgebra::{Matrix2, Matrix3, Matrix4, SMatrix, Vector2, Vector3, Vector4};

use crate::error::{Result, TrackError};

/// 2x7 measurement matrix type (position selector on the augmented state).
pub type Matrix2x7 = SMatrix<f64, 2, 7>;

/// Wraps an angle difference into `(-pi, pi]`.
pub fn wrap_angle(delta: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut d = delta.rem_euclid(two_pi);
    if d > std::f64::consts::PI {
        d -= two_pi;
    }
    d
}

// ---------------------------------------------------------------------------
// Target state
// ---------------------------------------------------------------------------

/// Planar constant-velocity kinematics: position and velocity in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicState {
    pub px: f64,
    pub py: f64,
    pub vx: f64,
    pub vy: f64,
}

impl KinematicState {
    pub fn new(px: f64, py: f64, vx: f64, vy: f64) -> Self {
        Self { px, py, vx, vy }
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.px, self.py)
    }

    pub fn as_vector(&self) -> Vector4<f64> {
        Vector4::new(self.px, self.py, self.vx, self.vy)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn is_finite(&self) -> bool {
        self.as_vector().iter().all(|x| x.is_finite())
    }
}

/// Elliptical extent: orientation (radians, unnormalized) and the two
/// semi-axis lengths in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeState {
    pub theta: f64,
    pub l1: f64,
    pub l2: f64,
}

impl ShapeState {
    pub fn new(theta: f64, l1: f64, l2: f64) -> Self {
        Self { theta, l1, l2 }
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.theta, self.l1, self.l2)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn validate(&self) -> Result<()> {
        if !self.theta.is_finite() {
            return Err(TrackError::InvalidShape(format!(
                "orientation must be finite, got {}",
                self.theta
            )));
        }
        if !(self.l1 > 0.0 && self.l1.is_finite()) || !(self.l2 > 0.0 && self.l2.is_finite()) {
            return Err(TrackError::InvalidShape(format!(
                "semi-axes must be positive, got l1={} l2={}",
                self.l1, self.l2
            )));
        }
        Ok(())
    }

    /// Shape factor `S = R(theta) * diag(l1, l2)`.
    pub fn shape_factor(&self) -> Matrix2<f64> {
        let (sin, cos) = self.theta.sin_cos();
        Matrix2::new(
            cos * self.l1,
            -sin * self.l2,
            sin * self.l1,
            cos * self.l2,
        )
    }

    /// Extent matrix `X = S * S^T`; symmetric PSD with eigenvalues
    /// `{l1^2, l2^2}`.
    pub fn extent_matrix(&self) -> Result<Matrix2<f64>> {
        self.validate()?;
        let s = self.shape_factor();
        Ok(s * s.transpose())
    }
}

/// Augmented extended-target state: kinematics, shape and the two diagonal
/// covariance blocks. The kinematic/shape cross-covariance is identically
/// zero, so the 7x7 covariance is stored as its blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetState {
    pub kin: KinematicState,
    pub shape: ShapeState,
    pub cov_kin: Matrix4<f64>,
    pub cov_shape: Matrix3<f64>,
}

impl TargetState {
    pub fn new(
        kin: KinematicState,
        shape: ShapeState,
        cov_kin: Matrix4<f64>,
        cov_shape: Matrix3<f64>,
    ) -> Self {
        Self {
            kin,
            shape,
            cov_kin,
            cov_shape,
        }
    }

    /// Stacked 7-vector mean `[r; s]`.
    pub fn mean(&self) -> SMatrix<f64, 7, 1> {
        let mut m = SMatrix::<f64, 7, 1>::zeros();
        m.fixed_rows_mut::<4>(0).copy_from(&self.kin.as_vector());
        m.fixed_rows_mut::<3>(4).copy_from(&self.shape.as_vector());
        m
    }

    /// Full 7x7 covariance `blkdiag(cov_kin, cov_shape)`.
    pub fn covariance(&self) -> SMatrix<f64, 7, 7> {
        let mut c = SMatrix::<f64, 7, 7>::zeros();
        c.fixed_view_mut::<4, 4>(0, 0).copy_from(&self.cov_kin);
        c.fixed_view_mut::<3, 3>(4, 4).copy_from(&self.cov_shape);
        c
    }

    pub fn validate(&self) -> Result<()> {
        if !self.kin.is_finite() {
            return Err(TrackError::InvalidConfig(
                "kinematic state must be finite".into(),
            ));
        }
        self.shape.validate()?;
        check_symmetric_psd(self.cov_kin.as_slice(), 4, "kinematic covariance")?;
        check_symmetric_psd(self.cov_shape.as_slice(), 3, "shape covariance")?;
        Ok(())
    }
}

/// Symmetry within 1e-9 (relative to scale) and eigenvalues >= -1e-9.
fn check_symmetric_psd(data: &[f64], n: usize, what: &str) -> Result<()> {
    let m = nalgebra::DMatrix::from_column_slice(n, n, data);
    let scale = m.amax().max(1.0);
    for i in 0..n {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-9 * scale {
                return Err(TrackError::InvalidConfig(format!(
                    "{what} is not symmetric"
                )));
            }
        }
    }
    let sym = (&m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigenvalues();
    if eig.iter().any(|&e| e < -1e-9 * scale) {
        return Err(TrackError::InvalidConfig(format!(
            "{what} is not positive semidefinite"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Trajectory Gaussians
// ---------------------------------------------------------------------------

/// One weighted trajectory Gaussian: a start time plus the per-step state
/// means and covariance blocks. Cross-time covariance blocks are dropped
/// after every step (the "1-scan" storage), so the trajectory covariance is
/// block-diagonal across time and the component stores one [`TargetState`]
/// per step.
///
/// The states before the current one are shared between components spawned
/// from a common parent, which keeps the partition update cheap.
#[derive(Debug, Clone)]
pub struct TrajectoryComponent {
    pub weight: f64,
    pub start_time: usize,
    /// Identity carried through prediction, update and merging; used to key
    /// exported trajectories.
    pub id: u64,
    past: Arc<Vec<TargetState>>,
    last: TargetState,
}

impl TrajectoryComponent {
    /// New length-1 component born at `start_time`.
    pub fn born(weight: f64, start_time: usize, id: u64, state: TargetState) -> Self {
        Self {
            weight,
            start_time,
            id,
            past: Arc::new(Vec::new()),
            last: state,
        }
    }

    /// Number of stored steps.
    pub fn len(&self) -> usize {
        self.past.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The time step of the last stored state (`t + n - 1`).
    pub fn end_time(&self) -> usize {
        self.start_time + self.len() - 1
    }

    /// The time-k marginal: last stored mean/covariance pair.
    pub fn current_state(&self) -> &TargetState {
        &self.last
    }

    /// Appends a state, growing the trajectory by one step. Earlier states
    /// are untouched and the new cross-time covariance blocks are treated as
    /// zero.
    pub fn append_state(&self, state: TargetState) -> Self {
        let mut past = Arc::clone(&self.past);
        Arc::make_mut(&mut past).push(self.last.clone());
        Self {
            weight: self.weight,
            start_time: self.start_time,
            id: self.id,
            past,
            last: state,
        }
    }

    /// Replaces the current (last) state, sharing the history.
    pub fn with_current(&self, weight: f64, state: TargetState) -> Self {
        Self {
            weight,
            start_time: self.start_time,
            id: self.id,
            past: Arc::clone(&self.past),
            last: state,
        }
    }

    pub fn with_weight(&self, weight: f64) -> Self {
        let mut c = self.clone();
        c.weight = weight;
        c
    }

    /// State at absolute time step `k`, if the trajectory covers it.
    pub fn state_at(&self, k: usize) -> Option<&TargetState> {
        if k < self.start_time || k > self.end_time() {
            return None;
        }
        let idx = k - self.start_time;
        if idx < self.past.len() {
            Some(&self.past[idx])
        } else {
            Some(&self.last)
        }
    }

    /// All stored states in time order.
    pub fn states(&self) -> Vec<TargetState> {
        let mut v = Vec::with_capacity(self.len());
        v.extend(self.past.iter().cloned());
        v.push(self.last.clone());
        v
    }
}

/// The PHD as a list of trajectory components.
#[derive(Debug, Clone, Default)]
pub struct TrajectoryMixture {
    pub components: Vec<TrajectoryComponent>,
}

impl TrajectoryMixture {
    pub fn new(components: Vec<TrajectoryComponent>) -> Self {
        Self { components }
    }

    pub fn empty() -> Self {
        Self {
            components: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Total mass of the mixture.
    pub fn total_weight(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }
}

// ---------------------------------------------------------------------------
// Cardinality distribution
// ---------------------------------------------------------------------------

/// PMF over the number of alive trajectories, truncated at `n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct CardinalityPmf {
    probs: Vec<f64>,
}

impl CardinalityPmf {
    /// Point mass at `n`, with support `0..=n_max`.
    pub fn delta(n: usize, n_max: usize) -> Self {
        let mut probs = vec![0.0; n_max + 1];
        probs[n.min(n_max)] = 1.0;
        Self { probs }
    }

    /// Builds from raw nonnegative masses, renormalizing.
    pub fn from_masses(probs: Vec<f64>) -> Result<Self> {
        let mut pmf = Self { probs };
        pmf.normalize()?;
        Ok(pmf)
    }

    pub fn n_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, n: usize) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }

    pub fn sum(&self) -> f64 {
        self.probs.iter().sum()
    }

    fn normalize(&mut self) -> Result<()> {
        let s = self.sum();
        if !(s.is_finite() && s > 0.0) {
            return Err(TrackError::NumericalFailure(
                "cardinality PMF has no mass after truncation".into(),
            ));
        }
        for p in &mut self.probs {
            *p /= s;
        }
        Ok(())
    }

    /// Mode of the PMF; ties break to the smallest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (n, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = n;
            }
        }
        best
    }

    /// Expected cardinality.
    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(n, &p)| n as f64 * p)
            .sum()
    }
}

// ---------------------------------------------------------------------------
// Measurements and partitions
// ---------------------------------------------------------------------------

/// A planar point measurement in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub x: f64,
    pub y: f64,
}

impl Measurement {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn as_vector(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }
}

/// A disjoint cover of a measurement index set by nonempty cells.
///
/// Canonical form: indices sorted inside each cell, cells sorted by their
/// smallest index. The empty measurement set has the single empty partition.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    pub cells: Vec<Vec<usize>>,
}

impl Partition {
    /// Builds a partition in canonical form from arbitrary cell order.
    pub fn new(mut cells: Vec<Vec<usize>>) -> Self {
        for cell in &mut cells {
            cell.sort_unstable();
        }
        cells.sort_by_key(|c| c.first().copied());
        Self { cells }
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    /// Checks cells are nonempty, pairwise disjoint and cover `0..len`.
    pub fn validate(&self, len: usize) -> Result<()> {
        let mut seen = vec![false; len];
        let mut count = 0usize;
        for cell in &self.cells {
            if cell.is_empty() {
                return Err(TrackError::InvalidPartition("empty cell".into()));
            }
            for &i in cell {
                if i >= len {
                    return Err(TrackError::InvalidPartition(format!(
                        "index {i} out of range for {len} measurements"
                    )));
                }
                if seen[i] {
                    return Err(TrackError::InvalidPartition(format!(
                        "index {i} appears in two cells"
                    )));
                }
                seen[i] = true;
                count += 1;
            }
        }
        if count != len {
            return Err(TrackError::InvalidPartition(format!(
                "cells cover {count} of {len} indices"
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Model configuration
// ---------------------------------------------------------------------------

/// Axis-aligned surveillance rectangle in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Region {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Self {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }

    pub fn contains(&self, m: &Measurement) -> bool {
        m.x >= self.x_min && m.x <= self.x_max && m.y >= self.y_min && m.y <= self.y_max
    }
}

/// One birth component of the trajectory birth density (length-1 trajectory).
#[derive(Debug, Clone)]
pub struct BirthComponent {
    pub weight: f64,
    pub state: TargetState,
}

/// Static model constants shared by both filters.
#[derive(Debug, Clone)]
pub struct ModelConfig {
    /// Sampling interval in seconds.
    pub ts: f64,
    /// Kinematic transition (constant velocity).
    pub f_kin: Matrix4<f64>,
    /// Shape transition (identity: the extent does not drift systematically).
    pub f_shape: Matrix3<f64>,
    /// Kinematic process noise.
    pub q_kin: Matrix4<f64>,
    /// Shape process noise.
    pub q_shape: Matrix3<f64>,
    /// Measurement matrix (position selector on the 7-dim state).
    pub h: Matrix2x7,
    /// Multiplicative extent noise covariance, default `(1/4) I`.
    pub q_mult: Matrix2<f64>,
    /// Additive measurement noise covariance.
    pub q_meas: Matrix2<f64>,
    /// Expected measurements per detected target per step.
    pub gamma: f64,
    /// Expected clutter count per step.
    pub lambda_clutter: f64,
    /// Clutter spatial density `lambda / area`.
    pub rho_clutter: f64,
    /// Surveillance region.
    pub region: Region,
    /// Detection probability in (0, 1].
    pub p_detect: f64,
    /// Survival probability in (0, 1].
    pub p_survive: f64,
    /// Birth components (each starts a length-1 trajectory).
    pub birth: Vec<BirthComponent>,
    /// Cardinality PMF truncation.
    pub n_max: usize,
    /// Stabilization ceiling for estimated semi-axes, mirroring the lower
    /// floor: merged or badly partitioned cells can otherwise inflate an
    /// extent without bound.
    pub max_semi_axis: f64,
}

impl ModelConfig {
    pub fn birth_mass(&self) -> f64 {
        self.birth.iter().map(|b| b.weight).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn plain_state() -> TargetState {
        TargetState::new(
            KinematicState::new(1.0, 2.0, 3.0, 4.0),
            ShapeState::new(0.3, 5.0, 2.5),
            Matrix4::identity(),
            Matrix3::identity(),
        )
    }

    #[test]
    fn extent_matrix_axis_aligned() {
        let x = ShapeState::new(0.0, 3.0, 2.0).extent_matrix().unwrap();
        assert_relative_eq!(x, Matrix2::new(9.0, 0.0, 0.0, 4.0), epsilon = 1e-12);
    }

    #[test]
    fn extent_matrix_quarter_turn_swaps_axes() {
        let x = ShapeState::new(FRAC_PI_2, 3.0, 2.0).extent_matrix().unwrap();
        assert_relative_eq!(x, Matrix2::new(4.0, 0.0, 0.0, 9.0), epsilon = 1e-12);
    }

    #[test]
    fn extent_matrix_circle_is_rotation_invariant() {
        let x = ShapeState::new(FRAC_PI_4, 1.0, 1.0).extent_matrix().unwrap();
        assert_relative_eq!(x, Matrix2::identity(), epsilon = 1e-12);
    }

    #[test]
    fn extent_matrix_rejects_nonpositive_axis() {
        assert!(ShapeState::new(0.0, -1.0, 2.0).extent_matrix().is_err());
        assert!(ShapeState::new(0.0, 1.0, 0.0).extent_matrix().is_err());
    }

    #[test]
    fn current_state_is_last_state() {
        let c = TrajectoryComponent::born(0.5, 3, 1, plain_state());
        assert_eq!(c.len(), 1);
        assert_eq!(c.current_state(), &plain_state());

        let mut s2 = plain_state();
        s2.kin.px = 10.0;
        let c2 = c.append_state(s2.clone());
        assert_eq!(c2.len(), 2);
        assert_eq!(c2.current_state(), &s2);
        // round-trip: append then read back
        let mut s3 = plain_state();
        s3.kin.py = -7.0;
        let c3 = c2.append_state(s3.clone());
        assert_eq!(c3.len(), 3);
        assert_eq!(c3.current_state(), &s3);
        assert_eq!(c3.end_time(), 5);
    }

    #[test]
    fn append_preserves_history_and_weight() {
        let c = TrajectoryComponent::born(0.25, 0, 7, plain_state());
        let mut s2 = plain_state();
        s2.kin.px = 42.0;
        let c2 = c.append_state(s2);
        assert_eq!(c2.weight, 0.25);
        assert_eq!(c2.states()[0], plain_state());
        assert_eq!(c2.state_at(0).unwrap(), &plain_state());
        assert_eq!(c2.state_at(1).unwrap().kin.px, 42.0);
        assert!(c2.state_at(2).is_none());
    }

    #[test]
    fn partition_validation() {
        let ok = Partition::new(vec![vec![2, 0], vec![1]]);
        ok.validate(3).unwrap();
        assert_eq!(ok.cells, vec![vec![0, 2], vec![1]]);

        let overlap = Partition::new(vec![vec![0, 1], vec![1, 2]]);
        assert!(overlap.validate(3).is_err());

        let empty_cell = Partition::new(vec![vec![0, 1, 2], vec![]]);
        assert!(empty_cell.validate(3).is_err());

        let not_covering = Partition::new(vec![vec![0], vec![2]]);
        assert!(not_covering.validate(3).is_err());
    }

    #[test]
    fn cardinality_pmf_normalizes() {
        let pmf = CardinalityPmf::from_masses(vec![1.0, 3.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(pmf.sum(), 1.0, epsilon = 1e-12);
        assert_eq!(pmf.argmax(), 1);
        assert_relative_eq!(pmf.mean(), 0.75, epsilon = 1e-12);
        assert!(CardinalityPmf::from_masses(vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn wrap_angle_range() {
        assert_relative_eq!(wrap_angle(PI), PI, epsilon = 1e-12);
        assert_relative_eq!(wrap_angle(-PI), PI, epsilon = 1e-12);
        assert_relative_eq!(wrap_angle(3.0 * PI), PI, epsilon = 1e-12);
        assert_relative_eq!(wrap_angle(0.1 - 2.0 * PI), 0.1, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn extent_matrix_symmetric_psd(theta in -10.0f64..10.0, l1 in 0.1f64..100.0, l2 in 0.1f64..100.0) {
            let shape = ShapeState::new(theta, l1, l2);
            let x = shape.extent_matrix().unwrap();
            prop_assert!((x[(0, 1)] - x[(1, 0)]).abs() < 1e-9 * x.amax());
            let eig = x.symmetric_eigenvalues();
            prop_assert!(eig.iter().all(|&e| e > -1e-9));
            // det(X) = (l1 l2)^2
            let det = x.determinant();
            prop_assert!((det - (l1 * l2).powi(2)).abs() <= 1e-9 * det.abs().max(1.0));
        }

        #[test]
        fn wrapped_angle_in_range(d in -100.0f64..100.0) {
            let w = wrap_angle(d);
            prop_assert!(w > -PI - 1e-12 && w <= PI + 1e-12);
            // same direction modulo 2*pi
            prop_assert!(((w - d).rem_euclid(2.0 * PI)).min((d - w).rem_euclid(2.0 * PI)) < 1e-9);
        }
    }
}
