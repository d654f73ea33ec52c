//! Constant-velocity + static-shape state space and single-component
//! trajectory prediction.

use nalgebra::{Matrix2, Matrix3, Matrix4};

use crate::error::{Result, TrackError};
use crate::types::{
    BirthComponent, KinematicState, Matrix2x7, ModelConfig, Region, ShapeState, TargetState,
    TrajectoryComponent,
};

/// Raw scenario parameters from which [`ModelConfig`] is assembled.
#[derive(Debug, Clone)]
pub struct ModelParams {
    /// Sampling interval `T` in seconds.
    pub sample_period: f64,
    /// Kinematic process noise standard deviation `q^r`.
    pub kinematic_noise_std: f64,
    /// Orientation process noise standard deviation `q^theta`.
    pub orientation_noise_std: f64,
    /// Semi-axis process noise standard deviation `q^l`.
    pub axis_noise_std: f64,
    /// Measurement noise standard deviation `q^e`.
    pub measurement_noise_std: f64,
    pub detection_probability: f64,
    pub survival_probability: f64,
    /// Expected measurements per detected target per step.
    pub measurement_rate: f64,
    /// Expected clutter count per step.
    pub clutter_rate: f64,
    pub region: Region,
    pub birth: Vec<BirthComponent>,
    /// Cardinality PMF truncation.
    pub cardinality_max: usize,
}

/// Builds the state-space matrices and clutter density from raw parameters.
///
/// `F^r = [[1, T], [0, 1]] (x) I2`, `F^s = I3`,
/// `Q^r = (q^r)^2 [[T^3/3, T^2/2], [T^2/2, T]] (x) I2`,
/// `Q^s = diag((q^theta)^2, (q^l)^2, (q^l)^2)`,
/// `H = [[1, 0] (x) I2, 0_{2x3}]`, `rho = lambda / area`.
pub fn build_model(p: &ModelParams) -> Result<ModelConfig> {
    let t = p.sample_period;
    if !(t > 0.0) {
        return Err(TrackError::InvalidConfig(format!(
            "sample period must be positive, got {t}"
        )));
    }
    for (name, v) in [
        ("kinematic noise std", p.kinematic_noise_std),
        ("orientation noise std", p.orientation_noise_std),
        ("axis noise std", p.axis_noise_std),
        ("measurement noise std", p.measurement_noise_std),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(TrackError::InvalidConfig(format!(
                "{name} must be positive, got {v}"
            )));
        }
    }
    if !(p.detection_probability > 0.0 && p.detection_probability <= 1.0) {
        return Err(TrackError::InvalidConfig(format!(
            "detection probability must lie in (0, 1], got {}",
            p.detection_probability
        )));
    }
    if !(p.survival_probability > 0.0 && p.survival_probability <= 1.0) {
        return Err(TrackError::InvalidConfig(format!(
            "survival probability must lie in (0, 1], got {}",
            p.survival_probability
        )));
    }
    if !(p.measurement_rate > 0.0) {
        return Err(TrackError::InvalidConfig(format!(
            "measurement rate must be positive, got {}",
            p.measurement_rate
        )));
    }
    if !(p.clutter_rate >= 0.0) {
        return Err(TrackError::InvalidConfig(format!(
            "clutter rate must be nonnegative, got {}",
            p.clutter_rate
        )));
    }
    let area = p.region.area();
    if !(area > 0.0) {
        return Err(TrackError::InvalidConfig(
            "surveillance region must have positive area".into(),
        ));
    }
    for b in &p.birth {
        if !(b.weight >= 0.0) {
            return Err(TrackError::InvalidConfig(
                "birth weights must be nonnegative".into(),
            ));
        }
        b.state.validate()?;
    }

    let f_kin = Matrix4::new(
        1.0, 0.0, t, 0.0, //
        0.0, 1.0, 0.0, t, //
        0.0, 0.0, 1.0, 0.0, //
        0.0, 0.0, 0.0, 1.0,
    );
    let qr2 = p.kinematic_noise_std * p.kinematic_noise_std;
    let (a, b, c) = (t.powi(3) / 3.0, t * t / 2.0, t);
    let q_kin = qr2
        * Matrix4::new(
            a, 0.0, b, 0.0, //
            0.0, a, 0.0, b, //
            b, 0.0, c, 0.0, //
            0.0, b, 0.0, c,
        );
    let q_shape = Matrix3::from_diagonal(&nalgebra::Vector3::new(
        p.orientation_noise_std * p.orientation_noise_std,
        p.axis_noise_std * p.axis_noise_std,
        p.axis_noise_std * p.axis_noise_std,
    ));
    let mut h = Matrix2x7::zeros();
    h[(0, 0)] = 1.0;
    h[(1, 1)] = 1.0;

    let max_birth_axis = p
        .birth
        .iter()
        .map(|b| b.state.shape.l1.max(b.state.shape.l2))
        .fold(0.0f64, f64::max);
    let max_semi_axis = if max_birth_axis > 0.0 {
        3.0 * max_birth_axis
    } else {
        f64::INFINITY
    };

    Ok(ModelConfig {
        ts: t,
        f_kin,
        f_shape: Matrix3::identity(),
        q_kin,
        q_shape,
        h,
        q_mult: Matrix2::identity() * 0.25,
        q_meas: Matrix2::identity() * (p.measurement_noise_std * p.measurement_noise_std),
        gamma: p.measurement_rate,
        lambda_clutter: p.clutter_rate,
        rho_clutter: p.clutter_rate / area,
        region: p.region,
        p_detect: p.detection_probability,
        p_survive: p.survival_probability,
        birth: p.birth.clone(),
        n_max: p.cardinality_max,
        max_semi_axis,
    })
}

/// Predicts one trajectory component by one step: appends
/// `F * last_mean` with covariance `F Xi F^T + Q`, leaving the stored
/// history untouched. The survival weight factor is applied by the filter,
/// not here.
pub fn predict_component(c: &TrajectoryComponent, m: &ModelConfig) -> TrajectoryComponent {
    let prev = c.current_state();
    let kin = KinematicState::from_vector(&(m.f_kin * prev.kin.as_vector()));
    let shape = ShapeState::from_vector(&(m.f_shape * prev.shape.as_vector()));
    let cov_kin = m.f_kin * prev.cov_kin * m.f_kin.transpose() + m.q_kin;
    let cov_shape = m.f_shape * prev.cov_shape * m.f_shape.transpose() + m.q_shape;
    c.append_state(TargetState::new(kin, shape, cov_kin, cov_shape))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Matrix2x7;
    use approx::assert_relative_eq;
    use nalgebra::SMatrix;

    pub(crate) fn test_params() -> ModelParams {
        ModelParams {
            sample_period: 1.0,
            kinematic_noise_std: 10.0,
            orientation_noise_std: 0.05,
            axis_noise_std: 0.1,
            measurement_noise_std: 10.0,
            detection_probability: 0.98,
            survival_probability: 0.99,
            measurement_rate: 20.0,
            clutter_rate: 10.0,
            region: Region::new(-100.0, 2100.0, -100.0, 2100.0),
            birth: Vec::new(),
            cardinality_max: 50,
        }
    }

    #[test]
    fn kinematic_noise_matches_white_acceleration_pattern() {
        let m = build_model(&test_params()).unwrap();
        // 100 * [[1/3, 1/2], [1/2, 1]] (x) I2 layout
        assert_relative_eq!(m.q_kin[(0, 0)], 100.0 / 3.0, epsilon = 1e-9);
        assert_relative_eq!(m.q_kin[(1, 1)], 100.0 / 3.0, epsilon = 1e-9);
        assert_relative_eq!(m.q_kin[(0, 2)], 50.0, epsilon = 1e-9);
        assert_relative_eq!(m.q_kin[(2, 0)], 50.0, epsilon = 1e-9);
        assert_relative_eq!(m.q_kin[(1, 3)], 50.0, epsilon = 1e-9);
        assert_relative_eq!(m.q_kin[(2, 2)], 100.0, epsilon = 1e-9);
        assert_relative_eq!(m.q_kin[(0, 1)], 0.0, epsilon = 1e-12);
        assert_relative_eq!(m.q_kin[(0, 3)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn shape_transition_is_identity() {
        let m = build_model(&test_params()).unwrap();
        assert_eq!(m.f_shape, Matrix3::identity());
    }

    #[test]
    fn measurement_matrix_selects_position() {
        let m = build_model(&test_params()).unwrap();
        let x = SMatrix::<f64, 7, 1>::from_column_slice(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        let z = m.h * x;
        assert_relative_eq!(z[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(z[1], 2.0, epsilon = 1e-12);
        let _: &Matrix2x7 = &m.h;
    }

    #[test]
    fn clutter_density_is_rate_over_area() {
        let m = build_model(&test_params()).unwrap();
        assert_relative_eq!(m.rho_clutter, 10.0 / (2200.0 * 2200.0), epsilon = 1e-18);
    }

    #[test]
    fn rejects_nonpositive_noise() {
        let mut p = test_params();
        p.kinematic_noise_std = 0.0;
        assert!(build_model(&p).is_err());
        let mut p = test_params();
        p.measurement_noise_std = -1.0;
        assert!(build_model(&p).is_err());
    }

    fn component() -> TrajectoryComponent {
        TrajectoryComponent::born(
            1.0,
            0,
            0,
            TargetState::new(
                KinematicState::new(0.0, 0.0, 1.0, 0.0),
                ShapeState::new(0.2, 4.0, 3.0),
                Matrix4::identity(),
                Matrix3::identity(),
            ),
        )
    }

    #[test]
    fn identity_dynamics_repeat_last_state() {
        let mut m = build_model(&test_params()).unwrap();
        m.f_kin = Matrix4::identity();
        m.q_kin = Matrix4::zeros();
        m.q_shape = Matrix3::zeros();
        let c = predict_component(&component(), &m);
        assert_eq!(c.len(), 2);
        assert_eq!(c.current_state(), &component().states()[0]);
    }

    #[test]
    fn unit_velocity_advances_position() {
        let m = build_model(&test_params()).unwrap();
        let c = predict_component(&component(), &m);
        let s = c.current_state();
        assert_relative_eq!(s.kin.px, 1.0, epsilon = 1e-12);
        assert_relative_eq!(s.kin.py, 0.0, epsilon = 1e-12);
        // history untouched
        assert_eq!(c.states()[0], component().states()[0]);
    }

    #[test]
    fn predicted_covariance_adds_process_noise_exactly() {
        let m = build_model(&test_params()).unwrap();
        let c0 = component();
        let c = predict_component(&c0, &m);
        let prev = &c0.states()[0];
        let got = c.current_state().cov_kin - m.f_kin * prev.cov_kin * m.f_kin.transpose();
        assert_relative_eq!(got, m.q_kin, epsilon = 1e-12);
        let got_s = c.current_state().cov_shape - prev.cov_shape;
        assert_relative_eq!(got_s, m.q_shape, epsilon = 1e-12);
    }
}
