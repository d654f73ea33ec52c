//! Decoupled kinematic/shape sequential measurement update and the cell
//! likelihood.
//!
//! Each measurement updates the kinematic block with a standard linear
//! innovation and the shape block with a quadratic pseudo-measurement built
//! from the measurement residual, linearized around the running shape
//! estimate. The two blocks never exchange covariance mass.

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Matrix4x2, RowVector2, Vector3};

use crate::error::{Result, TrackError};
use crate::types::{Measurement, ModelConfig, ShapeState, TargetState};

/// Semi-axis floor applied after each update; the linearized pseudo-update
/// can otherwise drive an axis negative.
pub const MIN_SEMI_AXIS: f64 = 0.1;

/// Condition-number limit beyond which an innovation covariance is treated
/// as degenerate.
pub const MAX_CONDITION: f64 = 1e12;

/// Intermediate quantities of the shape pseudo-measurement for one update.
#[derive(Debug, Clone)]
pub struct PseudoMeasurementBlocks {
    /// Shape factor `S = R(theta) diag(l1, l2)`.
    pub shape_factor: Matrix2<f64>,
    /// First and second rows of `S`.
    pub s1: RowVector2<f64>,
    pub s2: RowVector2<f64>,
    /// Jacobians of the rows of `S` with respect to `[theta, l1, l2]`.
    pub j1: Matrix2x3<f64>,
    pub j2: Matrix2x3<f64>,
    /// Linearization of the pseudo-measurement mean in the shape state.
    pub y: Matrix3<f64>,
    /// Pseudo-measurement mean `[sigma11, sigma22, sigma12]`.
    pub z_bar: Vector3<f64>,
    /// Pseudo-measurement covariance.
    pub cov_z: Matrix3<f64>,
    /// Measurement innovation covariance `H Xi^r H^T + S Q^h S^T + Q^e`.
    pub sigma: Matrix2<f64>,
}

/// Builds the pseudo-measurement blocks around the given state.
pub fn pseudo_measurement_blocks(
    x: &TargetState,
    m: &ModelConfig,
) -> Result<PseudoMeasurementBlocks> {
    x.shape.validate()?;
    let ShapeState { theta, l1, l2 } = x.shape;
    let (sin, cos) = theta.sin_cos();

    let shape_factor = x.shape.shape_factor();
    let sigma = innovation_covariance(x, m);
    let (s11, s12, s22) = (sigma[(0, 0)], sigma[(0, 1)], sigma[(1, 1)]);

    let s1 = RowVector2::new(l1 * cos, -l2 * sin);
    let s2 = RowVector2::new(l1 * sin, l2 * cos);
    let j1 = Matrix2x3::new(
        -l1 * sin, cos, 0.0, //
        -l2 * cos, 0.0, -sin,
    );
    let j2 = Matrix2x3::new(
        l1 * cos, sin, 0.0, //
        -l2 * sin, 0.0, cos,
    );

    let row1 = 2.0 * s1 * m.q_mult * j1;
    let row2 = 2.0 * s2 * m.q_mult * j2;
    let row3 = s1 * m.q_mult * j2 + s2 * m.q_mult * j1;
    let y = Matrix3::from_rows(&[row1, row2, row3]);

    let z_bar = Vector3::new(s11, s22, s12);
    let cov_z = Matrix3::new(
        2.0 * s11 * s11,
        2.0 * s12 * s12,
        2.0 * s11 * s12,
        2.0 * s12 * s12,
        2.0 * s22 * s22,
        2.0 * s22 * s12,
        2.0 * s11 * s12,
        2.0 * s12 * s22,
        s11 * s22 + s12 * s12,
    );

    Ok(PseudoMeasurementBlocks {
        shape_factor,
        s1,
        s2,
        j1,
        j2,
        y,
        z_bar,
        cov_z,
        sigma,
    })
}

/// `Xi^z = H Xi^r H^T + S Q^h S^T + Q^e`, evaluated at `x`.
pub fn innovation_covariance(x: &TargetState, m: &ModelConfig) -> Matrix2<f64> {
    let s = x.shape.shape_factor();
    let pos_cov = x.cov_kin.fixed_view::<2, 2>(0, 0).into_owned();
    pos_cov + s * m.q_mult * s.transpose() + m.q_meas
}

fn checked_inverse2(sigma: &Matrix2<f64>, what: &str) -> Result<Matrix2<f64>> {
    let eig = sigma.symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    if !(lo > 0.0) || hi / lo > MAX_CONDITION {
        return Err(TrackError::DegenerateCovariance(format!(
            "{what}: eigenvalues [{lo:.3e}, {hi:.3e}]"
        )));
    }
    sigma.try_inverse().ok_or_else(|| {
        TrackError::DegenerateCovariance(format!("{what}: inversion failed"))
    })
}

fn checked_inverse3(sigma: &Matrix3<f64>, what: &str) -> Result<Matrix3<f64>> {
    let eig = sigma.symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    if !(lo > 0.0) || hi / lo > MAX_CONDITION {
        return Err(TrackError::DegenerateCovariance(format!(
            "{what}: eigenvalues [{lo:.3e}, {hi:.3e}]"
        )));
    }
    sigma.try_inverse().ok_or_else(|| {
        TrackError::DegenerateCovariance(format!("{what}: inversion failed"))
    })
}

/// Log-likelihood of a measurement cell given a (predicted) target state:
/// `sum_m log N(z_m; H r, Xi^z)` with `Xi^z` evaluated once at `x`.
pub fn cell_log_likelihood(
    x: &TargetState,
    cell_measurements: &[Measurement],
    m: &ModelConfig,
) -> Result<f64> {
    debug_assert!(!cell_measurements.is_empty(), "likelihood of an empty cell");
    let sigma = innovation_covariance(x, m);
    let inv = checked_inverse2(&sigma, "measurement innovation covariance")?;
    let log_norm = -(2.0 * std::f64::consts::PI).ln() - 0.5 * sigma.determinant().ln();
    let z_hat = x.kin.position();
    let mut total = 0.0;
    for z in cell_measurements {
        let d = z.as_vector() - z_hat;
        total += log_norm - 0.5 * (d.transpose() * inv * d)[0];
    }
    Ok(total)
}

/// Cell likelihood in linear domain; underflows for large cells, prefer
/// [`cell_log_likelihood`] inside the filters.
pub fn cell_likelihood(
    x: &TargetState,
    cell_measurements: &[Measurement],
    m: &ModelConfig,
) -> Result<f64> {
    cell_log_likelihood(x, cell_measurements, m).map(f64::exp)
}

/// One sequential measurement update: the kinematic block sees the linear
/// innovation `z - H r`, the shape block sees the quadratic pseudo-innovation
/// `Z - Z_bar`. Both gains are formed from the pre-update state.
pub fn single_measurement_update(
    x: &TargetState,
    z: &Measurement,
    m: &ModelConfig,
) -> Result<TargetState> {
    let blocks = pseudo_measurement_blocks(x, m)?;
    let sigma_inv = checked_inverse2(&blocks.sigma, "measurement innovation covariance")?;

    // kinematic block
    let cross_kin: Matrix4x2<f64> = x.cov_kin.fixed_columns::<2>(0).into_owned();
    let gain_kin = cross_kin * sigma_inv;
    let residual = z.as_vector() - x.kin.position();
    let kin = crate::types::KinematicState::from_vector(
        &(x.kin.as_vector() + gain_kin * residual),
    );
    let mut cov_kin = x.cov_kin - gain_kin * cross_kin.transpose();
    cov_kin = (cov_kin + cov_kin.transpose()) * 0.5;

    // shape block
    let cov_z_inv = checked_inverse3(&blocks.cov_z, "pseudo-measurement covariance")?;
    let cross_shape = x.cov_shape * blocks.y.transpose();
    let gain_shape = cross_shape * cov_z_inv;
    let pseudo = Vector3::new(
        residual[0] * residual[0],
        residual[1] * residual[1],
        residual[0] * residual[1],
    );
    let mut shape_vec = x.shape.as_vector() + gain_shape * (pseudo - blocks.z_bar);
    shape_vec[1] = shape_vec[1].clamp(MIN_SEMI_AXIS, m.max_semi_axis);
    shape_vec[2] = shape_vec[2].clamp(MIN_SEMI_AXIS, m.max_semi_axis);
    let mut cov_shape = x.cov_shape - gain_shape * cross_shape.transpose();
    cov_shape = (cov_shape + cov_shape.transpose()) * 0.5;

    Ok(TargetState::new(
        kin,
        ShapeState::from_vector(&shape_vec),
        cov_kin,
        cov_shape,
    ))
}

/// Folds [`single_measurement_update`] over a cell in stored order.
pub fn sequential_cell_update(
    x: &TargetState,
    cell: &[Measurement],
    m: &ModelConfig,
) -> Result<TargetState> {
    let mut state = x.clone();
    for z in cell {
        state = single_measurement_update(&state, z, m)?;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::{build_model, ModelParams};
    use crate::types::{KinematicState, Region};
    use approx::assert_relative_eq;
    use nalgebra::{Matrix4, Vector2};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn model() -> ModelConfig {
        build_model(&ModelParams {
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
        })
        .unwrap()
    }

    fn state(theta: f64, l1: f64, l2: f64) -> TargetState {
        TargetState::new(
            KinematicState::new(100.0, -50.0, 2.0, 1.0),
            ShapeState::new(theta, l1, l2),
            Matrix4::from_diagonal(&nalgebra::Vector4::new(50.0, 50.0, 5.0, 5.0)),
            Matrix3::from_diagonal(&Vector3::new(0.2, 100.0, 100.0)),
        )
    }

    #[test]
    fn likelihood_at_mode_with_isotropic_noise() {
        // zero kinematic covariance and zero multiplicative noise leave
        // Xi^z = q_meas = sigma^2 I
        let mut m = model();
        m.q_mult = Matrix2::zeros();
        let mut x = state(0.0, 4.0, 3.0);
        x.cov_kin = Matrix4::zeros();
        let z = Measurement::new(x.kin.px, x.kin.py);
        let sigma2 = m.q_meas[(0, 0)];
        let got = cell_likelihood(&x, &[z], &m).unwrap();
        assert_relative_eq!(
            got,
            1.0 / (2.0 * std::f64::consts::PI * sigma2),
            max_relative = 1e-12
        );
        // two identical measurements square the value
        let got2 = cell_likelihood(&x, &[z, z], &m).unwrap();
        assert_relative_eq!(got2, got * got, max_relative = 1e-12);
    }

    #[test]
    fn likelihood_matches_direct_pdf_product() {
        // independent oracle: explicit bivariate normal pdf
        let m = model();
        let x = state(0.7, 6.0, 2.0);
        let mut rng = StdRng::seed_from_u64(11);
        let cell: Vec<Measurement> = (0..5)
            .map(|_| {
                Measurement::new(
                    x.kin.px + rng.random_range(-30.0..30.0),
                    x.kin.py + rng.random_range(-30.0..30.0),
                )
            })
            .collect();
        let sigma = innovation_covariance(&x, &m);
        let det = sigma[(0, 0)] * sigma[(1, 1)] - sigma[(0, 1)] * sigma[(1, 0)];
        let mut expected = 0.0f64;
        for z in &cell {
            let dx = z.x - x.kin.px;
            let dy = z.y - x.kin.py;
            let quad = (sigma[(1, 1)] * dx * dx - 2.0 * sigma[(0, 1)] * dx * dy
                + sigma[(0, 0)] * dy * dy)
                / det;
            expected +=
                (-0.5 * quad).exp().ln() - (2.0 * std::f64::consts::PI * det.sqrt()).ln();
        }
        let got = cell_log_likelihood(&x, &cell, &m).unwrap();
        assert_relative_eq!(got, expected, max_relative = 1e-10);
    }

    #[test]
    fn likelihood_invariant_under_cell_permutation() {
        let m = model();
        let x = state(0.3, 5.0, 4.0);
        let cell = vec![
            Measurement::new(90.0, -60.0),
            Measurement::new(110.0, -45.0),
            Measurement::new(95.0, -52.0),
        ];
        let mut rev = cell.clone();
        rev.reverse();
        let a = cell_log_likelihood(&x, &cell, &m).unwrap();
        let b = cell_log_likelihood(&x, &rev, &m).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-14);
    }

    #[test]
    fn zero_innovation_keeps_kinematic_mean() {
        let m = model();
        let x = state(0.2, 5.0, 3.0);
        let z = Measurement::new(x.kin.px, x.kin.py);
        let updated = single_measurement_update(&x, &z, &m).unwrap();
        assert_relative_eq!(updated.kin.px, x.kin.px, epsilon = 1e-12);
        assert_relative_eq!(updated.kin.py, x.kin.py, epsilon = 1e-12);
        assert_relative_eq!(updated.kin.vx, x.kin.vx, epsilon = 1e-12);
        assert_relative_eq!(updated.kin.vy, x.kin.vy, epsilon = 1e-12);
    }

    #[test]
    fn certain_shape_stays_fixed() {
        let m = model();
        let mut x = state(0.4, 5.0, 3.0);
        x.cov_shape = Matrix3::zeros();
        let z = Measurement::new(x.kin.px + 8.0, x.kin.py - 3.0);
        let updated = single_measurement_update(&x, &z, &m).unwrap();
        assert_relative_eq!(updated.shape.theta, x.shape.theta, epsilon = 1e-12);
        assert_relative_eq!(updated.shape.l1, x.shape.l1, epsilon = 1e-12);
        assert_relative_eq!(updated.shape.l2, x.shape.l2, epsilon = 1e-12);
    }

    #[test]
    fn posterior_blocks_stay_psd_and_shrink() {
        let m = model();
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..1000 {
            let x = state(
                rng.random_range(-3.0..3.0),
                rng.random_range(1.0..50.0),
                rng.random_range(1.0..50.0),
            );
            let z = Measurement::new(
                x.kin.px + rng.random_range(-60.0..60.0),
                x.kin.py + rng.random_range(-60.0..60.0),
            );
            let u = single_measurement_update(&x, &z, &m).unwrap();
            let eig_kin = u.cov_kin.symmetric_eigenvalues();
            let eig_shape = u.cov_shape.symmetric_eigenvalues();
            assert!(eig_kin.iter().all(|&e| e > -1e-9));
            assert!(eig_shape.iter().all(|&e| e > -1e-9));
            // shrink in the PSD order
            let dk = (x.cov_kin - u.cov_kin).symmetric_eigenvalues();
            let ds = (x.cov_shape - u.cov_shape).symmetric_eigenvalues();
            assert!(dk.iter().all(|&e| e > -1e-9 * x.cov_kin.amax()));
            assert!(ds.iter().all(|&e| e > -1e-9 * x.cov_shape.amax()));
        }
    }

    #[test]
    fn singleton_cell_equals_single_update() {
        let m = model();
        let x = state(0.1, 4.0, 2.0);
        let z = Measurement::new(104.0, -47.0);
        let a = sequential_cell_update(&x, &[z], &m).unwrap();
        let b = single_measurement_update(&x, &z, &m).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn linear_case_is_order_independent() {
        // Qh = 0 and certain shape reduce the update to a linear Kalman
        // filter, whose sequential form commutes.
        let mut m = model();
        m.q_mult = Matrix2::zeros();
        let mut x = state(0.9, 7.0, 3.0);
        x.cov_shape = Matrix3::zeros();
        let cell = vec![
            Measurement::new(95.0, -52.0),
            Measurement::new(112.0, -44.0),
            Measurement::new(101.0, -55.0),
        ];
        let mut rev = cell.clone();
        rev.reverse();
        let a = sequential_cell_update(&x, &cell, &m).unwrap();
        let b = sequential_cell_update(&x, &rev, &m).unwrap();
        assert_relative_eq!(
            a.kin.as_vector(),
            b.kin.as_vector(),
            max_relative = 1e-9
        );
        assert_relative_eq!(a.cov_kin, b.cov_kin, max_relative = 1e-9);
    }

    #[test]
    fn axis_estimates_move_toward_truth() {
        // 20 draws from a ground-truth ellipse pull the very uncertain birth
        // axes toward the true values.
        let m = model();
        let true_shape = ShapeState::new(0.6, 40.0, 30.0);
        let mut x = state(0.0, 45.0, 35.0);
        x.shape.theta = 0.6;
        let mut rng = StdRng::seed_from_u64(5);
        let s = true_shape.shape_factor();
        let cell: Vec<Measurement> = (0..20)
            .map(|_| {
                let h = Vector2::new(gauss(&mut rng) * 0.5, gauss(&mut rng) * 0.5);
                let e = Vector2::new(gauss(&mut rng) * 10.0, gauss(&mut rng) * 10.0);
                let z = Vector2::new(x.kin.px, x.kin.py) + s * h + e;
                Measurement::new(z[0], z[1])
            })
            .collect();
        let updated = sequential_cell_update(&x, &cell, &m).unwrap();
        let err_before = (x.shape.l1 - 40.0).abs() + (x.shape.l2 - 30.0).abs();
        let err_after = (updated.shape.l1 - 40.0).abs() + (updated.shape.l2 - 30.0).abs();
        assert!(
            err_after < err_before,
            "axis error grew: {err_before} -> {err_after}"
        );
    }

    fn gauss(rng: &mut StdRng) -> f64 {
        // Box-Muller; good enough for test fixtures
        let u1: f64 = rng.random_range(1e-12..1.0);
        let u2: f64 = rng.random_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    #[test]
    fn degenerate_covariance_is_rejected() {
        let mut m = model();
        m.q_meas = Matrix2::zeros();
        m.q_mult = Matrix2::zeros();
        let mut x = state(0.0, 4.0, 3.0);
        x.cov_kin = Matrix4::zeros();
        let z = Measurement::new(x.kin.px, x.kin.py);
        assert!(matches!(
            cell_log_likelihood(&x, &[z], &m),
            Err(TrackError::DegenerateCovariance(_))
        ));
        assert!(single_measurement_update(&x, &z, &m).is_err());
    }
}
