//! Evaluation metrics: the Gaussian-Wasserstein distance between elliptical
//! estimates and the trajectory metric with location/missed/false/switch
//! decomposition.

mod tm;

pub use tm::{trajectory_metric, TmParams, TmReport, TmStepCost, TmTrajectory};

use nalgebra::{Matrix2, Vector2};

use crate::error::{Result, TrackError};

/// Eigenvalue floor for the matrix square roots; thin ellipses otherwise
/// produce near-singular extents.
const EIGEN_FLOOR: f64 = 1e-12;

fn sqrt_spd(x: &Matrix2<f64>) -> Matrix2<f64> {
    let eig = nalgebra::SymmetricEigen::new(*x);
    let sq = eig.eigenvalues.map(|e| e.max(EIGEN_FLOOR).sqrt());
    &eig.eigenvectors * Matrix2::from_diagonal(&sq) * eig.eigenvectors.transpose()
}

fn check_spd(x: &Matrix2<f64>, which: &str) -> Result<()> {
    let scale = x.amax().max(1.0);
    if (x[(0, 1)] - x[(1, 0)]).abs() > 1e-9 * scale {
        return Err(TrackError::InvalidConfig(format!(
            "{which} extent matrix is not symmetric"
        )));
    }
    let eig = x.symmetric_eigenvalues();
    if !eig.iter().all(|&e| e > 0.0) {
        return Err(TrackError::InvalidConfig(format!(
            "{which} extent matrix is not positive definite"
        )));
    }
    Ok(())
}

/// Squared Gaussian-Wasserstein distance between two ellipses given as
/// (center, extent matrix):
/// `||r1 - r2||^2 + tr(X1 + X2 - 2 sqrt(sqrt(X1) X2 sqrt(X1)))`.
pub fn gwd(
    r1: &Vector2<f64>,
    x1: &Matrix2<f64>,
    r2: &Vector2<f64>,
    x2: &Matrix2<f64>,
) -> Result<f64> {
    check_spd(x1, "first")?;
    check_spd(x2, "second")?;
    let dr = r1 - r2;
    let s1 = sqrt_spd(x1);
    let inner = sqrt_spd(&(s1 * x2 * s1));
    let value = dr.norm_squared() + (x1 + x2 - 2.0 * inner).trace();
    // numerically tiny negatives arise for near-identical extents
    Ok(value.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn circle(radius: f64) -> Matrix2<f64> {
        Matrix2::identity() * radius * radius
    }

    #[test]
    fn identical_inputs_give_zero() {
        let r = Vector2::new(3.0, -2.0);
        let x = Matrix2::new(9.0, 1.0, 1.0, 4.0);
        assert_relative_eq!(gwd(&r, &x, &r, &x).unwrap(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn concentric_circles() {
        let r = Vector2::zeros();
        let d = gwd(&r, &circle(3.0), &r, &circle(1.0)).unwrap();
        assert_relative_eq!(d, 2.0 * (3.0 - 1.0) * (3.0 - 1.0), epsilon = 1e-9);
    }

    #[test]
    fn pure_offset() {
        let x = Matrix2::new(16.0, 2.0, 2.0, 9.0);
        let d = gwd(
            &Vector2::new(0.0, 0.0),
            &x,
            &Vector2::new(3.0, 4.0),
            &x,
        )
        .unwrap();
        assert_relative_eq!(d, 25.0, epsilon = 1e-9);
    }

    #[test]
    fn rejects_non_spd() {
        let r = Vector2::zeros();
        let bad = Matrix2::new(1.0, 0.0, 0.0, -2.0);
        assert!(gwd(&r, &bad, &r, &circle(1.0)).is_err());
        let asym = Matrix2::new(1.0, 2.0, -2.0, 1.0);
        assert!(gwd(&r, &asym, &r, &circle(1.0)).is_err());
    }

    fn random_spd(rng: &mut StdRng) -> Matrix2<f64> {
        let a = Matrix2::new(
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
        );
        a * a.transpose() + Matrix2::identity() * rng.random_range(0.05..1.0)
    }

    #[test]
    fn symmetry_and_triangle_inequality_on_sqrt() {
        // the squared form is asserted symmetric; the triangle inequality is
        // checked on sqrt(gwd), which is the actual Wasserstein metric
        let mut rng = StdRng::seed_from_u64(99);
        for _ in 0..10_000 {
            let (r1, r2, r3) = (
                Vector2::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)),
                Vector2::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)),
                Vector2::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)),
            );
            let (x1, x2, x3) = (random_spd(&mut rng), random_spd(&mut rng), random_spd(&mut rng));
            let d12 = gwd(&r1, &x1, &r2, &x2).unwrap();
            let d21 = gwd(&r2, &x2, &r1, &x1).unwrap();
            assert_relative_eq!(d12, d21, epsilon = 1e-12, max_relative = 1e-12);
            let (s12, s13, s32) = (
                d12.sqrt(),
                gwd(&r1, &x1, &r3, &x3).unwrap().sqrt(),
                gwd(&r3, &x3, &r2, &x2).unwrap().sqrt(),
            );
            assert!(
                s12 <= s13 + s32 + 1e-9,
                "triangle violated: {s12} > {s13} + {s32}"
            );
            assert!(d12 >= 0.0);
        }
    }
}
