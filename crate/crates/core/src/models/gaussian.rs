//! Analytic Gaussian hierarchies.

use crate::density::{log_gaussian_pdf_unchecked, GaussianSpec, LogTarget, ParamVector};
use crate::error::ModelError;
use crate::linalg::Matrix;
use crate::scalar::Real;

fn check_dim<T: Real>(theta: &ParamVector<T>, d: usize) -> Result<(), ModelError> {
    if theta.len() == d {
        Ok(())
    } else {
        Err(ModelError::Dimension {
            expected: d,
            got: theta.len(),
        })
    }
}

fn pow2<T: Real>(e: i32) -> T {
    T::lit(2f64.powi(e))
}

/// `N(2^{2−ℓ}, 1)` in one dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftingGaussian<T> {
    pub level: usize,
    mean: T,
}

impl<T: Real> ShiftingGaussian<T> {
    pub fn new(level: usize) -> Self {
        Self {
            level,
            mean: pow2(2 - level as i32),
        }
    }

    pub fn mean(&self) -> T {
        self.mean
    }
}

/// `−½(θ − 2^{2−ℓ})²`, normalizing constant dropped.
pub fn shifting_log_post<T: Real>(level: usize, theta: &ParamVector<T>) -> Result<T, ModelError> {
    ShiftingGaussian::new(level).log_density(theta)
}

impl<T: Real> LogTarget<T> for ShiftingGaussian<T> {
    fn dim(&self) -> usize {
        1
    }

    fn log_density(&self, theta: &ParamVector<T>) -> Result<T, ModelError> {
        check_dim(theta, 1)?;
        let r = theta[0] - self.mean;
        Ok(-T::lit(0.5) * r * r)
    }
}

/// Two-dimensional Gaussian with mean `(2^{2−ℓ}, 3^{2−ℓ})` and covariance
/// `[[2, 2^{−ℓ}], [2^{−ℓ}, 1]]`.
#[derive(Clone, Debug)]
pub struct RotatingShiftingGaussian<T> {
    pub level: usize,
    spec: GaussianSpec<T>,
}

impl<T: Real> RotatingShiftingGaussian<T> {
    pub fn new(level: usize) -> Self {
        let e = 2 - level as i32;
        let mean = ParamVector::new(vec![pow2(e), T::lit(3f64.powi(e))]).expect("finite mean");
        let off: T = pow2(-(level as i32));
        let cov = Matrix::from_rows(&[vec![T::lit(2.0), off], vec![off, T::one()]]).expect("square");
        Self {
            level,
            spec: GaussianSpec::new(mean, cov).expect("positive definite for every level"),
        }
    }

    pub fn spec(&self) -> &GaussianSpec<T> {
        &self.spec
    }
}

/// Normalized log density of the rotating-shifting target at level ℓ.
pub fn rotating_log_post<T: Real>(level: usize, theta: &ParamVector<T>) -> Result<T, ModelError> {
    RotatingShiftingGaussian::new(level).log_density(theta)
}

impl<T: Real> LogTarget<T> for RotatingShiftingGaussian<T> {
    fn dim(&self) -> usize {
        2
    }

    fn log_density(&self, theta: &ParamVector<T>) -> Result<T, ModelError> {
        check_dim(theta, 2)?;
        Ok(log_gaussian_pdf_unchecked(theta.as_slice(), &self.spec))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(v: &[f64]) -> ParamVector<f64> {
        ParamVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn shifting_examples() {
        assert_eq!(shifting_log_post(0, &pv(&[4.0])).unwrap(), 0.0);
        assert_eq!(shifting_log_post(2, &pv(&[1.0])).unwrap(), 0.0);
        assert_eq!(shifting_log_post(0, &pv(&[0.0])).unwrap(), -8.0);
        assert!(shifting_log_post(0, &pv(&[0.0, 1.0])).is_err());
        assert_eq!(ShiftingGaussian::<f64>::new(6).mean(), 0.0625);
    }

    #[test]
    fn rotating_mode_value() {
        for level in 0..7 {
            let t = RotatingShiftingGaussian::<f64>::new(level);
            let det = 2.0 - 4f64.powi(-(level as i32));
            let mode = t.log_density(t.spec().mean()).unwrap();
            let expected = -(2.0 * std::f64::consts::PI).ln() - 0.5 * det.ln();
            assert!((mode - expected).abs() < 1e-13, "level {level}");
        }
    }

    #[test]
    fn rotating_level_one_determinant() {
        let t = RotatingShiftingGaussian::<f64>::new(1);
        let c = t.spec().covariance();
        assert_eq!(c[(0, 0)] * c[(1, 1)] - c[(0, 1)] * c[(1, 0)], 1.75);
        assert_eq!(t.spec().mean().as_slice(), &[2.0, 3.0]);
    }

    #[test]
    fn rotating_covariance_tends_to_diagonal() {
        let c = RotatingShiftingGaussian::<f64>::new(40).spec().covariance().clone();
        assert!(c[(0, 1)].abs() < 1e-11);
        assert_eq!(c[(0, 0)], 2.0);
    }

    #[test]
    fn rotating_density_matches_closed_form() {
        let t = RotatingShiftingGaussian::<f64>::new(2);
        let x = pv(&[0.3, -0.7]);
        let (m0, m1) = (1.0, 1.0);
        let (a, b, c) = (2.0, 0.25, 1.0);
        let det = a * c - b * b;
        let (d0, d1) = (x[0] - m0, x[1] - m1);
        let quad = (c * d0 * d0 - 2.0 * b * d0 * d1 + a * d1 * d1) / det;
        let expected = -(2.0 * std::f64::consts::PI).ln() - 0.5 * det.ln() - 0.5 * quad;
        assert!((t.log_density(&x).unwrap() - expected).abs() < 1e-13);
    }

    #[test]
    fn single_precision_works() {
        let t = ShiftingGaussian::<f32>::new(1);
        let x = ParamVector::new(vec![3.0f32]).unwrap();
        assert_eq!(t.log_density(&x).unwrap(), -0.5f32);
    }
}
