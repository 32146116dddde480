//! Parameter vectors, Gaussian densities and the log-space Metropolis-Hastings
//! acceptance probability.
//!
//! All densities are handled in nats. Zero density is encoded as `-inf`, never
//! as an error, so the acceptance rule can reject such proposals uniformly.

use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{LinalgError, ModelError};
use crate::linalg::{cholesky_psd, CholeskyFactor, Matrix};
use crate::rng::RngStream;
use crate::scalar::Real;

/// Dense vector of model parameters with finite entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector<T>(Vec<T>);

impl<T: Real> ParamVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self, LinalgError> {
        if values.is_empty() {
            return Err(LinalgError::Empty);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![T::zero(); dim])
    }

    /// Wraps values without the finiteness check; callers must check
    /// [`ParamVector::is_finite`] where overflow is possible.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// `self + s · step`, componentwise.
    pub fn add_scaled(&self, s: T, step: &[T]) -> Self {
        assert_eq!(self.len(), step.len(), "parameter dimension mismatch");
        Self(self.0.iter().zip(step).map(|(&a, &b)| a + s * b).collect())
    }

    pub fn sub(&self, other: &Self) -> Vec<T> {
        self.0.iter().zip(&other.0).map(|(&a, &b)| a - b).collect()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|v| v.to_f64_lossy()).collect()
    }
}

impl<T> Index<usize> for ParamVector<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

/// Gaussian with a cached Cholesky factor of its covariance.
#[derive(Clone, Debug)]
pub struct GaussianSpec<T> {
    mean: ParamVector<T>,
    covariance: Matrix<T>,
    chol: CholeskyFactor<T>,
}

impl<T: Real> GaussianSpec<T> {
    pub fn new(mean: ParamVector<T>, covariance: Matrix<T>) -> Result<Self, LinalgError> {
        if covariance.dim() != mean.len() {
            return Err(LinalgError::DimensionMismatch {
                expected: mean.len(),
                got: covariance.dim(),
            });
        }
        let chol = cholesky_psd(&covariance)?;
        Ok(Self {
            mean,
            covariance,
            chol,
        })
    }

    /// Isotropic Gaussian `N(mean, s² I)`.
    pub fn isotropic(mean: ParamVector<T>, std_dev: T) -> Result<Self, LinalgError> {
        let d = mean.len();
        Self::new(mean, Matrix::scaled_identity(d, std_dev * std_dev))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &ParamVector<T> {
        &self.mean
    }

    pub fn covariance(&self) -> &Matrix<T> {
        &self.covariance
    }

    pub fn chol(&self) -> &CholeskyFactor<T> {
        &self.chol
    }

    /// Same covariance, different mean. Reuses the factorization.
    pub fn with_mean(&self, mean: ParamVector<T>) -> Self {
        assert_eq!(mean.len(), self.dim(), "parameter dimension mismatch");
        Self {
            mean,
            covariance: self.covariance.clone(),
            chol: self.chol.clone(),
        }
    }
}

/// Normalized log density of `x` under `g`.
pub fn log_gaussian_pdf<T: Real>(x: &ParamVector<T>, g: &GaussianSpec<T>) -> Result<T, LinalgError> {
    if x.len() != g.dim() {
        return Err(LinalgError::DimensionMismatch {
            expected: g.dim(),
            got: x.len(),
        });
    }
    Ok(log_gaussian_pdf_unchecked(x.as_slice(), g))
}

pub(crate) fn log_gaussian_pdf_unchecked<T: Real>(x: &[T], g: &GaussianSpec<T>) -> T {
    log_normal_with_factor(x, g.mean.as_slice(), &g.chol)
}

/// Log density of `N(mean, L Lᵀ)` at `x`.
pub(crate) fn log_normal_with_factor<T: Real>(x: &[T], mean: &[T], chol: &CholeskyFactor<T>) -> T {
    let d = chol.dim();
    let centered: Vec<T> = x.iter().zip(mean).map(|(&a, &b)| a - b).collect();
    let w = chol.solve_lower(&centered);
    let quad: T = w.iter().map(|&v| v * v).sum();
    let half = T::lit(0.5);
    -half * T::lit(d as f64) * T::lit(std::f64::consts::TAU).ln() - chol.log_det_lower() - half * quad
}

/// Draws `mean + L z` with `z` standard normal.
pub fn sample_gaussian<T: Real>(g: &GaussianSpec<T>, rng: &mut RngStream) -> ParamVector<T> {
    let mut z = vec![T::zero(); g.dim()];
    rng.fill_standard_normal(&mut z);
    let step = g.chol.mul_lower(&z);
    g.mean.add_scaled(T::one(), &step)
}

/// Result of [`mh_accept_prob`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AcceptProbability<T> {
    pub prob: T,
    /// Both the current and the proposed density were zero.
    pub invalid: bool,
}

/// `min(1, π(θ*) q(θ*, θ) / (π(θ) q(θ, θ*)))` evaluated in log space.
pub fn mh_accept_prob<T: Real>(log_pi_cur: T, log_pi_prop: T, log_q_fwd: T, log_q_rev: T) -> AcceptProbability<T> {
    let neg_inf = T::neg_infinity();
    if log_pi_prop == neg_inf {
        return AcceptProbability {
            prob: T::zero(),
            invalid: log_pi_cur == neg_inf,
        };
    }
    if log_pi_cur == neg_inf {
        return AcceptProbability {
            prob: T::one(),
            invalid: false,
        };
    }
    let log_ratio = (log_pi_prop - log_pi_cur) + (log_q_rev - log_q_fwd);
    let prob = if log_ratio.is_nan() {
        // Only reachable through -inf proposal densities; treat as impossible move.
        T::zero()
    } else if log_ratio >= T::zero() {
        T::one()
    } else {
        log_ratio.exp()
    };
    AcceptProbability { prob, invalid: false }
}

/// Log density and quantity of interest from one model evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation<T> {
    pub log_pi: T,
    pub qoi: T,
}

/// Unnormalized log posterior at one level of a model hierarchy.
///
/// The normalizing constant is never needed: every use is a ratio of densities
/// of the same target. `log_density` must be deterministic and return a finite
/// value or `-inf`.
pub trait LogTarget<T: Real>: Send + Sync {
    fn dim(&self) -> usize;

    fn log_density(&self, theta: &ParamVector<T>) -> Result<T, ModelError>;

    /// Scalar quantity of interest. Defaults to the first parameter.
    fn qoi(&self, theta: &ParamVector<T>) -> Result<T, ModelError> {
        Ok(theta[0])
    }

    /// Log density and QoI together; models with an expensive forward solve
    /// override this to share the solve.
    fn evaluate(&self, theta: &ParamVector<T>) -> Result<Evaluation<T>, ModelError> {
        Ok(Evaluation {
            log_pi: self.log_density(theta)?,
            qoi: self.qoi(theta)?,
        })
    }
}

impl<T: Real, L: LogTarget<T> + ?Sized> LogTarget<T> for std::sync::Arc<L> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn log_density(&self, theta: &ParamVector<T>) -> Result<T, ModelError> {
        (**self).log_density(theta)
    }

    fn qoi(&self, theta: &ParamVector<T>) -> Result<T, ModelError> {
        (**self).qoi(theta)
    }

    fn evaluate(&self, theta: &ParamVector<T>) -> Result<Evaluation<T>, ModelError> {
        (**self).evaluate(theta)
    }
}

impl<T: Real, L: LogTarget<T> + ?Sized> LogTarget<T> for &L {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn log_density(&self, theta: &ParamVector<T>) -> Result<T, ModelError> {
        (**self).log_density(theta)
    }

    fn qoi(&self, theta: &ParamVector<T>) -> Result<T, ModelError> {
        (**self).qoi(theta)
    }

    fn evaluate(&self, theta: &ParamVector<T>) -> Result<Evaluation<T>, ModelError> {
        (**self).evaluate(theta)
    }
}

/// Log target backed by a closure.
pub struct FnTarget<F> {
    dim: usize,
    f: F,
}

impl<F> FnTarget<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<T, F> LogTarget<T> for FnTarget<F>
where
    T: Real,
    F: Fn(&[T]) -> T + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, theta: &ParamVector<T>) -> Result<T, ModelError> {
        Ok((self.f)(theta.as_slice()))
    }
}

/// Gaussian log density as a target (normalized).
impl<T: Real> LogTarget<T> for GaussianSpec<T> {
    fn dim(&self) -> usize {
        GaussianSpec::dim(self)
    }

    fn log_density(&self, theta: &ParamVector<T>) -> Result<T, ModelError> {
        log_gaussian_pdf(theta, self).map_err(|_| ModelError::Dimension {
            expected: GaussianSpec::dim(self),
            got: theta.len(),
        })
    }
}
