//! Benchmark hierarchies.

pub mod darcy;
pub mod gaussian;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::density::{LogTarget, ParamVector};
use crate::scalar::Real;

pub use darcy::DarcyModel;
pub use gaussian::{RotatingShiftingGaussian, ShiftingGaussian};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Shifting,
    Rotating,
    Darcy,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Shifting => "shifting",
            ModelKind::Rotating => "rotating",
            ModelKind::Darcy => "darcy",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            ModelKind::Shifting => 1,
            ModelKind::Rotating => 2,
            ModelKind::Darcy => darcy::DARCY_DIM,
        }
    }

    /// Posterior of level ℓ.
    pub fn target<T: Real>(self, level: usize) -> Arc<dyn LogTarget<T>> {
        match self {
            ModelKind::Shifting => Arc::new(ShiftingGaussian::<T>::new(level)),
            ModelKind::Rotating => Arc::new(RotatingShiftingGaussian::<T>::new(level)),
            ModelKind::Darcy => Arc::new(DarcyModel::<T>::from_fixtures(level)),
        }
    }

    /// Relative cost of one density evaluation at level ℓ.
    pub fn cost(self, level: usize) -> f64 {
        match self {
            ModelKind::Shifting | ModelKind::Rotating => 1.0,
            ModelKind::Darcy => 4f64.powi(level as i32),
        }
    }

    /// Starting point of the level-0 chain (the origin; for Darcy the prior mean).
    pub fn initial_theta<T: Real>(self) -> ParamVector<T> {
        ParamVector::zeros(self.dim())
    }
}
