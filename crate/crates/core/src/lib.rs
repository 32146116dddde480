//! Coupled multilevel Markov chain Monte Carlo.
//!
//! The crate builds a telescoping estimator `E[Q_L] = E[Q_0] + Σ_ℓ E[Q_ℓ − Q_{ℓ−1}]`
//! where each correction term is sampled by a pair of Metropolis-Hastings chains,
//! one on the fine level and one on the coarse level, joined by a coupling.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases below fix
//! the scalar to `f64`.

pub mod coupling;
pub mod density;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod kernel;
pub mod linalg;
pub mod models;
pub mod rng;
pub mod scalar;

pub use error::{LinalgError, ModelError, SamplerError, StatsError};
pub use rng::{stream_id, RngStream};
pub use scalar::Real;

pub type ParamVec = density::ParamVector<f64>;
pub type Gaussian = density::GaussianSpec<f64>;
pub type Mat = linalg::Matrix<f64>;
pub type State = kernel::ChainState<f64>;
pub type Adapt = kernel::AdaptState<f64>;
