//! Generalized Vidale-Wolfe advertising response model.
//!
//! The market share `x` of an advertiser evolves as
//!
//! ```text
//! dx/dt = rho * b(t)^alpha * (1 - x)^beta - delta * x
//! ```
//!
//! where `alpha` is the ad elasticity index and `1 - beta` measures the
//! word-of-mouth effect. The crate provides
//!
//! * [`model`]: simulation, the rectangular-pulse closed form, steady states and sensitivity sweeps,
//! * [`surrogate`]: a ReLU network trained by Levenberg-Marquardt with an analytic time derivative,
//! * [`estimator`]: parameter estimation from observed share series,
//! * [`econbase`]: the log-log lagged-sales econometric baseline,
//! * [`data`]: CSV/JSON ingestion, normalization and synthetic data.
//!
//! Core numerics are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which the estimation layer uses.

pub mod data;
pub mod econbase;
mod error;
pub mod estimator;
pub mod lm;
pub mod model;
mod scalar;
pub mod surrogate;
mod trajectory;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use trajectory::{ClampEvent, Sample, Trajectory, TrajectoryMeta};

pub type Params = model::GvwParams<f64>;
pub type Params32 = model::GvwParams<f32>;
pub type Series = Trajectory<f64>;
pub type Series32 = Trajectory<f32>;
pub type Pulse = model::PulseSpec<f64>;
pub type Reduction = model::QuadraticReduction<f64>;
pub type Mlp = surrogate::MlpWeights<f64>;
pub type Mlp32 = surrogate::MlpWeights<f32>;
