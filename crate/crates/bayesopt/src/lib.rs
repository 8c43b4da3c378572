//! Bayesian optimization of expensive black-box objectives.
//!
//! The pieces are deliberately small and independent:
//!
//! * [`lhs`] builds stratified initial designs,
//! * [`gp`] fits a zero-mean Gaussian process with a Matérn-5/2 kernel,
//! * [`acquisition`] maximizes the upper confidence bound of a fitted model,
//! * [`optimize`] glues them into the usual design → fit → suggest loop.
//!
//! Everything is generic over the floating point type through [`Real`];
//! [`Bounds64`], [`GpModel64`] and friends fix it to `f64`.

pub mod acquisition;
pub mod bounds;
pub mod error;
pub mod gp;
pub mod kernel;
pub mod lhs;
mod linalg;
pub mod optimize;
mod real;

pub use acquisition::{suggest_next, ucb, SuggestOptions};
pub use bounds::Bounds;
pub use error::BoError;
pub use gp::{GpModel, HyperSearch, KernelConfig};
pub use kernel::Matern52;
pub use lhs::lhs_sample;
pub use optimize::{optimize, OptimizationResult, OptimizeOptions, Phase, TraceEntry};
pub use real::Real;

pub type Bounds64 = Bounds<f64>;
pub type GpModel64 = GpModel<f64>;
pub type KernelConfig64 = KernelConfig<f64>;
pub type Matern52F64 = Matern52<f64>;
pub type OptimizeOptions64 = OptimizeOptions<f64>;
pub type OptimizationResult64 = OptimizationResult<f64>;
