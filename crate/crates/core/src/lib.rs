//! Extended t-process regression (eTPR).
//!
//! Heavy-tailed nonparametric regression where the latent function and the
//! noise share one inverse-gamma scale. Marginal and predictive laws stay in
//! closed form, so fitting and prediction cost the same as Gaussian process
//! regression while the estimator's score stays bounded under outliers.

pub mod baselines;
pub mod data;
pub mod emtd;
pub mod error;
pub mod fit;
pub mod kernel;
pub mod linalg;
pub mod predict;
pub mod scalar;
pub mod sim;

pub use data::Dataset;
pub use emtd::{EmtdParams, InverseGammaParams, PosteriorR};
pub use error::{Error, Result};
pub use fit::{FittedModel, Hyperparams, ModelConfig, ModelKind, OptimizerConfig};
pub use kernel::KernelParams;
pub use linalg::{Cholesky, Matrix};
pub use predict::{IntervalTarget, Prediction};
pub use scalar::Real;

pub type Matrix64 = Matrix<f64>;
pub type Dataset64 = Dataset<f64>;
pub type KernelParams64 = KernelParams<f64>;
pub type EmtdParams64 = EmtdParams<f64>;
pub type Hyperparams64 = Hyperparams<f64>;
pub type FittedModel64 = FittedModel<f64>;
pub type ModelConfig64 = ModelConfig<f64>;
pub type Prediction64 = Prediction<f64>;

pub type Matrix32 = Matrix<f32>;
pub type Dataset32 = Dataset<f32>;
pub type KernelParams32 = KernelParams<f32>;
pub type FittedModel32 = FittedModel<f32>;
