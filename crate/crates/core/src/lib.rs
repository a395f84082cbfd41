//! Gradient-based joint dimension reduction of parameters and data for
//! Bayesian inverse problems.
//!
//! The numerical core is generic over the scalar type (`f32` or `f64`);
//! the aliases at the bottom of this file fix it to `f64`.

pub mod baselines;
pub mod diagnostics;
pub mod error;
pub mod inference;
pub mod information;
pub mod io;
pub mod linalg;
pub mod model;
pub mod problems;
pub mod reduction;
pub mod rng;
pub mod scalar;
pub mod spectral;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use model::{BayesModel, Capabilities, ForwardModel, GaussianErrorModel, GaussianPrior, WhiteningPair};
pub use scalar::Real;

pub type Mat = linalg::Matrix<f64>;
pub type Mat32 = linalg::Matrix<f32>;
pub type DynModel = dyn model::BayesModel<f64>;
pub type GaussianModel = model::GaussianErrorModel<f64>;
pub type Diagnostics = diagnostics::DiagnosticPair<f64>;

pub type Eigen = spectral::EigenSystem<f64>;
