//! Asymptotic bias of the treatment effect when a logistic or probit
//! regression for a randomized trial omits covariates.
//!
//! Numerical kernels are generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`. The simulation oracle, PBC pipeline and
//! table generators work in `f64` only.

pub mod bias;
pub mod covariate;
pub mod error;
pub mod glm;
pub mod linalg;
pub mod oracle;
pub mod pbc;
pub mod scalar;
pub mod specfun;
pub mod tables;

pub use bias::Method;
pub use covariate::Link;
pub use error::{Error, ErrorKind, Result};
pub use oracle::{CovariateLaw, OracleResult, ScenarioSpec};
pub use scalar::Real;

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Matrix = linalg::Matrix<f64>;
pub type CovariateModel = covariate::CovariateModel<f64>;
pub type TrueModel = covariate::TrueModel<f64>;
pub type ModelSpec = covariate::ModelSpec<f64>;
pub type BinaryBlock = covariate::BinaryBlock<f64>;
pub type Partition = covariate::Partition<f64>;
pub type LeastFalse = bias::LeastFalse<f64>;
pub type BinaryLeastFalse = bias::BinaryLeastFalse<f64>;
pub type CorrectionReport = bias::CorrectionReport<f64>;
pub type Dataset = glm::Dataset<f64>;
pub type FitResult = glm::FitResult<f64>;
pub type FitOptions = glm::FitOptions<f64>;
