//! Prior sensitivity analysis from base-posterior draws.
//!
//! Given Monte Carlo draws from the posterior under a *base* prior, the
//! estimators in [`sensitivity`] compute the squared Hellinger distance and
//! the Kullback-Leibler divergence to the posterior under any *alternative*
//! prior, using only prior-density ratios evaluated at the draws. No model is
//! re-fit.
//!
//! The crate ships its own samplers for the built-in models ([`sampler`]),
//! grid sweeps over alternative-prior hyperparameters ([`sweep`]) and, behind
//! the `oracle` feature, closed-form and quadrature ground truth ([`oracle`]).

pub mod distributions;
mod error;
pub mod fixtures;
pub mod model;
#[cfg(feature = "oracle")]
pub mod oracle;
pub mod sampler;
pub mod sensitivity;
pub mod sweep;

pub use error::{Error, Result};
pub use model::{DataSet, Family, ModelKind, ModelSpec, PriorBlock, PriorSpec};
pub use sampler::{DrawMatrix, FitOutput, McmcConfig};
pub use sensitivity::{Bootstrap, EstimatorOptions, NeighborSpec, SensitivityResult};
pub use sweep::{Estimator, SweepAxis, SweepGrid, SweepSurface};
