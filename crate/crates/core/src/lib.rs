//! Regression-projection pseudo-posterior inference for stochastic simulators.
//!
//! A surrogate linear regression is fitted once to observed data. Parameter
//! draws from the prior are then weighted by how close the mean residual of a
//! small simulated batch is to zero, under that fixed projection. The
//! self-normalized weighted sample is the pseudo-posterior.
//!
//! The crate is `no_std` and only needs `alloc`. All transcendental functions
//! go through `libm`, so results are bit-identical across platforms and
//! thread counts. Enable the `parallel` feature to evaluate particles on a
//! rayon pool.
//!
//! Module map:
//! - [`surrogate`]: OLS projection and residuals.
//! - [`simulators`]: the forward-simulator trait plus the nonlinear toy model
//!   and a linear-Gaussian model with closed-form residual moments.
//! - [`engine`]: batched simulation, kernel weights, self-normalization.
//! - [`population`]: closed-form population weights, quadrature functionals,
//!   identified-set scans and concentration envelopes.
//! - [`mcmc`]: random-walk Metropolis-Hastings reference for the toy model.

#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` also rejects NaN; that is the point.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(feature = "parallel")]
extern crate std;

pub mod engine;
mod error;
pub mod math;
pub mod mcmc;
pub mod parallel;
pub mod population;
pub mod simulators;
pub mod stream;
pub mod surrogate;

pub use error::{Error, Result};

pub use engine::{
    batch_residual, effective_sample_size, expectation, kernel_log_weight,
    multi_summary_log_weight, run_calibration, self_normalize, CalibrationConfig, Particle,
    SummarySpec, SummaryTarget, WeightedParticleSet,
};
pub use simulators::{
    BatchSampling, LinearGaussianModel, ParameterPoint, Simulator, ToyModel,
};
pub use stream::{Stream, Substreams};
pub use surrogate::{augment, fit_ols, residual, AugmentedRow, Dataset, SurrogateFit};
