//! Forward simulators: a prior over `θ` and a sampler for `(X, Y) | θ`.

mod linear_gaussian;
mod toy;

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Deref;

pub use linear_gaussian::{analytic_mu_v, BatchSampling, LinearGaussianModel};
pub use toy::{conditional_mean_toy, ToyModel};

use crate::stream::Stream;
use crate::surrogate::{Dataset, SurrogateFit};
use crate::{Error, Result};

/// A simulator parameter vector with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterPoint(Vec<f64>);

impl ParameterPoint {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("parameter"));
        }
        Ok(Self(theta))
    }

    pub(crate) fn from_finite(theta: Vec<f64>) -> Self {
        debug_assert!(theta.iter().all(|t| t.is_finite()));
        Self(theta)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ParameterPoint {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Forward sampler `θ ~ p(θ)`, `X | θ ~ p(x|θ)`, `Y | X, θ ~ p(y|x,θ)`.
///
/// All randomness comes from the caller's [`Stream`], so a fixed stream state
/// gives a fixed draw.
pub trait Simulator: Sync {
    /// Dimension of `θ`.
    fn param_dim(&self) -> usize;

    /// Dimension of the covariate `X` (without the intercept).
    fn covariate_dim(&self) -> usize;

    fn draw_prior(&self, stream: &mut Stream) -> ParameterPoint;

    /// Draws one pair, writing `X` into `x` and returning `Y`.
    fn simulate_pair(&self, theta: &[f64], x: &mut [f64], stream: &mut Stream) -> Result<f64>;

    /// Mean residual `(1/M) Σ (Y_m − β̂ᵀ(1, X_m))` over a fresh batch of
    /// `batch_size` pairs.
    fn batch_residual(
        &self,
        theta: &[f64],
        fit: &SurrogateFit,
        batch_size: usize,
        stream: &mut Stream,
    ) -> Result<f64> {
        simulate_batch_residual(self, theta, fit, batch_size, stream)
    }
}

/// Pair-by-pair batch residual; what [`Simulator::batch_residual`] does unless
/// a model overrides it.
pub fn simulate_batch_residual<S: Simulator + ?Sized>(
    model: &S,
    theta: &[f64],
    fit: &SurrogateFit,
    batch_size: usize,
    stream: &mut Stream,
) -> Result<f64> {
    if batch_size == 0 {
        return Err(Error::EmptyBatch);
    }
    check_dims(model, theta, fit)?;
    let mut x = vec![0.0; model.covariate_dim()];
    let mut sum = 0.0;
    for _ in 0..batch_size {
        let y = model.simulate_pair(theta, &mut x, stream)?;
        sum += y - fit.predict_unchecked(&x);
    }
    Ok(sum / batch_size as f64)
}

pub(crate) fn check_dims<S: Simulator + ?Sized>(model: &S, theta: &[f64], fit: &SurrogateFit) -> Result<()> {
    if theta.len() != model.param_dim() {
        return Err(Error::DimensionMismatch { expected: model.param_dim(), found: theta.len() });
    }
    if fit.dim() != model.covariate_dim() {
        return Err(Error::DimensionMismatch { expected: model.covariate_dim(), found: fit.dim() });
    }
    Ok(())
}

/// `n_obs` independent pairs at a fixed parameter, drawn sequentially from
/// one stream.
pub fn generate_observed<S: Simulator + ?Sized>(
    model: &S,
    theta_true: &[f64],
    n_obs: usize,
    stream: &mut Stream,
) -> Result<Dataset> {
    if n_obs == 0 {
        return Err(Error::InvalidConfig("n_obs must be at least 1".into()));
    }
    if theta_true.len() != model.param_dim() {
        return Err(Error::DimensionMismatch { expected: model.param_dim(), found: theta_true.len() });
    }
    let d = model.covariate_dim();
    let mut xs = Vec::with_capacity(n_obs);
    let mut ys = Vec::with_capacity(n_obs);
    for _ in 0..n_obs {
        let mut x = vec![0.0; d];
        ys.push(model.simulate_pair(theta_true, &mut x, stream)?);
        xs.push(x);
    }
    Dataset::new(xs, ys)
}
