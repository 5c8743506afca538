use alloc::vec;

use super::{ParameterPoint, Simulator};
use crate::math::{exp, ln, LN_2PI};
use crate::stream::Stream;
use crate::{Error, Result};

/// Two-parameter nonlinear model with `θ = (θ₀, θ₁)`:
///
/// - `θ ~ N(0, prior_sd² I₂)`
/// - `log X | θ ~ N(θ₁ / logx_mean_divisor, logx_sd²)`
/// - `Y | X, θ ~ N(θ₁ log X + θ₀ X, noise_sd²)`
///
/// A linear surrogate in `X` cannot represent the conditional mean, which is
/// what makes the pseudo-posterior set-identified here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyModel {
    pub prior_sd: f64,
    pub logx_sd: f64,
    pub noise_sd: f64,
    pub logx_mean_divisor: f64,
}

impl Default for ToyModel {
    fn default() -> Self {
        Self { prior_sd: 5.0, logx_sd: 0.5, noise_sd: 1.0, logx_mean_divisor: 5.0 }
    }
}

impl ToyModel {
    /// Zero prior or noise scales are accepted; they give degenerate test
    /// variants.
    pub fn new(prior_sd: f64, logx_sd: f64, noise_sd: f64, logx_mean_divisor: f64) -> Result<Self> {
        let m = Self { prior_sd, logx_sd, noise_sd, logx_mean_divisor };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.prior_sd) || !ok(self.noise_sd) {
            return Err(Error::InvalidConfig("toy prior_sd and noise_sd must be finite and >= 0".into()));
        }
        if !(self.logx_sd.is_finite() && self.logx_sd > 0.0) {
            return Err(Error::InvalidConfig("toy logx_sd must be positive".into()));
        }
        if !(self.logx_mean_divisor.is_finite() && self.logx_mean_divisor != 0.0) {
            return Err(Error::InvalidConfig("toy logx_mean_divisor must be finite and nonzero".into()));
        }
        Ok(())
    }

    /// Log density of the isotropic Gaussian prior.
    pub fn log_prior(&self, theta: &[f64]) -> Result<f64> {
        if theta.len() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, found: theta.len() });
        }
        let var = self.prior_sd * self.prior_sd;
        Ok(theta.iter().map(|t| -0.5 * (LN_2PI + ln(var)) - t * t / (2.0 * var)).sum())
    }
}

/// `θ₁ ln x + θ₀ x`.
pub fn conditional_mean_toy(theta: &[f64], x: f64) -> Result<f64> {
    if theta.len() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: theta.len() });
    }
    if !(x > 0.0) {
        return Err(Error::NonPositiveCovariate(x));
    }
    Ok(theta[1] * ln(x) + theta[0] * x)
}

impl Simulator for ToyModel {
    fn param_dim(&self) -> usize {
        2
    }

    fn covariate_dim(&self) -> usize {
        1
    }

    fn draw_prior(&self, stream: &mut Stream) -> ParameterPoint {
        let t0 = self.prior_sd * stream.standard_normal();
        let t1 = self.prior_sd * stream.standard_normal();
        ParameterPoint::from_finite(vec![t0, t1])
    }

    fn simulate_pair(&self, theta: &[f64], x: &mut [f64], stream: &mut Stream) -> Result<f64> {
        let log_x = stream.normal(theta[1] / self.logx_mean_divisor, self.logx_sd);
        let xv = exp(log_x);
        // exp underflow would break positivity
        if !(xv > 0.0 && xv.is_finite()) {
            return Err(Error::Simulator(alloc::format!("toy covariate out of range (log x = {log_x})")));
        }
        x[0] = xv;
        Ok(conditional_mean_toy(theta, xv)? + self.noise_sd * stream.standard_normal())
    }
}
