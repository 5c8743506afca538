use crate::math::exp;
use crate::{Error, Result};

/// Default for the coupling constant `K` in `M τ² ≥ K`.
pub const DEFAULT_COUPLING_K: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationBoundParams {
    /// Separation gap `η` of `μ°²` outside the neighbourhood.
    pub eta: f64,
    pub v_max: f64,
    pub v_min: f64,
    pub tau: f64,
    pub m: usize,
    pub coupling_k: f64,
}

impl ConcentrationBoundParams {
    pub fn new(eta: f64, v_min: f64, v_max: f64, tau: f64, m: usize) -> Result<Self> {
        let p = Self { eta, v_max, v_min, tau, m, coupling_k: DEFAULT_COUPLING_K };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::InvalidConfig("eta must be > 0".into()));
        }
        if !(self.v_min > 0.0 && self.v_min <= self.v_max && self.v_max.is_finite()) {
            return Err(Error::InvalidConfig("need 0 < v_min <= v_max".into()));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::NonPositiveBandwidth(self.tau));
        }
        if self.m == 0 {
            return Err(Error::EmptyBatch);
        }
        if !(self.coupling_k.is_finite() && self.coupling_k >= 0.0) {
            return Err(Error::InvalidConfig("coupling constant must be >= 0".into()));
        }
        Ok(())
    }
}

/// `exp(−η / (4(τ² + v_max/M)))`, after checking `M τ² ≥ K`.
pub fn laplace_ratio_envelope(params: &ConcentrationBoundParams) -> Result<f64> {
    params.validate()?;
    let t2 = params.tau * params.tau;
    let m_tau_sq = params.m as f64 * t2;
    if m_tau_sq < params.coupling_k {
        return Err(Error::CouplingViolated { m_tau_sq, k: params.coupling_k });
    }
    Ok(exp(-params.eta / (4.0 * (t2 + params.v_max / params.m as f64))))
}
