//! Population-level objects: the expected kernel weight `L_M` and its limit,
//! functionals of the population pseudo-posterior by quadrature, Monte Carlo
//! residual moments, identified-set scans and the Laplace envelope.

mod concentration;
mod identified;
mod moments;
mod quadrature;
mod weights;

pub use concentration::{laplace_ratio_envelope, ConcentrationBoundParams, DEFAULT_COUPLING_K};
pub use identified::{default_scan_tolerance, scan_identified_set, IdentifiedSetScan, ScanConfig};
pub use moments::{estimate_moment_profile, mc_weight_estimate, WeightEstimate};
pub use quadrature::{normalizer, phi_difference_bound, phi_functional, QuadratureGrid};
pub use weights::{l_infinity, l_m_gaussian, uniform_gap_bound};

use crate::math::RunningMoments;
use crate::{Error, Result};

/// Residual mean `μ(θ)` and variance `v(θ)` at one parameter value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentProfile {
    pub mu: f64,
    pub v: f64,
}

impl MomentProfile {
    pub fn new(mu: f64, v: f64) -> Result<Self> {
        if !mu.is_finite() || !v.is_finite() {
            return Err(Error::NonFinite("moment profile"));
        }
        if v < 0.0 {
            return Err(Error::InvalidConfig("residual variance must be >= 0".into()));
        }
        Ok(Self { mu, v })
    }

    /// Sample mean and unbiased sample variance.
    pub fn from_residuals(residuals: &[f64]) -> Result<Self> {
        if residuals.len() < 2 {
            return Err(Error::InvalidConfig("need at least two residuals".into()));
        }
        let m: RunningMoments = residuals.iter().copied().collect();
        Self::new(m.mean(), m.variance())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_from_residuals() {
        assert_eq!(MomentProfile::from_residuals(&[1.0, 3.0]).unwrap(), MomentProfile { mu: 2.0, v: 2.0 });
        assert_eq!(MomentProfile::from_residuals(&[0.0; 5]).unwrap(), MomentProfile { mu: 0.0, v: 0.0 });
        assert!(MomentProfile::from_residuals(&[1.0]).is_err());
        assert!(MomentProfile::new(0.0, -1.0).is_err());
        assert!(MomentProfile::new(f64::NAN, 1.0).is_err());
    }
}
