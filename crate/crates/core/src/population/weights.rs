use super::MomentProfile;
use crate::math::{exp, sqrt};
use crate::{Error, Result};

fn check(tau: f64, m: usize) -> Result<()> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::NonPositiveBandwidth(tau));
    }
    if m == 0 {
        return Err(Error::EmptyBatch);
    }
    Ok(())
}

/// Expected kernel weight `E exp(−R²/2τ²)` for `R ~ N(μ, v/M)`:
/// `√(τ²/(τ²+s²)) · exp(−μ²/(2(τ²+s²)))` with `s² = v/M`.
pub fn l_m_gaussian(profile: MomentProfile, m: usize, tau: f64) -> Result<f64> {
    check(tau, m)?;
    let t2 = tau * tau;
    let eff = t2 + profile.v / m as f64;
    Ok(sqrt(t2 / eff) * exp(-(profile.mu * profile.mu) / (2.0 * eff)))
}

/// `exp(−μ²/(2τ²))`.
pub fn l_infinity(mu: f64, tau: f64) -> Result<f64> {
    check(tau, 1)?;
    Ok(exp(-(mu * mu) / (2.0 * tau * tau)))
}

/// `e^{−1/2} · v_sup / (τ² M)`, a uniform bound on `|L_M − L_∞|`.
pub fn uniform_gap_bound(v_sup: f64, tau: f64, m: usize) -> Result<f64> {
    check(tau, m)?;
    if !(v_sup.is_finite() && v_sup >= 0.0) {
        return Err(Error::InvalidConfig("v_sup must be finite and >= 0".into()));
    }
    Ok(exp(-0.5) * v_sup / (tau * tau * m as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    const E_HALF: f64 = 0.606_530_659_712_633_4;

    fn p(mu: f64, v: f64) -> MomentProfile {
        MomentProfile::new(mu, v).unwrap()
    }

    #[test]
    fn l_m_examples() {
        assert_eq!(l_m_gaussian(p(0.0, 0.0), 1, 1.0).unwrap(), 1.0);
        assert!((l_m_gaussian(p(1.0, 0.0), 3, 1.0).unwrap() - E_HALF).abs() < 1e-15);
        let v = 7.0 * 0.25;
        assert!((l_m_gaussian(p(0.0, v), 7, 0.5).unwrap() - libm::sqrt(0.5)).abs() < 1e-15);
        assert!(l_m_gaussian(p(0.0, 1.0), 1, 0.0).is_err());
        assert!(l_m_gaussian(p(0.0, 1.0), 0, 1.0).is_err());
    }

    #[test]
    fn l_inf_examples() {
        assert_eq!(l_infinity(0.0, 2.0).unwrap(), 1.0);
        assert!((l_infinity(2.0, 2.0).unwrap() - E_HALF).abs() < 1e-15);
        assert!(l_infinity(0.5, 1.0).unwrap() > l_infinity(-0.6, 1.0).unwrap());
        assert_eq!(l_infinity(1.0, -1.0), Err(Error::NonPositiveBandwidth(-1.0)));
    }

    #[test]
    fn gap_bound_examples() {
        assert_eq!(uniform_gap_bound(0.0, 1.0, 5).unwrap(), 0.0);
        assert!((uniform_gap_bound(1.0, 1.0, 1).unwrap() - E_HALF).abs() < 1e-15);
        let a = uniform_gap_bound(2.0, 0.3, 10).unwrap();
        let b = uniform_gap_bound(2.0, 0.3, 20).unwrap();
        assert!((a - 2.0 * b).abs() < 1e-15);
    }
}
