use alloc::vec;

use super::MomentProfile;
use crate::math::{exp, RunningMoments};
use crate::simulators::{check_dims, Simulator};
use crate::stream::Stream;
use crate::surrogate::SurrogateFit;
use crate::{Error, Result};

/// Monte Carlo estimate of `L_M(θ; τ)` with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

/// Averages `exp(−R²/2τ²)` over `n_rep` independent batches of size `m`.
#[allow(clippy::too_many_arguments)]
pub fn mc_weight_estimate<S: Simulator + ?Sized>(
    model: &S,
    theta: &[f64],
    fit: &SurrogateFit,
    m: usize,
    tau: f64,
    n_rep: usize,
    stream: &mut Stream,
) -> Result<WeightEstimate> {
    if n_rep < 2 {
        return Err(Error::InvalidConfig("n_rep must be at least 2".into()));
    }
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::NonPositiveBandwidth(tau));
    }
    check_dims(model, theta, fit)?;
    let denom = 2.0 * tau * tau;
    let mut acc = RunningMoments::new();
    for _ in 0..n_rep {
        let r = model.batch_residual(theta, fit, m, stream)?;
        acc.push(exp(-(r * r) / denom));
    }
    Ok(WeightEstimate { estimate: acc.mean(), std_error: acc.std_error() })
}

/// Sample mean and unbiased variance of `n_sim` single-pair residuals.
pub fn estimate_moment_profile<S: Simulator + ?Sized>(
    model: &S,
    theta: &[f64],
    fit: &SurrogateFit,
    n_sim: usize,
    stream: &mut Stream,
) -> Result<MomentProfile> {
    if n_sim < 2 {
        return Err(Error::InvalidConfig("n_sim must be at least 2".into()));
    }
    check_dims(model, theta, fit)?;
    let mut x = vec![0.0; model.covariate_dim()];
    let mut acc = RunningMoments::new();
    for _ in 0..n_sim {
        let y = model.simulate_pair(theta, &mut x, stream)?;
        acc.push(y - fit.predict_unchecked(&x));
    }
    MomentProfile::new(acc.mean(), acc.variance())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::l_m_gaussian;
    use crate::simulators::{analytic_mu_v, LinearGaussianModel, ToyModel};
    use alloc::vec;

    #[test]
    fn zero_variance_weight_is_exact() {
        let model = LinearGaussianModel::new(vec![1.0], 0.0, vec![0.0], vec![0.0], vec![2.0], 0.0, vec![0.0], vec![1.0])
            .unwrap();
        let fit = SurrogateFit::from_coefficients(vec![0.0, 0.0]).unwrap();
        let mut s = Stream::from_seed(4);
        let w = mc_weight_estimate(&model, &[0.3], &fit, 5, 0.6, 50, &mut s).unwrap();
        assert_eq!(w.std_error, 0.0);
        assert!((w.estimate - exp(-0.09 / 0.72)).abs() < 1e-15);
        let prof = estimate_moment_profile(&model, &[0.0], &fit, 100, &mut s).unwrap();
        assert_eq!(prof, MomentProfile { mu: 0.0, v: 0.0 });
    }

    #[test]
    fn weight_estimate_matches_closed_form() {
        let model = LinearGaussianModel::new(vec![1.0], 0.2, vec![1.0], vec![0.5], vec![1.0], 0.8, vec![0.0], vec![1.0])
            .unwrap();
        let fit = SurrogateFit::from_coefficients(vec![0.0, 0.7]).unwrap();
        let theta = [0.4];
        let prof = analytic_mu_v(&model, &theta, &fit).unwrap();
        let mut s = Stream::from_seed(11);
        for m in [1, 10] {
            let w = mc_weight_estimate(&model, &theta, &fit, m, 0.5, 20_000, &mut s).unwrap();
            let exact = l_m_gaussian(prof, m, 0.5).unwrap();
            assert!((w.estimate - exact).abs() <= 4.0 * w.std_error, "m={m}");
        }
    }

    #[test]
    fn toy_weight_self_consistency() {
        let fit = SurrogateFit::from_coefficients(vec![-1.2, 3.1]).unwrap();
        let model = ToyModel::default();
        let a = mc_weight_estimate(&model, &[2.0, 2.0], &fit, 50, 0.5, 4000, &mut Stream::from_seed(1)).unwrap();
        let b = mc_weight_estimate(&model, &[2.0, 2.0], &fit, 50, 0.5, 4000, &mut Stream::from_seed(2)).unwrap();
        let se = libm::sqrt(a.std_error * a.std_error + b.std_error * b.std_error);
        assert!((a.estimate - b.estimate).abs() <= 4.0 * se);
    }

    #[test]
    fn bad_inputs() {
        let fit = SurrogateFit::from_coefficients(vec![0.0, 0.0]).unwrap();
        let mut s = Stream::from_seed(0);
        let model = ToyModel::default();
        assert!(mc_weight_estimate(&model, &[1.0, 1.0], &fit, 1, 1.0, 1, &mut s).is_err());
        assert!(mc_weight_estimate(&model, &[1.0, 1.0], &fit, 1, 0.0, 10, &mut s).is_err());
        assert!(estimate_moment_profile(&model, &[1.0], &fit, 10, &mut s).is_err());
    }
}
