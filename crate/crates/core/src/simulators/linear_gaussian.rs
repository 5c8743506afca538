use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};

use super::{check_dims, ParameterPoint, Simulator};
use crate::math::{exp, sqrt};
use crate::population::MomentProfile;
use crate::stream::Stream;
use crate::surrogate::SurrogateFit;
use crate::{Error, Result};

/// How [`LinearGaussianModel`] produces batch residuals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BatchSampling {
    /// Simulate every pair and average the residuals.
    #[default]
    Pairwise,
    /// Draw the batch mean directly from `N(μ(θ), v(θ)/M)`. Residuals of this
    /// model are exactly Gaussian, so this has the same law as `Pairwise` at
    /// O(1) cost per batch.
    ExactMean,
}

/// Analytic oracle model:
///
/// - `θ ~ N(prior_mean, diag(prior_sd²))`
/// - `X ~ N(x_mean, x_cov)`, independent of `θ`
/// - `Y = aᵀθ + b + cᵀX + ε`, `ε ~ N(0, noise_sd² · exp(noise_growth · θ₀))`
///
/// so that for any projection `β` the residual `Y − βᵀ(1, X)` is Gaussian with
/// closed-form mean and variance (see [`analytic_mu_v`]).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussianModel {
    a: Vec<f64>,
    b: f64,
    c: Vec<f64>,
    x_mean: Vec<f64>,
    x_cov: Vec<f64>,
    x_factor: Vec<f64>,
    noise_sd: f64,
    noise_growth: f64,
    prior_mean: Vec<f64>,
    prior_sd: Vec<f64>,
    batch_sampling: BatchSampling,
}

impl LinearGaussianModel {
    /// `x_cov` is row-major `d × d` and must be symmetric positive semidefinite.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: Vec<f64>,
        b: f64,
        c: Vec<f64>,
        x_mean: Vec<f64>,
        x_cov: Vec<f64>,
        noise_sd: f64,
        prior_mean: Vec<f64>,
        prior_sd: Vec<f64>,
    ) -> Result<Self> {
        let p = a.len();
        let d = c.len();
        if p == 0 {
            return Err(Error::InvalidConfig("parameter dimension must be at least 1".into()));
        }
        if prior_mean.len() != p {
            return Err(Error::DimensionMismatch { expected: p, found: prior_mean.len() });
        }
        if prior_sd.len() != p {
            return Err(Error::DimensionMismatch { expected: p, found: prior_sd.len() });
        }
        if x_mean.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: x_mean.len() });
        }
        if x_cov.len() != d * d {
            return Err(Error::DimensionMismatch { expected: d * d, found: x_cov.len() });
        }
        let finite = a.iter().chain(&c).chain(&x_mean).chain(&x_cov).chain(&prior_mean).all(|v| v.is_finite());
        if !finite || !b.is_finite() {
            return Err(Error::NonFinite("linear-gaussian coefficient"));
        }
        if !(noise_sd.is_finite() && noise_sd >= 0.0) {
            return Err(Error::InvalidConfig("noise_sd must be finite and >= 0".into()));
        }
        if prior_sd.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::InvalidConfig("prior_sd entries must be finite and >= 0".into()));
        }
        let x_factor = psd_factor(&x_cov, d)?;
        Ok(Self {
            a,
            b,
            c,
            x_mean,
            x_cov,
            x_factor,
            noise_sd,
            noise_growth: 0.0,
            prior_mean,
            prior_sd,
            batch_sampling: BatchSampling::Pairwise,
        })
    }

    /// One-dimensional `θ`, no covariate effect: `Y = slope·θ + intercept + ε`
    /// with `X ~ N(0, 1)` and a centered prior.
    pub fn scalar(slope: f64, intercept: f64, noise_sd: f64, prior_sd: f64) -> Result<Self> {
        Self::new(vec![slope], intercept, vec![0.0], vec![0.0], vec![1.0], noise_sd, vec![0.0], vec![prior_sd])
    }

    /// Noise variance becomes `noise_sd² · exp(growth · θ₀)`.
    pub fn with_noise_growth(mut self, growth: f64) -> Result<Self> {
        if !growth.is_finite() {
            return Err(Error::NonFinite("noise growth"));
        }
        self.noise_growth = growth;
        Ok(self)
    }

    pub fn with_batch_sampling(mut self, mode: BatchSampling) -> Self {
        self.batch_sampling = mode;
        self
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn x_mean(&self) -> &[f64] {
        &self.x_mean
    }

    /// Row-major `d × d`.
    pub fn x_cov(&self) -> &[f64] {
        &self.x_cov
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    pub fn noise_growth(&self) -> f64 {
        self.noise_growth
    }

    pub fn prior_mean(&self) -> &[f64] {
        &self.prior_mean
    }

    pub fn prior_sd(&self) -> &[f64] {
        &self.prior_sd
    }

    pub fn batch_sampling(&self) -> BatchSampling {
        self.batch_sampling
    }

    pub fn noise_variance(&self, theta: &[f64]) -> f64 {
        let base = self.noise_sd * self.noise_sd;
        if self.noise_growth == 0.0 {
            base
        } else {
            base * exp(self.noise_growth * theta[0])
        }
    }

    /// Best linear projection of `Y` on `(1, X)` at a fixed `θ`:
    /// intercept `aᵀθ + b`, slopes `c`.
    pub fn best_projection(&self, theta: &[f64]) -> Result<SurrogateFit> {
        if theta.len() != self.a.len() {
            return Err(Error::DimensionMismatch { expected: self.a.len(), found: theta.len() });
        }
        let mut beta = Vec::with_capacity(self.c.len() + 1);
        beta.push(dot(&self.a, theta) + self.b);
        beta.extend_from_slice(&self.c);
        SurrogateFit::from_coefficients(beta)
    }
}

/// Exact `μ(θ) = E[Y − βᵀ(1, X) | θ]` and `v(θ) = Var(Y − βᵀ(1, X) | θ)`.
///
/// With `δ = c − β_x`: `μ = aᵀθ + b − β₀ + δᵀ x_mean`, `v = δᵀ Σ δ + σ²(θ)`.
pub fn analytic_mu_v(model: &LinearGaussianModel, theta: &[f64], fit: &SurrogateFit) -> Result<MomentProfile> {
    check_dims(model, theta, fit)?;
    let d = model.c.len();
    let delta: Vec<f64> = model.c.iter().zip(fit.slopes()).map(|(c, b)| c - b).collect();
    let mu = dot(&model.a, theta) + model.b - fit.intercept() + dot(&delta, &model.x_mean);
    let mut quad = 0.0;
    for i in 0..d {
        for j in 0..d {
            quad += delta[i] * model.x_cov[i * d + j] * delta[j];
        }
    }
    MomentProfile::new(mu, quad.max(0.0) + model.noise_variance(theta))
}

impl Simulator for LinearGaussianModel {
    fn param_dim(&self) -> usize {
        self.a.len()
    }

    fn covariate_dim(&self) -> usize {
        self.c.len()
    }

    fn draw_prior(&self, stream: &mut Stream) -> ParameterPoint {
        let theta = self
            .prior_mean
            .iter()
            .zip(&self.prior_sd)
            .map(|(m, s)| m + s * stream.standard_normal())
            .collect();
        ParameterPoint::from_finite(theta)
    }

    fn simulate_pair(&self, theta: &[f64], x: &mut [f64], stream: &mut Stream) -> Result<f64> {
        let d = self.c.len();
        // z into x, then x = mean + F z in place (row i of F z uses z[0..d]).
        let mut z = [0.0f64; 8];
        let mut z_heap;
        let z: &mut [f64] = if d <= z.len() {
            &mut z[..d]
        } else {
            z_heap = vec![0.0; d];
            &mut z_heap
        };
        for zi in z.iter_mut() {
            *zi = stream.standard_normal();
        }
        for ((xi, mean), row) in x.iter_mut().zip(&self.x_mean).zip(self.x_factor.chunks_exact(d)) {
            *xi = mean + dot(row, z);
        }
        let eps = sqrt(self.noise_variance(theta)) * stream.standard_normal();
        Ok(dot(&self.a, theta) + self.b + dot(&self.c, x) + eps)
    }

    fn batch_residual(&self, theta: &[f64], fit: &SurrogateFit, batch_size: usize, stream: &mut Stream) -> Result<f64> {
        match self.batch_sampling {
            BatchSampling::Pairwise => super::simulate_batch_residual(self, theta, fit, batch_size, stream),
            BatchSampling::ExactMean => {
                if batch_size == 0 {
                    return Err(Error::EmptyBatch);
                }
                let profile = analytic_mu_v(self, theta, fit)?;
                Ok(profile.mu + sqrt(profile.v / batch_size as f64) * stream.standard_normal())
            }
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Row-major `F` with `F Fᵀ = Σ` for a symmetric PSD `Σ`.
fn psd_factor(cov: &[f64], d: usize) -> Result<Vec<f64>> {
    if d == 0 {
        return Ok(Vec::new());
    }
    let scale = cov.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for i in 0..d {
        for j in 0..i {
            if (cov[i * d + j] - cov[j * d + i]).abs() > 1e-12 * scale {
                return Err(Error::InvalidConfig("x_cov must be symmetric".into()));
            }
        }
    }
    let m = DMatrix::from_row_slice(d, d, cov);
    let eig = SymmetricEigen::new(m);
    if eig.eigenvalues.iter().any(|&l| l < -1e-10 * scale) {
        return Err(Error::InvalidConfig("x_cov must be positive semidefinite".into()));
    }
    let mut f = vec![0.0; d * d];
    for i in 0..d {
        for k in 0..d {
            f[i * d + k] = eig.eigenvectors[(i, k)] * sqrt(eig.eigenvalues[k].max(0.0));
        }
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::RunningMoments;
    use crate::stream::{domain, Substreams};

    fn generic() -> LinearGaussianModel {
        LinearGaussianModel::new(
            vec![1.5, -0.5],
            0.3,
            vec![2.0, -1.0],
            vec![1.0, 0.5],
            vec![1.0, 0.3, 0.3, 0.5],
            0.7,
            vec![0.0, 0.0],
            vec![1.0, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn matched_projection_gives_zero_mean() {
        let m = generic();
        let theta = [0.4, -1.2];
        let fit = m.best_projection(&theta).unwrap();
        let p = analytic_mu_v(&m, &theta, &fit).unwrap();
        assert!(p.mu.abs() < 1e-14);
        assert!((p.v - 0.49).abs() < 1e-14);
    }

    #[test]
    fn noiseless_cancelled_slopes_give_zero_variance() {
        let m = LinearGaussianModel::new(vec![1.0], 0.0, vec![2.0], vec![0.0], vec![3.0], 0.0, vec![0.0], vec![1.0])
            .unwrap();
        let fit = SurrogateFit::from_coefficients(vec![0.0, 2.0]).unwrap();
        let p = analytic_mu_v(&m, &[0.7], &fit).unwrap();
        assert_eq!(p.v, 0.0);
        assert!((p.mu - 0.7).abs() < 1e-15);
    }

    #[test]
    fn analytic_moments_match_monte_carlo() {
        let m = generic();
        let theta = [0.4, -1.2];
        let fit = SurrogateFit::from_coefficients(vec![0.1, 1.0, 0.5]).unwrap();
        let exact = analytic_mu_v(&m, &theta, &fit).unwrap();
        let mut s = Substreams::new(21, domain::MOMENTS).stream(0);
        let mut x = [0.0; 2];
        let n = 1_000_000;
        let mut acc = RunningMoments::new();
        for _ in 0..n {
            let y = m.simulate_pair(&theta, &mut x, &mut s).unwrap();
            acc.push(y - fit.predict_unchecked(&x));
        }
        let se_mean = sqrt(exact.v / n as f64);
        assert!((acc.mean() - exact.mu).abs() < 4.0 * se_mean, "{} vs {}", acc.mean(), exact.mu);
        // Var of the sample variance for Gaussian data is 2v²/(n−1).
        let se_var = sqrt(2.0 * exact.v * exact.v / (n - 1) as f64);
        assert!((acc.variance() - exact.v).abs() < 4.0 * se_var, "{} vs {}", acc.variance(), exact.v);
    }

    #[test]
    fn exact_mean_sampler_matches_pairwise_law() {
        let theta = [0.2, 0.1];
        let fit = SurrogateFit::from_coefficients(vec![0.0, 1.0, 0.0]).unwrap();
        let pair = generic();
        let exact = generic().with_batch_sampling(BatchSampling::ExactMean);
        let fam = Substreams::new(4, domain::CALIBRATION);
        let m = 5;
        let reps = 40_000;
        let collect = |model: &LinearGaussianModel| {
            (0..reps)
                .map(|j| model.batch_residual(&theta, &fit, m, &mut fam.stream(j)).unwrap())
                .collect::<RunningMoments>()
        };
        let a = collect(&pair);
        let b = collect(&exact);
        let p = analytic_mu_v(&pair, &theta, &fit).unwrap();
        let se = sqrt(2.0 * p.v / m as f64 / reps as f64);
        assert!((a.mean() - b.mean()).abs() < 4.0 * se);
        let target = p.v / m as f64;
        assert!((a.variance() / target - 1.0).abs() < 0.05);
        assert!((b.variance() / target - 1.0).abs() < 0.05);
    }

    #[test]
    fn heteroscedastic_noise() {
        let m = LinearGaussianModel::scalar(1.0, 0.0, 1.0, 1.0).unwrap().with_noise_growth(1.0).unwrap();
        let zero = SurrogateFit::from_coefficients(vec![0.0, 0.0]).unwrap();
        let lo = analytic_mu_v(&m, &[-1.0], &zero).unwrap();
        let hi = analytic_mu_v(&m, &[1.0], &zero).unwrap();
        assert!((lo.v - libm::exp(-1.0)).abs() < 1e-15);
        assert!((hi.v - libm::exp(1.0)).abs() < 1e-15);
        assert_eq!(hi.mu, 1.0);
    }

    #[test]
    fn rejects_bad_covariance() {
        let bad = LinearGaussianModel::new(vec![1.0], 0.0, vec![1.0, 1.0], vec![0.0, 0.0], vec![1.0, 2.0, 2.0, 1.0], 1.0, vec![0.0], vec![1.0]);
        assert!(bad.is_err());
        let asym = LinearGaussianModel::new(vec![1.0], 0.0, vec![1.0, 1.0], vec![0.0, 0.0], vec![1.0, 0.2, 0.1, 1.0], 1.0, vec![0.0], vec![1.0]);
        assert!(asym.is_err());
        // singular but PSD is fine
        assert!(LinearGaussianModel::new(vec![1.0], 0.0, vec![1.0, 1.0], vec![0.0, 0.0], vec![1.0, 1.0, 1.0, 1.0], 1.0, vec![0.0], vec![1.0]).is_ok());
    }
}
