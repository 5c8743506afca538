//! Exact-posterior reference for the toy model: random-walk
//! Metropolis-Hastings with isotropic Gaussian proposals.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::math::{ln, quantile_sorted, LN_2PI};
use crate::simulators::{ParameterPoint, ToyModel};
use crate::stream::{domain, Stream, Substreams};
use crate::surrogate::Dataset;
use crate::{Error, Result};

/// Step-size search run before the main chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuneConfig {
    pub rounds: usize,
    pub iters_per_round: usize,
    pub target_low: f64,
    pub target_high: f64,
}

impl Default for TuneConfig {
    fn default() -> Self {
        Self { rounds: 30, iters_per_round: 500, target_low: 0.2, target_high: 0.4 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MhConfig {
    pub n_iter: usize,
    pub burn_in: usize,
    pub step_sd: f64,
    pub init: ParameterPoint,
    pub seed: u64,
    pub tune: Option<TuneConfig>,
}

impl MhConfig {
    pub fn new(n_iter: usize, burn_in: usize, step_sd: f64, init: ParameterPoint, seed: u64) -> Result<Self> {
        let c = Self { n_iter, burn_in, step_sd, init, seed, tune: None };
        c.validate()?;
        Ok(c)
    }

    /// 40 000 iterations, 5 000 burn-in, step 0.1, started at the prior mean.
    pub fn toy_default(seed: u64) -> Self {
        Self {
            n_iter: 40_000,
            burn_in: 5_000,
            step_sd: 0.1,
            init: ParameterPoint::from_finite(vec![0.0, 0.0]),
            seed,
            tune: None,
        }
    }

    pub fn with_tuning(mut self, tune: TuneConfig) -> Self {
        self.tune = Some(tune);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.n_iter {
            return Err(Error::InvalidConfig("burn_in must be smaller than n_iter".into()));
        }
        if !(self.step_sd.is_finite() && self.step_sd > 0.0) {
            return Err(Error::InvalidConfig("step_sd must be > 0".into()));
        }
        if self.init.dim() == 0 {
            return Err(Error::EmptyInput);
        }
        if let Some(t) = self.tune {
            if t.iters_per_round == 0 || !(0.0 < t.target_low && t.target_low < t.target_high && t.target_high < 1.0) {
                return Err(Error::InvalidConfig("invalid tuning window".into()));
            }
        }
        Ok(())
    }
}

/// Post burn-in draws.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub samples: Vec<ParameterPoint>,
    /// Accepted fraction over all iterations, burn-in included.
    pub acceptance_rate: f64,
    pub log_target_trace: Vec<f64>,
    pub accepted: Vec<bool>,
    pub burn_in: usize,
    /// Proposal scale actually used (after tuning, if any).
    pub step_sd: f64,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// `Σ_i log N(y_i | θ₁ ln x_i + θ₀ x_i, 1)`.
pub fn toy_log_likelihood(theta: &[f64], data: &Dataset) -> Result<f64> {
    ToyPosterior::new(ToyModel::default(), data)?.log_likelihood(theta)
}

/// Log density of `N(0, 5² I₂)`.
pub fn toy_log_prior(theta: &[f64]) -> Result<f64> {
    ToyModel::default().log_prior(theta)
}

/// Toy log posterior from sufficient statistics, O(1) per evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyPosterior {
    model: ToyModel,
    n: f64,
    syy: f64,
    sy_l: f64,
    sy_x: f64,
    sll: f64,
    sxl: f64,
    sxx: f64,
}

impl ToyPosterior {
    pub fn new(model: ToyModel, data: &Dataset) -> Result<Self> {
        model.validate()?;
        if data.dim() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, found: data.dim() });
        }
        if model.noise_sd <= 0.0 {
            return Err(Error::InvalidConfig("likelihood needs noise_sd > 0".into()));
        }
        let mut s = Self { model, n: data.len() as f64, syy: 0.0, sy_l: 0.0, sy_x: 0.0, sll: 0.0, sxl: 0.0, sxx: 0.0 };
        for (x, y) in data.iter() {
            let x = x[0];
            if !(x > 0.0) {
                return Err(Error::NonPositiveCovariate(x));
            }
            let l = ln(x);
            s.syy += y * y;
            s.sy_l += y * l;
            s.sy_x += y * x;
            s.sll += l * l;
            s.sxl += x * l;
            s.sxx += x * x;
        }
        Ok(s)
    }

    pub fn log_likelihood(&self, theta: &[f64]) -> Result<f64> {
        if theta.len() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, found: theta.len() });
        }
        let (t0, t1) = (theta[0], theta[1]);
        let rss = self.syy - 2.0 * (t1 * self.sy_l + t0 * self.sy_x)
            + t1 * t1 * self.sll
            + 2.0 * t0 * t1 * self.sxl
            + t0 * t0 * self.sxx;
        let s2 = self.model.noise_sd * self.model.noise_sd;
        Ok(-0.5 * self.n * (LN_2PI + ln(s2)) - 0.5 * rss.max(0.0) / s2)
    }

    pub fn log_posterior(&self, theta: &[f64]) -> Result<f64> {
        Ok(self.log_likelihood(theta)? + self.model.log_prior(theta)?)
    }
}

struct Walker<F> {
    target: F,
    state: Vec<f64>,
    current: f64,
    proposal: Vec<f64>,
}

impl<F: FnMut(&[f64]) -> f64> Walker<F> {
    /// One MH step; returns whether the proposal was accepted.
    fn step(&mut self, step_sd: f64, stream: &mut Stream) -> bool {
        for (p, s) in self.proposal.iter_mut().zip(&self.state) {
            *p = s + step_sd * stream.standard_normal();
        }
        let u = stream.uniform();
        let cand = (self.target)(&self.proposal);
        if cand.is_nan() {
            return false;
        }
        let delta = cand - self.current;
        if delta >= 0.0 || ln(u) < delta {
            core::mem::swap(&mut self.state, &mut self.proposal);
            self.current = cand;
            true
        } else {
            false
        }
    }
}

/// Symmetric random-walk Metropolis-Hastings. NaN target values count as
/// rejections.
pub fn rwmh<F: FnMut(&[f64]) -> f64>(mut log_target: F, config: &MhConfig) -> Result<Chain> {
    config.validate()?;
    let init = config.init.to_vec();
    let start = log_target(&init);
    if !start.is_finite() {
        return Err(Error::NonFiniteTarget);
    }

    let mut step_sd = config.step_sd;
    if let Some(t) = config.tune {
        let mut stream = Substreams::new(config.seed, domain::MCMC_TUNING).stream(0);
        let mut w = Walker { target: &mut log_target, state: init.clone(), current: start, proposal: init.clone() };
        for _ in 0..t.rounds {
            let acc = (0..t.iters_per_round).filter(|_| w.step(step_sd, &mut stream)).count();
            let rate = acc as f64 / t.iters_per_round as f64;
            if rate < t.target_low {
                step_sd *= if rate < 0.5 * t.target_low { 0.5 } else { 0.8 };
            } else if rate > t.target_high {
                step_sd *= if rate > 0.5 * (1.0 + t.target_high) { 2.0 } else { 1.25 };
            } else {
                break;
            }
        }
    }

    let mut stream = Substreams::new(config.seed, domain::MCMC).stream(0);
    let mut w = Walker { target: &mut log_target, state: init.clone(), current: start, proposal: init };
    let keep = config.n_iter - config.burn_in;
    let mut samples = Vec::with_capacity(keep);
    let mut trace = Vec::with_capacity(keep);
    let mut accepted = Vec::with_capacity(keep);
    let mut n_acc = 0usize;
    for it in 0..config.n_iter {
        let a = w.step(step_sd, &mut stream);
        n_acc += a as usize;
        if it >= config.burn_in {
            samples.push(ParameterPoint::from_finite(w.state.clone()));
            trace.push(w.current);
            accepted.push(a);
        }
    }
    Ok(Chain {
        samples,
        acceptance_rate: n_acc as f64 / config.n_iter as f64,
        log_target_trace: trace,
        accepted,
        burn_in: config.burn_in,
        step_sd,
    })
}

/// Probabilities reported by [`chain_summary`].
pub const SUMMARY_PROBS: [f64; 5] = [0.005, 0.025, 0.5, 0.975, 0.995];

#[derive(Debug, Clone, PartialEq)]
pub struct ChainSummary {
    pub mean: Vec<f64>,
    /// Row-major `p × p` sample covariance (denominator `n − 1`, or zero for
    /// a single sample).
    pub cov: Vec<f64>,
    /// Per coordinate, quantiles at [`SUMMARY_PROBS`].
    pub quantiles: Vec<[f64; 5]>,
}

impl ChainSummary {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `(θ − mean)ᵀ cov⁻¹ (θ − mean)`; `None` when the covariance is singular.
    pub fn mahalanobis_sq(&self, theta: &[f64]) -> Option<f64> {
        let p = self.dim();
        if theta.len() != p {
            return None;
        }
        let chol = DMatrix::from_row_slice(p, p, &self.cov).cholesky()?;
        let d = DVector::from_iterator(p, theta.iter().zip(&self.mean).map(|(t, m)| t - m));
        let z = chol.solve(&d);
        Some(d.dot(&z))
    }

    /// Whether `θ` lies in the Gaussian-approximation credible ellipse of
    /// the given level. Only two-dimensional summaries are supported, where
    /// the chi-square quantile is `−2 ln(1 − level)`.
    pub fn gaussian_region_contains(&self, theta: &[f64], level: f64) -> Result<bool> {
        if self.dim() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, found: self.dim() });
        }
        if !(0.0 < level && level < 1.0) {
            return Err(Error::InvalidConfig("level must be in (0, 1)".into()));
        }
        let d2 = self.mahalanobis_sq(theta).ok_or(Error::SingularDesign { condition: f64::INFINITY, threshold: 0.0 })?;
        Ok(d2 <= -2.0 * ln(1.0 - level))
    }
}

pub fn chain_summary(chain: &Chain) -> Result<ChainSummary> {
    summarize(&chain.samples)
}

/// Mean, covariance and quantiles of any sample of equal-dimension points.
pub fn summarize(samples: &[ParameterPoint]) -> Result<ChainSummary> {
    let first = samples.first().ok_or(Error::EmptyChain)?;
    let p = first.dim();
    let n = samples.len();
    let mut mean = vec![0.0; p];
    let mut m2 = vec![0.0; p * p];
    for (count, s) in samples.iter().enumerate() {
        if s.dim() != p {
            return Err(Error::DimensionMismatch { expected: p, found: s.dim() });
        }
        let k = (count + 1) as f64;
        let delta: Vec<f64> = s.iter().zip(&mean).map(|(x, m)| x - m).collect();
        for (m, d) in mean.iter_mut().zip(&delta) {
            *m += d / k;
        }
        for i in 0..p {
            for j in 0..p {
                m2[i * p + j] += delta[i] * (s[j] - mean[j]);
            }
        }
    }
    let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
    let cov = m2.iter().map(|v| if n > 1 { v / denom } else { 0.0 }).collect();
    let quantiles = (0..p)
        .map(|k| {
            let mut col: Vec<f64> = samples.iter().map(|s| s[k]).collect();
            col.sort_by(f64::total_cmp);
            SUMMARY_PROBS.map(|q| quantile_sorted(&col, q))
        })
        .collect();
    Ok(ChainSummary { mean, cov, quantiles })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulators::generate_observed;

    fn pt(v: &[f64]) -> ParameterPoint {
        ParameterPoint::new(v.to_vec()).unwrap()
    }

    #[test]
    fn log_likelihood_examples() {
        let one = Dataset::new(vec![vec![1.0]], vec![0.7]).unwrap();
        assert!((toy_log_likelihood(&[0.7, 3.0], &one).unwrap() + 0.5 * LN_2PI).abs() < 1e-14);
        assert!((toy_log_likelihood(&[-0.3, 3.0], &one).unwrap() + 0.5 * LN_2PI + 0.5).abs() < 1e-14);
        let xs = [0.5, 1.5, 2.5];
        let ys = [1.0, -1.0, 3.0];
        let data = Dataset::new(xs.iter().map(|&x| vec![x]).collect(), ys.to_vec()).unwrap();
        let theta = [0.4, -1.2];
        let sum: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(&x, &y)| toy_log_likelihood(&theta, &Dataset::new(vec![vec![x]], vec![y]).unwrap()).unwrap())
            .sum();
        assert!((toy_log_likelihood(&theta, &data).unwrap() - sum).abs() < 1e-12);
        let bad = Dataset::new(vec![vec![0.0]], vec![1.0]).unwrap();
        assert_eq!(toy_log_likelihood(&theta, &bad), Err(Error::NonPositiveCovariate(0.0)));
    }

    #[test]
    fn log_prior_examples() {
        let origin = toy_log_prior(&[0.0, 0.0]).unwrap();
        assert!((origin + ln(2.0 * core::f64::consts::PI * 25.0)).abs() < 1e-14);
        assert!((toy_log_prior(&[5.0, 0.0]).unwrap() - origin + 0.5).abs() < 1e-14);
        assert_eq!(toy_log_prior(&[1.3, -2.0]).unwrap(), toy_log_prior(&[-1.3, 2.0]).unwrap());
        assert!(toy_log_prior(&[1.0]).is_err());
    }

    #[test]
    fn uphill_moves_always_accepted() {
        // Strictly increasing target in every direction from the start is
        // impossible, but a flat target gives Δ = 0 everywhere.
        let cfg = MhConfig::new(500, 0, 1.0, pt(&[0.0]), 9).unwrap();
        let chain = rwmh(|_| 0.0, &cfg).unwrap();
        assert_eq!(chain.acceptance_rate, 1.0);
    }

    #[test]
    fn standard_normal_target() {
        let cfg = MhConfig::new(100_000, 1000, 2.0, pt(&[0.0]), 5).unwrap();
        let chain = rwmh(|t| -0.5 * t[0] * t[0], &cfg).unwrap();
        let s = chain_summary(&chain).unwrap();
        // Batch-means standard error.
        let xs: Vec<f64> = chain.samples.iter().map(|p| p[0]).collect();
        let bsz = 1000;
        let means: Vec<f64> = xs.chunks_exact(bsz).map(|c| c.iter().sum::<f64>() / bsz as f64).collect();
        let bm: crate::math::RunningMoments = means.iter().copied().collect();
        assert!(s.mean[0].abs() < 4.0 * bm.std_error(), "{} vs {}", s.mean[0], bm.std_error());
        assert!((s.cov[0] - 1.0).abs() < 0.1);
    }

    #[test]
    fn histogram_matches_discretized_target() {
        let cfg = MhConfig::new(100_000, 1000, 1.5, pt(&[0.0]), 13).unwrap();
        let chain = rwmh(|t| -0.5 * t[0] * t[0], &cfg).unwrap();
        let edges: Vec<f64> = (0..=16).map(|i| -4.0 + 0.5 * i as f64).collect();
        let phi = |x: f64| 0.5 * libm::erfc(-x / core::f64::consts::SQRT_2);
        let n = chain.len() as f64;
        let mut tv = 0.0;
        for w in edges.windows(2) {
            let hits = chain.samples.iter().filter(|p| p[0] >= w[0] && p[0] < w[1]).count() as f64;
            tv += (hits / n - (phi(w[1]) - phi(w[0]))).abs();
        }
        let tails = chain.samples.iter().filter(|p| p[0].abs() >= 4.0).count() as f64;
        tv += (tails / n - 2.0 * phi(-4.0)).abs();
        assert!(0.5 * tv < 0.05, "tv {}", 0.5 * tv);
    }

    #[test]
    fn deterministic_and_nonfinite_start() {
        let cfg = MhConfig::new(2000, 100, 0.5, pt(&[1.0, 1.0]), 77).unwrap();
        let f = |t: &[f64]| -(t[0] * t[0] + t[1] * t[1]);
        assert_eq!(rwmh(f, &cfg).unwrap(), rwmh(f, &cfg).unwrap());
        assert_eq!(rwmh(|_| f64::NEG_INFINITY, &cfg), Err(Error::NonFiniteTarget));
        assert_eq!(rwmh(f, &cfg).unwrap().len(), 1900);
        assert!(MhConfig::new(10, 10, 0.1, pt(&[0.0]), 0).is_err());
        assert!(MhConfig::new(10, 1, 0.0, pt(&[0.0]), 0).is_err());
    }

    #[test]
    fn summary_examples() {
        let constant = vec![pt(&[1.5, -2.0]); 10];
        let s = summarize(&constant).unwrap();
        assert_eq!(s.mean, vec![1.5, -2.0]);
        assert!(s.cov.iter().all(|&c| c == 0.0));
        let two = summarize(&[pt(&[0.0, 0.0]), pt(&[2.0, 2.0])]).unwrap();
        assert_eq!(two.mean, vec![1.0, 1.0]);
        assert_eq!(two.cov, vec![2.0, 2.0, 2.0, 2.0]);
        assert_eq!(summarize(&[]), Err(Error::EmptyChain));
    }

    #[test]
    fn standard_normal_chain_covariance() {
        let cfg = MhConfig::new(60_000, 1000, 1.5, pt(&[0.0, 0.0]), 21).unwrap();
        let chain = rwmh(|t| -0.5 * (t[0] * t[0] + t[1] * t[1]), &cfg).unwrap();
        let s = chain_summary(&chain).unwrap();
        for (c, e) in s.cov.iter().zip([1.0, 0.0, 0.0, 1.0]) {
            assert!((c - e).abs() < 0.12, "{:?}", s.cov);
        }
        assert!(s.gaussian_region_contains(&[0.0, 0.0], 0.99).unwrap());
        assert!(!s.gaussian_region_contains(&[4.0, 0.0], 0.99).unwrap());
    }

    #[test]
    fn acceptance_falls_with_step_size() {
        let model = ToyModel::default();
        let mut s = Stream::from_seed(3);
        let data = generate_observed(&model, &[2.0, 2.0], 200, &mut s).unwrap();
        let post = ToyPosterior::new(model, &data).unwrap();
        let rates: Vec<f64> = [0.05, 0.5, 5.0]
            .iter()
            .map(|&step| {
                let cfg = MhConfig { step_sd: step, ..MhConfig::toy_default(1) };
                rwmh(|t| post.log_posterior(t).unwrap_or(f64::NEG_INFINITY), &cfg).unwrap().acceptance_rate
            })
            .collect();
        assert!(rates[0] > rates[1] && rates[1] > rates[2], "{rates:?}");
    }

    #[test]
    fn tuning_lands_in_window() {
        let cfg = MhConfig::new(5000, 500, 10.0, pt(&[0.0]), 2).unwrap().with_tuning(TuneConfig::default());
        let chain = rwmh(|t| -0.5 * t[0] * t[0] / 0.01, &cfg).unwrap();
        assert!(chain.step_sd < 10.0);
        assert!(chain.acceptance_rate > 0.15 && chain.acceptance_rate < 0.5, "{}", chain.acceptance_rate);
    }
}
