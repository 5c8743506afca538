//! Empirical pseudo-posterior: prior draws, simulated batches, Gaussian kernel
//! weights on the batch mean residual, and self-normalization.
//!
//! Weights are kept in log space until the final normalization, so a batch
//! residual many bandwidths away from zero never underflows to a zero total.

use alloc::vec::Vec;

use crate::math::{exp, neumaier_sum};
use crate::parallel::try_map_indexed;
use crate::simulators::{check_dims, ParameterPoint, Simulator};
use crate::stream::{domain, Substreams};
use crate::surrogate::SurrogateFit;
use crate::{Error, Result};

/// Log-weights below this are zero once exponentiated.
pub const LOG_MIN_POSITIVE: f64 = -708.396_418_532_264_1;

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationConfig {
    /// Number of prior draws `n_θ`.
    pub n_theta: usize,
    /// Pairs simulated per draw, `M`.
    pub batch_size: usize,
    /// Kernel bandwidth `τ`.
    pub bandwidth: f64,
    pub seed: u64,
    /// Worker-thread hint. Never changes results.
    pub max_parallel: usize,
}

impl CalibrationConfig {
    pub fn new(n_theta: usize, batch_size: usize, bandwidth: f64, seed: u64) -> Result<Self> {
        let c = Self { n_theta, batch_size, bandwidth, seed, max_parallel: 1 };
        c.validate()?;
        Ok(c)
    }

    pub fn with_max_parallel(mut self, threads: usize) -> Self {
        self.max_parallel = threads.max(1);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_theta == 0 {
            return Err(Error::InvalidConfig("n_theta must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        check_bandwidth(self.bandwidth)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub theta: ParameterPoint,
    /// Batch mean residual `R_j`.
    pub batch_residual: f64,
    /// `−R_j² / (2τ²)`.
    pub log_unnorm_weight: f64,
    /// Normalized weight `w_j`.
    pub weight: f64,
}

/// The weighted sample `{(θ_j, w_j)}`. Weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedParticleSet {
    pub particles: Vec<Particle>,
    pub config: CalibrationConfig,
    /// Every unnormalized weight underflowed; the normalized weights are still
    /// valid because normalization happens in log space.
    pub degenerate: bool,
}

impl WeightedParticleSet {
    /// Rebuilds a set from stored draws and residuals, recomputing weights.
    pub fn from_residuals(
        draws: Vec<(ParameterPoint, f64)>,
        config: CalibrationConfig,
    ) -> Result<Self> {
        config.validate()?;
        if draws.is_empty() {
            return Err(Error::EmptyInput);
        }
        let log_w = draws
            .iter()
            .map(|(_, r)| kernel_log_weight(*r, config.bandwidth))
            .collect::<Result<Vec<_>>>()?;
        let weights = self_normalize(&log_w)?;
        let degenerate = log_w.iter().all(|&l| l < LOG_MIN_POSITIVE);
        let particles = draws
            .into_iter()
            .zip(log_w)
            .zip(weights)
            .map(|(((theta, r), l), w)| Particle { theta, batch_residual: r, log_unnorm_weight: l, weight: w })
            .collect();
        Ok(Self { particles, config, degenerate })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.particles.iter().map(|p| p.weight)
    }

    pub fn param_dim(&self) -> usize {
        self.particles.first().map_or(0, |p| p.theta.dim())
    }

    /// Same draws and residuals under a different bandwidth.
    pub fn reweighted(&self, bandwidth: f64) -> Result<Self> {
        let draws = self.particles.iter().map(|p| (p.theta.clone(), p.batch_residual)).collect();
        Self::from_residuals(draws, CalibrationConfig { bandwidth, ..self.config.clone() })
    }

    /// Indices sorted by decreasing weight; ties keep index order.
    pub fn indices_by_weight(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.particles[b].weight.total_cmp(&self.particles[a].weight).then(a.cmp(&b)));
        idx
    }

    /// Weighted mean and standard deviation of coordinate `k`.
    pub fn weighted_spread(&self, k: usize) -> (f64, f64) {
        let mean = neumaier_sum(self.particles.iter().map(|p| p.weight * p.theta[k]));
        let var = neumaier_sum(self.particles.iter().map(|p| {
            let d = p.theta[k] - mean;
            p.weight * d * d
        }));
        (mean, crate::math::sqrt(var.max(0.0)))
    }
}

fn check_bandwidth(tau: f64) -> Result<()> {
    if tau.is_finite() && tau > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositiveBandwidth(tau))
    }
}

/// `(1/M) Σ_m (y_m − β̂ᵀ(1, x_m))` over an explicit batch.
pub fn batch_residual(fit: &SurrogateFit, batch: &[(Vec<f64>, f64)]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut sum = 0.0;
    for (x, y) in batch {
        sum += crate::surrogate::residual(fit, x, *y)?;
    }
    Ok(sum / batch.len() as f64)
}

/// `−r² / (2τ²)`.
#[inline]
pub fn kernel_log_weight(r: f64, tau: f64) -> Result<f64> {
    check_bandwidth(tau)?;
    Ok(-(r * r) / (2.0 * tau * tau))
}

/// `w_j = exp(l_j) / Σ_k exp(l_k)`, computed relative to the maximum so that
/// any finite input yields weights summing to one.
pub fn self_normalize(log_weights: &[f64]) -> Result<Vec<f64>> {
    if log_weights.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut max = f64::NEG_INFINITY;
    for &l in log_weights {
        if !l.is_finite() {
            return Err(Error::NonFinite("log weight"));
        }
        max = max.max(l);
    }
    let mut w: Vec<f64> = log_weights.iter().map(|&l| exp(l - max)).collect();
    let total = neumaier_sum(w.iter().copied());
    for wi in &mut w {
        *wi /= total;
    }
    Ok(w)
}

/// Draws `n_θ` parameters from the prior, simulates one batch of `M` pairs
/// per draw, and weights each draw by the Gaussian kernel on its batch mean
/// residual.
///
/// Particle `j` uses only the stream `(seed, j)`, so the output is the same
/// for every `max_parallel`.
pub fn run_calibration<S: Simulator + ?Sized>(
    model: &S,
    fit: &SurrogateFit,
    config: &CalibrationConfig,
) -> Result<WeightedParticleSet> {
    config.validate()?;
    if fit.dim() != model.covariate_dim() {
        return Err(Error::DimensionMismatch { expected: model.covariate_dim(), found: fit.dim() });
    }
    let family = Substreams::new(config.seed, domain::CALIBRATION);
    let draws = try_map_indexed(config.n_theta, config.max_parallel, |j| {
        let mut stream = family.stream(j as u64);
        let theta = model.draw_prior(&mut stream);
        check_dims(model, &theta, fit)?;
        let r = model.batch_residual(&theta, fit, config.batch_size, &mut stream)?;
        if !r.is_finite() {
            return Err(Error::NonFinite("batch residual"));
        }
        Ok((theta, r))
    })?;
    WeightedParticleSet::from_residuals(draws, config.clone())
}

/// `Σ_j w_j h(θ_j)`.
pub fn expectation<H: Fn(&[f64]) -> f64>(ps: &WeightedParticleSet, h: H) -> Result<f64> {
    let mut terms = Vec::with_capacity(ps.len());
    for (index, p) in ps.particles.iter().enumerate() {
        let v = h(&p.theta);
        if !v.is_finite() {
            return Err(Error::NonFiniteH { index });
        }
        terms.push(p.weight * v);
    }
    Ok(neumaier_sum(terms))
}

/// `1 / Σ_j w_j²`, between 1 and `n_θ`.
pub fn effective_sample_size(ps: &WeightedParticleSet) -> f64 {
    let sum_sq = neumaier_sum(ps.weights().map(|w| w * w));
    (1.0 / sum_sq).clamp(1.0, ps.len() as f64)
}

/// Target and bandwidth for one summary relation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryTarget {
    pub target_mean: f64,
    pub bandwidth: f64,
}

/// Several summary relations weighted jointly by a product of Gaussian kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct SummarySpec {
    pub entries: Vec<SummaryTarget>,
}

impl SummarySpec {
    pub fn new(entries: Vec<SummaryTarget>) -> Result<Self> {
        for e in &entries {
            check_bandwidth(e.bandwidth)?;
            if !e.target_mean.is_finite() {
                return Err(Error::NonFinite("summary target"));
            }
        }
        Ok(Self { entries })
    }

    /// Residual-style summaries: every target is zero.
    pub fn centered(bandwidths: &[f64]) -> Result<Self> {
        Self::new(bandwidths.iter().map(|&bandwidth| SummaryTarget { target_mean: 0.0, bandwidth }).collect())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// `Σ_k −(m_k − target_k)² / (2 τ_k²)` for per-summary batch means `m_k`.
pub fn multi_summary_log_weight(batch_means: &[f64], spec: &SummarySpec) -> Result<f64> {
    if batch_means.len() != spec.len() {
        return Err(Error::LengthMismatch { expected: spec.len(), found: batch_means.len() });
    }
    let mut total = 0.0;
    for (m, e) in batch_means.iter().zip(&spec.entries) {
        total += kernel_log_weight(m - e.target_mean, e.bandwidth)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulators::{LinearGaussianModel, ToyModel};
    use alloc::vec;

    fn point(v: &[f64]) -> ParameterPoint {
        ParameterPoint::new(v.to_vec()).unwrap()
    }

    #[test]
    fn batch_residual_examples() {
        let fit = SurrogateFit::from_coefficients(vec![1.0, 2.0]).unwrap();
        let exact: Vec<_> = [0.0, 1.5, -2.0].iter().map(|&x| (vec![x], 1.0 + 2.0 * x)).collect();
        assert_eq!(batch_residual(&fit, &exact).unwrap(), 0.0);
        assert_eq!(batch_residual(&fit, &[(vec![1.0], 5.0)]).unwrap(), 2.0);
        let zero = SurrogateFit::from_coefficients(vec![0.0, 0.0]).unwrap();
        let b = [(vec![0.0], 1.0), (vec![0.0], 2.0), (vec![0.0], 6.0)];
        assert_eq!(batch_residual(&zero, &b).unwrap(), 3.0);
        assert_eq!(batch_residual(&zero, &[]), Err(Error::EmptyBatch));
    }

    #[test]
    fn kernel_log_weight_examples() {
        assert_eq!(kernel_log_weight(0.0, 0.7).unwrap(), 0.0);
        assert_eq!(kernel_log_weight(0.7, 0.7).unwrap(), -0.5);
        assert!((exp(kernel_log_weight(2.0, 2.0).unwrap()) - 0.606_530_659_712_633_4).abs() < 1e-15);
        assert!((kernel_log_weight(3.0, 1.0).unwrap() + 4.5).abs() < 1e-15);
        assert_eq!(kernel_log_weight(1.0, 0.0), Err(Error::NonPositiveBandwidth(0.0)));
        assert_eq!(kernel_log_weight(1.0, -1.0), Err(Error::NonPositiveBandwidth(-1.0)));
    }

    #[test]
    fn self_normalize_examples() {
        let w = self_normalize(&[-3.0; 4]).unwrap();
        assert!(w.iter().all(|&x| x == 0.25));
        let w = self_normalize(&[0.0, -libm::log(3.0)]).unwrap();
        assert!((w[0] - 0.75).abs() < 1e-15 && (w[1] - 0.25).abs() < 1e-15);
        let a = self_normalize(&[-1000.0, -1002.0, -1001.0]).unwrap();
        let b = self_normalize(&[0.0, -2.0, -1.0]).unwrap();
        assert_eq!(a, b);
        assert_eq!(self_normalize(&[]), Err(Error::EmptyInput));
        assert!(self_normalize(&[0.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn ess_examples() {
        let cfg = CalibrationConfig::new(3, 1, 1.0, 0).unwrap();
        let mk = |ws: &[f64]| WeightedParticleSet {
            particles: ws
                .iter()
                .map(|&w| Particle { theta: point(&[0.0]), batch_residual: 0.0, log_unnorm_weight: 0.0, weight: w })
                .collect(),
            config: cfg.clone(),
            degenerate: false,
        };
        assert!((effective_sample_size(&mk(&[0.25; 4])) - 4.0).abs() < 1e-12);
        assert_eq!(effective_sample_size(&mk(&[0.0, 1.0, 0.0])), 1.0);
        assert!((effective_sample_size(&mk(&[0.5, 0.25, 0.25])) - 1.0 / 0.375).abs() < 1e-12);
    }

    #[test]
    fn expectation_examples() {
        let cfg = CalibrationConfig::new(4, 1, 1.0, 0).unwrap();
        let draws = vec![
            (point(&[1.0, 1.0]), 0.0),
            (point(&[1.0, -1.0]), 0.0),
            (point(&[-1.0, 1.0]), 0.0),
            (point(&[-1.0, -1.0]), 0.0),
        ];
        let ps = WeightedParticleSet::from_residuals(draws, cfg).unwrap();
        assert!((expectation(&ps, |_| 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((expectation(&ps, |_| 3.5).unwrap() - 3.5).abs() < 1e-15);
        assert_eq!(expectation(&ps, |t| if t[1] > 0.0 { 1.0 } else { 0.0 }).unwrap(), 0.5);
        assert_eq!(expectation(&ps, |t| if t[0] > 0.0 { f64::NAN } else { 0.0 }), Err(Error::NonFiniteH { index: 0 }));
    }

    #[test]
    fn multi_summary_examples() {
        let spec = SummarySpec::new(vec![
            SummaryTarget { target_mean: 1.0, bandwidth: 0.5 },
            SummaryTarget { target_mean: -2.0, bandwidth: 2.0 },
        ])
        .unwrap();
        assert_eq!(multi_summary_log_weight(&[1.0, -2.0], &spec).unwrap(), 0.0);
        assert_eq!(multi_summary_log_weight(&[1.5, 0.0], &spec).unwrap(), -1.0);
        let single = SummarySpec::centered(&[0.3]).unwrap();
        assert!((multi_summary_log_weight(&[0.3], &single).unwrap() + 0.5).abs() < 1e-15);
        assert_eq!(
            multi_summary_log_weight(&[0.0], &spec),
            Err(Error::LengthMismatch { expected: 2, found: 1 })
        );
        assert!(SummarySpec::centered(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn zero_residual_model_gives_uniform_weights() {
        // y = 0.5 + 2x exactly, and the fit is that same line
        let model = LinearGaussianModel::new(vec![0.0], 0.5, vec![2.0], vec![1.0], vec![1.0], 0.0, vec![0.0], vec![1.0])
            .unwrap();
        let fit = SurrogateFit::from_coefficients(vec![0.5, 2.0]).unwrap();
        let ps = run_calibration(&model, &fit, &CalibrationConfig::new(100, 7, 0.1, 3).unwrap()).unwrap();
        assert!(ps.particles.iter().all(|p| p.batch_residual == 0.0 && p.weight == 0.01));
        assert!(!ps.degenerate);
    }

    #[test]
    fn toy_calibration_contract() {
        let fit = SurrogateFit::from_coefficients(vec![-1.0, 3.0]).unwrap();
        let cfg = CalibrationConfig::new(5000, 20, 0.5, 17).unwrap();
        let ps = run_calibration(&ToyModel::default(), &fit, &cfg).unwrap();
        assert_eq!(ps.len(), 5000);
        let total = neumaier_sum(ps.weights());
        assert!((total - 1.0).abs() < 1e-12);
        assert!(ps.weights().all(|w| (0.0..=1.0).contains(&w)));
        assert!(effective_sample_size(&ps) >= 1.0);
        for p in &ps.particles {
            assert_eq!(p.log_unnorm_weight, -(p.batch_residual * p.batch_residual) / (2.0 * 0.25));
        }
    }

    #[test]
    fn degenerate_flag_still_normalizes() {
        let fit = SurrogateFit::from_coefficients(vec![1e6, 0.0]).unwrap();
        let cfg = CalibrationConfig::new(50, 3, 1e-3, 1).unwrap();
        let ps = run_calibration(&ToyModel::default(), &fit, &cfg).unwrap();
        assert!(ps.degenerate);
        assert!((neumaier_sum(ps.weights()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flat_kernel_recovers_uniform_weights() {
        let fit = SurrogateFit::from_coefficients(vec![-1.0, 3.0]).unwrap();
        let cfg = CalibrationConfig::new(2000, 10, 1.0, 8).unwrap();
        let ps = run_calibration(&ToyModel::default(), &fit, &cfg).unwrap();
        let scale = ps.particles.iter().map(|p| p.batch_residual.abs()).fold(0.0, f64::max);
        let flat = ps.reweighted(1e6 * scale).unwrap();
        let n = flat.len() as f64;
        assert!(flat.weights().all(|w| (w - 1.0 / n).abs() < 1e-6));
    }

    #[test]
    fn invalid_configs() {
        assert!(CalibrationConfig::new(0, 1, 1.0, 0).is_err());
        assert!(CalibrationConfig::new(1, 0, 1.0, 0).is_err());
        assert_eq!(CalibrationConfig::new(1, 1, 0.0, 0), Err(Error::NonPositiveBandwidth(0.0)));
        let fit = SurrogateFit::from_coefficients(vec![0.0, 0.0, 0.0]).unwrap();
        let cfg = CalibrationConfig::new(1, 1, 1.0, 0).unwrap();
        assert!(matches!(run_calibration(&ToyModel::default(), &fit, &cfg), Err(Error::DimensionMismatch { .. })));
    }
}
