//! Two-stage convergence: `Φ̂ → Φ_M` in `n_θ` at fixed `M`, and
//! `Φ_M → Φ_∞` in `M`, on a model where both limits are computable.

use pseudopost_core::parallel::try_map_indexed;
use pseudopost_core::population::{
    l_infinity, l_m_gaussian, normalizer, phi_difference_bound, phi_functional, uniform_gap_bound, QuadratureGrid,
};
use pseudopost_core::simulators::{analytic_mu_v, LinearGaussianModel};
use pseudopost_core::stream::{derive_seed, domain};
use pseudopost_core::{expectation, run_calibration, CalibrationConfig, Result, SurrogateFit};
use serde::{Deserialize, Serialize};

use super::{median_of, strictly_decreasing, ExperimentReport, Table, QUADRATURE_TOLERANCE};

/// One-dimensional model `Y = θ + intercept + ε`, `ε ~ N(0, noise_sd²)`,
/// `θ ~ N(0, prior_sd²)`, under the zero projection, so `μ(θ) = θ + intercept`
/// and `v = noise_sd²`. The test function is `h = 1{θ > threshold}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwoStageConfig {
    pub prior_sd: f64,
    pub intercept: f64,
    pub noise_sd: f64,
    pub tau: f64,
    pub threshold: f64,
    pub n_theta_axis: Vec<usize>,
    pub mc_batch_size: usize,
    pub replications: usize,
    /// Replications in which the largest `n_θ` must beat the smallest.
    pub min_wins: usize,
    pub m_axis: Vec<usize>,
    pub grid_points: usize,
    pub seed: u64,
}

impl Default for TwoStageConfig {
    fn default() -> Self {
        Self {
            prior_sd: 2.0,
            intercept: -1.0,
            noise_sd: 1.0,
            tau: 1.0,
            threshold: 0.5,
            n_theta_axis: vec![1_000, 10_000, 100_000],
            mc_batch_size: 10,
            replications: 20,
            min_wins: 18,
            m_axis: vec![1, 10, 100, 1000],
            grid_points: 120_001,
            seed: 0,
        }
    }
}

impl TwoStageConfig {
    pub fn model(&self) -> Result<LinearGaussianModel> {
        LinearGaussianModel::scalar(1.0, self.intercept, self.noise_sd, self.prior_sd)
    }
}

pub(crate) struct Population<'a> {
    pub model: &'a LinearGaussianModel,
    pub fit: &'a SurrogateFit,
    pub grid: &'a QuadratureGrid,
}

impl Population<'_> {
    pub fn phi_m<H: Fn(&[f64]) -> f64>(&self, m: usize, tau: f64, h: H) -> Result<f64> {
        phi_functional(self.grid, |t| l_m_gaussian(analytic_mu_v(self.model, t, self.fit)?, m, tau), h)
    }

    pub fn phi_inf<H: Fn(&[f64]) -> f64>(&self, tau: f64, h: H) -> Result<f64> {
        phi_functional(self.grid, |t| l_infinity(analytic_mu_v(self.model, t, self.fit)?.mu, tau), h)
    }

    pub fn z_m(&self, m: usize, tau: f64) -> Result<f64> {
        normalizer(self.grid, |t| l_m_gaussian(analytic_mu_v(self.model, t, self.fit)?, m, tau))
    }

    /// `sup v` over the grid.
    pub fn v_sup(&self) -> Result<f64> {
        let mut v = 0.0f64;
        for t in self.grid.nodes() {
            v = v.max(analytic_mu_v(self.model, t, self.fit)?.v);
        }
        Ok(v)
    }
}

pub(crate) fn grid_1d(prior_sd: f64, points: usize) -> Result<QuadratureGrid> {
    QuadratureGrid::gaussian_box(&[0.0], &[prior_sd], 6.0, points)
}

pub fn two_stage_study(cfg: &TwoStageConfig, threads: usize) -> Result<ExperimentReport> {
    let model = cfg.model()?;
    let fit = SurrogateFit::from_coefficients(vec![0.0, 0.0])?;
    let grid = grid_1d(cfg.prior_sd, cfg.grid_points)?;
    let pop = Population { model: &model, fit: &fit, grid: &grid };
    let threshold = cfg.threshold;
    let h = move |t: &[f64]| if t[0] > threshold { 1.0 } else { 0.0 };
    let mut report = ExperimentReport::new("two-stage", cfg);

    // Stage 1: Monte Carlo error against the quadrature Φ_M at fixed M.
    // Skipped when there is no n_θ axis or no replication.
    if !cfg.n_theta_axis.is_empty() && cfg.replications > 0 {
        let phi_target = pop.phi_m(cfg.mc_batch_size, cfg.tau, h)?;
        let coarse = grid_1d(cfg.prior_sd, cfg.grid_points.div_ceil(2))?;
        let coarse_phi = Population { grid: &coarse, ..pop }.phi_m(cfg.mc_batch_size, cfg.tau, h)?;
        report.metric("phi_m_target", phi_target);
        report.metric("quadrature_refinement_change", (phi_target - coarse_phi).abs());

        let axis = &cfg.n_theta_axis;
        let cells = cfg.replications * axis.len();
        let estimates = try_map_indexed(cells, 1, |i| {
            let (rep, k) = (i / axis.len(), i % axis.len());
            let seed = derive_seed(cfg.seed, &[domain::REPLICATION, rep as u64, axis[k] as u64]);
            let cc = CalibrationConfig::new(axis[k], cfg.mc_batch_size, cfg.tau, seed)?.with_max_parallel(threads);
            expectation(&run_calibration(&model, &fit, &cc)?, h)
        })?;
        let mut mc = Table::new(&["replication", "n_theta", "phi_hat", "abs_error"]);
        for (i, phi_hat) in estimates.iter().enumerate() {
            let (rep, k) = (i / axis.len(), i % axis.len());
            mc.push(&[rep as f64, axis[k] as f64, *phi_hat, (phi_hat - phi_target).abs()]);
        }
        let errors = mc.column("abs_error").unwrap().to_vec();
        let mut medians = Table::new(&["n_theta", "median_abs_error"]);
        let mut med = Vec::new();
        for (k, &n) in axis.iter().enumerate() {
            let e: Vec<f64> = errors.iter().skip(k).step_by(axis.len()).copied().collect();
            let m = median_of(&e);
            medians.push(&[n as f64, m]);
            med.push(m);
        }
        let last = axis.len() - 1;
        let wins = (0..cfg.replications).filter(|r| errors[r * axis.len() + last] < errors[r * axis.len()]).count();
        report.metric("replications_last_below_first", wins as f64);
        report.table("mc", mc);
        report.table("mc_median", medians);
        report.flag("mc_median_error_decreasing", strictly_decreasing(&med), &["mc_median"]);
        report.flag("mc_error_shrinks_in_most_replications", wins >= cfg.min_wins, &["replications_last_below_first", "mc"]);
    }

    // Stage 2: quadrature Φ_M against Φ_∞ along M.
    let phi_inf = pop.phi_inf(cfg.tau, h)?;
    let v_sup = pop.v_sup()?;
    let mut rate = Table::new(&["m", "phi_m", "phi_inf", "gap", "z_m", "gap_bound", "phi_bound"]);
    let mut gaps = Vec::new();
    let mut bound_ok = true;
    for &m in &cfg.m_axis {
        let phi_m = pop.phi_m(m, cfg.tau, h)?;
        let z = pop.z_m(m, cfg.tau)?;
        let gap_bound = uniform_gap_bound(v_sup, cfg.tau, m)?;
        let bound = phi_difference_bound(1.0, z, gap_bound)?;
        let gap = (phi_m - phi_inf).abs();
        bound_ok &= gap <= bound;
        gaps.push(gap);
        rate.push(&[m as f64, phi_m, phi_inf, gap, z, gap_bound, bound]);
    }
    // Gaps below the quadrature tolerance carry no rate information.
    let mut linear = true;
    let mut ratios = Table::new(&["m", "m_next", "gap_ratio", "m_ratio"]);
    for i in 1..cfg.m_axis.len() {
        let m_ratio = cfg.m_axis[i] as f64 / cfg.m_axis[i - 1] as f64;
        let g_ratio = gaps[i - 1] / gaps[i];
        ratios.push(&[cfg.m_axis[i - 1] as f64, cfg.m_axis[i] as f64, g_ratio, m_ratio]);
        if gaps[i] > QUADRATURE_TOLERANCE {
            linear &= g_ratio >= m_ratio / 2.0;
        }
    }
    report.metric("v_sup", v_sup);
    report.table("m_axis", rate);
    report.table("m_ratio", ratios);
    report.flag("phi_gap_within_bound", bound_ok, &["m_axis"]);
    report.flag("phi_gap_at_least_linear", linear, &["m_ratio"]);
    Ok(report)
}
