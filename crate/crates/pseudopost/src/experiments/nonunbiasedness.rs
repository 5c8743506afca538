//! A bounded test function whose finite-`M` population functional differs
//! from the large-`M` limit when the residual variance depends on `θ`.

use pseudopost_core::simulators::LinearGaussianModel;
use pseudopost_core::{Result, SurrogateFit};
use serde::{Deserialize, Serialize};

use super::two_stage::{grid_1d, Population};
use super::{ExperimentReport, Table, QUADRATURE_TOLERANCE};

/// `θ ~ N(0, prior_sd²)`, `μ(θ) = θ`, `v(θ) = noise_sd² · exp(noise_growth · θ)`.
/// Test functions are half-space indicators `1{θ > c}` over `cutoffs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NonUnbiasednessConfig {
    pub prior_sd: f64,
    pub noise_sd: f64,
    pub noise_growth: f64,
    pub tau: f64,
    pub m_small: usize,
    pub m_large: usize,
    pub cutoff_min: f64,
    pub cutoff_max: f64,
    pub cutoff_count: usize,
    pub grid_points: usize,
}

impl Default for NonUnbiasednessConfig {
    fn default() -> Self {
        Self {
            prior_sd: 1.0,
            noise_sd: 1.0,
            noise_growth: 1.0,
            tau: 1.0,
            m_small: 1,
            m_large: 10_000,
            cutoff_min: -3.0,
            cutoff_max: 3.0,
            cutoff_count: 121,
            grid_points: 120_001,
        }
    }
}

pub fn nonunbiasedness_check(cfg: &NonUnbiasednessConfig) -> Result<ExperimentReport> {
    let model = LinearGaussianModel::scalar(1.0, 0.0, cfg.noise_sd, cfg.prior_sd)?.with_noise_growth(cfg.noise_growth)?;
    let fit = SurrogateFit::from_coefficients(vec![0.0, 0.0])?;
    let grid = grid_1d(cfg.prior_sd, cfg.grid_points)?;
    let coarse = grid_1d(cfg.prior_sd, cfg.grid_points.div_ceil(2))?;
    let pop = Population { model: &model, fit: &fit, grid: &grid };
    let pop_coarse = Population { grid: &coarse, ..pop };

    let n = cfg.cutoff_count.max(2);
    let cutoffs: Vec<f64> =
        (0..n).map(|i| cfg.cutoff_min + (cfg.cutoff_max - cfg.cutoff_min) * i as f64 / (n - 1) as f64).collect();
    let mut table = Table::new(&["cutoff", "phi_small", "phi_large", "phi_inf", "gap_small", "gap_large"]);
    let (mut best, mut best_c, mut worst_large, mut refinement) = (0.0f64, f64::NAN, 0.0f64, 0.0f64);
    for &c in &cutoffs {
        let h = move |t: &[f64]| if t[0] > c { 1.0 } else { 0.0 };
        let small = pop.phi_m(cfg.m_small, cfg.tau, h)?;
        let large = pop.phi_m(cfg.m_large, cfg.tau, h)?;
        let inf = pop.phi_inf(cfg.tau, h)?;
        let gs = small - inf;
        let gl = large - inf;
        if gs.abs() > best.abs() {
            best = gs;
            best_c = c;
        }
        worst_large = worst_large.max(gl.abs());
        refinement = refinement.max((pop_coarse.phi_m(cfg.m_small, cfg.tau, h)? - small).abs());
        table.push(&[c, small, large, inf, gs, gl]);
    }
    // The prior median is 0.
    let at_median = {
        let h = |t: &[f64]| if t[0] > 0.0 { 1.0 } else { 0.0 };
        pop.phi_m(cfg.m_small, cfg.tau, h)? - pop.phi_inf(cfg.tau, h)?
    };
    let v_sup = pop.v_sup()?;
    let v_min = grid.nodes().map(|t| model.noise_variance(t)).fold(f64::INFINITY, f64::min);

    let mut report = ExperimentReport::new("nonunbiasedness", cfg);
    report.metric("quadrature_tolerance", QUADRATURE_TOLERANCE);
    report.metric("quadrature_refinement_change", refinement);
    report.metric("best_gap_small", best);
    report.metric("best_cutoff", best_c);
    report.metric("max_gap_large", worst_large);
    report.metric("signed_gap_at_median", at_median);
    report.metric("v_sup", v_sup);
    report.table("half_spaces", table);
    if v_sup == 0.0 {
        report.flag("identical", best.abs() <= QUADRATURE_TOLERANCE, &["best_gap_small"]);
    } else {
        report.flag("gap_exceeds_tolerance_at_m_small", best.abs() > 5.0 * QUADRATURE_TOLERANCE, &["best_gap_small", "quadrature_tolerance"]);
        report.flag("gap_below_tolerance_at_m_large", worst_large < QUADRATURE_TOLERANCE, &["max_gap_large", "quadrature_tolerance"]);
        report.flag("quadrature_resolved", refinement < QUADRATURE_TOLERANCE, &["quadrature_refinement_change", "quadrature_tolerance"]);
        report.metric("v_min", v_min);
    }
    Ok(report)
}
