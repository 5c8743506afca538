//! Concentration of the population and empirical pseudo-posteriors on
//! `U = {μ°² < ε}` as `M → ∞`, `τ → 0` with `Mτ² → ∞`, against a control
//! with `τ` held fixed.

use pseudopost_core::population::{laplace_ratio_envelope, ConcentrationBoundParams};
use pseudopost_core::simulators::{analytic_mu_v, BatchSampling, LinearGaussianModel};
use pseudopost_core::{expectation, run_calibration, CalibrationConfig, Error, Result, SurrogateFit};
use serde::{Deserialize, Serialize};

use super::two_stage::{grid_1d, Population};
use super::{nondecreasing, ExperimentReport, Table};

/// The same one-dimensional model as the two-stage study (`μ° = θ + intercept`,
/// `v° = noise_sd²`), with batch means drawn exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConcentrationConfig {
    pub prior_sd: f64,
    pub intercept: f64,
    pub noise_sd: f64,
    pub epsilon: f64,
    /// `M_k = 4^k`, `τ_k = 2^{−k/2}` for `k` in this list.
    pub k_values: Vec<u32>,
    pub control_tau: f64,
    pub n_theta: usize,
    pub grid_points: usize,
    pub quadrature_target: f64,
    pub empirical_target: f64,
    pub control_margin: f64,
    pub seed: u64,
}

impl Default for ConcentrationConfig {
    fn default() -> Self {
        Self {
            prior_sd: 2.0,
            intercept: -1.0,
            noise_sd: 1.0,
            epsilon: 0.04,
            k_values: (1..=8).collect(),
            control_tau: 0.5,
            n_theta: 100_000,
            grid_points: 120_001,
            quadrature_target: 0.99,
            empirical_target: 0.98,
            control_margin: 0.05,
            seed: 0,
        }
    }
}

impl ConcentrationConfig {
    pub fn schedule(&self) -> Vec<(usize, f64)> {
        self.k_values.iter().map(|&k| (4usize.pow(k), 2f64.powf(-(k as f64) / 2.0))).collect()
    }
}

/// Fails with `ScheduleViolation` unless `M_k τ_k²` strictly increases.
pub fn check_schedule(schedule: &[(usize, f64)]) -> Result<()> {
    for (i, w) in schedule.windows(2).enumerate() {
        let a = w[0].0 as f64 * w[0].1 * w[0].1;
        let b = w[1].0 as f64 * w[1].1 * w[1].1;
        if !(b > a) {
            return Err(Error::ScheduleViolation { step: i + 1 });
        }
    }
    Ok(())
}

pub fn concentration_study(cfg: &ConcentrationConfig, threads: usize) -> Result<ExperimentReport> {
    let schedule = cfg.schedule();
    if schedule.is_empty() {
        return Err(Error::EmptyInput);
    }
    check_schedule(&schedule)?;
    let model = LinearGaussianModel::scalar(1.0, cfg.intercept, cfg.noise_sd, cfg.prior_sd)?
        .with_batch_sampling(BatchSampling::ExactMean);
    let fit = SurrogateFit::from_coefficients(vec![0.0, 0.0])?;
    let grid = grid_1d(cfg.prior_sd, cfg.grid_points)?;
    let pop = Population { model: &model, fit: &fit, grid: &grid };
    let eps = cfg.epsilon;
    let in_u = |t: &[f64]| {
        let mu = analytic_mu_v(&model, t, &fit).map(|p| p.mu).unwrap_or(f64::INFINITY);
        if mu * mu < eps { 1.0 } else { 0.0 }
    };
    let v = cfg.noise_sd * cfg.noise_sd;

    let mut table = Table::new(&[
        "k", "m", "tau", "m_tau_sq", "pi_u", "emp_u", "control_pi_u", "control_emp_u", "envelope",
    ]);
    let (mut pi, mut emp, mut ctrl_pi, mut ctrl_emp) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (&k, &(m, tau)) in cfg.k_values.iter().zip(&schedule) {
        // Common draws across the schedule: the same seed at every step.
        let run = |tau: f64| -> Result<f64> {
            let cc = CalibrationConfig::new(cfg.n_theta, m, tau, cfg.seed)?.with_max_parallel(threads);
            expectation(&run_calibration(&model, &fit, &cc)?, in_u)
        };
        let p = pop.phi_m(m, tau, in_u)?;
        let e = run(tau)?;
        let cp = pop.phi_m(m, cfg.control_tau, in_u)?;
        let ce = run(cfg.control_tau)?;
        let envelope = if v > 0.0 {
            ConcentrationBoundParams::new(eps, v, v, tau, m).and_then(|b| laplace_ratio_envelope(&b)).unwrap_or(f64::NAN)
        } else {
            f64::NAN
        };
        table.push(&[k as f64, m as f64, tau, m as f64 * tau * tau, p, e, cp, ce, envelope]);
        pi.push(p);
        emp.push(e);
        ctrl_pi.push(cp);
        ctrl_emp.push(ce);
    }
    let last = |v: &[f64]| *v.last().unwrap();
    let mut report = ExperimentReport::new("concentration", cfg);
    report.metric("final_pi_u", last(&pi));
    report.metric("final_emp_u", last(&emp));
    report.metric("final_control_pi_u", last(&ctrl_pi));
    report.metric("max_control_pi_u", ctrl_pi.iter().copied().fold(0.0, f64::max));
    report.metric("final_control_emp_u", last(&ctrl_emp));
    report.table("schedule", table);
    report.flag("pi_u_nondecreasing", nondecreasing(&pi), &["schedule"]);
    report.flag("emp_u_nondecreasing", nondecreasing(&emp), &["schedule"]);
    report.flag("pi_u_reaches_target", last(&pi) >= cfg.quadrature_target, &["final_pi_u"]);
    report.flag("emp_u_reaches_target", last(&emp) >= cfg.empirical_target, &["final_emp_u"]);
    report.flag(
        "control_stays_below",
        ctrl_pi.iter().all(|&c| c <= last(&pi) - cfg.control_margin) && last(&ctrl_pi) < cfg.quadrature_target,
        &["schedule", "final_pi_u", "max_control_pi_u"],
    );
    Ok(report)
}
