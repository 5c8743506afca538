//! Sensitivity of the pseudo-posterior to the estimated projection: the same
//! prior draws and simulated batches are weighted under `β̂_n` and under the
//! population projection `β°`, for growing observed samples.

use pseudopost_core::simulators::{generate_observed, LinearGaussianModel};
use pseudopost_core::stream::{derive_seed, domain, Substreams};
use pseudopost_core::surrogate::fit_ols;
use pseudopost_core::{expectation, run_calibration, CalibrationConfig, Dataset, Error, Result};
use serde::{Deserialize, Serialize};

use super::{median_of, nonincreasing, ExperimentReport, Table};

/// `Y = θ + b + c·X + ε`, `X ~ N(x_mean, x_var)`, `θ ~ N(0, prior_sd²)`; the
/// observed data come from `θ_true`, and `h = tanh`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityConfig {
    pub theta_true: f64,
    pub b: f64,
    pub c: f64,
    pub x_mean: f64,
    pub x_var: f64,
    pub noise_sd: f64,
    pub prior_sd: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub n_theta: usize,
    pub n_obs_axis: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self {
            theta_true: 0.3,
            b: 0.5,
            c: 1.0,
            x_mean: 1.0,
            x_var: 1.0,
            noise_sd: 1.0,
            prior_sd: 1.0,
            tau: 0.5,
            batch_size: 10,
            n_theta: 10_000,
            n_obs_axis: vec![50, 200, 2_000, 20_000],
            replications: 20,
            seed: 0,
        }
    }
}

impl StabilityConfig {
    pub fn model(&self) -> Result<LinearGaussianModel> {
        LinearGaussianModel::new(
            vec![1.0],
            self.b,
            vec![self.c],
            vec![self.x_mean],
            vec![self.x_var],
            self.noise_sd,
            vec![0.0],
            vec![self.prior_sd],
        )
    }
}

fn prefix(data: &Dataset, n: usize) -> Result<Dataset> {
    Dataset::new(data.xs()[..n].to_vec(), data.ys()[..n].to_vec())
}

pub fn stability_study(cfg: &StabilityConfig, threads: usize) -> Result<ExperimentReport> {
    let model = cfg.model()?;
    let n_max = cfg.n_obs_axis.iter().copied().max().ok_or(Error::EmptyInput)?;
    let beta_pop = model.best_projection(&[cfg.theta_true])?;
    let h = |t: &[f64]| t[0].tanh();
    let observed = Substreams::new(cfg.seed, domain::OBSERVED);

    let mut table = Table::new(&["replication", "n_obs", "beta_0", "beta_1", "phi_hat", "phi_hat_ref", "abs_diff"]);
    let mut diffs = vec![Vec::new(); cfg.n_obs_axis.len()];
    for rep in 0..cfg.replications {
        let data = generate_observed(&model, &[cfg.theta_true], n_max, &mut observed.stream(rep as u64))?;
        let seed = derive_seed(cfg.seed, &[domain::REPLICATION, rep as u64]);
        let cc = CalibrationConfig::new(cfg.n_theta, cfg.batch_size, cfg.tau, seed)?.with_max_parallel(threads);
        let reference = expectation(&run_calibration(&model, &beta_pop, &cc)?, h)?;
        for (k, &n) in cfg.n_obs_axis.iter().enumerate() {
            let fit = fit_ols(&prefix(&data, n)?)?;
            let phi = expectation(&run_calibration(&model, &fit, &cc)?, h)?;
            let d = (phi - reference).abs();
            diffs[k].push(d);
            table.push(&[rep as f64, n as f64, fit.beta[0], fit.beta[1], phi, reference, d]);
        }
    }
    let mut medians = Table::new(&["n_obs", "median_abs_diff"]);
    let med: Vec<f64> = diffs.iter().map(|d| median_of(d)).collect();
    for (n, m) in cfg.n_obs_axis.iter().zip(&med) {
        medians.push(&[*n as f64, *m]);
    }
    let mut report = ExperimentReport::new("stability", cfg);
    report.metric("beta_pop_0", beta_pop.beta[0]);
    report.metric("beta_pop_1", beta_pop.beta[1]);
    report.table("replications", table);
    report.table("median", medians);
    report.flag("median_diff_nonincreasing", nonincreasing(&med), &["median"]);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use pseudopost_core::SurrogateFit;

    #[test]
    fn matched_seeds_give_zero_difference_at_the_population_projection() {
        let cfg = StabilityConfig::default();
        let model = cfg.model().unwrap();
        let beta = model.best_projection(&[cfg.theta_true]).unwrap();
        let copy = SurrogateFit::from_coefficients(beta.beta.clone()).unwrap();
        let cc = CalibrationConfig::new(500, 10, 0.5, 3).unwrap();
        let a = expectation(&run_calibration(&model, &beta, &cc).unwrap(), |t| t[0].tanh()).unwrap();
        let b = expectation(&run_calibration(&model, &copy, &cc).unwrap(), |t| t[0].tanh()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn constant_h_has_no_difference() {
        let cfg = StabilityConfig::default();
        let model = cfg.model().unwrap();
        let other = SurrogateFit::from_coefficients(vec![0.1, 0.7]).unwrap();
        let cc = CalibrationConfig::new(500, 10, 0.5, 3).unwrap();
        let v = expectation(&run_calibration(&model, &other, &cc).unwrap(), |_| 1.0).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn small_study_runs() {
        let cfg = StabilityConfig { n_theta: 500, replications: 3, n_obs_axis: vec![50, 5000], ..Default::default() };
        let r = stability_study(&cfg, 1).unwrap();
        assert_eq!(r.tables["replications"].rows(), 6);
        assert!(r.dangling_sources().is_empty());
    }
}
