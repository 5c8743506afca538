//! The nonlinear toy model end to end: observed data at `θ_true`, OLS
//! surrogate, calibration, a `μ̂°` scan of the particles, a flat-kernel
//! control, and RWMH reference chains over replicated datasets.

use pseudopost_core::mcmc::{chain_summary, rwmh, MhConfig, ToyPosterior, TuneConfig};
use pseudopost_core::parallel::try_map_indexed;
use pseudopost_core::population::{scan_identified_set, ScanConfig};
use pseudopost_core::simulators::{generate_observed, ParameterPoint, ToyModel};
use pseudopost_core::stream::{derive_seed, domain, Substreams};
use pseudopost_core::surrogate::fit_ols;
use pseudopost_core::{effective_sample_size, run_calibration, CalibrationConfig, Error, Result};
use serde::{Deserialize, Serialize};

use super::{choose_bandwidth, median_of, ExperimentReport, Table};
use crate::config::BandwidthRule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyExperimentConfig {
    pub theta_true: [f64; 2],
    pub n_obs: usize,
    pub n_theta: usize,
    pub batch_size: usize,
    /// Fixed `τ`; when absent `bandwidth_rule` picks it.
    pub tau: Option<f64>,
    pub bandwidth_rule: BandwidthRule,
    /// Bandwidth of the flat-kernel control.
    pub flat_tau: f64,
    /// Pairs per particle when estimating `μ̂°`.
    pub n_sim: usize,
    pub top_fraction: f64,
    /// Radius of the ball around `θ_true` (and the RWMH mode) searched for
    /// top-weight particles.
    pub truth_radius: f64,
    pub spread_tolerance: f64,
    pub concentration_ratio: f64,
    pub coverage_replications: usize,
    pub coverage_required: usize,
    pub credible_level: f64,
    pub mcmc_iterations: usize,
    pub mcmc_burn_in: usize,
    pub mcmc_step_sd: f64,
    pub mcmc_tune: bool,
    pub seed: u64,
}

impl Default for ToyExperimentConfig {
    fn default() -> Self {
        Self {
            theta_true: [2.0, 2.0],
            n_obs: 200,
            n_theta: 50_000,
            batch_size: 50,
            tau: None,
            bandwidth_rule: BandwidthRule::ResidualScale,
            flat_tau: 1e6,
            n_sim: 1_000,
            top_fraction: 0.1,
            truth_radius: 0.5,
            spread_tolerance: 0.1,
            concentration_ratio: 0.1,
            coverage_replications: 100,
            coverage_required: 95,
            credible_level: 0.99,
            mcmc_iterations: 40_000,
            mcmc_burn_in: 5_000,
            mcmc_step_sd: 0.1,
            mcmc_tune: true,
            seed: 0,
        }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

struct ChainOutcome {
    contains: bool,
    d2: f64,
    acceptance: f64,
    step_sd: f64,
    mean: [f64; 2],
    mode: [f64; 2],
}

fn reference_chain(model: ToyModel, cfg: &ToyExperimentConfig, rep: usize) -> Result<ChainOutcome> {
    let observed = Substreams::new(cfg.seed, domain::OBSERVED);
    let data = generate_observed(&model, &cfg.theta_true, cfg.n_obs, &mut observed.stream(rep as u64))?;
    let post = ToyPosterior::new(model, &data)?;
    let mut mh = MhConfig::toy_default(derive_seed(cfg.seed, &[domain::MCMC, rep as u64]));
    mh.n_iter = cfg.mcmc_iterations;
    mh.burn_in = cfg.mcmc_burn_in;
    mh.step_sd = cfg.mcmc_step_sd;
    if cfg.mcmc_tune {
        mh = mh.with_tuning(TuneConfig::default());
    }
    let chain = rwmh(|t| post.log_posterior(t).unwrap_or(f64::NEG_INFINITY), &mh)?;
    let s = chain_summary(&chain)?;
    let best = chain
        .log_target_trace
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .ok_or(Error::EmptyChain)?;
    Ok(ChainOutcome {
        contains: s.gaussian_region_contains(&cfg.theta_true, cfg.credible_level)?,
        d2: s.mahalanobis_sq(&cfg.theta_true).unwrap_or(f64::INFINITY),
        acceptance: chain.acceptance_rate,
        step_sd: chain.step_sd,
        mean: [s.mean[0], s.mean[1]],
        mode: [chain.samples[best][0], chain.samples[best][1]],
    })
}

pub fn toy_experiment(cfg: &ToyExperimentConfig, threads: usize) -> Result<ExperimentReport> {
    let model = ToyModel::default();
    let observed = Substreams::new(cfg.seed, domain::OBSERVED);
    let data = generate_observed(&model, &cfg.theta_true, cfg.n_obs, &mut observed.stream(0))?;
    let fit = fit_ols(&data)?;
    let tau = match cfg.tau {
        Some(t) => t,
        None => choose_bandwidth(cfg.bandwidth_rule, &model, &fit, cfg.batch_size, cfg.seed)?,
    };
    let cc = CalibrationConfig::new(cfg.n_theta, cfg.batch_size, tau, cfg.seed)?.with_max_parallel(threads);
    let ps = run_calibration(&model, &fit, &cc)?;
    let flat = ps.reweighted(cfg.flat_tau)?;

    let mut report = ExperimentReport::new("toy", cfg);
    report.metric("tau", tau);
    report.metric("beta_0", fit.beta[0]);
    report.metric("beta_1", fit.beta[1]);
    report.metric("residual_variance", fit.residual_variance);
    report.metric("ess", effective_sample_size(&ps));
    report.metric("degenerate", ps.degenerate as u8 as f64);

    // μ̂° for every particle; the particles are prior draws.
    let grid: Vec<ParameterPoint> = ps.particles.iter().map(|p| p.theta.clone()).collect();
    let scan_cfg = ScanConfig { max_parallel: threads, ..ScanConfig::new(cfg.n_sim, cfg.seed) };
    let scan = scan_identified_set(&model, &fit, &grid, &scan_cfg)?;
    let order = ps.indices_by_weight();
    let n_top = ((cfg.top_fraction * ps.len() as f64).ceil() as usize).clamp(1, ps.len());
    let top = &order[..n_top];
    let prior_mean_mu_sq = scan.mu_sq.iter().sum::<f64>() / scan.mu_sq.len() as f64;
    let top_mu_sq: Vec<f64> = top.iter().map(|&i| scan.mu_sq[i]).collect();
    let top_mean_mu_sq = top_mu_sq.iter().sum::<f64>() / n_top as f64;
    let top_v: Vec<f64> = top.iter().map(|&i| scan.v_hat[i]).collect();
    let manifold_tol = 9.0 * median_of(&top_v) / cfg.n_sim as f64;
    let on_manifold = top_mu_sq.iter().filter(|&&m| m <= manifold_tol).count();
    let near_truth = top.iter().filter(|&&i| dist(&ps.particles[i].theta, &cfg.theta_true) <= cfg.truth_radius).count();

    let mut top_table = Table::new(&["theta_1", "theta_2", "w", "mu_hat", "mu_sq"]);
    for &i in top {
        let p = &ps.particles[i];
        top_table.push(&[p.theta[0], p.theta[1], p.weight, scan.mu_hat[i], scan.mu_sq[i]]);
    }
    report.metric("n_top", n_top as f64);
    report.metric("prior_mean_mu_sq", prior_mean_mu_sq);
    report.metric("top_mean_mu_sq", top_mean_mu_sq);
    report.metric("top_to_prior_mu_sq_ratio", top_mean_mu_sq / prior_mean_mu_sq);
    report.metric("top_max_mu_sq", top_mu_sq.iter().copied().fold(0.0, f64::max));
    report.metric("manifold_tolerance", manifold_tol);
    report.metric("manifold_fraction", on_manifold as f64 / n_top as f64);
    report.metric("top_particles_near_truth", near_truth as f64);
    report.table("top_particles", top_table);

    // Spread per coordinate: calibrated, flat control, prior.
    let mut spread = Table::new(&["coordinate", "prior_sd", "pseudo_sd", "flat_sd", "pseudo_ratio", "flat_ratio"]);
    let mut flat_ok = true;
    for k in 0..2 {
        let (_, sd) = ps.weighted_spread(k);
        let (_, fsd) = flat.weighted_spread(k);
        let prior = model.prior_sd;
        flat_ok &= (fsd / prior - 1.0).abs() <= cfg.spread_tolerance;
        spread.push(&[(k + 1) as f64, prior, sd, fsd, sd / prior, fsd / prior]);
    }
    report.table("spread", spread);

    // Reference chains: replication 0 uses the dataset above.
    let outcomes = try_map_indexed(cfg.coverage_replications.max(1), threads, |r| reference_chain(model, cfg, r))?;
    let mut coverage = Table::new(&["replication", "contains", "mahalanobis_sq", "acceptance_rate", "step_sd", "mean_1", "mean_2"]);
    for (r, o) in outcomes.iter().enumerate() {
        coverage.push(&[r as f64, o.contains as u8 as f64, o.d2, o.acceptance, o.step_sd, o.mean[0], o.mean[1]]);
    }
    let covered = outcomes.iter().take(cfg.coverage_replications).filter(|o| o.contains).count();
    let mode = outcomes[0].mode;
    let near_mode = top.iter().filter(|&&i| dist(&ps.particles[i].theta, &mode) <= cfg.truth_radius).count();
    report.metric("coverage_count", covered as f64);
    report.metric("mcmc_mode_1", mode[0]);
    report.metric("mcmc_mode_2", mode[1]);
    report.metric("top_particles_near_mode", near_mode as f64);
    report.table("coverage", coverage);

    report.flag("contains_truth_region", near_truth > 0, &["top_particles_near_truth"]);
    report.flag("weight_near_mcmc_mode", near_mode > 0, &["top_particles_near_mode"]);
    report.flag(
        "top_decile_concentrated",
        top_mean_mu_sq <= cfg.concentration_ratio * prior_mean_mu_sq,
        &["top_mean_mu_sq", "prior_mean_mu_sq"],
    );
    report.flag(
        "top_decile_within_9x_prior_mean",
        top_mu_sq.iter().all(|&m| m <= 9.0 * prior_mean_mu_sq),
        &["top_max_mu_sq", "prior_mean_mu_sq"],
    );
    report.flag("flat_kernel_recovers_prior_spread", flat_ok, &["spread"]);
    report.flag("mcmc_coverage", covered >= cfg.coverage_required, &["coverage_count", "coverage"]);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_is_reproducible() {
        let cfg = ToyExperimentConfig {
            n_theta: 2000,
            n_sim: 50,
            coverage_replications: 2,
            coverage_required: 0,
            mcmc_iterations: 3000,
            mcmc_burn_in: 500,
            ..Default::default()
        };
        let a = toy_experiment(&cfg, 1).unwrap();
        let b = toy_experiment(&cfg, 4).unwrap();
        assert_eq!(a, b);
        assert!(a.dangling_sources().is_empty());
        assert_eq!(a.tables["top_particles"].rows(), 200);
    }
}
