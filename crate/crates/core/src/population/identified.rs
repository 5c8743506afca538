use alloc::vec::Vec;

use super::estimate_moment_profile;
use crate::math::median;
use crate::parallel::try_map_indexed;
use crate::simulators::{ParameterPoint, Simulator};
use crate::stream::{domain, Substreams};
use crate::surrogate::SurrogateFit;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    /// Pairs simulated per grid point.
    pub n_sim: usize,
    /// Membership threshold on `μ̂²`. `None` uses [`default_scan_tolerance`].
    pub tolerance: Option<f64>,
    pub seed: u64,
    pub max_parallel: usize,
}

impl ScanConfig {
    pub fn new(n_sim: usize, seed: u64) -> Self {
        Self { n_sim, tolerance: None, seed, max_parallel: 1 }
    }
}

/// Grid points whose estimated `μ°(θ)²` is within `tolerance` of zero.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentifiedSetScan {
    pub grid: Vec<ParameterPoint>,
    pub mu_hat: Vec<f64>,
    pub mu_sq: Vec<f64>,
    pub v_hat: Vec<f64>,
    pub tolerance: f64,
    pub members: Vec<usize>,
}

impl IdentifiedSetScan {
    pub fn is_member(&self, i: usize) -> bool {
        self.mu_sq[i] <= self.tolerance
    }
}

/// `9 · v̂ / n_sim`: the squared three-sigma band of the mean estimator.
pub fn default_scan_tolerance(v_hat: f64, n_sim: usize) -> f64 {
    9.0 * v_hat / n_sim as f64
}

/// Estimates `μ°(θ)` at every grid point from `n_sim` fresh pairs. Point `i`
/// uses its own substream, so the result does not depend on `max_parallel`.
///
/// Without an explicit tolerance the default is applied to the median `v̂`
/// over the grid.
pub fn scan_identified_set<S: Simulator + ?Sized>(
    model: &S,
    fit: &SurrogateFit,
    grid: &[ParameterPoint],
    config: &ScanConfig,
) -> Result<IdentifiedSetScan> {
    if grid.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(t) = config.tolerance {
        if t.is_nan() || t < 0.0 {
            return Err(Error::InvalidConfig("scan tolerance must be >= 0".into()));
        }
    }
    let family = Substreams::new(config.seed, domain::SCAN);
    let profiles = try_map_indexed(grid.len(), config.max_parallel, |i| {
        estimate_moment_profile(model, &grid[i], fit, config.n_sim, &mut family.stream(i as u64))
    })?;
    let mu_hat: Vec<f64> = profiles.iter().map(|p| p.mu).collect();
    let v_hat: Vec<f64> = profiles.iter().map(|p| p.v).collect();
    let mu_sq: Vec<f64> = mu_hat.iter().map(|m| m * m).collect();
    let tolerance = match config.tolerance {
        Some(t) => t,
        None => default_scan_tolerance(median(&v_hat).unwrap_or(0.0), config.n_sim),
    };
    let members = (0..grid.len()).filter(|&i| mu_sq[i] <= tolerance).collect();
    Ok(IdentifiedSetScan { grid: grid.to_vec(), mu_hat, mu_sq, v_hat, tolerance, members })
}
