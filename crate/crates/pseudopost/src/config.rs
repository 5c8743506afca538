//! JSON configuration documents, one per command.

use std::path::{Path, PathBuf};

use pseudopost_core::simulators::{BatchSampling, LinearGaussianModel, ParameterPoint, Simulator, ToyModel};
use pseudopost_core::{Stream, SurrogateFit};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{AppError, AppResult};

/// `{"model": "toy" | "linear_gaussian", ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Toy {
        #[serde(default = "toy_prior_sd")]
        prior_sd: f64,
        #[serde(default = "toy_logx_sd")]
        logx_sd: f64,
        #[serde(default = "one")]
        noise_sd: f64,
        #[serde(default = "toy_prior_sd")]
        logx_mean_divisor: f64,
    },
    LinearGaussian {
        a: Vec<f64>,
        #[serde(default)]
        b: f64,
        c: Vec<f64>,
        x_mean: Vec<f64>,
        /// Row-major `d × d`.
        x_cov: Vec<f64>,
        noise_sd: f64,
        #[serde(default)]
        noise_growth: f64,
        prior_mean: Vec<f64>,
        prior_sd: Vec<f64>,
        #[serde(default)]
        exact_mean: bool,
    },
}

fn toy_prior_sd() -> f64 {
    5.0
}

fn toy_logx_sd() -> f64 {
    0.5
}

fn one() -> f64 {
    1.0
}

impl Default for ModelConfig {
    fn default() -> Self {
        let t = ToyModel::default();
        Self::Toy { prior_sd: t.prior_sd, logx_sd: t.logx_sd, noise_sd: t.noise_sd, logx_mean_divisor: t.logx_mean_divisor }
    }
}

impl ModelConfig {
    pub fn build(&self) -> pseudopost_core::Result<AnyModel> {
        Ok(match self {
            Self::Toy { prior_sd, logx_sd, noise_sd, logx_mean_divisor } => {
                AnyModel::Toy(ToyModel::new(*prior_sd, *logx_sd, *noise_sd, *logx_mean_divisor)?)
            }
            Self::LinearGaussian { a, b, c, x_mean, x_cov, noise_sd, noise_growth, prior_mean, prior_sd, exact_mean } => {
                let m = LinearGaussianModel::new(
                    a.clone(),
                    *b,
                    c.clone(),
                    x_mean.clone(),
                    x_cov.clone(),
                    *noise_sd,
                    prior_mean.clone(),
                    prior_sd.clone(),
                )?
                .with_noise_growth(*noise_growth)?;
                let mode = if *exact_mean { BatchSampling::ExactMean } else { BatchSampling::Pairwise };
                AnyModel::LinearGaussian(m.with_batch_sampling(mode))
            }
        })
    }
}

/// A configured simulator of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyModel {
    Toy(ToyModel),
    LinearGaussian(LinearGaussianModel),
}

impl Simulator for AnyModel {
    fn param_dim(&self) -> usize {
        match self {
            Self::Toy(m) => m.param_dim(),
            Self::LinearGaussian(m) => m.param_dim(),
        }
    }

    fn covariate_dim(&self) -> usize {
        match self {
            Self::Toy(m) => m.covariate_dim(),
            Self::LinearGaussian(m) => m.covariate_dim(),
        }
    }

    fn draw_prior(&self, stream: &mut Stream) -> ParameterPoint {
        match self {
            Self::Toy(m) => m.draw_prior(stream),
            Self::LinearGaussian(m) => m.draw_prior(stream),
        }
    }

    fn simulate_pair(&self, theta: &[f64], x: &mut [f64], stream: &mut Stream) -> pseudopost_core::Result<f64> {
        match self {
            Self::Toy(m) => m.simulate_pair(theta, x, stream),
            Self::LinearGaussian(m) => m.simulate_pair(theta, x, stream),
        }
    }

    fn batch_residual(
        &self,
        theta: &[f64],
        fit: &SurrogateFit,
        batch_size: usize,
        stream: &mut Stream,
    ) -> pseudopost_core::Result<f64> {
        match self {
            Self::Toy(m) => m.batch_residual(theta, fit, batch_size, stream),
            Self::LinearGaussian(m) => m.batch_residual(theta, fit, batch_size, stream),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default = "toy_theta_true")]
    pub theta_true: Vec<f64>,
    #[serde(default = "toy_n_obs")]
    pub n_obs: usize,
    #[serde(default)]
    pub seed: u64,
}

fn toy_theta_true() -> Vec<f64> {
    vec![2.0, 2.0]
}

fn toy_n_obs() -> usize {
    200
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { model: ModelConfig::default(), theta_true: toy_theta_true(), n_obs: toy_n_obs(), seed: 0 }
    }
}

/// How the calibration bandwidth is chosen when not given explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    /// `√(σ̂² / M)` from the surrogate fit's residual variance.
    ResidualScale,
    /// Half the standard deviation of batch residuals over 200 prior
    /// predictive pilot draws.
    PilotSd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateConfig {
    /// Surrogate fit JSON; relative paths resolve against the config file.
    #[serde(default)]
    pub fit: Option<PathBuf>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default = "default_n_theta")]
    pub n_theta: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    /// Fixed `τ`. When absent, `bandwidth_rule` picks it.
    #[serde(default)]
    pub bandwidth: Option<f64>,
    #[serde(default = "default_rule")]
    pub bandwidth_rule: BandwidthRule,
    #[serde(default)]
    pub seed: u64,
}

fn default_n_theta() -> usize {
    50_000
}

fn default_batch_size() -> usize {
    50
}

fn default_rule() -> BandwidthRule {
    BandwidthRule::ResidualScale
}

impl Default for CalibrateConfig {
    fn default() -> Self {
        Self {
            fit: None,
            model: ModelConfig::default(),
            n_theta: default_n_theta(),
            batch_size: default_batch_size(),
            bandwidth: None,
            bandwidth_rule: default_rule(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    /// Toy dataset CSV; relative paths resolve against the config file.
    #[serde(default)]
    pub data: Option<PathBuf>,
    #[serde(default = "default_n_iter")]
    pub n_iter: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_step_sd")]
    pub step_sd: f64,
    #[serde(default = "default_init")]
    pub init: Vec<f64>,
    #[serde(default)]
    pub tune: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_n_iter() -> usize {
    40_000
}

fn default_burn_in() -> usize {
    5_000
}

fn default_step_sd() -> f64 {
    0.1
}

fn default_init() -> Vec<f64> {
    vec![0.0, 0.0]
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self {
            data: None,
            n_iter: default_n_iter(),
            burn_in: default_burn_in(),
            step_sd: default_step_sd(),
            init: default_init(),
            tune: false,
            seed: 0,
        }
    }
}

/// Reads a JSON document, reporting parse errors against `path`.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> AppResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| AppError::config(path, e))
}

/// Resolves `p` against the directory holding `config_path`.
pub fn resolve(config_path: Option<&Path>, p: &Path) -> PathBuf {
    match config_path.and_then(Path::parent) {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p.to_path_buf(),
    }
}
