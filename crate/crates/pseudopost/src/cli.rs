//! `pseudopost` subcommands. Every command reads at most one JSON config,
//! writes its outputs atomically, and leaves a `<out>.manifest.json` beside
//! the primary output.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use pseudopost_core::mcmc::{chain_summary, rwmh, MhConfig, ToyPosterior, TuneConfig, SUMMARY_PROBS};
use pseudopost_core::simulators::{generate_observed, ParameterPoint, Simulator, ToyModel};
use pseudopost_core::stream::{domain, Substreams};
use pseudopost_core::surrogate::fit_ols;
use pseudopost_core::{effective_sample_size, run_calibration, CalibrationConfig};
use serde::{de::DeserializeOwned, Serialize};

use crate::config::{read_json, resolve, CalibrateConfig, ReferenceConfig, SimulateConfig};
use crate::error::{exit, AppError, AppResult};
use crate::experiments::{
    choose_bandwidth, concentration_study, nonunbiasedness_check, stability_study, toy_experiment, two_stage_study,
    ConcentrationConfig, ExperimentReport, NonUnbiasednessConfig, StabilityConfig, ToyExperimentConfig,
    TwoStageConfig,
};
use crate::formats::{chain_csv, dataset_csv, particles_csv, read_dataset, read_fit, to_json_pretty, FitFile, ParticlesFile};
use crate::manifest::{manifest_path, ManifestBuilder};

/// Environment fallback for `--threads`.
pub const THREADS_ENV: &str = "PSEUDOPOST_THREADS";

#[derive(Debug, Parser)]
#[command(name = "pseudopost", version, about = "Regression-projection pseudo-posterior inference")]
pub struct Cli {
    /// Worker threads. Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate an observed dataset at a fixed parameter.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Dataset CSV to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the OLS surrogate to a dataset.
    Fit {
        /// Dataset CSV.
        #[arg(long)]
        data: PathBuf,
        /// Fit JSON to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Weight prior draws by batched simulation under a fitted surrogate.
    Calibrate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Fit JSON; overrides the config's `fit`.
        #[arg(long)]
        fit: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Particle JSON to write; a CSV copy goes next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the RWMH reference chain on a toy dataset.
    Reference {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Dataset CSV; overrides the config's `data`.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Chain CSV to write; a summary JSON goes next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one of the scripted studies.
    Experiment {
        name: ExperimentName,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Kernel bandwidth override.
        #[arg(long)]
        tau: Option<f64>,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExperimentName {
    Toy,
    TwoStage,
    Stability,
    Concentration,
    Nonunbiasedness,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE } else { exit::OK };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn threads(flag: Option<usize>) -> usize {
    flag.or_else(|| std::env::var(THREADS_ENV).ok()?.trim().parse().ok())
        .or_else(|| std::thread::available_parallelism().ok().map(|n| n.get()))
        .unwrap_or(1)
        .max(1)
}

fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> AppResult<T> {
    match path {
        Some(p) => read_json(p),
        None => Ok(T::default()),
    }
}

fn config_err(path: Option<&Path>, e: impl ToString) -> AppError {
    AppError::config(path.map_or_else(|| PathBuf::from("<config>"), Path::to_path_buf), e)
}

fn sibling(out: &Path, ext: &str) -> PathBuf {
    out.with_extension(ext)
}

fn execute(cli: Cli) -> AppResult<i32> {
    let threads = threads(cli.threads);
    match cli.command {
        Command::Simulate { config, seed, out } => {
            let mut cfg: SimulateConfig = load(config.as_deref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let model = cfg.model.build().map_err(|e| config_err(config.as_deref(), e))?;
            let theta = ParameterPoint::new(cfg.theta_true.clone())?;
            let mut stream = Substreams::new(cfg.seed, domain::OBSERVED).stream(0);
            let data = generate_observed(&model, &theta, cfg.n_obs, &mut stream)?;
            let mut m = ManifestBuilder::new("simulate", &cfg, cfg.seed);
            if let Some(p) = &config {
                m.input(p)?;
            }
            m.write(&out, dataset_csv(&data).as_bytes())?;
            m.finish(&manifest_path(&out))?;
            println!("wrote {} rows to {}", data.len(), out.display());
            Ok(exit::OK)
        }
        Command::Fit { data, out } => {
            let dataset = read_dataset(&data)?;
            let fit = fit_ols(&dataset)?;
            let mut m = ManifestBuilder::new("fit", &serde_json::json!({}), 0);
            m.input(&data)?;
            m.write(&out, to_json_pretty(&FitFile::from(&fit)).as_bytes())?;
            m.finish(&manifest_path(&out))?;
            println!("beta = {:?}", fit.beta);
            Ok(exit::OK)
        }
        Command::Calibrate { config, fit, seed, out } => {
            let mut cfg: CalibrateConfig = load(config.as_deref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let fit_path = match (fit, &cfg.fit) {
                (Some(p), _) => p,
                (None, Some(p)) => resolve(config.as_deref(), p),
                (None, None) => return Err(AppError::Usage("calibrate needs a fit (--fit or config \"fit\")".into())),
            };
            let surrogate = read_fit(&fit_path)?;
            let model = cfg.model.build().map_err(|e| config_err(config.as_deref(), e))?;
            if surrogate.dim() != model.covariate_dim() {
                return Err(config_err(config.as_deref(), "fit dimension does not match the model's covariates"));
            }
            let tau = match cfg.bandwidth {
                Some(t) => t,
                None => choose_bandwidth(cfg.bandwidth_rule, &model, &surrogate, cfg.batch_size, cfg.seed)?,
            };
            let cc = CalibrationConfig::new(cfg.n_theta, cfg.batch_size, tau, cfg.seed)
                .map_err(|e| config_err(config.as_deref(), e))?
                .with_max_parallel(threads);
            let ps = run_calibration(&model, &surrogate, &cc)?;
            let effective = serde_json::json!({
                "config": cfg,
                "n_theta": cc.n_theta,
                "batch_size": cc.batch_size,
                "bandwidth": cc.bandwidth,
                "seed": cc.seed,
            });
            let mut m = ManifestBuilder::new("calibrate", &effective, cfg.seed);
            if let Some(p) = &config {
                m.input(p)?;
            }
            m.input(&fit_path)?;
            m.write(&out, to_json_pretty(&ParticlesFile::from(&ps)).as_bytes())?;
            m.write(&sibling(&out, "csv"), particles_csv(&ps).as_bytes())?;
            m.finish(&manifest_path(&out))?;
            println!("tau = {tau}");
            println!("ess = {:.3}", effective_sample_size(&ps));
            println!("degenerate = {}", ps.degenerate);
            Ok(exit::OK)
        }
        Command::Reference { config, data, seed, out } => {
            let mut cfg: ReferenceConfig = load(config.as_deref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let data_path = match (data, &cfg.data) {
                (Some(p), _) => p,
                (None, Some(p)) => resolve(config.as_deref(), p),
                (None, None) => return Err(AppError::Usage("reference needs a dataset (--data or config \"data\")".into())),
            };
            let dataset = read_dataset(&data_path)?;
            let init = ParameterPoint::new(cfg.init.clone())?;
            let mut mh = MhConfig::new(cfg.n_iter, cfg.burn_in, cfg.step_sd, init, cfg.seed)
                .map_err(|e| config_err(config.as_deref(), e))?;
            if cfg.tune {
                mh = mh.with_tuning(TuneConfig::default());
            }
            let post = ToyPosterior::new(ToyModel::default(), &dataset).map_err(|e| AppError::format(&data_path, e))?;
            let chain = rwmh(|t| post.log_posterior(t).unwrap_or(f64::NEG_INFINITY), &mh)?;
            let s = chain_summary(&chain)?;
            let summary = serde_json::json!({
                "n_samples": chain.len(),
                "acceptance_rate": chain.acceptance_rate,
                "step_sd": chain.step_sd,
                "mean": s.mean,
                "cov": s.cov,
                "quantile_probs": SUMMARY_PROBS,
                "quantiles": s.quantiles,
            });
            let mut m = ManifestBuilder::new("reference", &cfg, cfg.seed);
            if let Some(p) = &config {
                m.input(p)?;
            }
            m.input(&data_path)?;
            m.write(&out, chain_csv(&chain).as_bytes())?;
            m.write(&sibling(&out, "summary.json"), to_json_pretty(&summary).as_bytes())?;
            m.finish(&manifest_path(&out))?;
            println!("acceptance_rate = {:.4}", chain.acceptance_rate);
            println!("mean = {:?}", s.mean);
            Ok(exit::OK)
        }
        Command::Experiment { name, config, seed, tau, out } => {
            let cfg_path = config.as_deref();
            let report = match name {
                ExperimentName::Toy => {
                    let mut c: ToyExperimentConfig = load(cfg_path)?;
                    override_seed(&mut c.seed, seed);
                    if tau.is_some() {
                        c.tau = tau;
                    }
                    finish_experiment(toy_experiment(&c, threads), &c, c.seed, cfg_path, &out)?
                }
                ExperimentName::TwoStage => {
                    let mut c: TwoStageConfig = load(cfg_path)?;
                    override_seed(&mut c.seed, seed);
                    override_tau(&mut c.tau, tau);
                    finish_experiment(two_stage_study(&c, threads), &c, c.seed, cfg_path, &out)?
                }
                ExperimentName::Stability => {
                    let mut c: StabilityConfig = load(cfg_path)?;
                    override_seed(&mut c.seed, seed);
                    override_tau(&mut c.tau, tau);
                    finish_experiment(stability_study(&c, threads), &c, c.seed, cfg_path, &out)?
                }
                ExperimentName::Concentration => {
                    let mut c: ConcentrationConfig = load(cfg_path)?;
                    override_seed(&mut c.seed, seed);
                    if tau.is_some() {
                        return Err(AppError::Usage("concentration follows a bandwidth schedule; --tau is not accepted".into()));
                    }
                    finish_experiment(concentration_study(&c, threads), &c, c.seed, cfg_path, &out)?
                }
                ExperimentName::Nonunbiasedness => {
                    let mut c: NonUnbiasednessConfig = load(cfg_path)?;
                    if seed.is_some() {
                        return Err(AppError::Usage("nonunbiasedness is deterministic; --seed is not accepted".into()));
                    }
                    override_tau(&mut c.tau, tau);
                    finish_experiment(nonunbiasedness_check(&c), &c, 0, cfg_path, &out)?
                }
            };
            for (flag, ok) in &report.pass_flags {
                println!("{} {flag}", if *ok { "PASS" } else { "FAIL" });
            }
            Ok(if report.passed() { exit::OK } else { exit::EXPERIMENT_FAILED })
        }
    }
}

fn override_seed(slot: &mut u64, seed: Option<u64>) {
    if let Some(s) = seed {
        *slot = s;
    }
}

fn override_tau(slot: &mut f64, tau: Option<f64>) {
    if let Some(t) = tau {
        *slot = t;
    }
}

fn finish_experiment<C: Serialize>(
    result: pseudopost_core::Result<ExperimentReport>,
    cfg: &C,
    seed: u64,
    cfg_path: Option<&Path>,
    out: &Path,
) -> AppResult<ExperimentReport> {
    let report = result?;
    std::fs::create_dir_all(out).map_err(|e| AppError::io(out, e))?;
    let mut m = ManifestBuilder::new(&format!("experiment {}", report.name), cfg, seed);
    if let Some(p) = cfg_path {
        m.input(p)?;
    }
    report.write(out, &mut m)?;
    m.finish(&out.join(format!("{}.manifest.json", report.name.replace('-', "_"))))?;
    Ok(report)
}
