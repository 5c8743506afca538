//! On-disk formats. Every writer goes through [`write_atomic`], and every
//! float is printed in shortest round-trip form, so identical values give
//! identical bytes.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use pseudopost_core::mcmc::Chain;
use pseudopost_core::population::IdentifiedSetScan;
use pseudopost_core::{CalibrationConfig, Dataset, SurrogateFit, WeightedParticleSet};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> AppResult<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| AppError::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| AppError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| AppError::io(path, e))?;
    tmp.persist(path).map_err(|e| AppError::io(path, e.error))?;
    Ok(())
}

pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-5..1e16).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn push_row(out: &mut String, cells: impl IntoIterator<Item = String>) {
    let mut first = true;
    for c in cells {
        if !first {
            out.push(',');
        }
        first = false;
        out.push_str(&c);
    }
    out.push('\n');
}

pub fn dataset_csv(data: &Dataset) -> String {
    let mut out = String::new();
    push_row(&mut out, (1..=data.dim()).map(|k| format!("x{k}")).chain(["y".to_string()]));
    for (x, y) in data.iter() {
        push_row(&mut out, x.iter().map(|&v| fmt_f64(v)).chain([fmt_f64(y)]));
    }
    out
}

/// Parses the `x1,…,xd,y` CSV format. Row numbers in errors count the header
/// as row 1.
pub fn parse_dataset(path: &Path, text: &str) -> AppResult<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| AppError::format(path, e))?.clone();
    let n_cols = headers.len();
    let expected: Vec<String> = (1..n_cols).map(|k| format!("x{k}")).chain(["y".to_string()]).collect();
    if n_cols == 0 || headers.iter().ne(expected.iter().map(String::as_str)) {
        return Err(AppError::format(path, format!("header must be {}", expected.join(","))));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| AppError::format(path, format!("row {row}: {e}")))?;
        let vals = rec
            .iter()
            .map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| AppError::format(path, format!("row {row}: expected {n_cols} finite numbers")))?;
        ys.push(vals[n_cols - 1]);
        xs.push(vals[..n_cols - 1].to_vec());
    }
    Dataset::new(xs, ys).map_err(|e| AppError::format(path, e))
}

pub fn read_dataset(path: &Path) -> AppResult<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    parse_dataset(path, &text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitFile {
    pub beta: Vec<f64>,
    pub n_fit: usize,
    pub residual_variance: f64,
    pub gram_condition: f64,
}

impl From<&SurrogateFit> for FitFile {
    fn from(f: &SurrogateFit) -> Self {
        Self { beta: f.beta.clone(), n_fit: f.n_fit, residual_variance: f.residual_variance, gram_condition: f.gram_condition }
    }
}

impl FitFile {
    pub fn into_fit(self) -> pseudopost_core::Result<SurrogateFit> {
        let mut fit = SurrogateFit::from_coefficients(self.beta)?;
        fit.n_fit = self.n_fit;
        fit.residual_variance = self.residual_variance;
        fit.gram_condition = self.gram_condition;
        Ok(fit)
    }
}

pub fn read_fit(path: &Path) -> AppResult<SurrogateFit> {
    let file: FitFile = crate::config::read_json(path)?;
    file.into_fit().map_err(|e| AppError::config(path, e))
}

pub fn to_json_pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Calibration settings that affect results. The thread hint is left out so
/// files do not depend on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub n_theta: usize,
    pub batch_size: usize,
    pub bandwidth: f64,
    pub seed: u64,
}

impl From<&CalibrationConfig> for CalibrationRecord {
    fn from(c: &CalibrationConfig) -> Self {
        Self { n_theta: c.n_theta, batch_size: c.batch_size, bandwidth: c.bandwidth, seed: c.seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleRecord {
    pub theta: Vec<f64>,
    #[serde(rename = "R")]
    pub r: f64,
    pub log_w: f64,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticlesFile {
    pub config: CalibrationRecord,
    pub degenerate: bool,
    pub particles: Vec<ParticleRecord>,
}

impl From<&WeightedParticleSet> for ParticlesFile {
    fn from(ps: &WeightedParticleSet) -> Self {
        Self {
            config: (&ps.config).into(),
            degenerate: ps.degenerate,
            particles: ps
                .particles
                .iter()
                .map(|p| ParticleRecord { theta: p.theta.to_vec(), r: p.batch_residual, log_w: p.log_unnorm_weight, w: p.weight })
                .collect(),
        }
    }
}

pub fn particles_csv(ps: &WeightedParticleSet) -> String {
    let mut out = String::new();
    let p = ps.param_dim();
    push_row(&mut out, (1..=p).map(|k| format!("theta_{k}")).chain(["R", "log_w", "w"].map(String::from)));
    for q in &ps.particles {
        push_row(
            &mut out,
            q.theta.iter().map(|&v| fmt_f64(v)).chain([q.batch_residual, q.log_unnorm_weight, q.weight].map(fmt_f64)),
        );
    }
    out
}

pub fn scan_csv(scan: &IdentifiedSetScan) -> String {
    let mut out = String::new();
    let p = scan.grid.first().map_or(0, |g| g.dim());
    push_row(&mut out, (1..=p).map(|k| format!("theta_{k}")).chain(["mu_hat", "mu_sq", "member"].map(String::from)));
    for i in 0..scan.grid.len() {
        let member = if scan.is_member(i) { "1" } else { "0" }.to_string();
        push_row(
            &mut out,
            scan.grid[i].iter().map(|&v| fmt_f64(v)).chain([fmt_f64(scan.mu_hat[i]), fmt_f64(scan.mu_sq[i]), member]),
        );
    }
    out
}

/// `iter` counts from the first kept draw, so it starts at `burn_in`.
pub fn chain_csv(chain: &Chain) -> String {
    let mut out = String::new();
    let p = chain.samples.first().map_or(0, |s| s.dim());
    push_row(&mut out, ["iter".to_string()].into_iter().chain((1..=p).map(|k| format!("theta_{k}"))).chain(["log_target", "accepted"].map(String::from)));
    for (i, s) in chain.samples.iter().enumerate() {
        let mut line = String::new();
        let _ = write!(line, "{}", chain.burn_in + i);
        push_row(
            &mut out,
            [line]
                .into_iter()
                .chain(s.iter().map(|&v| fmt_f64(v)))
                .chain([fmt_f64(chain.log_target_trace[i]), if chain.accepted[i] { "1" } else { "0" }.to_string()]),
        );
    }
    out
}

/// Column-oriented numeric table as CSV.
pub fn table_csv(columns: &[String], data: &[Vec<f64>]) -> String {
    let mut out = String::new();
    push_row(&mut out, columns.iter().cloned());
    let rows = data.first().map_or(0, Vec::len);
    for r in 0..rows {
        push_row(&mut out, data.iter().map(|c| fmt_f64(c[r])));
    }
    out
}
