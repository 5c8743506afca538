//! Scripted studies. Each returns an [`ExperimentReport`] that is a pure
//! function of its configuration and seed; the thread count never changes a
//! number.

mod concentration;
mod nonunbiasedness;
mod stability;
mod toy;
mod two_stage;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub use concentration::{concentration_study, ConcentrationConfig};
pub use nonunbiasedness::{nonunbiasedness_check, NonUnbiasednessConfig};
pub use stability::{stability_study, StabilityConfig};
pub use toy::{toy_experiment, ToyExperimentConfig};
pub use two_stage::{two_stage_study, TwoStageConfig};

use pseudopost_core::math::median;
use pseudopost_core::stream::{domain, Substreams};
use pseudopost_core::{Error, Simulator, SurrogateFit};
use serde::{Deserialize, Serialize};

use crate::config::BandwidthRule;
use crate::error::AppResult;
use crate::formats::{table_csv, to_json_pretty};
use crate::manifest::ManifestBuilder;

/// Absolute accuracy claimed for quadrature functionals. Studies also report
/// the change from halving their grid resolution, which must stay below it.
pub const QUADRATURE_TOLERANCE: f64 = 1e-4;

/// Column-oriented numeric table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub data: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), data: vec![Vec::new(); columns.len()] }
    }

    pub fn push(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        for (col, v) in self.data.iter_mut().zip(row) {
            col.push(*v);
        }
    }

    pub fn rows(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(&self.data[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub inputs: serde_json::Value,
    pub metrics: BTreeMap<String, f64>,
    pub tables: BTreeMap<String, Table>,
    pub pass_flags: BTreeMap<String, bool>,
    /// Metric and table names each flag was computed from.
    pub flag_sources: BTreeMap<String, Vec<String>>,
}

impl ExperimentReport {
    pub fn new<C: Serialize>(name: &str, inputs: &C) -> Self {
        Self {
            name: name.into(),
            inputs: serde_json::to_value(inputs).expect("serializable"),
            metrics: BTreeMap::new(),
            tables: BTreeMap::new(),
            pass_flags: BTreeMap::new(),
            flag_sources: BTreeMap::new(),
        }
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.into(), value);
    }

    pub fn table(&mut self, name: &str, table: Table) {
        self.tables.insert(name.into(), table);
    }

    pub fn flag(&mut self, name: &str, value: bool, sources: &[&str]) {
        self.pass_flags.insert(name.into(), value);
        self.flag_sources.insert(name.into(), sources.iter().map(|s| s.to_string()).collect());
    }

    pub fn passed(&self) -> bool {
        self.pass_flags.values().all(|&v| v)
    }

    /// Flags whose recorded sources are missing from the report.
    pub fn dangling_sources(&self) -> Vec<String> {
        self.flag_sources
            .values()
            .flatten()
            .filter(|s| !self.metrics.contains_key(*s) && !self.tables.contains_key(*s))
            .cloned()
            .collect()
    }

    /// Writes `<dir>/<name>.json` and one `<dir>/<name>_<table>.csv` per
    /// table, returning the paths written.
    pub fn write(&self, dir: &Path, manifest: &mut ManifestBuilder) -> AppResult<Vec<PathBuf>> {
        let stem = self.name.replace('-', "_");
        let mut paths = Vec::new();
        let json = dir.join(format!("{stem}.json"));
        manifest.write(&json, to_json_pretty(self).as_bytes())?;
        paths.push(json);
        for (tname, t) in &self.tables {
            let p = dir.join(format!("{stem}_{tname}.csv"));
            manifest.write(&p, table_csv(&t.columns, &t.data).as_bytes())?;
            paths.push(p);
        }
        Ok(paths)
    }
}

pub(crate) fn median_of(values: &[f64]) -> f64 {
    median(values).unwrap_or(f64::NAN)
}

pub(crate) fn nonincreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0])
}

pub(crate) fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

pub(crate) fn nondecreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] >= w[0])
}

/// Pilot draws used by [`BandwidthRule::PilotSd`].
pub const PILOT_DRAWS: usize = 200;

/// Picks `τ` for a calibration run of batch size `m`.
pub fn choose_bandwidth<S: Simulator + ?Sized>(
    rule: BandwidthRule,
    model: &S,
    fit: &SurrogateFit,
    m: usize,
    seed: u64,
) -> pseudopost_core::Result<f64> {
    let tau = match rule {
        BandwidthRule::ResidualScale => (fit.residual_variance / m.max(1) as f64).sqrt(),
        BandwidthRule::PilotSd => {
            let family = Substreams::new(seed, domain::PILOT);
            let mut acc = pseudopost_core::math::RunningMoments::new();
            for j in 0..PILOT_DRAWS {
                let mut s = family.stream(j as u64);
                let theta = model.draw_prior(&mut s);
                acc.push(model.batch_residual(&theta, fit, m, &mut s)?);
            }
            0.5 * acc.variance().sqrt()
        }
    };
    if tau.is_finite() && tau > 0.0 {
        Ok(tau)
    } else {
        Err(Error::NonPositiveBandwidth(tau))
    }
}
