//! Run manifests: what was run, on which inputs, producing which files.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{AppError, AppResult};
use crate::formats::{to_json_pretty, write_atomic};

#[derive(Debug, Clone, Serialize)]
pub struct Artifact {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 over the effective configuration and every input file.
    pub config_hash: String,
    pub seed: u64,
    /// The effective configuration that was hashed.
    pub parameters: serde_json::Value,
    pub inputs: Vec<Artifact>,
    pub artifacts: Vec<Artifact>,
    pub wall_clock_seconds: f64,
    pub library_version: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects inputs and outputs of one command.
#[derive(Debug)]
pub struct ManifestBuilder {
    command: String,
    seed: u64,
    parameters: serde_json::Value,
    hasher: Sha256,
    inputs: Vec<Artifact>,
    artifacts: Vec<Artifact>,
    started: std::time::Instant,
}

impl ManifestBuilder {
    pub fn new<C: Serialize>(command: &str, config: &C, seed: u64) -> Self {
        let parameters = serde_json::to_value(config).expect("serializable");
        let mut hasher = Sha256::new();
        hasher.update(command.as_bytes());
        hasher.update([0u8]);
        hasher.update(parameters.to_string().as_bytes());
        Self { command: command.into(), seed, parameters, hasher, inputs: Vec::new(), artifacts: Vec::new(), started: std::time::Instant::now() }
    }

    pub fn input(&mut self, path: &Path) -> AppResult<()> {
        let bytes = std::fs::read(path).map_err(|e| AppError::io(path, e))?;
        let digest = sha256_hex(&bytes);
        self.hasher.update(digest.as_bytes());
        self.inputs.push(Artifact { path: path.to_path_buf(), sha256: digest });
        Ok(())
    }

    /// Writes `bytes` atomically and records the file.
    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> AppResult<()> {
        write_atomic(path, bytes)?;
        self.artifacts.push(Artifact { path: path.to_path_buf(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    pub fn finish(self, path: &Path) -> AppResult<RunManifest> {
        let m = RunManifest {
            command: self.command,
            config_hash: hex::encode(self.hasher.finalize()),
            seed: self.seed,
            parameters: self.parameters,
            inputs: self.inputs,
            artifacts: self.artifacts,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            library_version: env!("CARGO_PKG_VERSION").to_string(),
        };
        write_atomic(path, to_json_pretty(&m).as_bytes())?;
        Ok(m)
    }
}

/// `<out>.manifest.json` next to the primary output.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}
