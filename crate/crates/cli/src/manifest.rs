//! Run manifest written next to every command's outputs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use recoil_lase::config::{write_config, SystemParams};
use recoil_lase::Result;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 of the resolved parameter set; stable across runs with
    /// identical parameters.
    pub params_digest: String,
    pub seed: u64,
    pub output_paths: Vec<String>,
    pub wall_time_s: f64,
}

pub fn params_digest(params: &SystemParams) -> String {
    let canonical = write_config(params, None);
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Collects output paths as a command produces them, then writes
/// `manifest.json` alongside.
pub struct ManifestWriter {
    command: String,
    digest: String,
    seed: u64,
    out_dir: PathBuf,
    outputs: Vec<String>,
    started: Instant,
}

impl ManifestWriter {
    pub fn new(command: &str, params: &SystemParams, seed: u64, out_dir: &Path) -> Self {
        ManifestWriter {
            command: command.to_string(),
            digest: params_digest(params),
            seed,
            out_dir: out_dir.to_path_buf(),
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    /// Write a text artifact into the output directory and record it.
    pub fn write_text(&mut self, name: &str, content: &str) -> Result<PathBuf> {
        let path = self.out_dir.join(name);
        std::fs::write(&path, content)?;
        self.outputs.push(path.display().to_string());
        Ok(path)
    }

    /// Record an artifact written by other means.
    pub fn record(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn finish(self) -> Result<()> {
        let manifest = RunManifest {
            command: self.command,
            params_digest: self.digest,
            seed: self.seed,
            output_paths: self.outputs,
            wall_time_s: self.started.elapsed().as_secs_f64(),
        };
        let path = self.out_dir.join("manifest.json");
        let json =
            serde_json::to_string_pretty(&manifest).expect("manifest serialisation cannot fail");
        std::fs::write(path, json)?;
        Ok(())
    }
}
