//! Run manifests and on-disk run directories.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::Result;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub command: String,
    pub tool_version: String,
    pub seed: u64,
    /// Every resolved input that affects the outputs.
    pub inputs: Value,
    pub verdicts: Value,
    /// Paths relative to the run directory.
    pub artifact_paths: Vec<String>,
    pub wall_time: f64,
}

/// Content hash of the command, its resolved inputs and the seed. JSON maps
/// serialize with sorted keys, so the hash does not depend on input order.
pub fn run_id(command: &str, inputs: &Value, seed: u64) -> String {
    let canonical = serde_json::json!({ "command": command, "inputs": inputs, "seed": seed });
    let bytes = serde_json::to_vec(&canonical).expect("json values serialize");
    hex::encode(Sha256::digest(&bytes))[..16].to_string()
}

/// A finished computation that has not touched the disk yet.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub manifest: RunManifest,
    pub artifacts: Vec<(String, Vec<u8>)>,
}

impl RunOutput {
    pub fn new(command: &str, inputs: Value, seed: u64, verdicts: Value, artifacts: Vec<(String, Vec<u8>)>, wall_time: f64) -> Self {
        let run_id = run_id(command, &inputs, seed);
        RunOutput {
            manifest: RunManifest {
                run_id,
                command: command.to_string(),
                tool_version: TOOL_VERSION.to_string(),
                seed,
                inputs,
                verdicts,
                artifact_paths: artifacts.iter().map(|(p, _)| p.clone()).collect(),
                wall_time,
            },
            artifacts,
        }
    }

    pub fn dir(&self, out: &Path) -> PathBuf {
        out.join("runs").join(&self.manifest.run_id)
    }

    /// Write `runs/<run_id>/` with every artifact and the manifest last.
    pub fn write(&self, out: &Path) -> Result<PathBuf> {
        let dir = self.dir(out);
        std::fs::create_dir_all(&dir)?;
        for (rel, bytes) in &self.artifacts {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, bytes)?;
        }
        let mut json = serde_json::to_vec_pretty(&self.manifest)?;
        json.push(b'\n');
        std::fs::write(dir.join("manifest.json"), json)?;
        Ok(dir)
    }
}
