//! Run manifests. A manifest is written after every other output, so its
//! presence marks a completed run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{CliResult, Context};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Effective configuration, flattened to dotted keys.
    pub config: BTreeMap<String, String>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seed: u64,
    pub tool_version: String,
    pub duration_secs: f64,
    /// Command-specific records (embedding spec, failures, divergence point).
    #[serde(default)]
    pub details: BTreeMap<String, serde_json::Value>,
}

pub struct ManifestBuilder {
    started: Instant,
    manifest: RunManifest,
}

impl ManifestBuilder {
    pub fn new(command: &str, seed: u64) -> Self {
        ManifestBuilder {
            started: Instant::now(),
            manifest: RunManifest {
                command: command.to_string(),
                config: BTreeMap::new(),
                inputs: Vec::new(),
                outputs: Vec::new(),
                seed,
                tool_version: TOOL_VERSION.to_string(),
                duration_secs: 0.0,
                details: BTreeMap::new(),
            },
        }
    }

    pub fn config<T: Serialize>(&mut self, prefix: &str, value: &T) {
        let value = serde_json::to_value(value).expect("config serializes");
        flatten(prefix, &value, &mut self.manifest.config);
    }

    pub fn input(&mut self, path: &Path) {
        self.manifest.inputs.push(path.to_path_buf());
    }

    pub fn output(&mut self, path: &Path) {
        self.manifest.outputs.push(path.to_path_buf());
    }

    pub fn detail<T: Serialize>(&mut self, key: &str, value: &T) {
        self.manifest.details.insert(key.to_string(), serde_json::to_value(value).expect("detail serializes"));
    }

    pub fn write(mut self, path: &Path) -> CliResult<RunManifest> {
        self.manifest.duration_secs = self.started.elapsed().as_secs_f64();
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        std::fs::write(path, text + "\n").input_ctx(format!("writing {}", path.display()))?;
        Ok(self.manifest)
    }
}

fn flatten(prefix: &str, value: &serde_json::Value, out: &mut BTreeMap<String, String>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match value {
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                flatten(&key(k), v, out);
            }
        }
        serde_json::Value::String(s) => {
            out.insert(prefix.to_string(), s.clone());
        }
        other => {
            out.insert(prefix.to_string(), other.to_string());
        }
    }
}

/// `<path>.manifest.json` next to a single-file output.
pub fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    path.with_file_name(name)
}
