//! Config files in `key = value` (TOML) form.

use std::path::Path;

use dynamix_core::embedding::EmbeddingKind;
use dynamix_core::model::ModelConfig;
use dynamix_core::systems::{Catalog, SystemVariant};
use dynamix_core::training::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult, Context};

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).input_ctx(format!("reading {}", path.display()))
}

fn parse<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> CliResult<T> {
    toml::from_str(text).map_err(|e| CliError::input(format!("invalid {what} config: {e}")))
}

/// Built-in catalog plus configured variants.
pub fn catalog(variants: &[SystemVariant]) -> CliResult<Catalog> {
    let mut catalog = Catalog::builtin();
    for v in variants {
        catalog.register(v)?;
    }
    Ok(catalog)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerateConfig {
    pub systems: Vec<String>,
    pub sequences_per_system: usize,
    pub seq_len: usize,
    pub context_length: usize,
    pub overlap: usize,
    /// Observation noise as a fraction of each dimension's std.
    pub noise_level: f64,
    pub seed: u64,
    pub variants: Vec<SystemVariant>,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig {
            systems: Vec::new(),
            sequences_per_system: 250,
            seq_len: 550,
            context_length: 500,
            overlap: 50,
            noise_level: 0.05,
            seed: 0,
            variants: Vec::new(),
        }
    }
}

impl GenerateConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let c: GenerateConfig = parse(text, "generate")?;
        if c.systems.is_empty() {
            return Err(CliError::input("`systems` must list at least one system"));
        }
        Ok(c)
    }
}

/// Training config: the training keys at top level plus an optional
/// `[model]` table.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainFile {
    pub train: TrainConfig,
    pub model: ModelConfig,
    /// Whether the file set `context_length` / `overlap` explicitly.
    pub has_context_length: bool,
    pub has_overlap: bool,
    pub has_model_n: bool,
}

impl TrainFile {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut table: toml::Table = parse(text, "train")?;
        let model_table = match table.remove("model") {
            None => toml::Table::new(),
            Some(toml::Value::Table(t)) => t,
            Some(_) => return Err(CliError::input("invalid train config: `model` must be a table")),
        };
        let has_model_n = model_table.contains_key("n");
        let model: ModelConfig = toml::Value::Table(model_table)
            .try_into()
            .map_err(|e| CliError::input(format!("invalid [model] table: {e}")))?;
        let has_context_length = table.contains_key("context_length");
        let has_overlap = table.contains_key("overlap");
        let train: TrainConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e| CliError::input(format!("invalid train config: {e}")))?;
        train.validate()?;
        model.validate()?;
        Ok(TrainFile { train, model, has_context_length, has_overlap, has_model_n })
    }
}

/// Test systems for `evaluate` and `similarity`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemsConfig {
    pub systems: Vec<String>,
    pub context_length: usize,
    pub n_steps: usize,
    /// Context columns run through the model before forecasting.
    pub warmup: usize,
    /// Sampling interval override; `None` keeps each system's default.
    pub dt: Option<f64>,
    /// Observation noise on the context only.
    pub noise_level: f64,
    /// Observed state indices; all dimensions when empty.
    pub observe: Vec<usize>,
    pub embed: EmbeddingKind,
    pub tau_min: usize,
    pub seed: u64,
    pub bins: usize,
    pub smoothing: f64,
    pub pe_steps: usize,
    pub lyapunov: bool,
    /// Also score the context-parroting baseline.
    pub baseline: bool,
    pub variants: Vec<SystemVariant>,
}

impl Default for SystemsConfig {
    fn default() -> Self {
        SystemsConfig {
            systems: Vec::new(),
            context_length: 500,
            n_steps: 10_000,
            warmup: 50,
            dt: None,
            noise_level: 0.0,
            observe: Vec::new(),
            embed: EmbeddingKind::ZeroFill,
            tau_min: 10,
            seed: 0,
            bins: dynamix_core::metrics::DEFAULT_BINS,
            smoothing: dynamix_core::metrics::DEFAULT_SMOOTHING,
            pe_steps: dynamix_core::metrics::DEFAULT_PE_STEPS,
            lyapunov: false,
            baseline: false,
            variants: Vec::new(),
        }
    }
}

impl SystemsConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let c: SystemsConfig = parse(text, "systems")?;
        if c.systems.is_empty() {
            return Err(CliError::input("`systems` must list at least one system"));
        }
        if c.n_steps == 0 || c.warmup == 0 {
            return Err(CliError::input("n_steps and warmup must be positive"));
        }
        if let Some(dt) = c.dt {
            if !(dt > 0.0) {
                return Err(CliError::input("dt must be positive"));
            }
        }
        Ok(c)
    }
}
