use std::path::PathBuf;

use clap::Args;
use dynamix_core::io::read_checkpoint;
use dynamix_core::metrics::{average_expert_usage, similarity_matrix};
use nalgebra::{DMatrix, DVector};

use super::evaluate::simulate_trial;
use super::{ensure_parent, resolve_out, zero_shot};
use crate::config::{catalog, read_text, SystemsConfig};
use crate::error::{CliError, CliResult, Context};
use crate::manifest::{sidecar, ManifestBuilder};
use crate::GlobalArgs;

#[derive(Debug, Args)]
pub struct SimilarityArgs {
    /// DMXM1 checkpoint.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Systems config; at least two systems.
    #[arg(long)]
    pub config: PathBuf,
    /// Matrix CSV; defaults to `similarity.csv` under the artifact root.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Time-averaged expert weights of a zero-shot forecast for every system.
pub fn usages(model: &dynamix_core::model::DynaMixModel, cfg: &SystemsConfig) -> CliResult<Vec<DVector<f64>>> {
    let catalog = catalog(&cfg.variants)?;
    cfg.systems
        .iter()
        .map(|name| {
            let (context, _) = simulate_trial(&catalog, cfg, name, cfg.context_length, cfg.dt)?;
            let shot = zero_shot(model, &context, cfg.embed, cfg.n_steps, cfg.warmup, cfg.tau_min, cfg.seed)?;
            average_expert_usage(&shot.raw.weights)
        })
        .collect::<dynamix_core::Result<Vec<_>>>()
        .map_err(|e| CliError::runtime(format!("similarity: {e}")))
}

pub fn write_matrix(path: &std::path::Path, names: &[String], m: &DMatrix<f64>) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .input_ctx(format!("creating {}", path.display()))?;
    let mut header = vec!["system".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header).input_ctx("writing similarity")?;
    for (i, name) in names.iter().enumerate() {
        let mut rec = vec![name.clone()];
        rec.extend(m.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec).input_ctx("writing similarity")?;
    }
    w.flush()?;
    Ok(())
}

pub fn run(global: &GlobalArgs, args: &SimilarityArgs) -> CliResult<()> {
    let mut cfg = SystemsConfig::parse(&read_text(&args.config)?)?;
    if let Some(s) = global.seed {
        cfg.seed = s;
    }
    if cfg.systems.len() < 2 {
        return Err(CliError::input("similarity needs at least two systems"));
    }
    let ckpt = read_checkpoint(&args.checkpoint)?;
    let usage = usages(&ckpt.model, &cfg)?;
    let matrix = similarity_matrix(&usage)?;
    let out = resolve_out(&args.out, &global.root(), "similarity.csv");
    ensure_parent(&out)?;
    write_matrix(&out, &cfg.systems, &matrix)?;

    let mut manifest = ManifestBuilder::new("similarity", cfg.seed);
    manifest.config("", &cfg);
    manifest.input(&args.checkpoint);
    manifest.input(&args.config);
    manifest.output(&out);
    let usage: Vec<Vec<f64>> = usage.iter().map(|u| u.iter().copied().collect()).collect();
    manifest.detail("expert_usage", &usage);
    manifest.write(&sidecar(&out))?;
    Ok(())
}
