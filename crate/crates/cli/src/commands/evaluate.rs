use std::path::{Path, PathBuf};

use clap::Args;
use dynamix_core::io::read_checkpoint;
use dynamix_core::metrics::{context_parroting, evaluate, MetricOptions, MetricReport};
use dynamix_core::model::DynaMixModel;
use dynamix_core::systems::{add_noise, simulate_sampled, Catalog};
use dynamix_core::{seed, Result, Trajectory};
use log::{info, warn};

use super::{ensure_parent, resolve_out, select_rows, zero_shot};
use crate::config::{catalog, read_text, SystemsConfig};
use crate::error::{CliError, CliResult, Context};
use crate::manifest::{sidecar, ManifestBuilder};
use crate::GlobalArgs;

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// DMXM1 checkpoint.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Test systems config.
    #[arg(long)]
    pub config: PathBuf,
    /// Metrics CSV; defaults to `metrics.csv` under the artifact root.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated context lengths; one row per system and length.
    #[arg(long, value_delimiter = ',', conflicts_with = "dt_sweep")]
    pub context_sweep: Vec<usize>,
    /// Comma-separated sampling intervals; one row per system and interval.
    #[arg(long, value_delimiter = ',')]
    pub dt_sweep: Vec<f64>,
}

pub const HEADER: [&str; 12] = [
    "system",
    "model",
    "context_length",
    "dt",
    "status",
    "d_stsp",
    "d_hellinger",
    "pe_n",
    "mae",
    "lyapunov_max",
    "mean_max_usage",
    "error",
];

/// One line of the metrics CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub system: String,
    pub model: String,
    pub context_length: usize,
    pub dt: Option<f64>,
    pub outcome: std::result::Result<MetricReport, String>,
}

impl Row {
    fn fields(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = vec![
            self.system.clone(),
            self.model.clone(),
            self.context_length.to_string(),
            opt(self.dt),
        ];
        match &self.outcome {
            Ok(r) => {
                let peak = r.expert_usage.as_ref().and_then(|u| u.iter().copied().reduce(f64::max));
                out.extend([
                    "ok".to_string(),
                    r.d_stsp.to_string(),
                    r.d_hellinger.to_string(),
                    r.pe_n.to_string(),
                    r.mae.to_string(),
                    opt(r.lyapunov_max),
                    opt(peak),
                    String::new(),
                ]);
            }
            Err(e) => {
                out.push("error".to_string());
                out.extend(std::iter::repeat_n(String::new(), 6));
                out.push(e.clone());
            }
        }
        out
    }
}

pub(crate) fn options(cfg: &SystemsConfig) -> MetricOptions {
    MetricOptions {
        bins_per_dim: cfg.bins,
        smoothing: cfg.smoothing,
        pe_steps: cfg.pe_steps,
        lyapunov: cfg.lyapunov,
        ..MetricOptions::default()
    }
}

/// Context and clean continuation of `name`, observed rows only. The
/// trajectory depends on the seed and the system name, not on its position
/// in the config.
pub(crate) fn simulate_trial(
    catalog: &Catalog,
    cfg: &SystemsConfig,
    name: &str,
    context_length: usize,
    dt: Option<f64>,
) -> Result<(Trajectory, Trajectory)> {
    let system = catalog.get(name)?;
    let dt = dt.unwrap_or(system.default_dt);
    let sim_seed = seed::derive(cfg.seed, &format!("trial/{name}"), &[]);
    let full = simulate_sampled(&system, sim_seed, context_length + cfg.n_steps, dt)?;
    let full = select_rows(&full, &cfg.observe)?;
    let context = full.slice(0, context_length);
    let context = add_noise(&context, cfg.noise_level, seed::derive(cfg.seed, &format!("context-noise/{name}"), &[]))?;
    let truth = full.slice(context_length, context_length + cfg.n_steps);
    Ok((context, truth))
}

fn evaluate_one(
    model: &DynaMixModel,
    catalog: &Catalog,
    cfg: &SystemsConfig,
    name: &str,
    context_length: usize,
    dt: Option<f64>,
) -> Result<Vec<(String, MetricReport)>> {
    let (context, truth) = simulate_trial(catalog, cfg, name, context_length, dt)?;
    let shot = zero_shot(model, &context, cfg.embed, cfg.n_steps, cfg.warmup, cfg.tau_min, cfg.seed)?;
    let scale = &shot.standardization;
    let truth = scale.apply(&truth);
    let opts = options(cfg);
    let mut out = vec![(
        "dynamix".to_string(),
        evaluate(&truth, &scale.apply(&shot.observed), Some(&shot.raw.weights), &opts)?,
    )];
    if cfg.baseline {
        let parrot = context_parroting(&scale.apply(&context), cfg.n_steps)?;
        out.push(("context_parroting".to_string(), evaluate(&truth, &parrot, None, &opts)?));
    }
    Ok(out)
}

/// Scores every (system, sweep value) pair; failures become error rows.
pub fn evaluate_all(model: &DynaMixModel, cfg: &SystemsConfig, context_sweep: &[usize], dt_sweep: &[f64]) -> CliResult<Vec<Row>> {
    let catalog = catalog(&cfg.variants)?;
    let mut trials: Vec<(usize, Option<f64>)> = Vec::new();
    if !context_sweep.is_empty() {
        trials.extend(context_sweep.iter().map(|&c| (c, cfg.dt)));
    } else if !dt_sweep.is_empty() {
        trials.extend(dt_sweep.iter().map(|&d| (cfg.context_length, Some(d))));
    } else {
        trials.push((cfg.context_length, cfg.dt));
    }
    let mut rows = Vec::new();
    for name in &cfg.systems {
        for &(context_length, dt) in &trials {
            let row = |model: String, outcome| Row { system: name.clone(), model, context_length, dt, outcome };
            match evaluate_one(model, &catalog, cfg, name, context_length, dt) {
                Ok(reports) => {
                    for (m, r) in reports {
                        info!("{name} T_C={context_length} {m}: D_stsp {:.4} D_H {:.4}", r.d_stsp, r.d_hellinger);
                        rows.push(row(m, Ok(r)));
                    }
                }
                Err(e) => {
                    warn!("{name} T_C={context_length}: {e}");
                    rows.push(row("dynamix".to_string(), Err(e.to_string())));
                }
            }
        }
    }
    Ok(rows)
}

pub fn write_rows(path: &Path, rows: &[Row]) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .input_ctx(format!("creating {}", path.display()))?;
    w.write_record(HEADER).input_ctx("writing metrics")?;
    for r in rows {
        w.write_record(r.fields()).input_ctx("writing metrics")?;
    }
    w.flush()?;
    Ok(())
}

pub fn run(global: &GlobalArgs, args: &EvaluateArgs) -> CliResult<()> {
    let mut cfg = SystemsConfig::parse(&read_text(&args.config)?)?;
    if let Some(s) = global.seed {
        cfg.seed = s;
    }
    if args.dt_sweep.iter().any(|d| !(*d > 0.0)) || args.context_sweep.contains(&0) {
        return Err(CliError::input("sweep values must be positive"));
    }
    let ckpt = read_checkpoint(&args.checkpoint)?;
    let rows = evaluate_all(&ckpt.model, &cfg, &args.context_sweep, &args.dt_sweep)?;
    let out = resolve_out(&args.out, &global.root(), "metrics.csv");
    ensure_parent(&out)?;
    write_rows(&out, &rows)?;

    let mut manifest = ManifestBuilder::new("evaluate", cfg.seed);
    manifest.config("", &cfg);
    manifest.config("context_sweep", &args.context_sweep);
    manifest.config("dt_sweep", &args.dt_sweep);
    manifest.input(&args.checkpoint);
    manifest.input(&args.config);
    manifest.output(&out);
    let failed: Vec<&str> = rows.iter().filter(|r| r.outcome.is_err()).map(|r| r.system.as_str()).collect();
    manifest.detail("failed_systems", &failed);
    manifest.write(&sidecar(&out))?;
    Ok(())
}
