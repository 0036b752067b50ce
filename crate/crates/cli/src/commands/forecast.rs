use std::path::PathBuf;

use clap::Args;
use dynamix_core::embedding::EmbeddingKind;
use dynamix_core::io::{default_names, read_checkpoint, read_trajectory_csv};
use dynamix_core::metrics::{smoothed_spectrum, DEFAULT_SMOOTHING};
use log::info;
use nalgebra::DMatrix;

use super::train::manifest_path;
use super::{ensure_dir, resolve_out, write_csv, zero_shot};
use crate::error::{CliError, CliResult};
use crate::manifest::ManifestBuilder;
use crate::GlobalArgs;

pub const FORECAST_FILE: &str = "forecast.csv";
pub const WEIGHTS_FILE: &str = "weights.csv";
pub const SPECTRA_FILE: &str = "spectra.csv";

#[derive(Debug, Args)]
pub struct ForecastArgs {
    /// DMXM1 checkpoint.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Context CSV: header row, one row per time step.
    #[arg(long)]
    pub context: PathBuf,
    /// Forecast horizon in steps.
    #[arg(long)]
    pub steps: usize,
    /// How the context is lifted to the model dimension.
    #[arg(long, default_value = "none", value_parser = parse_kind)]
    pub embed: EmbeddingKind,
    /// Context columns run through the model before the forecast starts.
    #[arg(long, default_value_t = 50)]
    pub warmup: usize,
    /// Lower bound on the period searched by the positional encoding.
    #[arg(long, default_value_t = 10)]
    pub tau_min: usize,
    /// Sampling interval of the context (metadata only).
    #[arg(long, default_value_t = 1.0)]
    pub dt: f64,
    /// Also write smoothed power spectra of the forecast.
    #[arg(long)]
    pub spectra: bool,
    /// Output directory; defaults to `forecast` under the artifact root.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

fn parse_kind(s: &str) -> Result<EmbeddingKind, String> {
    s.parse().map_err(|e: dynamix_core::Error| e.to_string())
}

/// Writes `forecast.csv` with the observed dimensions first, in the
/// context's units, followed by any dimensions added by the embedding in
/// model units (`embed1`, `embed2`, ...).
pub fn run(global: &GlobalArgs, args: &ForecastArgs) -> CliResult<()> {
    if !(args.dt > 0.0) {
        return Err(CliError::input("--dt must be positive"));
    }
    if args.warmup == 0 {
        return Err(CliError::input("--warmup must be positive"));
    }
    let ckpt = read_checkpoint(&args.checkpoint)?;
    let (names, context) = read_trajectory_csv(&args.context, args.dt)?;
    let model = &ckpt.model;
    let seed = global.seed.unwrap_or(0);
    let result = zero_shot(model, &context, args.embed, args.steps, args.warmup, args.tau_min, seed)
        .map_err(|e| CliError::runtime(format!("embedding/forecast failed: {e}")))?;

    let d = context.dim();
    let n = model.n();
    let mut data = result.raw.trajectory.data.clone();
    data.rows_mut(0, d).copy_from(&result.observed.data);
    let mut columns = names.clone();
    columns.extend((d..n).map(|i| format!("embed{i}")));

    let out_dir = resolve_out(&args.out_dir, &global.root(), "forecast");
    ensure_dir(&out_dir)?;
    let forecast_path = out_dir.join(FORECAST_FILE);
    let weights_path = out_dir.join(WEIGHTS_FILE);
    write_csv(&forecast_path, &columns, &data)?;
    write_csv(&weights_path, &default_names("e", model.j()), &result.raw.weights)?;
    info!("wrote {} forecast steps to {}", args.steps, forecast_path.display());

    let mut manifest = ManifestBuilder::new("forecast", seed);
    manifest.config(
        "",
        &serde_json::json!({
            "steps": args.steps,
            "embed": args.embed,
            "warmup": args.warmup,
            "tau_min": args.tau_min,
            "dt": args.dt,
        }),
    );
    manifest.input(&args.checkpoint);
    manifest.input(&args.context);
    manifest.output(&forecast_path);
    manifest.output(&weights_path);
    if args.spectra {
        let path = out_dir.join(SPECTRA_FILE);
        write_spectra(&path, &columns[..d], &result.observed)?;
        manifest.output(&path);
    }
    manifest.detail("embedding", &result.spec);
    manifest.detail("standardization", &result.standardization);
    manifest.write(&manifest_path(&out_dir))?;
    Ok(())
}

fn write_spectra(path: &std::path::Path, names: &[String], traj: &dynamix_core::Trajectory) -> CliResult<()> {
    let spectra = (0..traj.dim())
        .map(|i| smoothed_spectrum(&traj.row(i), DEFAULT_SMOOTHING))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::runtime(format!("spectrum: {e}")))?;
    let len = spectra[0].len();
    let data = DMatrix::from_fn(names.len() + 1, len, |i, k| if i == 0 { k as f64 } else { spectra[i - 1][k] });
    let mut header = vec!["frequency_bin".to_string()];
    header.extend(names.iter().cloned());
    write_csv(path, &header, &data)
}
