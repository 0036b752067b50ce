pub mod evaluate;
pub mod forecast;
pub mod generate;
pub mod similarity;
pub mod train;

use std::path::{Path, PathBuf};

use dynamix_core::embedding::{embed_context, EmbeddingKind, EmbeddingSpec};
use dynamix_core::io::write_matrix_csv;
use dynamix_core::model::{forecast, DynaMixModel, Forecast};
use dynamix_core::systems::{standardize, Standardization};
use dynamix_core::{Result, Trajectory};
use nalgebra::DMatrix;

use crate::error::{CliResult, Context};

/// Explicit path, or `default_name` under the artifact root.
pub(crate) fn resolve_out(explicit: &Option<PathBuf>, root: &Path, default_name: &str) -> PathBuf {
    explicit.clone().unwrap_or_else(|| root.join(default_name))
}

pub(crate) fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).input_ctx(format!("creating {}", dir.display()))
}

pub(crate) fn ensure_parent(path: &Path) -> CliResult<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => ensure_dir(p),
        _ => Ok(()),
    }
}

pub(crate) fn write_csv(path: &Path, names: &[String], data: &DMatrix<f64>) -> CliResult<()> {
    let file = std::fs::File::create(path).input_ctx(format!("creating {}", path.display()))?;
    write_matrix_csv(std::io::BufWriter::new(file), names, data)?;
    Ok(())
}

/// A forecast from a raw (unstandardized) context.
pub(crate) struct ZeroShot {
    /// Observed dimensions of the forecast, in the context's units.
    pub observed: Trajectory,
    pub raw: Forecast,
    pub spec: EmbeddingSpec,
    pub standardization: Standardization,
}

/// Standardizes the context per dimension, lifts it to the model dimension,
/// forecasts, and maps the observed rows back to the context's units.
///
/// Rows `0..context.dim()` of the model output correspond to the observed
/// dimensions for every embedding kind.
pub(crate) fn zero_shot(
    model: &DynaMixModel,
    context: &Trajectory,
    kind: EmbeddingKind,
    n_steps: usize,
    warmup: usize,
    tau_min: usize,
    seed: u64,
) -> Result<ZeroShot> {
    let (scaled, standardization) = standardize(context)?;
    let embed_seed = dynamix_core::seed::derive(seed, "embedding", &[]);
    let (lifted, spec) = embed_context(&scaled, kind, model.n(), tau_min, embed_seed)?;
    let raw = forecast(model, &lifted, n_steps, warmup.min(lifted.len()))?;
    let d = context.dim();
    let head = Trajectory::new(raw.trajectory.data.rows(0, d).into_owned(), context.dt)?;
    let observed = standardization.invert(&head);
    Ok(ZeroShot { observed, raw, spec, standardization })
}

/// Rows `observe` of `traj`, or all rows when `observe` is empty.
pub(crate) fn select_rows(traj: &Trajectory, observe: &[usize]) -> Result<Trajectory> {
    if observe.is_empty() {
        return Ok(traj.clone());
    }
    if let Some(&bad) = observe.iter().find(|&&i| i >= traj.dim()) {
        return Err(dynamix_core::Error::Argument(format!(
            "observed index {bad} out of range for a {}-dimensional system",
            traj.dim()
        )));
    }
    let data = DMatrix::from_fn(observe.len(), traj.len(), |i, t| traj.data[(observe[i], t)]);
    let mut out = Trajectory::new(data, traj.dt)?;
    out.name = traj.name.clone();
    Ok(out)
}
