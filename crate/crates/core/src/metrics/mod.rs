//! Forecast quality measures and expert-usage similarity.

mod lyapunov;
mod spectrum;
mod stsp;

pub use lyapunov::{divergence_curve, rosenstein_lyapunov, RosensteinParams, MIN_PAIRS};
pub use spectrum::{hellinger, hellinger_distance, smoothed_spectrum, DEFAULT_SMOOTHING, MIN_SPECTRUM_LEN, TAIL_FRACTION};
pub use stsp::{
    d_stsp, grid_bounds, kl_histograms, occupancy, HistogramGrid, DEFAULT_BINS, KL_EPSILON, MAX_GRID_DIM,
};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::embedding::{select_delay_lags, EmbeddingSpec};
use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

/// Default horizon of the short-term prediction error.
pub const DEFAULT_PE_STEPS: usize = 10;
/// Floor on the L1 distance in the similarity score.
pub const SIMILARITY_EPSILON: f64 = 1e-6;

fn check_short_term(truth: &Trajectory, forecast: &Trajectory, n: usize) -> Result<()> {
    if truth.dim() != forecast.dim() {
        return Err(Error::arg("truth and forecast differ in dimension"));
    }
    if n == 0 {
        return Err(Error::arg("horizon must be at least 1"));
    }
    if truth.len() < n || forecast.len() < n {
        return Err(Error::arg(format!(
            "horizon {n} exceeds the available steps (truth {}, forecast {})",
            truth.len(),
            forecast.len()
        )));
    }
    Ok(())
}

/// L1 error at forecast step `n`; column 0 of both inputs is step 1.
pub fn prediction_error(truth: &Trajectory, forecast: &Trajectory, n: usize) -> Result<f64> {
    check_short_term(truth, forecast, n)?;
    Ok((truth.data.column(n - 1) - forecast.data.column(n - 1)).abs().sum())
}

/// Mean absolute error over the first `n` forecast steps and all dimensions.
pub fn mae(truth: &Trajectory, forecast: &Trajectory, n: usize) -> Result<f64> {
    check_short_term(truth, forecast, n)?;
    let diff = truth.data.columns(0, n) - forecast.data.columns(0, n);
    Ok(diff.abs().sum() / diff.len() as f64)
}

/// Time-averaged expert weights from a `J x T` history.
pub fn average_expert_usage(weights: &DMatrix<f64>) -> Result<DVector<f64>> {
    if weights.ncols() == 0 || weights.nrows() == 0 {
        return Err(Error::arg("empty weight history"));
    }
    let sum = weights.column_iter().fold(DVector::zeros(weights.nrows()), |acc, c| acc + c);
    Ok(sum / weights.ncols() as f64)
}

/// Raw similarity `1 / max(|e1 - e2|_1, eps)`.
pub fn similarity(e1: &DVector<f64>, e2: &DVector<f64>) -> Result<f64> {
    if e1.len() != e2.len() {
        return Err(Error::arg("usage vectors differ in length"));
    }
    Ok(1.0 / (e1 - e2).abs().sum().max(SIMILARITY_EPSILON))
}

/// Pairwise similarities scaled by the largest off-diagonal raw score, with a
/// unit diagonal.
pub fn similarity_matrix(usages: &[DVector<f64>]) -> Result<DMatrix<f64>> {
    let k = usages.len();
    if k < 2 {
        return Err(Error::arg("need at least two usage vectors"));
    }
    let mut raw = DMatrix::zeros(k, k);
    let mut max = 0.0f64;
    for a in 0..k {
        for b in a + 1..k {
            let s = similarity(&usages[a], &usages[b])?;
            raw[(a, b)] = s;
            raw[(b, a)] = s;
            max = max.max(s);
        }
    }
    raw /= max;
    raw.fill_diagonal(1.0);
    Ok(raw)
}

/// Baseline forecast that replays the context periodically:
/// column `k` is context column `k mod T_C`.
pub fn context_parroting(context: &Trajectory, n_steps: usize) -> Result<Trajectory> {
    if context.is_empty() {
        return Err(Error::arg("empty context"));
    }
    let t_c = context.len();
    let data = DMatrix::from_fn(context.dim(), n_steps, |i, k| context.data[(i, k % t_c)]);
    Trajectory::new(data, context.dt)
}

/// Settings for [`evaluate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricOptions {
    pub bins_per_dim: usize,
    pub smoothing: f64,
    pub pe_steps: usize,
    /// Estimate the largest Lyapunov exponent of the forecast's first row.
    pub lyapunov: bool,
    pub rosenstein: RosensteinParams,
    /// Delay embedding dimension for the Lyapunov estimate.
    pub lyapunov_embedding_dim: usize,
}

impl Default for MetricOptions {
    fn default() -> Self {
        MetricOptions {
            bins_per_dim: DEFAULT_BINS,
            smoothing: DEFAULT_SMOOTHING,
            pe_steps: DEFAULT_PE_STEPS,
            lyapunov: false,
            rosenstein: RosensteinParams::default(),
            lyapunov_embedding_dim: 5,
        }
    }
}

/// All measures for one forecast; absent optional measures serialize as null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub d_stsp: f64,
    pub d_hellinger: f64,
    pub pe_steps: usize,
    pub pe_n: f64,
    pub mae: f64,
    pub lyapunov_max: Option<f64>,
    pub expert_usage: Option<Vec<f64>>,
}

impl MetricReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metric report serializes")
    }
}

/// Scores `forecast` against `truth`, both starting at the first step after
/// the context.
pub fn evaluate(
    truth: &Trajectory,
    forecast: &Trajectory,
    weights: Option<&DMatrix<f64>>,
    options: &MetricOptions,
) -> Result<MetricReport> {
    let lyapunov_max = if options.lyapunov {
        let series = forecast.row(0);
        let lags = select_delay_lags(&series, options.lyapunov_embedding_dim)?;
        Some(rosenstein_lyapunov(&series, forecast.dt, &EmbeddingSpec::delay(lags), &options.rosenstein)?)
    } else {
        None
    };
    Ok(MetricReport {
        d_stsp: d_stsp(truth, forecast, options.bins_per_dim)?,
        d_hellinger: hellinger_distance(truth, forecast, options.smoothing)?,
        pe_steps: options.pe_steps,
        pe_n: prediction_error(truth, forecast, options.pe_steps)?,
        mae: mae(truth, forecast, options.pe_steps)?,
        lyapunov_max,
        expert_usage: weights.map(average_expert_usage).transpose()?.map(|e| e.iter().copied().collect()),
    })
}
