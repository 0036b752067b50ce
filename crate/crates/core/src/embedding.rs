//! Lifting low-dimensional observations to the model's input dimension.
//!
//! Three strategies are available: delay embedding with autocorrelation-based
//! lags, a sinusoidal positional encoding locked to the dominant period, and
//! plain zero filling of the missing dimensions.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::trajectory::Trajectory;

/// Minimum autocorrelation at the selected period for a positional encoding.
pub const PERIODICITY_THRESHOLD: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    Delay,
    Positional,
    #[serde(alias = "zero-fill")]
    ZeroFill,
    None,
}

impl std::str::FromStr for EmbeddingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delay" => Ok(EmbeddingKind::Delay),
            "positional" => Ok(EmbeddingKind::Positional),
            "zero-fill" | "zero_fill" => Ok(EmbeddingKind::ZeroFill),
            "none" => Ok(EmbeddingKind::None),
            other => Err(Error::arg(format!("unknown embedding kind `{other}`"))),
        }
    }
}

/// Everything needed to reproduce an embedding of a context signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSpec {
    pub kind: EmbeddingKind,
    pub target_dim: usize,
    /// Positive, strictly increasing lags (delay kind).
    #[serde(default)]
    pub lags: Vec<usize>,
    /// Period of the appended sinusoids (positional kind).
    pub period: Option<usize>,
    /// One phase in `[0, pi/2]` per appended row (positional kind).
    #[serde(default)]
    pub phases: Vec<f64>,
    pub tau_min: usize,
}

impl EmbeddingSpec {
    pub fn delay(lags: Vec<usize>) -> Self {
        EmbeddingSpec {
            kind: EmbeddingKind::Delay,
            target_dim: lags.len() + 1,
            lags,
            period: None,
            phases: Vec::new(),
            tau_min: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            EmbeddingKind::Delay => {
                if self.lags.is_empty() || self.lags[0] == 0 {
                    return Err(Error::arg("delay lags must be positive"));
                }
                if self.lags.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::arg("delay lags must be strictly increasing"));
                }
            }
            EmbeddingKind::Positional => {
                let period = self.period.ok_or_else(|| Error::arg("positional embedding needs a period"))?;
                if period <= self.tau_min {
                    return Err(Error::arg("period must exceed tau_min"));
                }
                if self.phases.len() + 1 != self.target_dim {
                    return Err(Error::arg("need target_dim - 1 phases"));
                }
                if self.phases.iter().any(|p| !(0.0..=FRAC_PI_2).contains(p)) {
                    return Err(Error::arg("phases must lie in [0, pi/2]"));
                }
            }
            EmbeddingKind::ZeroFill | EmbeddingKind::None => {}
        }
        Ok(())
    }
}

fn mean(series: &[f64]) -> f64 {
    series.iter().sum::<f64>() / series.len() as f64
}

/// Normalized autocorrelation `r(0..=max_lag)` of the mean-removed series.
///
/// Uses the biased estimator (sums divided by the full variance sum), so
/// `r(k)` shrinks by roughly `(T - k) / T` at long lags.
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if max_lag < 1 || series.len() <= max_lag {
        return Err(Error::arg(format!(
            "need series length > max_lag >= 1, got length {} and max_lag {max_lag}",
            series.len()
        )));
    }
    let mu = mean(series);
    let centered: Vec<f64> = series.iter().map(|v| v - mu).collect();
    let denom: f64 = centered.iter().map(|v| v * v).sum();
    if denom <= 1e-12 * series.len() as f64 * mu.abs().max(1.0).powi(2) || !denom.is_finite() {
        return Err(Error::DegenerateSignal("series is constant".into()));
    }
    Ok((0..=max_lag)
        .map(|k| {
            centered[..centered.len() - k]
                .iter()
                .zip(&centered[k..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / denom
        })
        .collect())
}

/// Upper bound of the autocorrelation search window.
pub fn default_max_lag(len: usize) -> usize {
    (len / 4).max(1)
}

/// Base lag: first `k` with `r(k) <= 1/e`, else the first local minimum, else 1.
pub fn base_lag(series: &[f64]) -> Result<usize> {
    let r = autocorrelation(series, default_max_lag(series.len()))?;
    let threshold = (-1.0f64).exp();
    if let Some(k) = (1..r.len()).find(|&k| r[k] <= threshold) {
        return Ok(k);
    }
    if let Some(k) = (1..r.len().saturating_sub(1)).find(|&k| r[k] < r[k - 1] && r[k] <= r[k + 1]) {
        return Ok(k);
    }
    Ok(1)
}

/// Uniform multiples `(tau, 2 tau, ..., (d-1) tau)` of the base lag.
pub fn select_delay_lags(series: &[f64], d: usize) -> Result<Vec<usize>> {
    if d < 2 {
        return Err(Error::arg("embedding dimension must be at least 2"));
    }
    let tau = base_lag(series)?;
    Ok((1..d).map(|i| i * tau).collect())
}

/// Rows `(x_t, x_{t - lag_1}, ..., x_{t - lag_{d-1}})` for every `t` with a
/// full history; output has `len - max(lags)` columns.
pub fn delay_embed(series: &[f64], lags: &[usize]) -> Result<Trajectory> {
    if lags.iter().any(|&l| l == 0) {
        return Err(Error::arg("delay lags must be positive"));
    }
    let max_lag = lags.iter().copied().max().unwrap_or(0);
    if series.len() <= max_lag {
        return Err(Error::arg(format!(
            "series of length {} is too short for lag {max_lag}",
            series.len()
        )));
    }
    let cols = series.len() - max_lag;
    let data = DMatrix::from_fn(lags.len() + 1, cols, |i, j| {
        let t = j + max_lag;
        if i == 0 {
            series[t]
        } else {
            series[t - lags[i - 1]]
        }
    });
    Trajectory::new(data, 1.0)
}

/// Lag in `(tau_min, max_lag]` with the largest autocorrelation.
pub fn dominant_period(series: &[f64], tau_min: usize) -> Result<(usize, f64)> {
    let max_lag = default_max_lag(series.len());
    if tau_min + 1 > max_lag {
        return Err(Error::arg(format!(
            "tau_min {tau_min} leaves no admissible lag below {max_lag}"
        )));
    }
    let r = autocorrelation(series, max_lag)?;
    let (lag, corr) = ((tau_min + 1)..=max_lag)
        .map(|k| (k, r[k]))
        .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
    Ok((lag, corr))
}

/// Series plus `target_dim - 1` unit sinusoids at the dominant period, each
/// with a seeded random phase in `[0, pi/2]`.
pub fn positional_encode(
    series: &[f64],
    target_dim: usize,
    tau_min: usize,
    seed: u64,
) -> Result<(Trajectory, EmbeddingSpec)> {
    if target_dim < 2 {
        return Err(Error::arg("positional encoding needs target_dim >= 2"));
    }
    let (period, corr) = dominant_period(series, tau_min)?;
    if corr < PERIODICITY_THRESHOLD {
        return Err(Error::NoPeriodicity { lag: period, correlation: corr, threshold: PERIODICITY_THRESHOLD });
    }
    let mut rng = seed::rng(seed, "positional-phases", &[]);
    let phases: Vec<f64> = (1..target_dim).map(|_| rng.random_range(0.0..=FRAC_PI_2)).collect();
    let spec = EmbeddingSpec {
        kind: EmbeddingKind::Positional,
        target_dim,
        lags: Vec::new(),
        period: Some(period),
        phases,
        tau_min,
    };
    Ok((apply_positional(series, &spec)?, spec))
}

fn apply_positional(series: &[f64], spec: &EmbeddingSpec) -> Result<Trajectory> {
    spec.validate()?;
    let period = spec.period.expect("validated") as f64;
    let data = DMatrix::from_fn(spec.target_dim, series.len(), |i, t| {
        if i == 0 {
            series[t]
        } else {
            (2.0 * PI * t as f64 / period + spec.phases[i - 1]).sin()
        }
    });
    Trajectory::new(data, 1.0)
}

/// Appends zero rows up to `target_dim`.
pub fn zero_fill(traj: &Trajectory, target_dim: usize) -> Result<Trajectory> {
    if traj.is_empty() {
        return Err(Error::arg("cannot zero-fill an empty trajectory"));
    }
    if traj.dim() > target_dim {
        return Err(Error::arg(format!(
            "trajectory has {} rows, more than target {target_dim}",
            traj.dim()
        )));
    }
    let mut data = DMatrix::zeros(target_dim, traj.len());
    data.rows_mut(0, traj.dim()).copy_from(&traj.data);
    Ok(Trajectory { data, dt: traj.dt, name: traj.name.clone() })
}

/// Lifts `context` to `target_dim` rows with the requested strategy.
///
/// Delay and positional embeddings take a single-row context and keep its
/// `dt`. `None` only accepts contexts that already have `target_dim` rows.
pub fn embed_context(
    context: &Trajectory,
    kind: EmbeddingKind,
    target_dim: usize,
    tau_min: usize,
    seed: u64,
) -> Result<(Trajectory, EmbeddingSpec)> {
    let bare = |kind| EmbeddingSpec {
        kind,
        target_dim,
        lags: Vec::new(),
        period: None,
        phases: Vec::new(),
        tau_min,
    };
    let single_row = || -> Result<Vec<f64>> {
        if context.dim() != 1 {
            return Err(Error::arg(format!(
                "{kind:?} embedding expects a 1-dimensional context, got {} rows; use zero-fill",
                context.dim()
            )));
        }
        Ok(context.row(0))
    };
    let (mut traj, spec) = match kind {
        EmbeddingKind::None => {
            if context.dim() != target_dim {
                return Err(Error::arg(format!(
                    "context has {} dimensions but the model expects {target_dim}; use --embed zero-fill or delay",
                    context.dim()
                )));
            }
            (context.clone(), bare(kind))
        }
        EmbeddingKind::ZeroFill => (zero_fill(context, target_dim)?, bare(kind)),
        EmbeddingKind::Delay => {
            let series = single_row()?;
            if target_dim == 1 {
                (context.clone(), bare(EmbeddingKind::None))
            } else {
                let lags = select_delay_lags(&series, target_dim)?;
                let traj = delay_embed(&series, &lags)?;
                let mut spec = EmbeddingSpec::delay(lags);
                spec.tau_min = tau_min;
                (traj, spec)
            }
        }
        EmbeddingKind::Positional => positional_encode(&single_row()?, target_dim, tau_min, seed)?,
    };
    traj.dt = context.dt;
    traj.name = context.name.clone();
    Ok((traj, spec))
}
