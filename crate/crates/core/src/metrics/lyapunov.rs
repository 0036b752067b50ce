use serde::{Deserialize, Serialize};

use crate::embedding::{delay_embed, EmbeddingKind, EmbeddingSpec};
use crate::error::{Error, Result};

/// Minimum neighbor pairs for a usable divergence curve.
pub const MIN_PAIRS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RosensteinParams {
    /// Minimum temporal separation of a neighbor, in samples.
    pub min_time_separation: usize,
    /// Minimum initial distance of a neighbor, in standardized units.
    pub min_distance: f64,
    /// Horizon of the divergence curve, in samples.
    pub k_max: usize,
    /// Upper bound on reference points; evenly strided when exceeded.
    pub max_references: usize,
}

impl Default for RosensteinParams {
    fn default() -> Self {
        RosensteinParams { min_time_separation: 150, min_distance: 0.2, k_max: 50, max_references: 2000 }
    }
}

/// Mean log divergence `<ln d(k)>` for `k = 0..=k_max` and the number of pairs.
pub fn divergence_curve(series: &[f64], embed: &EmbeddingSpec, params: &RosensteinParams) -> Result<(Vec<f64>, usize)> {
    if embed.kind != EmbeddingKind::Delay {
        return Err(Error::arg("Rosenstein estimation needs a delay embedding"));
    }
    embed.validate()?;
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let std = (series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if !(std > 1e-12) || !std.is_finite() {
        return Err(Error::DegenerateSignal("series has no variance".into()));
    }
    let standardized: Vec<f64> = series.iter().map(|v| (v - mean) / std).collect();
    let emb = delay_embed(&standardized, &embed.lags)?;
    let d = emb.dim();
    let points = emb.data.as_slice();
    let count = emb.len().saturating_sub(params.k_max);
    let k_max = params.k_max;
    if count == 0 {
        return Err(Error::InsufficientData { found: 0, required: MIN_PAIRS });
    }
    let point = |i: usize| &points[i * d..(i + 1) * d];
    let dist2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let stride = count.div_ceil(params.max_references.max(1));
    let min_d2 = params.min_distance * params.min_distance;

    let mut sums = vec![0.0; k_max + 1];
    let mut counts = vec![0usize; k_max + 1];
    let mut pairs = 0;
    for i in (0..count).step_by(stride) {
        let pi = point(i);
        let mut best: Option<(usize, f64)> = None;
        for j in 0..count {
            if i.abs_diff(j) <= params.min_time_separation {
                continue;
            }
            let dd = dist2(pi, point(j));
            if dd > min_d2 && best.is_none_or(|(_, b)| dd < b) {
                best = Some((j, dd));
            }
        }
        let Some((j, _)) = best else { continue };
        pairs += 1;
        for k in 0..=k_max {
            let dd = dist2(point(i + k), point(j + k));
            if dd > 0.0 {
                sums[k] += 0.5 * dd.ln();
                counts[k] += 1;
            }
        }
    }
    if pairs < MIN_PAIRS {
        return Err(Error::InsufficientData { found: pairs, required: MIN_PAIRS });
    }
    let curve = sums.iter().zip(&counts).map(|(s, c)| if *c > 0 { s / *c as f64 } else { f64::NAN }).collect();
    Ok((curve, pairs))
}

/// Least-squares slope of `y` against its index over `range`.
fn slope(y: &[f64], range: std::ops::RangeInclusive<usize>) -> f64 {
    let pts: Vec<(f64, f64)> = range.filter(|k| y[*k].is_finite()).map(|k| (k as f64, y[k])).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Largest Lyapunov exponent of a scalar series by the Rosenstein method.
///
/// The series is standardized and delay embedded; each reference point is
/// paired with its nearest neighbor that is both temporally separated and
/// farther than the minimum distance. The slope of the mean log divergence
/// over `k = 1..=k_max / 2`, divided by `dt`, is returned.
pub fn rosenstein_lyapunov(series: &[f64], dt: f64, embed: &EmbeddingSpec, params: &RosensteinParams) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::arg("dt must be positive"));
    }
    if params.k_max < 2 {
        return Err(Error::arg("k_max must be at least 2"));
    }
    let (curve, _) = divergence_curve(series, embed, params)?;
    Ok(slope(&curve, 1..=params.k_max / 2) / dt)
}
