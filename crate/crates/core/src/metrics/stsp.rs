use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

/// Default bins per dimension.
pub const DEFAULT_BINS: usize = 30;
/// Largest dimension for which occupancy grids are supported.
pub const MAX_GRID_DIM: usize = 5;
/// Floor added to generated frequencies before the KL divergence.
pub const KL_EPSILON: f64 = 1e-12;
const BOUND_MARGIN: f64 = 0.05;

/// Sparse occupancy histogram on an `m^N` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramGrid {
    pub bins_per_dim: usize,
    pub bounds: Vec<(f64, f64)>,
    /// Linear bin index (first dimension fastest) to count.
    pub counts: BTreeMap<u64, u64>,
    /// Points outside the bounds, pooled in one overflow bin.
    pub out_of_bounds: u64,
}

impl HistogramGrid {
    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum::<u64>() + self.out_of_bounds
    }

    /// Relative frequencies keyed by bin, with the overflow bin as `None`.
    pub fn frequencies(&self) -> BTreeMap<Option<u64>, f64> {
        let total = self.total() as f64;
        let mut out: BTreeMap<Option<u64>, f64> =
            self.counts.iter().map(|(k, c)| (Some(*k), *c as f64 / total)).collect();
        if self.out_of_bounds > 0 {
            out.insert(None, self.out_of_bounds as f64 / total);
        }
        out
    }
}

/// Per-dimension bounds from `truth`'s min and max, widened by 5% of the range.
pub fn grid_bounds(truth: &Trajectory) -> Result<Vec<(f64, f64)>> {
    if truth.is_empty() {
        return Err(Error::arg("empty trajectory"));
    }
    Ok(truth
        .data
        .row_iter()
        .map(|row| {
            let lo = row.min();
            let hi = row.max();
            let pad = if hi > lo { BOUND_MARGIN * (hi - lo) } else { 0.5 };
            (lo - pad, hi + pad)
        })
        .collect())
}

/// Counts the visits of `traj` to each bin of the grid given by `bounds`.
pub fn occupancy(traj: &Trajectory, bounds: &[(f64, f64)], bins_per_dim: usize) -> Result<HistogramGrid> {
    if traj.is_empty() {
        return Err(Error::arg("empty trajectory"));
    }
    if bins_per_dim < 2 {
        return Err(Error::arg("need at least 2 bins per dimension"));
    }
    if traj.dim() != bounds.len() {
        return Err(Error::arg(format!("trajectory has {} rows, grid has {}", traj.dim(), bounds.len())));
    }
    if traj.dim() > MAX_GRID_DIM {
        return Err(Error::arg(format!("occupancy grids support at most {MAX_GRID_DIM} dimensions")));
    }
    let m = bins_per_dim as u64;
    let mut counts = BTreeMap::new();
    let mut out_of_bounds = 0;
    'points: for col in traj.data.column_iter() {
        let mut index = 0u64;
        let mut stride = 1u64;
        for (v, (lo, hi)) in col.iter().zip(bounds) {
            if !(*v >= *lo && *v <= *hi) {
                out_of_bounds += 1;
                continue 'points;
            }
            let b = (((v - lo) / (hi - lo)) * bins_per_dim as f64) as u64;
            index += b.min(m - 1) * stride;
            stride *= m;
        }
        *counts.entry(index).or_insert(0) += 1;
    }
    Ok(HistogramGrid { bins_per_dim, bounds: bounds.to_vec(), counts, out_of_bounds })
}

/// KL divergence of two histograms on the same grid.
///
/// Generated frequencies get `KL_EPSILON` on every bin occupied by either
/// histogram and are renormalized over that support.
pub fn kl_histograms(truth: &HistogramGrid, generated: &HistogramGrid) -> f64 {
    let p = truth.frequencies();
    let q = generated.frequencies();
    let support = p.keys().chain(q.keys()).collect::<std::collections::BTreeSet<_>>().len() as f64;
    let norm = 1.0 + support * KL_EPSILON;
    let d: f64 = p
        .iter()
        .map(|(bin, pv)| {
            let qv = (q.get(bin).copied().unwrap_or(0.0) + KL_EPSILON) / norm;
            pv * (pv / qv).ln()
        })
        .sum();
    d.max(0.0)
}

/// State-space divergence: KL of binned occupancies on a truth-derived grid.
pub fn d_stsp(truth: &Trajectory, generated: &Trajectory, bins_per_dim: usize) -> Result<f64> {
    if truth.dim() != generated.dim() {
        return Err(Error::arg("trajectories differ in dimension"));
    }
    let bounds = grid_bounds(truth)?;
    let p = occupancy(truth, &bounds, bins_per_dim)?;
    let q = occupancy(generated, &bounds, bins_per_dim)?;
    Ok(kl_histograms(&p, &q))
}
