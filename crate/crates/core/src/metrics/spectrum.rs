use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

/// Gaussian kernel width in frequency bins for simulated systems.
pub const DEFAULT_SMOOTHING: f64 = 20.0;
/// Fraction of the highest frequencies dropped before normalization.
pub const TAIL_FRACTION: f64 = 0.1;
pub const MIN_SPECTRUM_LEN: usize = 64;

fn gaussian_smooth(values: &[f64], sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return values.to_vec();
    }
    let radius = (4.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-radius..=radius).map(|k| (-0.5 * (k as f64 / sigma).powi(2)).exp()).collect();
    let n = values.len() as isize;
    (0..n)
        .map(|i| {
            let (mut acc, mut weight) = (0.0, 0.0);
            for (off, w) in (-radius..=radius).zip(&kernel) {
                let j = i + off;
                if (0..n).contains(&j) {
                    acc += w * values[j as usize];
                    weight += w;
                }
            }
            acc / weight
        })
        .collect()
}

/// Power spectrum of the mean-removed series, Gaussian smoothed over `sigma`
/// bins, with the top frequencies cut and normalized to unit sum.
pub fn smoothed_spectrum(series: &[f64], sigma: f64) -> Result<Vec<f64>> {
    if series.len() < MIN_SPECTRUM_LEN {
        return Err(Error::arg(format!("spectrum needs at least {MIN_SPECTRUM_LEN} samples")));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateSignal("non-finite sample".into()));
    }
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    let scale = series.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    if scale <= 1e-12 * mean.abs().max(1.0) {
        return Err(Error::DegenerateSignal("constant series has no spectrum".into()));
    }
    let mut buf: Vec<Complex<f64>> = series.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    let power: Vec<f64> = buf[..series.len() / 2 + 1].iter().map(|c| c.norm_sqr()).collect();
    let mut smoothed = gaussian_smooth(&power, sigma);
    let keep = ((1.0 - TAIL_FRACTION) * smoothed.len() as f64).ceil() as usize;
    smoothed.truncate(keep.max(1));
    let total: f64 = smoothed.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateSignal("no spectral power below the cut".into()));
    }
    Ok(smoothed.into_iter().map(|v| v / total).collect())
}

/// `sqrt(1 - sum sqrt(f g))` for two normalized spectra of equal length.
///
/// Evaluated as `sqrt(sum (sqrt f - sqrt g)^2 / 2)`, which is the same for
/// unit-sum inputs and exactly zero for identical ones.
pub fn hellinger(f: &[f64], g: &[f64]) -> f64 {
    let sq: f64 = f.iter().zip(g).map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2)).sum();
    (0.5 * sq).sqrt().min(1.0)
}

/// Hellinger distance between smoothed power spectra, averaged over dimensions.
///
/// Series of different lengths are cut to the shorter one.
pub fn hellinger_distance(truth: &Trajectory, generated: &Trajectory, sigma: f64) -> Result<f64> {
    if truth.dim() != generated.dim() || truth.dim() == 0 {
        return Err(Error::arg("trajectories differ in dimension"));
    }
    let len = truth.len().min(generated.len());
    let mut total = 0.0;
    for i in 0..truth.dim() {
        let f = smoothed_spectrum(&truth.row(i)[..len], sigma)?;
        let g = smoothed_spectrum(&generated.row(i)[..len], sigma)?;
        total += hellinger(&f, &g);
    }
    Ok((total / truth.dim() as f64).clamp(0.0, 1.0))
}
