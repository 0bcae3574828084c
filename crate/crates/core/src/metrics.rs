//! Evaluation criteria: bias, RMS error, 20 Hz spread, equivalent number of
//! looks and Welch power spectra.

use std::sync::Arc;

use nalgebra::DMatrix;
use rustfft::{num_complex::Complex, Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};
use crate::types::EchoSequence;

fn same_len<S>(a: &[S], b: &[S]) -> Result<()> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "estimate has {} values, truth has {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Mean of `est - truth`.
pub fn bias<S: Real>(est: &[S], truth: &[S]) -> Result<S> {
    same_len(est, truth)?;
    let sum = est.iter().zip(truth).fold(S::zero(), |a, (&e, &t)| a + (e - t));
    Ok(sum / lit(est.len() as f64))
}

/// Root-mean-square of `est - truth`. Not centred: a constant offset counts.
pub fn std_vs_truth<S: Real>(est: &[S], truth: &[S]) -> Result<S> {
    same_len(est, truth)?;
    let ss = est.iter().zip(truth).fold(S::zero(), |a, (&e, &t)| a + (e - t) * (e - t));
    Ok((ss / lit(est.len() as f64)).sqrt())
}

/// RMS deviation from the mean of each run of `block` successive values
/// (the trailing partial run uses its own mean).
pub fn std_blockwise<S: Real>(est: &[S], block: usize) -> Result<S> {
    if est.len() < block || block == 0 {
        return Err(Error::DimensionMismatch(format!(
            "need at least {block} values, got {}",
            est.len()
        )));
    }
    let mut ss = S::zero();
    for chunk in est.chunks(block) {
        let mean = chunk.iter().fold(S::zero(), |a, &b| a + b) / lit(chunk.len() as f64);
        ss += chunk.iter().fold(S::zero(), |a, &b| a + (b - mean) * (b - mean));
    }
    Ok((ss / lit(est.len() as f64)).sqrt())
}

/// "STD at 20 Hz": spread around the running 20-echo mean.
pub fn std_20hz<S: Real>(est: &[S]) -> Result<S> {
    std_blockwise(est, 20)
}

/// Equivalent number of looks per noise block.
#[derive(Debug, Clone, PartialEq)]
pub struct Enl<S> {
    pub values: Vec<S>,
    /// Blocks whose ENL involved a zero mean or a zero variance.
    pub degenerate: Vec<usize>,
}

/// `N_eff(n, k) = ybar_nk^2 / s2_nk`, averaged over gates.
pub fn enl<S: Real>(seq: &EchoSequence<S>, lambda: &DMatrix<S>) -> Enl<S> {
    let blocks = seq.blocks();
    let gates = seq.num_gates();
    let mut values = Vec::with_capacity(blocks.count());
    let mut degenerate = Vec::new();
    for n in 0..blocks.count() {
        let r = blocks.range(n);
        let len = lit::<S>(r.len() as f64);
        let mut acc = S::zero();
        let mut bad = false;
        for k in 0..gates {
            let mean = r.clone().fold(S::zero(), |a, m| a + seq.echoes[(m, k)]) / len;
            let var = lambda[(k, n)];
            if var > S::zero() && var.is_finite_value() {
                acc += mean * mean / var;
                bad |= mean == S::zero();
            } else {
                bad = true;
            }
        }
        if bad {
            degenerate.push(n);
        }
        values.push(acc / lit(gates as f64));
    }
    Enl { values, degenerate }
}

/// One-sided power spectral density.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Cycles per unit of `spacing`.
    pub frequency: Vec<f64>,
    pub power: Vec<f64>,
}

impl Spectrum {
    pub fn bin_width(&self) -> f64 {
        if self.frequency.len() > 1 {
            self.frequency[1] - self.frequency[0]
        } else {
            0.0
        }
    }
}

/// Welch estimate: Hann-windowed segments of 256 samples (`M / 4` for
/// shorter series) with 50 % overlap and the segment mean removed. Scaled so
/// that `sum(power) * bin_width` is the variance of the series.
pub fn psd<S: Real>(series: &[S], spacing: f64) -> Result<Spectrum> {
    let n = series.len();
    if n < 16 {
        return Err(Error::DimensionMismatch(format!("spectrum needs >= 16 samples, got {n}")));
    }
    if !(spacing > 0.0) {
        return Err(Error::InvalidParameter("sample spacing must be positive".into()));
    }
    let seg = if n >= 1024 { 256 } else { n / 4 };
    let hop = seg / 2;
    let window: Vec<f64> = (0..seg)
        .map(|i| {
            let x = std::f64::consts::PI * i as f64 / seg as f64;
            x.sin().powi(2)
        })
        .collect();
    let wss: f64 = window.iter().map(|w| w * w).sum();
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(seg);
    let bins = seg / 2 + 1;
    let mut power = vec![0.0; bins];
    let mut segments = 0usize;
    let mut start = 0;
    let x: Vec<f64> = series.iter().map(|v| v.as_f64()).collect();
    while start + seg <= n {
        let chunk = &x[start..start + seg];
        let mean = chunk.iter().sum::<f64>() / seg as f64;
        let mut buf: Vec<Complex<f64>> = chunk
            .iter()
            .zip(&window)
            .map(|(v, w)| Complex::new((v - mean) * w, 0.0))
            .collect();
        fft.process(&mut buf);
        for (p, c) in power.iter_mut().zip(&buf) {
            *p += c.norm_sqr();
        }
        segments += 1;
        start += hop;
    }
    let fs = 1.0 / spacing;
    let scale = 1.0 / (fs * wss * segments as f64);
    for (i, p) in power.iter_mut().enumerate() {
        *p *= scale;
        if i != 0 && !(seg % 2 == 0 && i == bins - 1) {
            *p *= 2.0;
        }
    }
    let frequency = (0..bins).map(|i| i as f64 * fs / seg as f64).collect();
    Ok(Spectrum { frequency, power })
}
