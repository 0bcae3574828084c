//! Moment-based retracker used to start the iterative estimators.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::Result;
use crate::models::WaveformModel;
use crate::scalar::{lit, Real};
use crate::types::{InstrumentConfig, ParamTrack};

/// Number of leading gates assumed to contain only thermal noise.
pub const NOISE_GATES: usize = 10;

/// Ratio between the 10-90 % rise time and the width of a Gaussian-smoothed
/// step.
const RISE_TO_SIGMA: f64 = 2.563;

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Fractional gate index (1-based time units) where the smoothed echo first
/// reaches `level` on the way to its peak.
fn crossing(sm: &[f64], peak: usize, level: f64) -> f64 {
    let mut k = 0;
    for i in (0..=peak).rev() {
        if sm[i] < level {
            k = i;
            break;
        }
    }
    if k >= peak {
        return (peak + 1) as f64;
    }
    let d = sm[k + 1] - sm[k];
    let f = if d > 0.0 { ((level - sm[k]) / d).clamp(0.0, 1.0) } else { 0.0 };
    (k + 1) as f64 + f
}

/// Estimates `(SWH, tau, P_u)` and the thermal mean of one echo.
pub fn moment_estimate<S: Real, M: WaveformModel<S> + ?Sized>(
    echo: &[S],
    model: &M,
    cfg: &InstrumentConfig<S>,
) -> Result<([S; 3], S)> {
    let k = echo.len();
    let y: Vec<f64> = echo.iter().map(|v| v.as_f64()).collect();
    let mu0 = median(&mut y[..NOISE_GATES.min(k)].to_vec());
    let z: Vec<f64> = y.iter().map(|v| v - mu0).collect();
    let sm: Vec<f64> = (0..k)
        .map(|i| {
            let lo = i.saturating_sub(2);
            let hi = (i + 3).min(k);
            z[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    let (peak, amp) = sm
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    if !(amp > 0.0) {
        return Ok(([S::zero(), lit(k as f64 / 2.0), S::zero()], S::of_f64(mu0)));
    }

    let gate = cfg.gate_duration.as_f64();
    let c = cfg.speed_of_light.as_f64();
    let sp = cfg.brown_sigma_p.as_f64();
    let tau = crossing(&sm, peak, 0.5 * amp);
    let rise = (crossing(&sm, peak, 0.9 * amp) - crossing(&sm, peak, 0.1 * amp)) * gate;
    // The 5-gate box filter adds (5^2 - 1) / 12 gates^2 of variance.
    let sigma2 = (rise / RISE_TO_SIGMA).powi(2) - 2.0 * gate * gate;
    let swh = 2.0 * c * (sigma2 - sp * sp).max(0.0).sqrt();

    // Amplitude by linear least squares against the unit-amplitude shape.
    let params = [S::of_f64(swh), S::of_f64(tau), S::one()];
    let shape: DVector<S> = model.eval(params)?;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..k {
        let s = shape[i].as_f64();
        num += s * z[i];
        den += s * s;
    }
    let pu = if den > 0.0 { (num / den).max(0.0) } else { 0.0 };
    Ok(([params[0], params[1], S::of_f64(pu)], S::of_f64(mu0)))
}

/// Moment estimates for every row of an `M x K` echo matrix.
pub fn initial_guess<S: Real, M: WaveformModel<S> + ?Sized>(
    echoes: &nalgebra::DMatrix<S>,
    model: &M,
    cfg: &InstrumentConfig<S>,
) -> Result<(ParamTrack<S>, Vec<S>)> {
    let rows: Vec<([S; 3], S)> = (0..echoes.nrows())
        .into_par_iter()
        .map(|m| {
            let row: Vec<S> = echoes.row(m).iter().copied().collect();
            moment_estimate(&row, model, cfg)
        })
        .collect::<Result<_>>()?;
    let mut theta = ParamTrack::constant(rows.len(), [S::zero(); 3]);
    let mut mu = Vec::with_capacity(rows.len());
    for (m, (p, u)) in rows.into_iter().enumerate() {
        theta.set(m, p);
        mu.push(u);
    }
    Ok((theta, mu))
}
