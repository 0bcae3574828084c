//! Multi-look delay/Doppler echo.
//!
//! Each Doppler beam sees the strip `y_lo <= y < y_hi` of the illuminated
//! disc of radius `rho(x) = sqrt(h c x)`. The per-beam flat-surface response
//! is `P_u / pi * exp(-alpha x) U(x) [phi(y_hi) - phi(y_lo)]` with
//! `phi(y) = Re atan(y / sqrt(rho^2 - y^2))`, which equals `asin(y / rho)`
//! inside the disc and `sign(y) pi / 2` outside. After delay compensation the
//! beams are summed into a single multi-look response and convolved once
//! with `PDF * PTR_T`; the Doppler PTR reduces to the identity on the beam
//! grid.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::check_params;
use super::ptr::{ConvNumerics, Kernel};
use crate::error::{Error, Result};
use crate::scalar::{lit, Real};
use crate::types::InstrumentConfig;

/// Range migration applied to each beam before summation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayCompensation {
    /// `dt_q = y_q^2 / (h c)` with `y_q` the along-track beam centre.
    FlatEarth,
    /// No migration.
    Zero,
    /// Explicit per-beam delays in seconds.
    Custom(Vec<f64>),
}

/// Doppler beam centre frequencies `(q - (Q + 1) / 2) F`, `q = 1..Q`.
pub fn beam_centers<S: Real>(cfg: &InstrumentConfig<S>) -> Vec<S> {
    let q = cfg.doppler_beams;
    let mid = lit::<S>((q + 1) as f64 / 2.0);
    (1..=q).map(|i| (lit::<S>(i as f64) - mid) * cfg.freq_resolution).collect()
}

fn along_track<S: Real>(f: S, cfg: &InstrumentConfig<S>) -> S {
    cfg.altitude * cfg.wavelength * f / (lit::<S>(2.0) * cfg.satellite_velocity)
}

/// `Re atan(y / sqrt(rho^2 - y^2))` with the radicand clamped at zero.
#[inline]
fn beam_angle<S: Real>(y: S, rho2: S) -> S {
    if rho2 > y * y {
        (y / rho2.sqrt()).asin()
    } else if y > S::zero() {
        S::frac_pi_2()
    } else if y < S::zero() {
        -S::frac_pi_2()
    } else {
        S::zero()
    }
}

/// Delay/Doppler echo with the default numerics and flat-Earth compensation.
pub fn dda<S: Real>(params: [S; 3], cfg: &InstrumentConfig<S>) -> Result<DVector<S>> {
    dda_with(params, cfg, &ConvNumerics::default(), &DelayCompensation::FlatEarth)
}

pub fn dda_with<S: Real>(
    params: [S; 3],
    cfg: &InstrumentConfig<S>,
    num: &ConvNumerics,
    delays: &DelayCompensation,
) -> Result<DVector<S>> {
    check_params(&params)?;
    let [swh, tau, pu] = params;
    let gates = cfg.gates;
    let t = cfg.gate_duration;
    let alpha = cfg.brown_alpha;
    let hc = cfg.altitude * cfg.speed_of_light;

    let centers = beam_centers(cfg);
    let nq = centers.len();
    let half_f = cfg.freq_resolution * lit(0.5);
    let edges: Vec<S> = centers
        .iter()
        .map(|&f| along_track(f - half_f, cfg))
        .chain(std::iter::once(along_track(centers[nq - 1] + half_f, cfg)))
        .collect();
    let shifts: Vec<S> = match delays {
        DelayCompensation::FlatEarth => centers
            .iter()
            .map(|&f| {
                let y = along_track(f, cfg);
                y * y / hc
            })
            .collect(),
        DelayCompensation::Zero => vec![S::zero(); nq],
        DelayCompensation::Custom(d) => {
            if d.len() != nq {
                return Err(Error::DimensionMismatch(format!(
                    "{} custom beam delays for {nq} beams",
                    d.len()
                )));
            }
            d.iter().map(|&v| S::of_f64(v)).collect()
        }
    };

    let sigma_s = swh / (lit::<S>(2.0) * cfg.speed_of_light);
    let kernel = Kernel::build(sigma_s, t, num);
    let dt = kernel.dt;
    let ts = tau * t;
    let span_end = lit::<S>(gates as f64) * t - ts + kernel.half_width();
    if span_end <= S::zero() {
        return Ok(DVector::zeros(gates));
    }

    // Multi-look response on the grid z_i = i dt. Each beam is sampled on its
    // own grid starting at the beam onset (trapezoid weight 1/2 there) and
    // deposited linearly at the shifted positions.
    let n = (span_end / dt).ceil().as_f64() as usize + 2;
    let mut h = vec![S::zero(); n];
    let mut phi = vec![S::zero(); nq + 1];
    let inv_pi = S::one() / S::pi();
    for j in 0..n {
        let x = lit::<S>(j as f64) * dt;
        let rho2 = hc * x;
        for (p, &y) in phi.iter_mut().zip(&edges) {
            *p = beam_angle(y, rho2);
        }
        let mut base = inv_pi * (-alpha * x).exp();
        if j == 0 {
            base *= lit(0.5);
        }
        for q in 0..nq {
            let v = base * (phi[q + 1] - phi[q]);
            if v == S::zero() {
                continue;
            }
            let pos = (x + shifts[q]) / dt;
            let i = pos.floor();
            let w = pos - i;
            let i = i.as_f64() as usize;
            if i < n {
                h[i] += v * (S::one() - w);
            }
            if i + 1 < n {
                h[i + 1] += v * w;
            }
        }
    }

    // Convolve with the kernel at the grid points bracketing each gate.
    let conv_at = |i: isize| -> S {
        if kernel.is_dirac() {
            return if i >= 0 && (i as usize) < n { h[i as usize] } else { S::zero() };
        }
        let mut acc = S::zero();
        let c = kernel.center as isize;
        for (l, &g) in kernel.density.iter().enumerate() {
            let src = i - (l as isize - c);
            if src >= 0 && (src as usize) < n {
                acc += g * h[src as usize];
            }
        }
        acc * dt
    };
    Ok(DVector::from_fn(gates, |k, _| {
        let z = lit::<S>((k + 1) as f64) * t - ts;
        let pos = z / dt;
        let i = pos.floor();
        let w = pos - i;
        let i = i.as_f64() as isize;
        pu * (conv_at(i) * (S::one() - w) + conv_at(i + 1) * w)
    }))
}
