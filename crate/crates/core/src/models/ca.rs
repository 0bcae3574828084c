//! Conventional echo as the numerical convolution `FSIR * PDF * PTR_T`.
//!
//! The flat-surface response is `P_u exp(-alpha x) U(x)`, so the convolution
//! with the kernel `g = PDF * PTR_T` collapses to
//! `P_u exp(-alpha x) G(x)` where `G(x) = int_{-inf}^{x} g(u) exp(alpha u) du`.
//! `G` is accumulated once per call with the trapezoid rule and interpolated
//! linearly at the gates.

use nalgebra::DVector;

use super::check_params;
use super::ptr::{ConvNumerics, Kernel};
use crate::error::Result;
use crate::scalar::{lit, Real};
use crate::types::InstrumentConfig;

/// Flat-surface impulse response sampled at the gates (`U(0) = 1`).
pub fn fsir_ca<S: Real>(params: [S; 3], cfg: &InstrumentConfig<S>) -> Result<DVector<S>> {
    check_params(&params)?;
    let [_, tau, pu] = params;
    let t = cfg.gate_duration;
    let ts = tau * t;
    Ok(DVector::from_fn(cfg.gates, |k, _| {
        let x = lit::<S>((k + 1) as f64) * t - ts;
        if x >= S::zero() {
            pu * (-cfg.brown_alpha * x).exp()
        } else {
            S::zero()
        }
    }))
}

/// Conventional echo with the default numerics.
pub fn ca_conv<S: Real>(params: [S; 3], cfg: &InstrumentConfig<S>) -> Result<DVector<S>> {
    ca_conv_with(params, cfg, &ConvNumerics::default())
}

pub fn ca_conv_with<S: Real>(
    params: [S; 3],
    cfg: &InstrumentConfig<S>,
    num: &ConvNumerics,
) -> Result<DVector<S>> {
    check_params(&params)?;
    let [swh, tau, pu] = params;
    let t = cfg.gate_duration;
    let alpha = cfg.brown_alpha;
    let sigma_s = swh / (lit::<S>(2.0) * cfg.speed_of_light);
    let kernel = Kernel::build(sigma_s, t, num);
    if kernel.is_dirac() {
        return fsir_ca(params, cfg);
    }

    let n = kernel.density.len();
    let half_dt = kernel.dt * lit(0.5);
    let mut cum = Vec::with_capacity(n);
    let mut acc = S::zero();
    let mut prev = kernel.density[0] * (alpha * kernel.time(0)).exp();
    cum.push(acc);
    for j in 1..n {
        let cur = kernel.density[j] * (alpha * kernel.time(j)).exp();
        acc += half_dt * (prev + cur);
        cum.push(acc);
        prev = cur;
    }

    let first = kernel.time(0);
    let ts = tau * t;
    Ok(DVector::from_fn(cfg.gates, |k, _| {
        let x = lit::<S>((k + 1) as f64) * t - ts;
        let pos = (x - first) / kernel.dt;
        let g = if pos <= S::zero() {
            S::zero()
        } else if pos >= lit((n - 1) as f64) {
            cum[n - 1]
        } else {
            let i = pos.floor();
            let w = pos - i;
            let i = i.as_f64() as usize;
            cum[i] * (S::one() - w) + cum[i + 1] * w
        };
        pu * (-alpha * x).exp() * g
    }))
}
