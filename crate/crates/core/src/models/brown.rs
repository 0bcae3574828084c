//! Closed-form Brown ocean echo and its analytic derivatives.

use nalgebra::{DMatrix, DVector};

use super::check_params;
use crate::error::Result;
use crate::scalar::{lit, Real};
use crate::types::InstrumentConfig;

/// Intermediate quantities of the Brown model at one time sample.
struct Terms<S> {
    /// `(1 + erf(u)) / 2`
    edge: S,
    /// `exp(-alpha (x - alpha sigma_c^2 / 2))`
    decay: S,
    /// `d edge / du`
    edge_slope: S,
    u: S,
}

#[inline]
fn terms<S: Real>(x: S, sc2: S, alpha: S) -> Terms<S> {
    let sqrt2 = lit::<S>(std::f64::consts::SQRT_2);
    let sc = sc2.sqrt();
    let u = (x - alpha * sc2) / (sqrt2 * sc);
    let edge = lit::<S>(0.5) * (-u).erfc();
    let decay = (-alpha * (x - alpha * sc2 / lit(2.0))).exp();
    let edge_slope = (-u * u).exp() / S::pi().sqrt();
    Terms { edge, decay, edge_slope, u }
}

/// Total leading-edge variance `sigma_c^2 = (SWH / 2c)^2 + sigma_p^2`, s^2.
#[inline]
pub fn sigma_c2<S: Real>(swh: S, cfg: &InstrumentConfig<S>) -> S {
    let sigma_s = swh / (lit::<S>(2.0) * cfg.speed_of_light);
    sigma_s * sigma_s + cfg.brown_sigma_p * cfg.brown_sigma_p
}

/// Mean echo power at time `t` (s) for `params = [swh (m), tau (gates), pu]`.
pub fn brown_at<S: Real>(t: S, params: [S; 3], cfg: &InstrumentConfig<S>) -> S {
    let [swh, tau, pu] = params;
    let x = t - tau * cfg.gate_duration;
    let tm = terms(x, sigma_c2(swh, cfg), cfg.brown_alpha);
    pu * tm.edge * tm.decay
}

/// Brown waveform sampled at the gates `t_k = k T`, `k = 1..K`.
pub fn brown<S: Real>(params: [S; 3], cfg: &InstrumentConfig<S>) -> Result<DVector<S>> {
    check_params(&params)?;
    let t = cfg.gate_duration;
    Ok(DVector::from_fn(cfg.gates, |k, _| {
        brown_at(lit::<S>((k + 1) as f64) * t, params, cfg)
    }))
}

/// Waveform and its `K x 3` Jacobian with respect to `(swh, tau, pu)`.
pub fn brown_jacobian<S: Real>(
    params: [S; 3],
    cfg: &InstrumentConfig<S>,
) -> Result<(DVector<S>, DMatrix<S>)> {
    check_params(&params)?;
    let [swh, tau, pu] = params;
    let two = lit::<S>(2.0);
    let sqrt2 = lit::<S>(std::f64::consts::SQRT_2);
    let alpha = cfg.brown_alpha;
    let c = cfg.speed_of_light;
    let sc2 = sigma_c2(swh, cfg);
    let sc = sc2.sqrt();
    let dsc2_dswh = swh / (two * c * c);
    let t_gate = cfg.gate_duration;

    let k_count = cfg.gates;
    let mut s = DVector::zeros(k_count);
    let mut jac = DMatrix::zeros(k_count, 3);
    for k in 0..k_count {
        let x = lit::<S>((k + 1) as f64) * t_gate - tau * t_gate;
        let tm = terms(x, sc2, alpha);
        let shape = tm.edge * tm.decay;
        s[k] = pu * shape;

        // d/dx of the waveform; tau enters through x = t - tau T
        let ds_dx = pu * tm.decay * (tm.edge_slope / (sqrt2 * sc) - alpha * tm.edge);
        // u = x / (sqrt2 sc) - alpha sc / sqrt2
        let du_dsc2 = -(x / (two * sqrt2)) / (sc2 * sc) - alpha / (two * sqrt2 * sc);
        let ds_dsc2 = pu * tm.decay * (tm.edge_slope * du_dsc2 + tm.edge * alpha * alpha / two);
        let _ = tm.u;

        jac[(k, 0)] = ds_dsc2 * dsc2_dswh;
        jac[(k, 1)] = -ds_dx * t_gate;
        jac[(k, 2)] = shape;
    }
    Ok((s, jac))
}
