//! Coordinate-descent MAP estimator: natural-gradient steps on the
//! altimetric parameters alternating with closed-form noise updates.

use std::time::Instant;

use nalgebra::DVector;

use super::fisher::{deinterleave, interleave, StructuredFisher};
use super::init::initial_guess;
use super::objective::Objective;
use crate::error::{Error, Result};
use crate::metrics;
use crate::models::WaveformModel;
use crate::scalar::{lit, Real};
use crate::types::{
    EchoSequence, FitReport, HyperConfig, InstrumentConfig, NoiseState, ParamTrack, StopReason,
};

/// Numerical safeguards of the descent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdOptions<S> {
    /// First ridge factor tried on `diag(F)`.
    pub ridge_start: S,
    /// Largest ridge factor before giving up.
    pub ridge_max: S,
    /// Maximum number of step halvings.
    pub backtracks: usize,
    /// Floor negative prior curvature at zero.
    pub clamp_prior: bool,
    /// Cap on per-gate looks enforced by the variance floor; `None` keeps
    /// only the absolute floor.
    pub max_looks: Option<S>,
}

impl<S: Real> Default for CdOptions<S> {
    fn default() -> Self {
        CdOptions {
            ridge_start: lit(1e-8),
            ridge_max: lit(1e-2),
            backtracks: 30,
            clamp_prior: true,
            max_looks: Some(lit(1e3)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdState<S: Real> {
    pub theta: ParamTrack<S>,
    pub noise: NoiseState<S>,
    pub cost: S,
    pub iter: usize,
}

/// What a single natural-gradient step did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo<S> {
    /// Accepted fraction of the full step, 0 when no decrease was found.
    pub step: S,
    pub ridge: S,
}

/// Starting state: moment estimates, then the variance mode at those values.
pub fn initial_state<S: Real, M: WaveformModel<S> + ?Sized>(
    obj: &Objective<'_, S, M>,
    cfg: &InstrumentConfig<S>,
) -> Result<CdState<S>> {
    let (theta, mu) = initial_guess(obj.y, obj.model, cfg)?;
    state_from(obj, theta, mu)
}

/// Completes a parameter/mean guess with the matching variance mode and cost.
pub fn state_from<S: Real, M: WaveformModel<S> + ?Sized>(
    obj: &Objective<'_, S, M>,
    theta: ParamTrack<S>,
    mu: Vec<S>,
) -> Result<CdState<S>> {
    let waves = obj.waveforms(&theta)?;
    let lambda = obj.update_lambda(&waves, &mu);
    let noise = NoiseState { mu, lambda };
    let cost = obj.cost_terms(&theta, &waves, &noise).total();
    if !cost.is_finite_value() {
        return Err(Error::NonFiniteCost);
    }
    Ok(CdState { theta, noise, cost, iter: 0 })
}

fn apply_step<S: Real>(theta: &ParamTrack<S>, dir: &DVector<S>, t: S) -> ParamTrack<S> {
    let mut next = theta.clone();
    let mm = theta.len();
    for i in 0..3 {
        let col = next.column_mut(i);
        for m in 0..mm {
            col[m] -= t * dir[i * mm + m];
        }
    }
    for v in next.swh.iter_mut() {
        if *v < S::zero() {
            *v = S::zero();
        }
    }
    next
}

/// `gamma <- gamma - t F^-1 grad C` with ridge escalation and backtracking.
/// The returned state never has a larger cost than the input.
pub fn natural_step<S: Real, M: WaveformModel<S> + ?Sized>(
    obj: &Objective<'_, S, M>,
    state: &CdState<S>,
    opts: &CdOptions<S>,
) -> Result<(CdState<S>, StepInfo<S>)> {
    let lin = obj.linearize(&state.theta)?;
    let grad = obj.grad_from(&state.theta, &lin, &state.noise);
    let unchanged = |ridge| (state.clone(), StepInfo { step: S::zero(), ridge });
    if grad.iter().all(|g| *g == S::zero()) {
        return Ok(unchanged(S::zero()));
    }
    if !grad.iter().all(|g| g.is_finite_value()) {
        return Err(Error::NonFiniteCost);
    }

    let fisher = StructuredFisher::build(obj, &state.theta, &lin, &state.noise, opts.clamp_prior);
    let g = interleave(&grad);
    let mut ridge = opts.ridge_start;
    let dir = loop {
        if let Some(x) = fisher.solve(&g, ridge) {
            break deinterleave(&x);
        }
        ridge *= lit(10.0);
        if ridge > opts.ridge_max * lit(1.000001) {
            return Err(Error::IllConditionedFisher { ridge: ridge.as_f64() / 10.0 });
        }
    };

    let mut t = S::one();
    for _ in 0..=opts.backtracks {
        let theta = apply_step(&state.theta, &dir, t);
        let waves = obj.waveforms(&theta)?;
        let cost = obj.cost_terms(&theta, &waves, &state.noise).total();
        if cost.is_finite_value() && cost <= state.cost {
            let next = CdState { theta, noise: state.noise.clone(), cost, iter: state.iter };
            return Ok((next, StepInfo { step: t, ridge }));
        }
        t *= lit(0.5);
    }
    Ok(unchanged(ridge))
}

/// Full iteration history of a run.
#[derive(Debug, Clone)]
pub struct CdRun<S: Real> {
    pub state: CdState<S>,
    pub cost_trace: Vec<S>,
    pub stop_reason: StopReason,
    pub steps: Vec<StepInfo<S>>,
}

/// Runs the descent from `state` until one of the stopping rules fires.
pub fn descend<S: Real, M: WaveformModel<S> + ?Sized>(
    obj: &Objective<'_, S, M>,
    mut state: CdState<S>,
    opts: &CdOptions<S>,
) -> Result<CdRun<S>> {
    let hyper = obj.hyper;
    let mut trace = vec![state.cost];
    let mut steps = Vec::new();
    let mut reason = StopReason::MaxIter;
    while state.iter < hyper.t_max {
        let before = state.theta.to_stacked();
        let prev_cost = state.cost;
        let (next, info) = natural_step(obj, &state, opts)?;
        steps.push(info);
        state = next;

        let waves = obj.waveforms(&state.theta)?;
        state.noise.mu = obj.update_mu(&waves, &state.noise.lambda);
        state.noise.lambda = obj.update_lambda(&waves, &state.noise.mu);
        state.cost = obj.cost_terms(&state.theta, &waves, &state.noise).total();
        if !state.cost.is_finite_value() {
            return Err(Error::NonFiniteCost);
        }
        state.iter += 1;
        trace.push(state.cost);

        let moved = (state.theta.to_stacked() - &before).norm();
        if (state.cost - prev_cost).abs() <= hyper.xi1 * prev_cost.abs() {
            reason = StopReason::CostTol;
            break;
        }
        if moved <= hyper.xi2 * (before.norm() + hyper.xi2) {
            reason = StopReason::ParamTol;
            break;
        }
    }
    Ok(CdRun { state, cost_trace: trace, stop_reason: reason, steps })
}

/// Fits a sequence with the default moment initialisation.
pub fn fit<S: Real, M: WaveformModel<S> + ?Sized>(
    seq: &EchoSequence<S>,
    model: &M,
    cfg: &InstrumentConfig<S>,
    hyper: &HyperConfig<S>,
    opts: &CdOptions<S>,
) -> Result<FitReport<S>> {
    let start = Instant::now();
    let obj = Objective::new(seq, model, *hyper)?.with_max_looks(opts.max_looks);
    let init = initial_state(&obj, cfg)?;
    let run = descend(&obj, init, opts)?;
    Ok(report(seq, run, start.elapsed().as_secs_f64()))
}

pub(crate) fn report<S: Real>(seq: &EchoSequence<S>, run: CdRun<S>, wall_time: f64) -> FitReport<S> {
    let enl = metrics::enl(seq, &run.state.noise.lambda).values;
    FitReport {
        algorithm: "cd".into(),
        theta_hat: run.state.theta,
        noise_hat: run.state.noise,
        enl,
        cost_trace: run.cost_trace,
        iterations: run.state.iter,
        stop_reason: run.stop_reason,
        wall_time,
        flagged: Vec::new(),
        acceptance: None,
    }
}
