use serde::{Deserialize, Serialize};

use super::{NoiseState, ParamTrack};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    CostTol,
    ParamTol,
    MaxIter,
    /// A sampler ran its fixed number of sweeps.
    Completed,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::CostTol => "cost_tol",
            StopReason::ParamTol => "param_tol",
            StopReason::MaxIter => "max_iter",
            StopReason::Completed => "completed",
        })
    }
}

/// Output of any of the three estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport<S: Real> {
    pub algorithm: String,
    pub theta_hat: ParamTrack<S>,
    pub noise_hat: NoiseState<S>,
    /// Effective number of looks per noise block.
    pub enl: Vec<S>,
    pub cost_trace: Vec<S>,
    pub iterations: usize,
    pub stop_reason: StopReason,
    /// Seconds.
    pub wall_time: f64,
    /// Echoes whose per-echo solver did not converge (LS only).
    pub flagged: Vec<usize>,
    /// Post-burn-in HMC acceptance rate per parameter (sampler only).
    pub acceptance: Option<[f64; 3]>,
}

impl<S: Real> FitReport<S> {
    pub fn time_per_echo(&self) -> f64 {
        self.wall_time / self.theta_hat.len().max(1) as f64
    }
}
