//! Mean-power waveform models and their Jacobians.

mod brown;
mod ca;
mod dda;
mod ptr;

pub use brown::{brown, brown_at, brown_jacobian, sigma_c2};
pub use ca::{ca_conv, ca_conv_with, fsir_ca};
pub use dda::{beam_centers, dda, dda_with, DelayCompensation};
pub use ptr::{fit_gaussian_sigma, sinc2, ConvNumerics, PtrShape};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};
use crate::types::InstrumentConfig;

/// Which altimetric model maps `(SWH, tau, P_u)` to a mean waveform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Closed-form conventional altimetry echo.
    Brown,
    /// Conventional echo by numerical double convolution.
    #[serde(rename = "ca", alias = "conventional_conv")]
    ConventionalConv,
    /// Multi-look delay/Doppler echo.
    #[serde(rename = "dda", alias = "delay_doppler")]
    DelayDoppler,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Brown => "brown",
            ModelKind::ConventionalConv => "ca",
            ModelKind::DelayDoppler => "dda",
        })
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "brown" => Ok(ModelKind::Brown),
            "ca" | "conventional_conv" | "conv" => Ok(ModelKind::ConventionalConv),
            "dda" | "delay_doppler" => Ok(ModelKind::DelayDoppler),
            other => Err(Error::InvalidParameter(format!("unknown model kind `{other}`"))),
        }
    }
}

pub(crate) fn check_params<S: Real>(params: &[S; 3]) -> Result<()> {
    if params.iter().all(|p| p.is_finite_value()) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "non-finite model parameters ({}, {}, {})",
            params[0].as_f64(),
            params[1].as_f64(),
            params[2].as_f64()
        )))
    }
}

/// Anything the estimators can fit: a mean waveform on `gates()` samples
/// together with its `gates() x 3` Jacobian in `(SWH, tau, P_u)`.
pub trait WaveformModel<S: Real>: Send + Sync {
    fn gates(&self) -> usize;

    fn eval(&self, params: [S; 3]) -> Result<DVector<S>>;

    /// Waveform and Jacobian evaluated together.
    fn eval_jacobian(&self, params: [S; 3]) -> Result<(DVector<S>, DMatrix<S>)>;
}

/// Knobs of the numerical models; the Brown model ignores all of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelOptions<S> {
    pub numerics: ConvNumerics,
    pub delays: DelayCompensation,
    /// Finite-difference step on SWH, m.
    pub fd_swh: S,
    /// Finite-difference step on tau, gates.
    pub fd_tau: S,
}

impl<S: Real> Default for ModelOptions<S> {
    fn default() -> Self {
        ModelOptions {
            numerics: ConvNumerics::default(),
            delays: DelayCompensation::FlatEarth,
            fd_swh: lit(1e-3),
            fd_tau: lit(1e-3),
        }
    }
}

/// A model kind bound to an instrument.
#[derive(Debug, Clone)]
pub struct AltimetricModel<S: Real> {
    pub kind: ModelKind,
    pub cfg: InstrumentConfig<S>,
    pub options: ModelOptions<S>,
}

impl<S: Real> AltimetricModel<S> {
    pub fn new(kind: ModelKind, cfg: InstrumentConfig<S>) -> Self {
        AltimetricModel { kind, cfg, options: ModelOptions::default() }
    }

    pub fn with_options(mut self, options: ModelOptions<S>) -> Self {
        self.options = options;
        self
    }

    /// Unit-amplitude shape, i.e. the waveform at `P_u = 1`.
    fn shape(&self, swh: S, tau: S) -> Result<DVector<S>> {
        let p = [swh, tau, S::one()];
        match self.kind {
            ModelKind::Brown => brown(p, &self.cfg),
            ModelKind::ConventionalConv => ca_conv_with(p, &self.cfg, &self.options.numerics),
            ModelKind::DelayDoppler => {
                dda_with(p, &self.cfg, &self.options.numerics, &self.options.delays)
            }
        }
    }

    fn fd_jacobian(&self, params: [S; 3]) -> Result<(DVector<S>, DMatrix<S>)> {
        let [swh, tau, pu] = params;
        let unit = self.shape(swh, tau)?;
        let k = unit.len();
        let mut jac = DMatrix::zeros(k, 3);

        let hs = self.options.fd_swh;
        let d_swh = if swh >= hs {
            (self.shape(swh + hs, tau)? - self.shape(swh - hs, tau)?) / (hs + hs)
        } else {
            (self.shape(swh + hs, tau)? - &unit) / hs
        };
        let ht = self.options.fd_tau;
        let d_tau = (self.shape(swh, tau + ht)? - self.shape(swh, tau - ht)?) / (ht + ht);

        jac.set_column(0, &(d_swh * pu));
        jac.set_column(1, &(d_tau * pu));
        jac.set_column(2, &unit);
        Ok((unit * pu, jac))
    }
}

impl<S: Real> WaveformModel<S> for AltimetricModel<S> {
    fn gates(&self) -> usize {
        self.cfg.gates
    }

    fn eval(&self, params: [S; 3]) -> Result<DVector<S>> {
        check_params(&params)?;
        Ok(self.shape(params[0], params[1])? * params[2])
    }

    fn eval_jacobian(&self, params: [S; 3]) -> Result<(DVector<S>, DMatrix<S>)> {
        check_params(&params)?;
        match self.kind {
            ModelKind::Brown => brown_jacobian(params, &self.cfg),
            _ => self.fd_jacobian(params),
        }
    }
}

/// Jacobian `K x 3` of the chosen model with default numerics.
pub fn jacobian<S: Real>(
    kind: ModelKind,
    params: [S; 3],
    cfg: &InstrumentConfig<S>,
) -> Result<DMatrix<S>> {
    AltimetricModel::new(kind, cfg.clone()).eval_jacobian(params).map(|(_, j)| j)
}
