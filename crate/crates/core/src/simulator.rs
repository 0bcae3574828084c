//! Synthetic echo sequences with known ground truth.
//!
//! Echo `m` is drawn from its own ChaCha8 stream (`seed`, stream `m`), so a
//! sequence is reproducible bit for bit regardless of how the echoes are
//! distributed over threads.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{AltimetricModel, ModelKind, WaveformModel};
use crate::scalar::{lit, Real};
use crate::types::{EchoSequence, InstrumentConfig, ParamTrack, TruthNoise};

/// Parameter trajectories `m -> (SWH, tau, P_u)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Trajectory {
    /// `SWH = 2.5 + 2 cos(0.07 m)`, `tau = 27 + 0.02 m` for `m < 250` and
    /// `32 - 0.02 m` afterwards, `P_u = 158 + 0.05 sin(0.1 m)`.
    ///
    /// Note that the epoch drops by five gates at `m = 250`.
    Benchmark,
    /// As [`Trajectory::Benchmark`] but with `tau = 37 - 0.02 m` after
    /// `m = 250`, so that the epoch is continuous.
    ContinuousTau,
    Constant { swh: f64, tau: f64, pu: f64 },
    Tabulated { swh: Vec<f64>, tau: Vec<f64>, pu: Vec<f64> },
}

impl Trajectory {
    pub fn at(&self, m: usize) -> [f64; 3] {
        let x = m as f64;
        let swh = 2.5 + 2.0 * (0.07 * x).cos();
        let pu = 158.0 + 0.05 * (0.1 * x).sin();
        match self {
            Trajectory::Benchmark => {
                let tau = if m < 250 { 27.0 + 0.02 * x } else { 32.0 - 0.02 * x };
                [swh, tau, pu]
            }
            Trajectory::ContinuousTau => {
                let tau = if m < 250 { 27.0 + 0.02 * x } else { 37.0 - 0.02 * x };
                [swh, tau, pu]
            }
            Trajectory::Constant { swh, tau, pu } => [*swh, *tau, *pu],
            Trajectory::Tabulated { swh, tau, pu } => [swh[m], tau[m], pu[m]],
        }
    }

    fn len_hint(&self) -> Option<usize> {
        match self {
            Trajectory::Tabulated { swh, tau, pu } => Some(swh.len().min(tau.len()).min(pu.len())),
            _ => None,
        }
    }
}

/// How the received power fluctuates around its mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseLaw {
    /// Multiplicative mean-one Gamma(L, 1/L) speckle. With `thermal` set the
    /// speckle multiplies the thermal floor as well, `y = (s + mu) g`;
    /// otherwise `y = s g + mu` and gates before the leading edge are
    /// noise-free.
    Speckle { thermal: bool },
    /// Additive Gaussian noise with the same first two moments as speckle
    /// on `s + mu`.
    Gaussian,
    /// `y = s + mu` exactly.
    Noiseless,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub echoes: usize,
    pub kind: ModelKind,
    pub looks: usize,
    pub mu: f64,
    pub trajectory: Trajectory,
    pub noise: NoiseLaw,
    pub block_size: usize,
    pub pad_remainder: bool,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.echoes == 0 {
            return Err(Error::InvalidConfig("M must be ≥ 1 (scenario.echoes = 0)".into()));
        }
        if self.looks == 0 {
            return Err(Error::InvalidConfig("number of looks must be >= 1".into()));
        }
        if !(self.mu >= 0.0) || !self.mu.is_finite() {
            return Err(Error::InvalidConfig(format!("thermal noise mean {} < 0", self.mu)));
        }
        if self.block_size == 0 {
            return Err(Error::InvalidConfig("block size must be >= 1".into()));
        }
        if let Some(n) = self.trajectory.len_hint() {
            if n < self.echoes {
                return Err(Error::DimensionMismatch(format!(
                    "tabulated trajectory has {n} entries for {} echoes",
                    self.echoes
                )));
            }
        }
        Ok(())
    }

    pub fn truth<S: Real>(&self) -> ParamTrack<S> {
        let mut t = ParamTrack::constant(self.echoes, [S::zero(); 3]);
        for m in 0..self.echoes {
            t.set(m, self.trajectory.at(m).map(S::of_f64));
        }
        t
    }
}

/// The synthetic scenario used for the benchmark table.
pub fn default_scenario(echoes: usize) -> Scenario {
    Scenario {
        echoes,
        kind: ModelKind::Brown,
        looks: 90,
        mu: 0.025,
        trajectory: Trajectory::Benchmark,
        noise: NoiseLaw::Speckle { thermal: true },
        block_size: 20,
        pad_remainder: echoes % 20 != 0,
        seed: 0,
    }
}

/// Draws the echoes of a scenario with the default model numerics.
pub fn generate<S: Real>(sc: &Scenario, cfg: &InstrumentConfig<S>) -> Result<EchoSequence<S>> {
    generate_with(sc, &AltimetricModel::new(sc.kind, cfg.clone()))
}

pub fn generate_with<S: Real>(sc: &Scenario, model: &AltimetricModel<S>) -> Result<EchoSequence<S>> {
    sc.validate()?;
    let gates = model.gates();
    let truth = sc.truth::<S>();
    let looks = sc.looks as f64;
    let speckle = Gamma::new(looks, 1.0 / looks)
        .map_err(|e| Error::InvalidConfig(format!("speckle law: {e}")))?;

    let rows: Vec<Vec<S>> = (0..sc.echoes)
        .into_par_iter()
        .map(|m| -> Result<Vec<S>> {
            let mean = model.eval(truth.get(m))?;
            let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
            rng.set_stream(m as u64);
            let mu = sc.mu;
            Ok(mean
                .iter()
                .map(|&s| {
                    let s = s.as_f64();
                    let y = match sc.noise {
                        NoiseLaw::Speckle { thermal: true } => (s + mu) * speckle.sample(&mut rng),
                        NoiseLaw::Speckle { thermal: false } => s * speckle.sample(&mut rng) + mu,
                        NoiseLaw::Gaussian => {
                            let sd = (s + mu).abs() / looks.sqrt();
                            s + mu + sd * Normal::new(0.0, 1.0).unwrap().sample(&mut rng)
                        }
                        NoiseLaw::Noiseless => s + mu,
                    };
                    S::of_f64(y)
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let echoes = DMatrix::from_fn(sc.echoes, gates, |m, k| rows[m][k]);
    Ok(EchoSequence {
        echoes,
        truth: Some(truth),
        truth_noise: Some(TruthNoise {
            mu: vec![lit(sc.mu); sc.echoes],
            looks: sc.looks,
        }),
        block_size: sc.block_size,
        pad_remainder: sc.pad_remainder,
    })
}
