//! Smoothing Bayesian retracking of radar-altimeter waveforms.
//!
//! A sequence of `M` echoes is fitted jointly: each parameter track
//! (significant wave height, epoch, amplitude) carries a second-difference
//! smoothness prior, and the noise is modelled per gate and per block of `r`
//! echoes. Three estimators are provided:
//!
//! * [`estimator::fit`]: coordinate-descent MAP with natural-gradient steps,
//! * [`estimator::fit_ls`]: independent per-echo least squares,
//! * [`sampler::sample_posterior`]: Gibbs/HMC posterior mean.
//!
//! Everything numerical is generic over [`scalar::Real`] (`f32` or `f64`);
//! the aliases below fix `f64`.
//!
//! ```
//! use retrack::{estimator, simulator, Hyper, Instrument, Model};
//!
//! let cfg = Instrument::cryosat2();
//! let mut scenario = simulator::default_scenario(40);
//! scenario.trajectory = simulator::Trajectory::ContinuousTau;
//! let seq = simulator::generate(&scenario, &cfg).unwrap();
//! let model = Model::new(retrack::models::ModelKind::Brown, cfg.clone());
//! let report = estimator::fit(&seq, &model, &cfg, &Hyper::default(), &Default::default()).unwrap();
//! assert_eq!(report.theta_hat.len(), 40);
//! ```

pub mod config;
pub mod error;
pub mod estimator;
pub mod io;
pub mod metrics;
pub mod models;
pub mod sampler;
pub mod scalar;
pub mod simulator;
pub mod types;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Instrument = types::InstrumentConfig<f64>;
pub type Hyper = types::HyperConfig<f64>;
pub type Sequence = types::EchoSequence<f64>;
pub type Track = types::ParamTrack<f64>;
pub type Noise = types::NoiseState<f64>;
pub type Report = types::FitReport<f64>;
pub type Model = models::AltimetricModel<f64>;
pub type Posterior = sampler::Posterior<f64>;
