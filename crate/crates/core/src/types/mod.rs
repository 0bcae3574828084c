//! Domain data model shared by the simulators, estimators and file formats.

mod hyper;
mod instrument;
mod report;
mod sequence;

pub use hyper::HyperConfig;
pub use instrument::{beamwidth_param_from, InstrumentConfig, SIGMA_P_OVER_T, SPEED_OF_LIGHT};
pub use report::{FitReport, StopReason};
pub use sequence::{validate, BlockLayout, EchoSequence, NoiseState, ParamTrack, TruthNoise};
