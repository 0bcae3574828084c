//! Estimators of the altimetric parameters and noise statistics.

mod banded;
mod cd;
mod fisher;
mod init;
mod laplacian;
mod ls;
mod objective;

pub use banded::{BandCholesky, SymBand};
pub use cd::{
    descend, fit, initial_state, natural_step, state_from, CdOptions, CdRun, CdState, StepInfo,
};
pub use fisher::{deinterleave, interleave, negative_eigenpair, StructuredFisher};
pub use init::{initial_guess, moment_estimate, NOISE_GATES};
pub use laplacian::Laplacian;
pub use ls::{fit_echo, fit_ls, EchoFit, LsOptions};
pub use objective::{CostTerms, Linearization, Objective, PriorCurvature, VarianceFloor};
