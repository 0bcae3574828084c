//! Hybrid Gibbs sampler of the full posterior, with HMC moves for the
//! altimetric parameter tracks. It is slow and serves as the MMSE reference
//! for the coordinate-descent estimator.

mod gibbs;
mod hmc;

pub use gibbs::{
    draw_lambda, draw_mu, log_cond_theta, run_chain, sample_epsilon, sample_posterior, split_rhat,
    ChainConfig, Chains, Posterior,
};
pub use hmc::{hmc_move, DualAveraging, MoveStats, Point, Potential};

#[cfg(test)]
mod tests;
