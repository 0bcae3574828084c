use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Fixed hyperparameters of the smoothing prior and the stopping rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperConfig<S> {
    /// Inverse-gamma shapes of the smoothness variances, one per parameter.
    pub a: [S; 3],
    /// Inverse-gamma scales of the smoothness variances, one per parameter.
    pub b: [S; 3],
    /// Prior variance of the thermal-noise means.
    pub psi2: S,
    /// Relative cost-change tolerance.
    pub xi1: S,
    /// Relative parameter-change tolerance.
    pub xi2: S,
    pub t_max: usize,
}

impl<S: Real> Default for HyperConfig<S> {
    fn default() -> Self {
        HyperConfig {
            a: [S::one(); 3],
            b: [lit(1e-2); 3],
            psi2: lit(100.0),
            xi1: lit(1e-6),
            xi2: lit(1e-6),
            t_max: 200,
        }
    }
}

impl<S: Real> HyperConfig<S> {
    /// Scales chosen from the dynamic range of each parameter,
    /// `b_i = (fraction * range_i)^2 * M / 2`, so that the prior floor on the
    /// second-difference spread is `fraction * range_i`.
    pub fn with_dynamic_range(mut self, echoes: usize, ranges: [S; 3], fraction: S) -> Self {
        let half_m = lit::<S>(echoes as f64 / 2.0);
        for i in 0..3 {
            let spread = fraction * ranges[i];
            self.b[i] = spread * spread * half_m;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..3 {
            if !(self.a[i] > S::zero() && self.b[i] > S::zero()) {
                return Err(Error::InvalidConfig("a_i and b_i must be positive".into()));
            }
        }
        if !(self.psi2 > S::zero()) {
            return Err(Error::InvalidConfig("psi2 must be positive".into()));
        }
        if !(self.xi1 > S::zero() && self.xi2 > S::zero()) {
            return Err(Error::InvalidConfig("xi1 and xi2 must be positive".into()));
        }
        if self.t_max == 0 {
            return Err(Error::InvalidConfig("t_max must be >= 1".into()));
        }
        Ok(())
    }
}
