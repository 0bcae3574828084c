use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::InstrumentConfig;

/// Per-echo altimetric parameters: significant wave height (m), epoch (gates)
/// and amplitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamTrack<S> {
    pub swh: Vec<S>,
    pub tau: Vec<S>,
    pub pu: Vec<S>,
}

impl<S: Real> ParamTrack<S> {
    pub fn new(swh: Vec<S>, tau: Vec<S>, pu: Vec<S>) -> Result<Self> {
        if swh.len() != tau.len() || swh.len() != pu.len() {
            return Err(Error::DimensionMismatch(format!(
                "parameter vectors have lengths {}, {}, {}",
                swh.len(),
                tau.len(),
                pu.len()
            )));
        }
        Ok(ParamTrack { swh, tau, pu })
    }

    /// `len` copies of the same triple.
    pub fn constant(len: usize, params: [S; 3]) -> Self {
        ParamTrack {
            swh: vec![params[0]; len],
            tau: vec![params[1]; len],
            pu: vec![params[2]; len],
        }
    }

    pub fn len(&self) -> usize {
        self.swh.len()
    }

    pub fn is_empty(&self) -> bool {
        self.swh.is_empty()
    }

    /// Parameter column `i` (0 = SWH, 1 = tau, 2 = P_u).
    pub fn column(&self, i: usize) -> &[S] {
        match i {
            0 => &self.swh,
            1 => &self.tau,
            2 => &self.pu,
            _ => panic!("parameter index {i} out of range"),
        }
    }

    pub fn column_mut(&mut self, i: usize) -> &mut [S] {
        match i {
            0 => &mut self.swh,
            1 => &mut self.tau,
            2 => &mut self.pu,
            _ => panic!("parameter index {i} out of range"),
        }
    }

    pub fn get(&self, m: usize) -> [S; 3] {
        [self.swh[m], self.tau[m], self.pu[m]]
    }

    pub fn set(&mut self, m: usize, p: [S; 3]) {
        self.swh[m] = p[0];
        self.tau[m] = p[1];
        self.pu[m] = p[2];
    }

    /// Column-stacked vector `(swh^T, tau^T, pu^T)^T` of length `3M`.
    pub fn to_stacked(&self) -> DVector<S> {
        let m = self.len();
        DVector::from_fn(3 * m, |j, _| self.column(j / m)[j % m])
    }

    pub fn from_stacked(gamma: &DVector<S>) -> Result<Self> {
        if gamma.len() % 3 != 0 {
            return Err(Error::DimensionMismatch(format!(
                "stacked parameter vector length {} is not a multiple of 3",
                gamma.len()
            )));
        }
        let m = gamma.len() / 3;
        let col = |i: usize| gamma.rows(i * m, m).iter().copied().collect::<Vec<_>>();
        Ok(ParamTrack {
            swh: col(0),
            tau: col(1),
            pu: col(2),
        })
    }

    pub fn validate(&self, gates: usize) -> Result<()> {
        if self.is_empty() {
            return Err(Error::InvalidParameter("parameter track is empty".into()));
        }
        if self.swh.len() != self.tau.len() || self.swh.len() != self.pu.len() {
            return Err(Error::DimensionMismatch("parameter vectors differ in length".into()));
        }
        let kmax = S::of_f64(gates as f64);
        for m in 0..self.len() {
            let [swh, tau, pu] = self.get(m);
            if !(swh.is_finite_value() && tau.is_finite_value() && pu.is_finite_value()) {
                return Err(Error::InvalidParameter(format!("non-finite parameter at echo {m}")));
            }
            if swh < S::zero() || pu < S::zero() || tau < S::zero() || tau > kmax {
                return Err(Error::InvalidParameter(format!(
                    "parameter out of range at echo {m}"
                )));
            }
        }
        Ok(())
    }
}

/// Thermal-noise ground truth of a simulated sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthNoise<S> {
    pub mu: Vec<S>,
    pub looks: usize,
}

/// `M` received waveforms of `K` gates each, with optional ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EchoSequence<S: Real> {
    /// `M x K` received power, one row per echo.
    pub echoes: DMatrix<S>,
    pub truth: Option<ParamTrack<S>>,
    pub truth_noise: Option<TruthNoise<S>>,
    /// Number `r` of successive echoes sharing one noise-variance column.
    pub block_size: usize,
    /// Allow a final short block when `M` is not a multiple of `r`.
    pub pad_remainder: bool,
}

impl<S: Real> EchoSequence<S> {
    pub fn new(echoes: DMatrix<S>, block_size: usize) -> Self {
        EchoSequence {
            echoes,
            truth: None,
            truth_noise: None,
            block_size,
            pad_remainder: false,
        }
    }

    pub fn num_echoes(&self) -> usize {
        self.echoes.nrows()
    }

    pub fn num_gates(&self) -> usize {
        self.echoes.ncols()
    }

    pub fn blocks(&self) -> BlockLayout {
        BlockLayout::new(self.num_echoes(), self.block_size)
    }

    pub fn echo(&self, m: usize) -> DVector<S> {
        self.echoes.row(m).transpose()
    }

    /// Largest received power, used to scale the variance floor.
    pub fn max_power(&self) -> S {
        self.echoes.iter().fold(S::zero(), |a, &b| a.max(b.abs()))
    }

    /// Checks the sequence on its own (no instrument needed).
    pub fn check(&self) -> Result<()> {
        if self.block_size == 0 {
            return Err(Error::InvalidConfig("block size must be >= 1".into()));
        }
        if self.num_echoes() == 0 {
            return Err(Error::DimensionMismatch("sequence holds no echoes".into()));
        }
        if self.num_echoes() % self.block_size != 0 && !self.pad_remainder {
            return Err(Error::BlockRemainder {
                echoes: self.num_echoes(),
                block: self.block_size,
            });
        }
        for m in 0..self.num_echoes() {
            for k in 0..self.num_gates() {
                if !self.echoes[(m, k)].is_finite_value() {
                    return Err(Error::NonFiniteSample { echo: m, gate: k });
                }
            }
        }
        if let Some(truth) = &self.truth {
            if truth.len() != self.num_echoes() {
                return Err(Error::DimensionMismatch(format!(
                    "truth has {} echoes, sequence has {}",
                    truth.len(),
                    self.num_echoes()
                )));
            }
        }
        if let Some(noise) = &self.truth_noise {
            if noise.mu.len() != self.num_echoes() {
                return Err(Error::DimensionMismatch("truth noise length differs from M".into()));
            }
        }
        Ok(())
    }
}

/// Validates a sequence against an instrument configuration.
pub fn validate<S: Real>(seq: &EchoSequence<S>, cfg: &InstrumentConfig<S>) -> Result<()> {
    cfg.validate()?;
    if seq.num_gates() != cfg.gates {
        return Err(Error::DimensionMismatch(format!(
            "sequence has {} gates, instrument has {}",
            seq.num_gates(),
            cfg.gates
        )));
    }
    seq.check()?;
    if let Some(truth) = &seq.truth {
        truth.validate(cfg.gates)?;
    }
    Ok(())
}

/// Partition of `M` echoes into blocks of `r` successive echoes.
/// A trailing short block is kept when `M` is not a multiple of `r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockLayout {
    pub echoes: usize,
    pub size: usize,
}

impl BlockLayout {
    pub fn new(echoes: usize, size: usize) -> Self {
        BlockLayout { echoes, size: size.max(1) }
    }

    pub fn count(&self) -> usize {
        self.echoes.div_ceil(self.size)
    }

    #[inline]
    pub fn block_of(&self, m: usize) -> usize {
        m / self.size
    }

    pub fn range(&self, n: usize) -> std::ops::Range<usize> {
        let start = n * self.size;
        start..(start + self.size).min(self.echoes)
    }

    pub fn len(&self, n: usize) -> usize {
        self.range(n).len()
    }
}

/// Thermal-noise means and per-gate block variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseState<S: Real> {
    pub mu: Vec<S>,
    /// `K x N` variances, one column per block.
    pub lambda: DMatrix<S>,
}

impl<S: Real> NoiseState<S> {
    /// Variance of echo `m` at gate `k`.
    #[inline]
    pub fn variance(&self, blocks: &BlockLayout, m: usize, k: usize) -> S {
        self.lambda[(k, blocks.block_of(m))]
    }
}
