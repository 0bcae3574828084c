//! Second-difference operator used by the smoothness prior.

use nalgebra::{DMatrix, DVector};

use super::banded::SymBand;
use crate::scalar::{lit, Real};

/// `M x M` matrix whose row `r` is the stencil `[1, -2, 1]` centred on
/// `clamp(r, 1, M - 2)`: interior rows are centred differences and the two
/// boundary rows repeat their inward neighbour. For `M < 3` the operator is
/// zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Laplacian {
    m: usize,
}

impl Laplacian {
    pub fn new(m: usize) -> Self {
        Laplacian { m }
    }

    pub fn size(&self) -> usize {
        self.m
    }

    #[inline]
    fn center(&self, r: usize) -> usize {
        r.clamp(1, self.m - 2)
    }

    pub fn apply<S: Real>(&self, x: &[S]) -> DVector<S> {
        assert_eq!(x.len(), self.m);
        if self.m < 3 {
            return DVector::zeros(self.m);
        }
        DVector::from_fn(self.m, |r, _| {
            let c = self.center(r);
            x[c - 1] - lit::<S>(2.0) * x[c] + x[c + 1]
        })
    }

    pub fn apply_transpose<S: Real>(&self, y: &DVector<S>) -> DVector<S> {
        let mut x = DVector::zeros(self.m);
        if self.m < 3 {
            return x;
        }
        for r in 0..self.m {
            let c = self.center(r);
            x[c - 1] += y[r];
            x[c] -= lit::<S>(2.0) * y[r];
            x[c + 1] += y[r];
        }
        x
    }

    /// `D^T D x`.
    pub fn gram_apply<S: Real>(&self, x: &[S]) -> DVector<S> {
        self.apply_transpose(&self.apply(x))
    }

    /// `D^T D` as a band matrix with two sub-diagonals.
    pub fn gram_band<S: Real>(&self) -> SymBand<S> {
        let mut p = SymBand::zeros(self.m, 2);
        if self.m < 3 {
            return p;
        }
        let stencil = [S::one(), lit(-2.0), S::one()];
        for r in 0..self.m {
            let c = self.center(r) - 1;
            for a in 0..3 {
                for b in 0..=a {
                    p.add(c + a, c + b, stencil[a] * stencil[b]);
                }
            }
        }
        p
    }

    pub fn dense<S: Real>(&self) -> DMatrix<S> {
        let mut d = DMatrix::zeros(self.m, self.m);
        if self.m >= 3 {
            for r in 0..self.m {
                let c = self.center(r);
                d[(r, c - 1)] = S::one();
                d[(r, c)] = lit(-2.0);
                d[(r, c + 1)] = S::one();
            }
        }
        d
    }
}
