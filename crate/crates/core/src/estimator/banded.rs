//! Symmetric positive-definite band matrices and their Cholesky factor.

use nalgebra::{DMatrix, DVector};

use crate::scalar::Real;

/// Symmetric `n x n` matrix with `w` sub-diagonals, lower band stored
/// row-wise: entry `(i, j)` with `i - w <= j <= i` lives at `i * (w + 1) + (j + w - i)`.
#[derive(Debug, Clone)]
pub struct SymBand<S> {
    n: usize,
    w: usize,
    data: Vec<S>,
}

impl<S: Real> SymBand<S> {
    pub fn zeros(n: usize, w: usize) -> Self {
        SymBand { n, w, data: vec![S::zero(); n * (w + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.w
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        (i - j <= self.w).then(|| i * (self.w + 1) + (j + self.w - i))
    }

    pub fn get(&self, i: usize, j: usize) -> S {
        self.slot(i, j).map_or(S::zero(), |s| self.data[s])
    }

    /// Adds `v` to `(i, j)` (and by symmetry to `(j, i)`).
    ///
    /// # Panics
    /// If `(i, j)` falls outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: S) {
        let s = self.slot(i, j).expect("entry outside the band");
        self.data[s] += v;
    }

    pub fn diagonal(&self) -> DVector<S> {
        DVector::from_fn(self.n, |i, _| self.get(i, i))
    }

    pub fn mul_vec(&self, x: &DVector<S>) -> DVector<S> {
        let mut y = DVector::zeros(self.n);
        for i in 0..self.n {
            let lo = i.saturating_sub(self.w);
            for j in lo..i {
                let a = self.get(i, j);
                y[i] += a * x[j];
                y[j] += a * x[i];
            }
            y[i] += self.get(i, i) * x[i];
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<S> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Cholesky factor `L L^T`; `None` unless the matrix is numerically
    /// positive definite.
    pub fn cholesky(&self) -> Option<BandCholesky<S>> {
        let (n, w) = (self.n, self.w);
        let mut l = self.data.clone();
        let at = |i: usize, j: usize| i * (w + 1) + (j + w - i);
        for i in 0..n {
            let lo = i.saturating_sub(w);
            for j in lo..=i {
                let mut sum = l[at(i, j)];
                let kk = lo.max(j.saturating_sub(w));
                for k in kk..j {
                    sum -= l[at(i, k)] * l[at(j, k)];
                }
                if i == j {
                    if !(sum > S::zero()) || !sum.is_finite_value() {
                        return None;
                    }
                    l[at(i, i)] = sum.sqrt();
                } else {
                    l[at(i, j)] = sum / l[at(j, j)];
                }
            }
        }
        Some(BandCholesky { n, w, l })
    }
}

#[derive(Debug, Clone)]
pub struct BandCholesky<S> {
    n: usize,
    w: usize,
    l: Vec<S>,
}

impl<S: Real> BandCholesky<S> {
    #[inline]
    fn at(&self, i: usize, j: usize) -> S {
        self.l[i * (self.w + 1) + (j + self.w - i)]
    }

    pub fn solve(&self, b: &DVector<S>) -> DVector<S> {
        let mut x = b.clone();
        self.solve_mut(&mut x);
        x
    }

    pub fn solve_mut(&self, x: &mut DVector<S>) {
        let (n, w) = (self.n, self.w);
        for i in 0..n {
            let mut s = x[i];
            for k in i.saturating_sub(w)..i {
                s -= self.at(i, k) * x[k];
            }
            x[i] = s / self.at(i, i);
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..(i + w + 1).min(n) {
                s -= self.at(k, i) * x[k];
            }
            x[i] = s / self.at(i, i);
        }
    }
}
