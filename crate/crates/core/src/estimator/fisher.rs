//! Structured Fisher matrix and the regularised natural-gradient solve.
//!
//! Ordered per echo, `(swh_0, tau_0, pu_0, swh_1, ...)`, the data part is
//! block diagonal with `3 x 3` blocks and the prior part `(c/k) D'D` has
//! bandwidth 6, so everything except the rank-one prior corrections fits in
//! a band matrix. The rank-one terms are added through the Woodbury
//! identity.

use nalgebra::{DMatrix, DVector};

use super::banded::SymBand;
use super::objective::{Linearization, Objective};
use crate::models::WaveformModel;
use crate::scalar::{lit, Real};
use crate::types::{NoiseState, ParamTrack};

/// Most negative eigenpair of `k P - q q'` when it is negative.
///
/// `P` is positive semi-definite and `q` lies in its range, so the matrix has
/// at most one negative eigenvalue; it is the root in `lambda < 0` of
/// `q' (k P - lambda I)^-1 q = 1`, bracketed by `[-|q|^2, 0)`.
pub fn negative_eigenpair<S: Real>(p: &SymBand<S>, q: &DVector<S>, k: S) -> Option<(S, DVector<S>)> {
    let n = p.dim();
    let qq = q.norm_squared();
    if qq == S::zero() {
        return None;
    }
    let shifted = |lambda: S| {
        let mut a = SymBand::zeros(n, p.bandwidth());
        for i in 0..n {
            for j in i.saturating_sub(p.bandwidth())..=i {
                a.add(i, j, k * p.get(i, j));
            }
            a.add(i, i, -lambda);
        }
        a.cholesky()
    };
    // The secular function is increasing on (-inf, 0); the eigenvalue exists
    // iff it exceeds 1 just below zero.
    let secular = |lambda: S| -> Option<(S, DVector<S>)> {
        let chol = shifted(lambda)?;
        let v = chol.solve(q);
        Some((q.dot(&v), v))
    };
    let probe = -qq * lit(1e-14);
    match secular(probe) {
        Some((f, _)) if f <= S::one() => return None,
        _ => {}
    }
    let mut lo = -qq;
    let mut hi = probe;
    for _ in 0..200 {
        let mid = (lo + hi) * lit(0.5);
        match secular(mid) {
            Some((f, _)) if f < S::one() => lo = mid,
            _ => hi = mid,
        }
        if hi - lo <= lit::<S>(1e-14) * lo.abs() {
            break;
        }
    }
    let (_, v) = secular(lo)?;
    let norm = v.norm();
    if norm == S::zero() || !norm.is_finite_value() {
        return None;
    }
    Some((lo, v / norm))
}

/// `F = B + sum_t w_t u_t u_t'` in per-echo ordering.
pub struct StructuredFisher<S: Real> {
    echoes: usize,
    band: SymBand<S>,
    low_rank: Vec<(S, DVector<S>)>,
}

impl<S: Real> StructuredFisher<S> {
    pub fn build<M: WaveformModel<S> + ?Sized>(
        obj: &Objective<'_, S, M>,
        theta: &ParamTrack<S>,
        lin: &Linearization<S>,
        noise: &NoiseState<S>,
        clamp: bool,
    ) -> Self {
        let mm = obj.echoes();
        let mut band = SymBand::zeros(3 * mm, 6);
        for m in 0..mm {
            let b = obj.data_block(m, &lin.jacobians[m], noise);
            for i in 0..3 {
                for j in 0..=i {
                    band.add(3 * m + i, 3 * m + j, b[(i, j)]);
                }
            }
        }
        let p = obj.laplacian.gram_band::<S>();
        let mut low_rank = Vec::new();
        for i in 0..3 {
            let (k, q) = obj.prior_stats(theta, i);
            let c = obj.prior_shape(i);
            for r in 0..mm {
                for s in r.saturating_sub(2)..=r {
                    let v = p.get(r, s);
                    if v != S::zero() {
                        band.add(3 * r + i, 3 * s + i, c / k * v);
                    }
                }
            }
            if q.norm_squared() == S::zero() {
                continue;
            }
            let embed = |v: &DVector<S>| {
                let mut u = DVector::zeros(3 * mm);
                for r in 0..mm {
                    u[3 * r + i] = v[r];
                }
                u
            };
            low_rank.push((-c / (k * k), embed(&q)));
            if clamp {
                if let Some((lambda, v)) = negative_eigenpair(&p, &q, k) {
                    low_rank.push((-(c / (k * k)) * lambda, embed(&v)));
                }
            }
        }
        StructuredFisher { echoes: mm, band, low_rank }
    }

    pub fn diagonal(&self) -> DVector<S> {
        let mut d = self.band.diagonal();
        for (w, u) in &self.low_rank {
            for (di, ui) in d.iter_mut().zip(u.iter()) {
                *di += *w * *ui * *ui;
            }
        }
        d
    }

    pub fn mul_vec(&self, x: &DVector<S>) -> DVector<S> {
        let mut y = self.band.mul_vec(x);
        for (w, u) in &self.low_rank {
            y.axpy(*w * u.dot(x), u, S::one());
        }
        y
    }

    /// Dense copy in the column-stacked ordering.
    pub fn to_stacked_dense(&self) -> DMatrix<S> {
        let n = 3 * self.echoes;
        let mut f = self.band.to_dense();
        for (w, u) in &self.low_rank {
            f += u * u.transpose() * *w;
        }
        let perm = |j: usize| 3 * (j % self.echoes) + j / self.echoes;
        DMatrix::from_fn(n, n, |a, b| f[(perm(a), perm(b))])
    }

    /// Solves `(F + ridge diag(F)) x = g`. Returns `None` when the band part
    /// is not positive definite, the capacitance system is singular, or the
    /// result is not an accurate descent direction.
    pub fn solve(&self, g: &DVector<S>, ridge: S) -> Option<DVector<S>> {
        let diag = self.diagonal();
        let mut band = self.band.clone();
        for (i, d) in diag.iter().enumerate() {
            band.add(i, i, ridge * d.abs());
        }
        let chol = band.cholesky()?;
        let mut x = chol.solve(g);
        let t = self.low_rank.len();
        if t > 0 {
            let z: Vec<DVector<S>> = self.low_rank.iter().map(|(_, u)| chol.solve(u)).collect();
            let mut cap = DMatrix::zeros(t, t);
            let mut rhs = DVector::zeros(t);
            for a in 0..t {
                cap[(a, a)] = S::one() / self.low_rank[a].0;
                for b in 0..t {
                    cap[(a, b)] += self.low_rank[a].1.dot(&z[b]);
                }
                rhs[a] = self.low_rank[a].1.dot(&x);
            }
            let y = cap.lu().solve(&rhs)?;
            for (a, za) in z.iter().enumerate() {
                x.axpy(-y[a], za, S::one());
            }
        }
        if !x.iter().all(|v| v.is_finite_value()) {
            return None;
        }
        // Accept only accurate solutions that point downhill.
        let mut fx = self.mul_vec(&x);
        for (i, d) in diag.iter().enumerate() {
            fx[i] += ridge * d.abs() * x[i];
        }
        let gn = g.norm();
        if (fx - g).norm() > lit::<S>(1e-6) * gn || !(g.dot(&x) > S::zero()) {
            return None;
        }
        Some(x)
    }
}

/// Per-echo ordering `(3m + i)` from the column-stacked `(i M + m)`.
pub fn interleave<S: Real>(stacked: &DVector<S>) -> DVector<S> {
    let mm = stacked.len() / 3;
    DVector::from_fn(3 * mm, |j, _| stacked[(j % 3) * mm + j / 3])
}

pub fn deinterleave<S: Real>(inter: &DVector<S>) -> DVector<S> {
    let mm = inter.len() / 3;
    DVector::from_fn(3 * mm, |j, _| inter[3 * (j % mm) + j / mm])
}
