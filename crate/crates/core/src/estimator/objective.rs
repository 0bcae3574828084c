//! Negative log-posterior of the smoothing model and its derivatives.
//!
//! ```text
//! C = sum_n sum_k (r_n/2 + 1) log s2_nk + sum_m x_m' S_m^-1 x_m / 2
//!   + sum_i (a_i + M/2) log(|D theta_i|^2 / 2 + b_i) + sum_m mu_m^2 / (2 psi2)
//! ```
//! with `x_m = y_m - s(theta_m) - mu_m`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::laplacian::Laplacian;
use crate::error::{Error, Result};
use crate::models::WaveformModel;
use crate::scalar::{lit, Real};
use crate::types::{BlockLayout, EchoSequence, HyperConfig, NoiseState, ParamTrack};

/// Lower bound applied by the variance update.
///
/// The absolute part keeps `S^-1` finite on noiseless data. The optional
/// relative part caps the per-gate number of looks `ybar^2 / s2` at
/// `max_looks`, which stops the descent from collapsing block variances on
/// gates where the fitted echo happens to pass through every sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceFloor<S> {
    pub absolute: S,
    pub max_looks: Option<S>,
}

/// Waveforms and Jacobians of every echo at one parameter point.
#[derive(Debug, Clone)]
pub struct Linearization<S: Real> {
    pub waves: Vec<DVector<S>>,
    pub jacobians: Vec<DMatrix<S>>,
}

/// Additive pieces of the cost, mostly for diagnostics and tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostTerms<S> {
    pub log_det: S,
    pub data: S,
    pub prior: S,
    pub mu: S,
}

impl<S: Real> CostTerms<S> {
    pub fn total(&self) -> S {
        self.log_det + self.data + self.prior + self.mu
    }
}

/// Which form of the smoothness-prior curvature enters the Fisher matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorCurvature {
    Off,
    /// Exact Hessian of the log prior term; may be indefinite.
    Exact,
    /// Exact Hessian with negative eigenvalues floored at zero.
    Clamped,
}

pub struct Objective<'a, S: Real, M: ?Sized> {
    pub y: &'a DMatrix<S>,
    pub model: &'a M,
    pub hyper: HyperConfig<S>,
    pub blocks: BlockLayout,
    pub laplacian: Laplacian,
    pub floor: VarianceFloor<S>,
    block_means: DMatrix<S>,
}

impl<'a, S: Real, M: WaveformModel<S> + ?Sized> Objective<'a, S, M> {
    pub fn new(seq: &'a EchoSequence<S>, model: &'a M, hyper: HyperConfig<S>) -> Result<Self> {
        seq.check()?;
        Self::from_parts(&seq.echoes, seq.block_size, model, hyper)
    }

    /// Builds the objective directly from an `M x K` echo matrix.
    pub fn from_parts(
        y: &'a DMatrix<S>,
        block_size: usize,
        model: &'a M,
        hyper: HyperConfig<S>,
    ) -> Result<Self> {
        if y.ncols() != model.gates() {
            return Err(Error::DimensionMismatch(format!(
                "echoes have {} gates, model expects {}",
                y.ncols(),
                model.gates()
            )));
        }
        hyper.validate()?;
        let blocks = BlockLayout::new(y.nrows(), block_size);
        let max = y.iter().fold(S::zero(), |a, &b| a.max(b.abs()));
        let block_means = DMatrix::from_fn(y.ncols(), blocks.count(), |k, n| {
            let r = blocks.range(n);
            let len = lit::<S>(r.len() as f64);
            r.map(|m| y[(m, k)]).fold(S::zero(), |a, b| a + b) / len
        });
        Ok(Objective {
            y,
            model,
            hyper,
            blocks,
            laplacian: Laplacian::new(y.nrows()),
            floor: VarianceFloor { absolute: lit::<S>(1e-12) * max * max, max_looks: None },
            block_means,
        })
    }

    pub fn with_max_looks(mut self, max_looks: Option<S>) -> Self {
        self.floor.max_looks = max_looks;
        self
    }

    pub fn echoes(&self) -> usize {
        self.y.nrows()
    }

    pub fn gates(&self) -> usize {
        self.y.ncols()
    }

    /// Block mean of the observations, `K x N`.
    pub fn block_means(&self) -> &DMatrix<S> {
        &self.block_means
    }

    pub fn floor_at(&self, k: usize, n: usize) -> S {
        let mut f = self.floor.absolute;
        if let Some(cap) = self.floor.max_looks {
            let m = self.block_means[(k, n)];
            f = f.max(m * m / cap);
        }
        f
    }

    fn check_dims(&self, theta: &ParamTrack<S>, noise: Option<&NoiseState<S>>) -> Result<()> {
        if theta.len() != self.echoes() {
            return Err(Error::DimensionMismatch(format!(
                "{} parameter triples for {} echoes",
                theta.len(),
                self.echoes()
            )));
        }
        if let Some(n) = noise {
            if n.mu.len() != self.echoes()
                || n.lambda.nrows() != self.gates()
                || n.lambda.ncols() != self.blocks.count()
            {
                return Err(Error::DimensionMismatch("noise state does not match the data".into()));
            }
        }
        Ok(())
    }

    pub fn waveforms(&self, theta: &ParamTrack<S>) -> Result<Vec<DVector<S>>> {
        self.check_dims(theta, None)?;
        (0..self.echoes())
            .into_par_iter()
            .map(|m| self.model.eval(theta.get(m)))
            .collect()
    }

    pub fn linearize(&self, theta: &ParamTrack<S>) -> Result<Linearization<S>> {
        self.check_dims(theta, None)?;
        let pairs: Vec<(DVector<S>, DMatrix<S>)> = (0..self.echoes())
            .into_par_iter()
            .map(|m| self.model.eval_jacobian(theta.get(m)))
            .collect::<Result<_>>()?;
        let (waves, jacobians) = pairs.into_iter().unzip();
        Ok(Linearization { waves, jacobians })
    }

    /// `x_m = y_m - s_m - mu_m`.
    pub fn residual(&self, m: usize, wave: &DVector<S>, mu: S) -> DVector<S> {
        DVector::from_fn(self.gates(), |k, _| self.y[(m, k)] - wave[k] - mu)
    }

    /// `k_i = |D theta_i|^2 / 2 + b_i` and `q_i = D^T D theta_i`.
    pub fn prior_stats(&self, theta: &ParamTrack<S>, i: usize) -> (S, DVector<S>) {
        let d = self.laplacian.apply(theta.column(i));
        let k = d.norm_squared() * lit(0.5) + self.hyper.b[i];
        (k, self.laplacian.apply_transpose(&d))
    }

    /// `c_i = a_i + M/2`.
    pub fn prior_shape(&self, i: usize) -> S {
        self.hyper.a[i] + lit(self.echoes() as f64 / 2.0)
    }

    pub fn cost_terms(
        &self,
        theta: &ParamTrack<S>,
        waves: &[DVector<S>],
        noise: &NoiseState<S>,
    ) -> CostTerms<S> {
        let mut log_det = S::zero();
        for n in 0..self.blocks.count() {
            let w = lit::<S>(self.blocks.len(n) as f64 / 2.0 + 1.0);
            for k in 0..self.gates() {
                log_det += w * noise.lambda[(k, n)].ln();
            }
        }
        let data = (0..self.echoes())
            .into_par_iter()
            .map(|m| {
                let n = self.blocks.block_of(m);
                let mut acc = S::zero();
                for k in 0..self.gates() {
                    let x = self.y[(m, k)] - waves[m][k] - noise.mu[m];
                    acc += x * x / noise.lambda[(k, n)];
                }
                acc
            })
            .collect::<Vec<S>>()
            .into_iter()
            .fold(S::zero(), |a, b| a + b)
            * lit(0.5);
        let mut prior = S::zero();
        for i in 0..3 {
            let (k, _) = self.prior_stats(theta, i);
            prior += self.prior_shape(i) * k.ln();
        }
        let mu = noise.mu.iter().fold(S::zero(), |a, &v| a + v * v) / (lit::<S>(2.0) * self.hyper.psi2);
        CostTerms { log_det, data, prior, mu }
    }

    pub fn cost(&self, theta: &ParamTrack<S>, noise: &NoiseState<S>) -> Result<S> {
        self.check_dims(theta, Some(noise))?;
        let waves = self.waveforms(theta)?;
        let c = self.cost_terms(theta, &waves, noise).total();
        if c.is_finite_value() {
            Ok(c)
        } else {
            Err(Error::NonFiniteCost)
        }
    }

    /// Gradient in `theta`, column-stacked `(swh; tau; pu)`.
    pub fn grad_theta(&self, theta: &ParamTrack<S>, noise: &NoiseState<S>) -> Result<DVector<S>> {
        self.check_dims(theta, Some(noise))?;
        let lin = self.linearize(theta)?;
        Ok(self.grad_from(theta, &lin, noise))
    }

    pub fn grad_from(
        &self,
        theta: &ParamTrack<S>,
        lin: &Linearization<S>,
        noise: &NoiseState<S>,
    ) -> DVector<S> {
        let m_count = self.echoes();
        let mut g = DVector::zeros(3 * m_count);
        for m in 0..m_count {
            let n = self.blocks.block_of(m);
            let x = self.residual(m, &lin.waves[m], noise.mu[m]);
            let j = &lin.jacobians[m];
            for i in 0..3 {
                let mut acc = S::zero();
                for k in 0..self.gates() {
                    acc += j[(k, i)] * x[k] / noise.lambda[(k, n)];
                }
                g[i * m_count + m] = -acc;
            }
        }
        for i in 0..3 {
            let (k, q) = self.prior_stats(theta, i);
            let c = self.prior_shape(i) / k;
            for m in 0..m_count {
                g[i * m_count + m] += c * q[m];
            }
        }
        g
    }

    /// Per-echo data block `J_m' S_m^-1 J_m`.
    pub fn data_block(&self, m: usize, jac: &DMatrix<S>, noise: &NoiseState<S>) -> nalgebra::Matrix3<S> {
        let n = self.blocks.block_of(m);
        let mut f = nalgebra::Matrix3::zeros();
        for k in 0..self.gates() {
            let w = S::one() / noise.lambda[(k, n)];
            for i in 0..3 {
                let a = jac[(k, i)] * w;
                for j in i..3 {
                    f[(i, j)] += a * jac[(k, j)];
                }
            }
        }
        for i in 0..3 {
            for j in 0..i {
                f[(i, j)] = f[(j, i)];
            }
        }
        f
    }

    /// Dense `3M x 3M` Fisher matrix in the column-stacked ordering.
    pub fn fisher(
        &self,
        theta: &ParamTrack<S>,
        noise: &NoiseState<S>,
        prior: PriorCurvature,
    ) -> Result<DMatrix<S>> {
        self.check_dims(theta, Some(noise))?;
        let lin = self.linearize(theta)?;
        let mm = self.echoes();
        let mut f = DMatrix::zeros(3 * mm, 3 * mm);
        for m in 0..mm {
            let b = self.data_block(m, &lin.jacobians[m], noise);
            for i in 0..3 {
                for j in 0..3 {
                    f[(i * mm + m, j * mm + m)] = b[(i, j)];
                }
            }
        }
        if prior != PriorCurvature::Off {
            let p = {
                let d = self.laplacian.dense::<S>();
                d.transpose() * d
            };
            for i in 0..3 {
                let (k, q) = self.prior_stats(theta, i);
                let c = self.prior_shape(i);
                let mut a = &p * (c / k) - &q * q.transpose() * (c / (k * k));
                if prior == PriorCurvature::Clamped {
                    let eig = a.clone().symmetric_eigen();
                    let vals = eig.eigenvalues.map(|v| v.max(S::zero()));
                    a = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
                    a = (&a + a.transpose()) * lit::<S>(0.5);
                }
                let mut block = f.view_mut((i * mm, i * mm), (mm, mm));
                block += &a;
            }
        }
        Ok(f)
    }

    /// Conditional mode of the thermal-noise means.
    pub fn update_mu(&self, waves: &[DVector<S>], lambda: &DMatrix<S>) -> Vec<S> {
        let inv_psi2 = S::one() / self.hyper.psi2;
        (0..self.echoes())
            .map(|m| {
                let n = self.blocks.block_of(m);
                let mut num = S::zero();
                let mut den = inv_psi2;
                for k in 0..self.gates() {
                    let w = S::one() / lambda[(k, n)];
                    num += (self.y[(m, k)] - waves[m][k]) * w;
                    den += w;
                }
                num / den
            })
            .collect()
    }

    /// Conditional mode of the block variances, `beta / (r_n/2 + 1)` with
    /// `beta = sum_{m in n} x_mk^2 / 2`, floored.
    pub fn update_lambda(&self, waves: &[DVector<S>], mu: &[S]) -> DMatrix<S> {
        DMatrix::from_fn(self.gates(), self.blocks.count(), |k, n| {
            let r = self.blocks.range(n);
            let len = r.len();
            let beta = r
                .map(|m| {
                    let x = self.y[(m, k)] - waves[m][k] - mu[m];
                    x * x
                })
                .fold(S::zero(), |a, b| a + b)
                * lit(0.5);
            (beta / lit(len as f64 / 2.0 + 1.0)).max(self.floor_at(k, n))
        })
    }
}
