use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use super::hmc::{hmc_move, DualAveraging, Point, Potential};
use crate::error::{Error, Result};
use crate::estimator::{self, CdOptions, CdState, Laplacian, Objective};
use crate::metrics;
use crate::models::WaveformModel;
use crate::scalar::{lit, Real};
use crate::types::{
    EchoSequence, FitReport, HyperConfig, InstrumentConfig, NoiseState, ParamTrack, StopReason,
};

/// Length and tuning of a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    /// Burn-in sweeps, discarded. Step sizes and the mass matrix adapt here.
    pub n_burn: usize,
    /// Retained sweeps.
    pub n_run: usize,
    pub leapfrog_steps: usize,
    /// Initial leapfrog step per parameter, in mass-whitened units.
    pub step_size: [f64; 3],
    pub target_accept: f64,
    pub seed: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            n_burn: 500,
            n_run: 1500,
            leapfrog_steps: 20,
            step_size: [0.1; 3],
            target_accept: 0.65,
            seed: 0,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_run == 0 {
            return Err(Error::InvalidConfig("n_run must be at least 1".into()));
        }
        if self.leapfrog_steps == 0 {
            return Err(Error::InvalidConfig("leapfrog_steps must be at least 1".into()));
        }
        if !self.step_size.iter().all(|&s| s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidConfig("step sizes must be positive".into()));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::InvalidConfig("target_accept must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Retained draws of one chain.
#[derive(Debug, Clone)]
pub struct Chains<S: Real> {
    /// One row per retained sweep, columns `(swh; tau; pu)` column-stacked.
    pub theta: DMatrix<S>,
    /// Smoothness variances per retained sweep.
    pub epsilon2: Vec<[S; 3]>,
    /// Post-burn-in acceptance rate per parameter.
    pub acceptance: [f64; 3],
    /// Divergent trajectories per parameter over the whole run.
    pub divergent: [usize; 3],
    /// Step sizes frozen at the end of burn-in.
    pub step_size: [f64; 3],
    /// Cost `C` after every sweep, burn-in included.
    pub cost_trace: Vec<S>,
    pub mean_noise: NoiseState<S>,
}

/// Chain plus posterior summaries.
#[derive(Debug, Clone)]
pub struct Posterior<S: Real> {
    pub chains: Chains<S>,
    pub mean: ParamTrack<S>,
    pub std: ParamTrack<S>,
    pub report: FitReport<S>,
}

fn with_column<S: Real>(theta: &ParamTrack<S>, i: usize, x: &DVector<S>) -> ParamTrack<S> {
    let mut t = theta.clone();
    t.column_mut(i).copy_from_slice(x.as_slice());
    t
}

/// Log conditional density of track `i` given everything else, up to a
/// constant: `-|D theta_i|^2 / (2 eps2) - sum_m x_m' S_m^-1 x_m / 2`, and its
/// gradient in `theta_i`.
pub fn log_cond_theta<S: Real, M: WaveformModel<S> + ?Sized>(
    obj: &Objective<'_, S, M>,
    i: usize,
    theta: &ParamTrack<S>,
    noise: &NoiseState<S>,
    eps2: S,
) -> Result<(S, DVector<S>)> {
    assert!(i < 3, "parameter index {i} out of range");
    let lin = obj.linearize(theta)?;
    let d = obj.laplacian.apply(theta.column(i));
    let mut value = -d.norm_squared() / (lit::<S>(2.0) * eps2);
    let mut grad = -obj.laplacian.apply_transpose(&d) / eps2;
    let half = lit::<S>(0.5);
    for m in 0..obj.echoes() {
        let n = obj.blocks.block_of(m);
        let x = obj.residual(m, &lin.waves[m], noise.mu[m]);
        let j = &lin.jacobians[m];
        for k in 0..obj.gates() {
            let w = x[k] / noise.lambda[(k, n)];
            value -= half * x[k] * w;
            grad[m] += j[(k, i)] * w;
        }
    }
    if !value.is_finite_value() || !grad.iter().all(|g| g.is_finite_value()) {
        return Err(Error::NonFiniteCost);
    }
    Ok((value, grad))
}

struct TrackPotential<'o, 'a, S: Real, M: ?Sized> {
    obj: &'o Objective<'a, S, M>,
    theta: &'o ParamTrack<S>,
    noise: &'o NoiseState<S>,
    i: usize,
    eps2: S,
}

impl<S: Real, M: WaveformModel<S> + ?Sized> Potential<S> for TrackPotential<'_, '_, S, M> {
    fn value_grad(&self, x: &DVector<S>) -> Result<(S, DVector<S>)> {
        let t = with_column(self.theta, self.i, x);
        let (v, g) = log_cond_theta(self.obj, self.i, &t, self.noise, self.eps2)?;
        Ok((-v, -g))
    }

    /// SWH lives on the half line; reflect at zero.
    fn reflect(&self, x: &mut DVector<S>, p: &mut DVector<S>) {
        if self.i == 0 {
            for m in 0..x.len() {
                if x[m] < S::zero() {
                    x[m] = -x[m];
                    p[m] = -p[m];
                }
            }
        }
    }
}

/// Diagonal of the conditional precision of track `i`, used as mass matrix.
fn track_mass<S: Real, M: WaveformModel<S> + ?Sized>(
    obj: &Objective<'_, S, M>,
    jacobians: &[DMatrix<S>],
    noise: &NoiseState<S>,
    i: usize,
    eps2: S,
) -> DVector<S> {
    let mm = obj.echoes();
    let prior_diag = obj.laplacian.gram_band::<S>().diagonal();
    DVector::from_fn(mm, |m, _| {
        let n = obj.blocks.block_of(m);
        let mut acc = prior_diag[m] / eps2;
        for k in 0..obj.gates() {
            let j = jacobians[m][(k, i)];
            acc += j * j / noise.lambda[(k, n)];
        }
        acc.max(lit(1e-12))
    })
}

fn inv_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    let g = Gamma::new(shape, 1.0).expect("positive inverse-gamma shape");
    scale / g.sample(rng)
}

/// Draws the three smoothness variances from
/// `IG(M/2 + a_i, |D theta_i|^2 / 2 + b_i)`.
pub fn sample_epsilon<S: Real, R: Rng + ?Sized>(
    theta: &ParamTrack<S>,
    a: &[S; 3],
    b: &[S; 3],
    rng: &mut R,
) -> [S; 3] {
    let lap = Laplacian::new(theta.len());
    let half_m = theta.len() as f64 / 2.0;
    std::array::from_fn(|i| {
        let d = lap.apply(theta.column(i));
        let scale = d.norm_squared().as_f64() / 2.0 + b[i].as_f64();
        S::of_f64(inv_gamma(half_m + a[i].as_f64(), scale, rng))
    })
}

/// Gaussian draw of the thermal-noise means given waveforms and variances.
pub fn draw_mu<S: Real, M: WaveformModel<S> + ?Sized, R: Rng + ?Sized>(
    obj: &Objective<'_, S, M>,
    waves: &[DVector<S>],
    lambda: &DMatrix<S>,
    rng: &mut R,
) -> Vec<S> {
    let inv_psi2 = S::one() / obj.hyper.psi2;
    (0..obj.echoes())
        .map(|m| {
            let n = obj.blocks.block_of(m);
            let mut num = S::zero();
            let mut den = inv_psi2;
            for k in 0..obj.gates() {
                let w = S::one() / lambda[(k, n)];
                num += (obj.y[(m, k)] - waves[m][k]) * w;
                den += w;
            }
            let z: f64 = rng.sample(StandardNormal);
            num / den + S::of_f64(z) / den.sqrt()
        })
        .collect()
}

/// Inverse-gamma draw `IG(r_n / 2, beta_nk)` of every block variance, with
/// `beta_nk = sum_{m in n} x_mk^2 / 2`, floored like the mode update.
pub fn draw_lambda<S: Real, M: WaveformModel<S> + ?Sized, R: Rng + ?Sized>(
    obj: &Objective<'_, S, M>,
    waves: &[DVector<S>],
    mu: &[S],
    rng: &mut R,
) -> DMatrix<S> {
    let mut out = DMatrix::zeros(obj.gates(), obj.blocks.count());
    for n in 0..obj.blocks.count() {
        let r = obj.blocks.range(n);
        let shape = r.len() as f64 / 2.0;
        for k in 0..obj.gates() {
            let beta = r
                .clone()
                .map(|m| {
                    let x = obj.y[(m, k)] - waves[m][k] - mu[m];
                    x * x
                })
                .fold(S::zero(), |a, b| a + b)
                .as_f64()
                * 0.5;
            let floor = obj.floor_at(k, n);
            let draw = S::of_f64(inv_gamma(shape, beta, rng));
            out[(k, n)] = draw.max(floor);
        }
    }
    out
}

/// Runs one chain from `init` on RNG stream `stream` of `chain.seed`.
pub fn run_chain<S: Real, M: WaveformModel<S> + ?Sized>(
    obj: &Objective<'_, S, M>,
    init: &CdState<S>,
    chain: &ChainConfig,
    stream: u64,
) -> Result<Chains<S>> {
    chain.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(chain.seed);
    rng.set_stream(stream);
    let mm = obj.echoes();
    let hyper = obj.hyper;

    let mut theta = init.theta.clone();
    let mut noise = init.noise.clone();
    let mut eps2: [S; 3] = std::array::from_fn(|i| {
        let (k, _) = obj.prior_stats(&theta, i);
        k / (obj.prior_shape(i) + S::one())
    });
    let mut adapt: [DualAveraging; 3] =
        std::array::from_fn(|i| DualAveraging::new(chain.step_size[i], chain.target_accept));
    let mut step = chain.step_size;
    let mut mass: [DVector<S>; 3] = {
        let lin = obj.linearize(&theta)?;
        std::array::from_fn(|i| track_mass(obj, &lin.jacobians, &noise, i, eps2[i]))
    };

    let total = chain.n_burn + chain.n_run;
    let mut samples = DMatrix::zeros(chain.n_run, 3 * mm);
    let mut eps_trace = Vec::with_capacity(chain.n_run);
    let mut cost_trace = Vec::with_capacity(total);
    let mut accepted = [0usize; 3];
    let mut divergent = [0usize; 3];
    let mut mu_sum = vec![S::zero(); mm];
    let mut lambda_sum = DMatrix::zeros(noise.lambda.nrows(), noise.lambda.ncols());

    for sweep in 0..total {
        let burning = sweep < chain.n_burn;
        if sweep == chain.n_burn / 2 && burning {
            let lin = obj.linearize(&theta)?;
            mass = std::array::from_fn(|i| track_mass(obj, &lin.jacobians, &noise, i, eps2[i]));
        }
        for i in 0..3 {
            let pot = TrackPotential { obj, theta: &theta, noise: &noise, i, eps2: eps2[i] };
            let start = Point::new(&pot, DVector::from_column_slice(theta.column(i)))?;
            let eps = if burning { adapt[i].current() } else { step[i] };
            let (next, stats) =
                hmc_move(&pot, &start, &mass[i], S::of_f64(eps), chain.leapfrog_steps, &mut rng)?;
            if burning {
                adapt[i].update(stats.accept_prob);
            } else if stats.accepted {
                accepted[i] += 1;
            }
            if stats.divergent {
                divergent[i] += 1;
            }
            theta.column_mut(i).copy_from_slice(next.x.as_slice());
        }
        if burning && sweep + 1 == chain.n_burn {
            step = std::array::from_fn(|i| adapt[i].final_step());
        }

        let waves = obj.waveforms(&theta)?;
        noise.mu = draw_mu(obj, &waves, &noise.lambda, &mut rng);
        noise.lambda = draw_lambda(obj, &waves, &noise.mu, &mut rng);
        eps2 = sample_epsilon(&theta, &hyper.a, &hyper.b, &mut rng);
        cost_trace.push(obj.cost_terms(&theta, &waves, &noise).total());

        if !burning {
            let row = sweep - chain.n_burn;
            for i in 0..3 {
                for (m, &v) in theta.column(i).iter().enumerate() {
                    samples[(row, i * mm + m)] = v;
                }
            }
            eps_trace.push(eps2);
            for (s, &v) in mu_sum.iter_mut().zip(&noise.mu) {
                *s += v;
            }
            lambda_sum += &noise.lambda;
        }
    }

    let n_run = lit::<S>(chain.n_run as f64);
    Ok(Chains {
        theta: samples,
        epsilon2: eps_trace,
        acceptance: std::array::from_fn(|i| accepted[i] as f64 / chain.n_run as f64),
        divergent,
        step_size: step,
        cost_trace,
        mean_noise: NoiseState {
            mu: mu_sum.into_iter().map(|v| v / n_run).collect(),
            lambda: lambda_sum / n_run,
        },
    })
}

/// Split-chain potential scale reduction of a scalar trace.
pub fn split_rhat<S: Real>(trace: &[S]) -> f64 {
    let half = trace.len() / 2;
    if half < 2 {
        return f64::NAN;
    }
    let parts = [&trace[..half], &trace[trace.len() - half..]];
    let n = half as f64;
    let stats: Vec<(f64, f64)> = parts
        .iter()
        .map(|p| {
            let mean = p.iter().map(|v| v.as_f64()).sum::<f64>() / n;
            let var = p.iter().map(|v| (v.as_f64() - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (mean, var)
        })
        .collect();
    let grand = (stats[0].0 + stats[1].0) / 2.0;
    let b = n * stats.iter().map(|(m, _)| (m - grand).powi(2)).sum::<f64>();
    let w = (stats[0].1 + stats[1].1) / 2.0;
    if w == 0.0 {
        return if b == 0.0 { 1.0 } else { f64::INFINITY };
    }
    (((n - 1.0) / n * w + b / n) / w).sqrt()
}

/// Samples the posterior of `seq`, starting from the coordinate-descent MAP.
pub fn sample_posterior<S: Real, M: WaveformModel<S> + ?Sized>(
    seq: &EchoSequence<S>,
    model: &M,
    cfg: &InstrumentConfig<S>,
    hyper: &HyperConfig<S>,
    chain: &ChainConfig,
) -> Result<Posterior<S>> {
    chain.validate()?;
    let start = Instant::now();
    let opts = CdOptions::default();
    let obj = Objective::new(seq, model, *hyper)?.with_max_looks(opts.max_looks);
    let init = estimator::initial_state(&obj, cfg)?;
    let map = estimator::descend(&obj, init, &opts)?;
    let chains = run_chain(&obj, &map.state, chain, 0)?;

    let mm = seq.num_echoes();
    let rows = chains.theta.nrows() as f64;
    let mut mean = vec![S::zero(); 3 * mm];
    let mut std = vec![S::zero(); 3 * mm];
    for c in 0..3 * mm {
        let col = chains.theta.column(c);
        let mu = col.iter().map(|v| v.as_f64()).sum::<f64>() / rows;
        let var = col.iter().map(|v| (v.as_f64() - mu).powi(2)).sum::<f64>() / (rows - 1.0).max(1.0);
        mean[c] = S::of_f64(mu);
        std[c] = S::of_f64(var.sqrt());
    }
    let mean = ParamTrack::from_stacked(&DVector::from_vec(mean))?;
    let std = ParamTrack::from_stacked(&DVector::from_vec(std))?;

    let enl = metrics::enl(seq, &chains.mean_noise.lambda).values;
    let report = FitReport {
        algorithm: "hmc".into(),
        theta_hat: mean.clone(),
        noise_hat: chains.mean_noise.clone(),
        enl,
        cost_trace: chains.cost_trace.clone(),
        iterations: chain.n_burn + chain.n_run,
        stop_reason: StopReason::Completed,
        wall_time: start.elapsed().as_secs_f64(),
        flagged: Vec::new(),
        acceptance: Some(chains.acceptance),
    };
    Ok(Posterior { chains, mean, std, report })
}
