use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::estimator::{self, CdOptions, Objective};
use crate::models::{AltimetricModel, ModelKind, WaveformModel};
use crate::simulator::{default_scenario, generate, Trajectory};
use crate::types::{EchoSequence, HyperConfig, InstrumentConfig, NoiseState, ParamTrack};

fn cfg(gates: usize) -> InstrumentConfig<f64> {
    let mut c = InstrumentConfig::cryosat2();
    c.gates = gates;
    c
}

fn brown(gates: usize) -> AltimetricModel<f64> {
    AltimetricModel::new(ModelKind::Brown, cfg(gates))
}

struct Fixture {
    y: DMatrix<f64>,
    theta: ParamTrack<f64>,
    noise: NoiseState<f64>,
}

fn fixture(rng: &mut ChaCha8Rng, m: usize, k: usize, block: usize) -> Fixture {
    let model = brown(k);
    let mut theta = ParamTrack::constant(m, [0.0; 3]);
    for e in 0..m {
        theta.set(
            e,
            [rng.random_range(1.0..3.0), rng.random_range(10.0..16.0), rng.random_range(0.5..2.0)],
        );
    }
    let y = DMatrix::from_fn(m, k, |e, g| {
        model.eval(theta.get(e)).unwrap()[g] + 0.02 + rng.random_range(-0.05..0.05)
    });
    let noise = NoiseState {
        mu: (0..m).map(|_| rng.random_range(0.0..0.05)).collect(),
        lambda: DMatrix::from_fn(k, m.div_ceil(block), |_, _| rng.random_range(0.001..0.01)),
    };
    Fixture { y, theta, noise }
}

#[test]
fn log_cond_is_zero_for_exact_fit_and_flat_track() {
    let k = 32;
    let model = brown(k);
    let theta = ParamTrack::constant(6, [2.0, 12.0, 1.5]);
    let mu = 0.03;
    let y = DMatrix::from_fn(6, k, |e, g| model.eval(theta.get(e)).unwrap()[g] + mu);
    let obj = Objective::from_parts(&y, 3, &model, HyperConfig::default()).unwrap();
    let noise = NoiseState { mu: vec![mu; 6], lambda: DMatrix::from_element(k, 2, 1e-3) };
    for i in 0..3 {
        let (v, g) = log_cond_theta(&obj, i, &theta, &noise, 0.1).unwrap();
        assert!(v.abs() < 1e-20, "{v}");
        assert!(g.norm() < 1e-9, "{}", g.norm());
    }
}

#[test]
fn log_cond_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let model = brown(32);
    for _ in 0..10 {
        let f = fixture(&mut rng, 8, 32, 4);
        let obj = Objective::from_parts(&f.y, 4, &model, HyperConfig::default()).unwrap();
        for i in 0..3 {
            let eps2 = rng.random_range(0.01..1.0);
            let (_, g) = log_cond_theta(&obj, i, &f.theta, &f.noise, eps2).unwrap();
            let h = 1e-6;
            let mut num = 0.0;
            let mut den = 0.0;
            for m in 0..8 {
                let mut tp = f.theta.clone();
                let mut tm = f.theta.clone();
                tp.column_mut(i)[m] += h;
                tm.column_mut(i)[m] -= h;
                let fd = (log_cond_theta(&obj, i, &tp, &f.noise, eps2).unwrap().0
                    - log_cond_theta(&obj, i, &tm, &f.noise, eps2).unwrap().0)
                    / (2.0 * h);
                num += (fd - g[m]).powi(2);
                den += g[m].powi(2);
            }
            let rel = (num / den).sqrt();
            assert!(rel < 1e-5, "parameter {i}: relative RMS {rel:e}");
        }
    }
}

#[test]
fn infinite_smoothness_variance_leaves_only_the_data_term() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let model = brown(32);
    let f = fixture(&mut rng, 8, 32, 4);
    let obj = Objective::from_parts(&f.y, 4, &model, HyperConfig::default()).unwrap();
    let mut other = f.theta.clone();
    for v in other.tau.iter_mut() {
        *v += rng.random_range(-0.5..0.5);
    }
    let data = |t: &ParamTrack<f64>| {
        let waves = obj.waveforms(t).unwrap();
        obj.cost_terms(t, &waves, &f.noise).data
    };
    let (a, _) = log_cond_theta(&obj, 1, &f.theta, &f.noise, f64::INFINITY).unwrap();
    let (b, _) = log_cond_theta(&obj, 1, &other, &f.noise, f64::INFINITY).unwrap();
    let expected = -(data(&f.theta) - data(&other));
    assert!((a - b - expected).abs() < 1e-10, "{} vs {expected}", a - b);
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0))
}

#[test]
fn epsilon_draws_have_inverse_gamma_moments() {
    let m = 10;
    let theta = ParamTrack::new(
        (0..m).map(|k| 1.0 + 0.1 * k as f64).collect(),
        vec![20.0; m],
        (0..m).map(|k| 2.0 - 0.05 * k as f64).collect(),
    )
    .unwrap();
    let a = [1.0, 2.0, 0.5];
    let b = [0.3, 0.01, 1.0];
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let draws: Vec<[f64; 3]> = (0..100_000).map(|_| sample_epsilon(&theta, &a, &b, &mut rng)).collect();
    for i in 0..3 {
        // Every track is affine, so D theta_i = 0.
        let shape = m as f64 / 2.0 + a[i];
        let mean = b[i] / (shape - 1.0);
        let var = b[i] * b[i] / ((shape - 1.0).powi(2) * (shape - 2.0));
        let xs: Vec<f64> = draws.iter().map(|d| d[i]).collect();
        let (got, _) = mean_var(&xs);
        let se = (var / xs.len() as f64).sqrt();
        assert!((got - mean).abs() < 3.0 * se, "param {i}: {got} vs {mean} (se {se})");
    }
}

#[test]
fn epsilon_ig_two_one_has_unit_mean() {
    let theta = ParamTrack::constant(2, [1.0, 1.0, 1.0]);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let xs: Vec<f64> =
        (0..100_000).map(|_| sample_epsilon(&theta, &[1.0; 3], &[1.0; 3], &mut rng)[0]).collect();
    let (mean, _) = mean_var(&xs);
    // IG(2, 1) has infinite variance, so the tolerance is empirical.
    assert!((mean - 1.0).abs() < 0.05, "{mean}");
}

#[test]
fn epsilon_draw_is_pinned_for_a_fixed_seed() {
    let theta = ParamTrack::constant(4, [2.0, 30.0, 1.0]);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let d = sample_epsilon(&theta, &[1.0; 3], &[0.5; 3], &mut rng);
    let pinned = [0.2966058237134994, 0.1449046040734566, 0.15054542261362594];
    for i in 0..3 {
        assert_eq!(d[i], pinned[i], "{d:?}");
    }
}

#[test]
fn lambda_draws_follow_inverse_gamma_of_block_residuals() {
    let k = 8;
    let r = 20;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let y = DMatrix::from_fn(r, k, |_, _| rng.random_range(-1.0..1.0));
    let zero = LinearZero { k };
    let obj = Objective::from_parts(&y, r, &zero, HyperConfig::default()).unwrap();
    let waves = vec![DVector::zeros(k); r];
    let mu = vec![0.1; r];
    let n = 20_000;
    let draws: Vec<DMatrix<f64>> = (0..n).map(|_| draw_lambda(&obj, &waves, &mu, &mut rng)).collect();
    let shape = r as f64 / 2.0;
    for g in 0..k {
        let beta: f64 = (0..r).map(|m| (y[(m, g)] - 0.1).powi(2)).sum::<f64>() / 2.0;
        let var = beta * beta / ((shape - 1.0).powi(2) * (shape - 2.0));
        let xs: Vec<f64> = draws.iter().map(|d| d[(g, 0)]).collect();
        let (mean, v) = mean_var(&xs);
        assert!((mean - beta / (shape - 1.0)).abs() < 3.0 * (var / n as f64).sqrt());
        // Standard error of a sample variance needs the fourth moment; for
        // IG(10, beta) the kurtosis term is bounded well below 20 var^2.
        let se_var = (20.0 * var * var / n as f64).sqrt();
        assert!((v - var).abs() < 3.0 * se_var, "gate {g}: {v} vs {var}");
    }
}

#[test]
fn mu_draws_are_gaussian_around_the_conditional_mode() {
    let k = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let y = DMatrix::from_fn(2, k, |_, _| rng.random_range(0.0..1.0));
    let zero = LinearZero { k };
    let obj = Objective::from_parts(&y, 2, &zero, HyperConfig::default()).unwrap();
    let waves = vec![DVector::zeros(k); 2];
    let lambda = DMatrix::from_fn(k, 1, |g, _| 0.01 * (g + 1) as f64);
    let mode = obj.update_mu(&waves, &lambda);
    let var = 1.0 / (1.0 / 100.0 + (0..k).map(|g| 1.0 / lambda[(g, 0)]).sum::<f64>());
    let n = 50_000;
    let xs: Vec<f64> = (0..n).map(|_| draw_mu(&obj, &waves, &lambda, &mut rng)[1]).collect();
    let (mean, v) = mean_var(&xs);
    assert!((mean - mode[1]).abs() < 3.0 * (var / n as f64).sqrt());
    assert!((v - var).abs() < 3.0 * var * (2.0 / n as f64).sqrt());
}

struct LinearZero {
    k: usize,
}

impl WaveformModel<f64> for LinearZero {
    fn gates(&self) -> usize {
        self.k
    }
    fn eval(&self, _: [f64; 3]) -> crate::error::Result<DVector<f64>> {
        Ok(DVector::zeros(self.k))
    }
    fn eval_jacobian(&self, _: [f64; 3]) -> crate::error::Result<(DVector<f64>, DMatrix<f64>)> {
        Ok((DVector::zeros(self.k), DMatrix::zeros(self.k, 3)))
    }
}

#[test]
fn split_rhat_of_stationary_and_drifting_traces() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let iid: Vec<f64> = (0..4000).map(|_| rng.random_range(-1.0..1.0)).collect();
    assert!((split_rhat(&iid) - 1.0).abs() < 0.01);
    let drift: Vec<f64> = (0..4000).map(|t| t as f64 / 1000.0 + rng.random_range(-0.1..0.1)).collect();
    assert!(split_rhat(&drift) > 2.0);
}

#[test]
fn chain_config_rejects_bad_values() {
    assert!(ChainConfig { n_run: 0, ..Default::default() }.validate().is_err());
    assert!(ChainConfig { leapfrog_steps: 0, ..Default::default() }.validate().is_err());
    assert!(ChainConfig { step_size: [0.1, 0.0, 0.1], ..Default::default() }.validate().is_err());
    ChainConfig { n_burn: 0, ..Default::default() }.validate().unwrap();
}

fn small(m: usize, seed: u64) -> (EchoSequence<f64>, InstrumentConfig<f64>) {
    let mut sc = default_scenario(m);
    sc.block_size = m.min(10);
    sc.seed = seed;
    sc.trajectory = Trajectory::ContinuousTau;
    let c = cfg(128);
    (generate(&sc, &c).unwrap(), c)
}

fn short_chain(seed: u64) -> ChainConfig {
    ChainConfig { n_burn: 150, n_run: 300, leapfrog_steps: 10, seed, ..Default::default() }
}

#[test]
fn same_seed_gives_identical_chains() {
    let (seq, c) = small(10, 2);
    let chain = ChainConfig { n_burn: 5, n_run: 10, ..short_chain(7) };
    let a = sample_posterior(&seq, &brown(128), &c, &HyperConfig::default(), &chain).unwrap();
    let b = sample_posterior(&seq, &brown(128), &c, &HyperConfig::default(), &chain).unwrap();
    assert_eq!(a.chains.theta, b.chains.theta);
    assert_eq!(a.chains.epsilon2, b.chains.epsilon2);
    let other = sample_posterior(&seq, &brown(128), &c, &HyperConfig::default(), &short_chain(8)).unwrap();
    assert_ne!(a.chains.theta.row(0), other.chains.theta.row(0));
}

#[test]
fn mmse_agrees_with_cd_map_on_small_instances() {
    let model = brown(128);
    let hyper = HyperConfig::default();
    for seed in 0..3 {
        let (seq, c) = small(10, 100 + seed);
        let map = estimator::fit(&seq, &model, &c, &hyper, &CdOptions::default()).unwrap();
        let post = sample_posterior(&seq, &model, &c, &hyper, &short_chain(seed)).unwrap();
        assert_eq!(post.chains.theta.nrows(), 300);
        for i in 0..3 {
            for m in 0..10 {
                let d = (post.mean.column(i)[m] - map.theta_hat.column(i)[m]).abs();
                let s = post.std.column(i)[m];
                assert!(s > 0.0 && d <= 3.0 * s, "seed {seed} param {i} echo {m}: |d| {d} vs std {s}");
            }
        }
        let acc = post.report.acceptance.unwrap();
        assert!(acc.iter().all(|&a| a > 0.2), "{acc:?}");
    }
}
