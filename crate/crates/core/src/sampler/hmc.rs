//! Hamiltonian Monte Carlo with a diagonal mass matrix and dual-averaging
//! step-size adaptation.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::scalar::{lit, Real};

/// Negative log-density (up to a constant) and its gradient.
pub trait Potential<S: Real> {
    fn value_grad(&self, x: &DVector<S>) -> Result<(S, DVector<S>)>;

    /// Maps a position back into the support after a drift, flipping the
    /// matching momentum components. The default support is all of `R^n`.
    fn reflect(&self, _x: &mut DVector<S>, _p: &mut DVector<S>) {}
}

/// Current point of a chain with its cached potential and gradient.
#[derive(Debug, Clone)]
pub struct Point<S: Real> {
    pub x: DVector<S>,
    pub u: S,
    pub grad: DVector<S>,
}

impl<S: Real> Point<S> {
    pub fn new<P: Potential<S> + ?Sized>(pot: &P, x: DVector<S>) -> Result<Self> {
        let (u, grad) = pot.value_grad(&x)?;
        Ok(Point { x, u, grad })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveStats {
    pub accepted: bool,
    /// `min(1, exp(-dH))`, zero for divergent trajectories.
    pub accept_prob: f64,
    pub divergent: bool,
}

/// One HMC transition with `steps` leapfrog steps of size `eps`.
pub fn hmc_move<S: Real, P: Potential<S> + ?Sized, R: Rng + ?Sized>(
    pot: &P,
    current: &Point<S>,
    mass: &DVector<S>,
    eps: S,
    steps: usize,
    rng: &mut R,
) -> Result<(Point<S>, MoveStats)> {
    let n = current.x.len();
    let mut p = DVector::from_fn(n, |i, _| {
        let z: f64 = rng.sample(StandardNormal);
        S::of_f64(z) * mass[i].sqrt()
    });
    let kinetic = |p: &DVector<S>| {
        p.iter().zip(mass.iter()).fold(S::zero(), |a, (&pi, &mi)| a + pi * pi / mi) * lit(0.5)
    };
    let h0 = current.u + kinetic(&p);

    let half = eps * lit(0.5);
    let mut x = current.x.clone();
    let mut grad = current.grad.clone();
    let mut u = current.u;
    let mut divergent = false;
    p.axpy(-half, &grad, S::one());
    for step in 0..steps {
        for i in 0..n {
            x[i] += eps * p[i] / mass[i];
        }
        pot.reflect(&mut x, &mut p);
        match pot.value_grad(&x) {
            Ok((v, g)) if v.is_finite_value() && g.iter().all(|gi| gi.is_finite_value()) => {
                u = v;
                grad = g;
            }
            _ => {
                divergent = true;
                break;
            }
        }
        let scale = if step + 1 == steps { half } else { eps };
        p.axpy(-scale, &grad, S::one());
    }
    let reject = |divergent| {
        (current.clone(), MoveStats { accepted: false, accept_prob: 0.0, divergent })
    };
    if divergent {
        return Ok(reject(true));
    }
    let h1 = u + kinetic(&p);
    let dh = (h1 - h0).as_f64();
    if !dh.is_finite() {
        return Ok(reject(true));
    }
    let accept_prob = (-dh).exp().min(1.0);
    let draw: f64 = rng.random();
    if draw < accept_prob {
        Ok((Point { x, u, grad }, MoveStats { accepted: true, accept_prob, divergent: false }))
    } else {
        Ok((current.clone(), MoveStats { accepted: false, accept_prob, divergent: false }))
    }
}

/// Nesterov dual averaging of `log eps` towards a target acceptance rate.
#[derive(Debug, Clone)]
pub struct DualAveraging {
    target: f64,
    mu: f64,
    h_bar: f64,
    log_eps: f64,
    log_eps_bar: f64,
    t: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    pub fn new(eps0: f64, target: f64) -> Self {
        DualAveraging {
            target,
            mu: (10.0 * eps0).ln(),
            h_bar: 0.0,
            log_eps: eps0.ln(),
            log_eps_bar: eps0.ln(),
            t: 0.0,
        }
    }

    /// Step size to use for the next move.
    pub fn current(&self) -> f64 {
        self.log_eps.exp()
    }

    /// Step size to freeze after adaptation.
    pub fn final_step(&self) -> f64 {
        self.log_eps_bar.exp()
    }

    pub fn update(&mut self, accept_prob: f64) {
        self.t += 1.0;
        let w = 1.0 / (self.t + Self::T0);
        self.h_bar = (1.0 - w) * self.h_bar + w * (self.target - accept_prob);
        self.log_eps = self.mu - self.t.sqrt() / Self::GAMMA * self.h_bar;
        let eta = self.t.powf(-Self::KAPPA);
        self.log_eps_bar = eta * self.log_eps + (1.0 - eta) * self.log_eps_bar;
    }
}
