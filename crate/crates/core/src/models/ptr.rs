//! Point-target response and the convolution kernel shared by the
//! numerical (conventional and delay/Doppler) models.

use serde::{Deserialize, Serialize};

use crate::scalar::{lit, Real};

/// `|sin(pi x) / (pi x)|^2`
#[inline]
pub fn sinc2(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        let s = px.sin() / px;
        s * s
    }
}

/// Least-squares fit of a unit-peak Gaussian `exp(-t^2 / 2 sigma^2)` to the
/// `sinc^2(t / T)` main lobe, sampled at 2001 equispaced points on `[-T, T]`.
/// Returns `sigma / T`.
pub fn fit_gaussian_sigma() -> f64 {
    const SAMPLES: usize = 2001;
    let grid: Vec<f64> = (0..SAMPLES)
        .map(|i| -1.0 + 2.0 * i as f64 / (SAMPLES - 1) as f64)
        .collect();
    let target: Vec<f64> = grid.iter().map(|&t| sinc2(t)).collect();
    let loss = |s: f64| -> f64 {
        grid.iter()
            .zip(&target)
            .map(|(&t, &p)| {
                let d = (-t * t / (2.0 * s * s)).exp() - p;
                d * d
            })
            .sum()
    };
    golden_section(loss, 0.2, 0.6, 1e-15)
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let ratio = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Shape of the range point-target response used by the convolution models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PtrShape {
    Sinc2,
    /// Identity response; only useful to isolate the other factors.
    Dirac,
}

/// Discretisation settings of the numerical models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvNumerics {
    /// Fine-grid samples per gate.
    pub oversample: usize,
    /// PTR support in lobes on each side of the peak.
    pub ptr_lobes: usize,
    /// Sea-surface PDF support in standard deviations on each side.
    pub pdf_sigmas: f64,
    pub ptr: PtrShape,
}

impl Default for ConvNumerics {
    fn default() -> Self {
        ConvNumerics {
            oversample: 8,
            ptr_lobes: 20,
            pdf_sigmas: 8.0,
            ptr: PtrShape::Sinc2,
        }
    }
}

/// `PDF * PTR_T` sampled on the fine grid, normalised to unit area.
///
/// Sample `j` sits at time `(j - center) * dt`. An empty `density` stands for
/// a Dirac impulse.
#[derive(Debug, Clone)]
pub(crate) struct Kernel<S> {
    pub dt: S,
    pub center: usize,
    pub density: Vec<S>,
}

impl<S: Real> Kernel<S> {
    pub fn is_dirac(&self) -> bool {
        self.density.is_empty()
    }

    /// Time of sample `j`.
    #[inline]
    pub fn time(&self, j: usize) -> S {
        (lit::<S>(j as f64) - lit::<S>(self.center as f64)) * self.dt
    }

    pub fn build(sigma_s: S, gate: S, num: &ConvNumerics) -> Self {
        let os = num.oversample.max(1);
        let dt = gate / lit(os as f64);
        let dt64 = dt.as_f64();
        let sigma = sigma_s.abs().as_f64();

        let ptr: Vec<f64> = match num.ptr {
            PtrShape::Dirac => vec![1.0],
            PtrShape::Sinc2 => {
                let half = (num.ptr_lobes * os) as isize;
                (-half..=half).map(|j| sinc2(j as f64 / os as f64)).collect()
            }
        };
        // Cell-averaged Gaussian: smooth in sigma and collapses to a single
        // unit cell when the surface is flat.
        let half = (num.pdf_sigmas * sigma / dt64).ceil() as isize;
        let pdf: Vec<f64> = if half == 0 {
            vec![1.0]
        } else {
            let cdf = |t: f64| 0.5 * libm::erfc(-t / (std::f64::consts::SQRT_2 * sigma));
            (-half..=half)
                .map(|j| {
                    let t = j as f64 * dt64;
                    cdf(t + 0.5 * dt64) - cdf(t - 0.5 * dt64)
                })
                .collect()
        };
        if ptr.len() == 1 && pdf.len() == 1 {
            return Kernel { dt, center: 0, density: Vec::new() };
        }
        let mut full = vec![0.0; ptr.len() + pdf.len() - 1];
        for (i, &a) in ptr.iter().enumerate() {
            for (j, &b) in pdf.iter().enumerate() {
                full[i + j] += a * b;
            }
        }
        let area: f64 = full.iter().sum::<f64>() * dt64;
        let density = full.iter().map(|&v| S::of_f64(v / area)).collect();
        Kernel {
            dt,
            center: (ptr.len() - 1) / 2 + (pdf.len() - 1) / 2,
            density,
        }
    }

    /// Half-width of the support, s.
    pub fn half_width(&self) -> S {
        lit::<S>(self.center as f64) * self.dt
    }
}
