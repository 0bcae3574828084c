//! Floating-point abstraction shared by every numerical routine in the crate.

use nalgebra as na;

/// Real scalar used throughout the crate: `f32` or `f64`.
///
/// Everything linear-algebraic comes from [`na::RealField`]; the only extra
/// special functions required by the waveform models are the complementary
/// error function and a lossless-enough conversion to `f64` for I/O and
/// random-number generation.
pub trait Real: na::RealField + Copy + Send + Sync + 'static {
    /// Complementary error function `1 - erf(x)`, accurate in the tails.
    fn erfc(self) -> Self;

    fn as_f64(self) -> f64;

    fn of_f64(x: f64) -> Self;

    fn is_finite_value(self) -> bool {
        self.as_f64().is_finite()
    }
}

impl Real for f64 {
    #[inline]
    fn erfc(self) -> Self {
        libm::erfc(self)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }

    #[inline]
    fn of_f64(x: f64) -> Self {
        x
    }

    #[inline]
    fn is_finite_value(self) -> bool {
        self.is_finite()
    }
}

impl Real for f32 {
    #[inline]
    fn erfc(self) -> Self {
        libm::erfcf(self)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }

    #[inline]
    fn of_f64(x: f64) -> Self {
        x as f32
    }

    #[inline]
    fn is_finite_value(self) -> bool {
        self.is_finite()
    }
}

/// Literal conversion, `lit::<S>(0.5)`.
#[inline]
pub fn lit<S: Real>(x: f64) -> S {
    S::of_f64(x)
}

/// Maps a slice through [`Real::as_f64`].
pub fn to_f64_vec<S: Real>(xs: &[S]) -> Vec<f64> {
    xs.iter().map(|x| x.as_f64()).collect()
}

/// Maps a slice through [`Real::of_f64`].
pub fn from_f64_vec<S: Real>(xs: &[f64]) -> Vec<S> {
    xs.iter().map(|&x| S::of_f64(x)).collect()
}
