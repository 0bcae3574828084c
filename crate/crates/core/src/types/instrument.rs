use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Ratio `sigma_p / T` of the Gaussian that best fits (least squares, unit peak)
/// the `sinc^2` point-target response over `[-T, T]`.
///
/// Reproduced by [`crate::models::ptr::fit_gaussian_sigma`]; the unit tests
/// there recompute it from scratch.
pub const SIGMA_P_OVER_T: f64 = 0.364_454_398_277_258_84;

/// Physical constants of the altimeter together with the Brown-approximation
/// constants and the sampling grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstrumentConfig<S> {
    /// Carrier frequency, Hz.
    pub carrier_frequency: S,
    /// Wavelength, m.
    pub wavelength: S,
    /// Chirp bandwidth, Hz.
    pub bandwidth: S,
    /// Minimum satellite-to-surface distance, m.
    pub altitude: S,
    /// Gate duration `T = 1/B`, s.
    pub gate_duration: S,
    /// Doppler frequency resolution `F`, Hz.
    pub freq_resolution: S,
    /// 3 dB antenna beamwidth, rad.
    pub antenna_beamwidth: S,
    /// Antenna beamwidth parameter (dimensionless).
    pub beamwidth_param: S,
    /// Satellite velocity, m/s.
    pub satellite_velocity: S,
    pub doppler_beams: usize,
    pub gates: usize,
    /// Exponential decay rate of the flat-surface response, 1/s.
    pub brown_alpha: S,
    /// Standard deviation of the Gaussian PTR approximation, s.
    pub brown_sigma_p: S,
    pub speed_of_light: S,
}

impl<S: Real> InstrumentConfig<S> {
    /// Cryosat-2 SIRAL profile: 13.575 GHz, 320 MHz, 730 km, 1.1388 deg,
    /// 7000 m/s, 64 Doppler beams of `PRF / 64` Hz, 128 gates.
    pub fn cryosat2() -> Self {
        let bandwidth = 320.0e6;
        let altitude = 730.0e3;
        let beamwidth = 1.1388_f64.to_radians();
        let prf = 18_182.0;
        let pulses_per_burst = 64.0;
        let gamma = beamwidth_param_from(beamwidth);
        let gate = 1.0 / bandwidth;
        InstrumentConfig {
            carrier_frequency: lit(13.575e9),
            wavelength: lit(0.0221),
            bandwidth: lit(bandwidth),
            altitude: lit(altitude),
            gate_duration: lit(gate),
            freq_resolution: lit(prf / pulses_per_burst),
            antenna_beamwidth: lit(beamwidth),
            beamwidth_param: lit(gamma),
            satellite_velocity: lit(7000.0),
            doppler_beams: 64,
            gates: 128,
            brown_alpha: lit(4.0 * SPEED_OF_LIGHT / (gamma * altitude)),
            brown_sigma_p: lit(SIGMA_P_OVER_T * gate),
            speed_of_light: lit(SPEED_OF_LIGHT),
        }
    }

    /// Recomputes `gamma` from the beamwidth and `alpha = 4c / (gamma h)`.
    pub fn with_derived_constants(mut self) -> Self {
        let gamma = beamwidth_param_from(self.antenna_beamwidth.as_f64());
        self.beamwidth_param = lit(gamma);
        self.brown_alpha = lit(
            4.0 * self.speed_of_light.as_f64() / (gamma * self.altitude.as_f64()),
        );
        self
    }

    /// Range spanned by one gate, `c T / 2` in metres.
    pub fn gate_range(&self) -> S {
        self.speed_of_light * self.gate_duration / lit(2.0)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("carrier_frequency", self.carrier_frequency),
            ("wavelength", self.wavelength),
            ("bandwidth", self.bandwidth),
            ("altitude", self.altitude),
            ("gate_duration", self.gate_duration),
            ("freq_resolution", self.freq_resolution),
            ("antenna_beamwidth", self.antenna_beamwidth),
            ("beamwidth_param", self.beamwidth_param),
            ("satellite_velocity", self.satellite_velocity),
            ("brown_alpha", self.brown_alpha),
            ("brown_sigma_p", self.brown_sigma_p),
            ("speed_of_light", self.speed_of_light),
        ];
        for (name, v) in positive {
            if !(v.is_finite_value() && v > S::zero()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive and finite")));
            }
        }
        if self.gates < 2 {
            return Err(Error::InvalidConfig("gates must be >= 2".into()));
        }
        if self.doppler_beams < 1 {
            return Err(Error::InvalidConfig("doppler_beams must be >= 1".into()));
        }
        let t = self.gate_duration.as_f64();
        let inv_b = 1.0 / self.bandwidth.as_f64();
        // f32 configs cannot hold 1e-12 relative agreement
        let tol = if std::mem::size_of::<S>() < 8 { 1e-6 } else { 1e-12 };
        if ((t - inv_b) / inv_b).abs() > tol {
            return Err(Error::InvalidConfig(
                "gate_duration must equal 1 / bandwidth".into(),
            ));
        }
        Ok(())
    }
}

impl<S: Real> Default for InstrumentConfig<S> {
    fn default() -> Self {
        Self::cryosat2()
    }
}

/// Gaussian-antenna identification `gamma = sin^2(theta_3dB) / (2 ln 2)`.
pub fn beamwidth_param_from(beamwidth: f64) -> f64 {
    beamwidth.sin().powi(2) / (2.0 * std::f64::consts::LN_2)
}
