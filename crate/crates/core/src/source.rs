//! Light-source models: measured L-I characteristics, spectral metadata and
//! the conversion from optical power to mean photon number per pulse.

use crate::{Error, Result};

/// Physical constants (exact SI values).
pub mod constants {
    /// Planck constant, J·s.
    pub const PLANCK_H_JS: f64 = 6.626_070_15e-34;
    /// Speed of light in vacuum, m/s.
    pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;

    /// Energy of one photon at the given vacuum wavelength, in joules.
    pub fn photon_energy_j(wavelength_nm: f64) -> f64 {
        PLANCK_H_JS * SPEED_OF_LIGHT_M_S / (wavelength_nm * 1e-9)
    }
}

/// Sampled L-I (light output vs. drive current) curve of an emitter.
///
/// Stored as ordered `(current mA, power W)` points; queries interpolate
/// linearly between adjacent samples. The curve must be anchored at zero
/// emission for zero drive.
#[derive(Debug, Clone, PartialEq)]
pub struct LiCurve {
    points: Vec<(f64, f64)>,
}

impl LiCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::param("li_curve", "needs at least one point"));
        }
        let (c0, p0) = points[0];
        if c0 > 0.0 || p0 != 0.0 {
            return Err(Error::param(
                "li_curve",
                format!(
                    "first point ({c0} mA, {p0} W) must anchor zero power at or below zero current"
                ),
            ));
        }
        for pair in points.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(Error::param(
                    "li_curve",
                    format!(
                        "currents must be strictly increasing ({} then {})",
                        pair[0].0, pair[1].0
                    ),
                ));
            }
        }
        if points.iter().any(|&(_, p)| p < 0.0 || !p.is_finite()) {
            return Err(Error::param(
                "li_curve",
                "powers must be finite and non-negative",
            ));
        }
        Ok(LiCurve { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Optical power at the given drive current, by linear interpolation.
    ///
    /// Currents outside the sampled range are a hard error; the curve shape
    /// beyond its anchors is unknown and must not be extrapolated.
    pub fn power_at(&self, current_ma: f64) -> Result<f64> {
        let min = self.points.first().unwrap().0;
        let max = self.points.last().unwrap().0;
        if !(min..=max).contains(&current_ma) || current_ma.is_nan() {
            return Err(Error::CurrentOutOfRange {
                current_ma,
                min_ma: min,
                max_ma: max,
            });
        }
        let idx = self
            .points
            .partition_point(|&(c, _)| c < current_ma)
            .min(self.points.len() - 1)
            .max(1);
        let (c0, p0) = self.points[idx - 1];
        let (c1, p1) = self.points[idx];
        let t = (current_ma - c0) / (c1 - c0);
        Ok(p0 + t * (p1 - p0))
    }
}

/// Kind of light source feeding the encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmitterKind {
    /// LED-like junction emitter (threshold-less L-I).
    Led,
    /// Spectrally sliced amplified spontaneous emission.
    Ase,
    /// Coherent laser (reference).
    Laser,
}

/// Descriptive and spectral metadata of one light source.
///
/// The spectral fields are carried for documentation and planning; back-to-
/// back link physics in this crate does not depend on them.
#[derive(Debug, Clone, PartialEq)]
pub struct EmitterSpec {
    pub name: String,
    pub center_wavelength_nm: f64,
    pub bandwidth_nm: f64,
    pub kind: EmitterKind,
    pub li_curve: Option<LiCurve>,
}

impl EmitterSpec {
    pub fn new(
        name: impl Into<String>,
        center_wavelength_nm: f64,
        bandwidth_nm: f64,
        kind: EmitterKind,
        li_curve: Option<LiCurve>,
    ) -> Result<Self> {
        if !(1000.0 < center_wavelength_nm && center_wavelength_nm < 2000.0) {
            return Err(Error::param(
                "center_wavelength_nm",
                format!("{center_wavelength_nm} outside (1000, 2000) nm"),
            ));
        }
        if bandwidth_nm < 0.0 || !bandwidth_nm.is_finite() {
            return Err(Error::param("bandwidth_nm", "must be finite and >= 0"));
        }
        Ok(EmitterSpec {
            name: name.into(),
            center_wavelength_nm,
            bandwidth_nm,
            kind,
            li_curve,
        })
    }
}

/// Mean photon number per pulse for CW power chopped at the symbol rate:
/// μ = P·λ / (h·c·f).
pub fn photons_per_pulse(power_w: f64, wavelength_nm: f64, symbol_rate_hz: f64) -> Result<f64> {
    if power_w < 0.0 || !power_w.is_finite() {
        return Err(Error::param("power_w", "must be finite and >= 0"));
    }
    if wavelength_nm <= 0.0 || !wavelength_nm.is_finite() {
        return Err(Error::param("wavelength_nm", "must be finite and > 0"));
    }
    if symbol_rate_hz <= 0.0 || !symbol_rate_hz.is_finite() {
        return Err(Error::param("symbol_rate_hz", "must be finite and > 0"));
    }
    Ok(power_w / (constants::photon_energy_j(wavelength_nm) * symbol_rate_hz))
}

/// Attenuation (dB) that takes a source of mean photon number `mu_source`
/// down to `mu_target`.
pub fn attenuation_to_target(mu_source: f64, mu_target: f64) -> Result<f64> {
    if mu_target <= 0.0 || !mu_target.is_finite() {
        return Err(Error::param("mu_target", "must be finite and > 0"));
    }
    if !mu_source.is_finite() {
        return Err(Error::param("mu_source", "must be finite"));
    }
    if mu_source < mu_target {
        return Err(Error::InfeasibleAttenuation {
            mu_source,
            mu_target,
        });
    }
    Ok(10.0 * (mu_source / mu_target).log10())
}
