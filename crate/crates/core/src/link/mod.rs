//! Full Alice→channel→Bob link: Monte Carlo pulse simulation and a
//! closed-form rate/QBER model.
//!
//! The closed-form model ([`analytic_rates`]) predicts the sifted detection
//! rate and QBER that the Monte Carlo path ([`simulate_pulses`] followed by
//! the [`crate::pipeline`]) converges to; the two are tested against each
//! other throughout the suite.

mod analytic;
mod monte_carlo;

pub use analytic::{analytic_rates, AnalyticRates};
pub(crate) use analytic::{rate_breakdown, unsaturated_sifted_dark};
pub use monte_carlo::simulate_pulses;
pub(crate) use monte_carlo::simulate_single_basis_run;

use crate::polarization::effective_error_probability;
use crate::{Error, Result};

/// How Bob's analyzer is operated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasurementMode {
    /// One detector pair measures the H/V basis over the whole pattern, then
    /// the D/A basis over a replay of the same pattern (two-SPAD receiver).
    Consecutive,
    /// All four detectors are live and each photon picks a basis at a
    /// passive 50/50 splitter.
    Simultaneous,
}

impl MeasurementMode {
    pub fn as_str(self) -> &'static str {
        match self {
            MeasurementMode::Consecutive => "consecutive",
            MeasurementMode::Simultaneous => "simultaneous",
        }
    }
}

impl std::str::FromStr for MeasurementMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "consecutive" => Ok(MeasurementMode::Consecutive),
            "simultaneous" => Ok(MeasurementMode::Simultaneous),
            other => Err(Error::param(
                "measurement_mode",
                format!("`{other}` is neither `consecutive` nor `simultaneous`"),
            )),
        }
    }
}

/// Full physical configuration of one link run.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkParams {
    /// Transmitter symbol rate, Hz.
    pub symbol_rate_hz: f64,
    /// Mean photon number per pulse at Alice's launch (optical budget 0 dB).
    pub mu_q: f64,
    /// Optical budget: extra channel loss in dB. Negative values launch
    /// above the quantum level (μ > μ_Q) and drive the receiver towards
    /// saturation.
    pub ob_db: f64,
    /// Intrinsic optical error: probability that a detected signal photon
    /// lands on the wrong detector of the matched basis.
    pub e_opt: f64,
    /// Lumped receiver transmission × detector efficiency, (0, 1].
    pub eta_bob: f64,
    /// Dark count rate of each detector output (H, V, D, A), counts/s.
    pub dark_rates_cps: [f64; 4],
    /// Detector dead time after a click, seconds (non-paralyzable).
    pub dead_time_s: f64,
    /// Gaussian timing jitter of recorded clicks, seconds (1σ).
    pub jitter_sigma_s: f64,
    /// Fraction of the symbol period accepted by the temporal filter.
    pub window_fraction: f64,
    /// Receiver operation mode.
    pub measurement_mode: MeasurementMode,
    /// Pulses per run (per basis pass in consecutive mode).
    pub pulse_count: u64,
    /// Simulation RNG seed.
    pub rng_seed: u64,
}

impl Default for LinkParams {
    /// A 1 GHz link at the quantum launch level with typical free-running
    /// InGaAs SPAD figures. Source-specific fields (`e_opt`, `eta_bob`,
    /// effective dark rates) are normally overwritten by calibration.
    fn default() -> Self {
        LinkParams {
            symbol_rate_hz: 1e9,
            mu_q: 0.1,
            ob_db: 0.0,
            e_opt: 0.042,
            eta_bob: 2e-4,
            dark_rates_cps: [560.0, 525.0, 560.0, 525.0],
            dead_time_s: 10e-6,
            jitter_sigma_s: 100e-12,
            window_fraction: 0.5,
            measurement_mode: MeasurementMode::Consecutive,
            pulse_count: 10_000_000,
            rng_seed: 7,
        }
    }
}

impl LinkParams {
    /// Checks every invariant; all simulation entry points call this.
    pub fn validate(&self) -> Result<()> {
        if !self.symbol_rate_hz.is_finite() || self.symbol_rate_hz <= 0.0 {
            return Err(Error::param("symbol_rate_hz", "must be finite and > 0"));
        }
        if !self.mu_q.is_finite() || self.mu_q <= 0.0 {
            return Err(Error::param("mu_q", "must be finite and > 0"));
        }
        if !self.ob_db.is_finite() {
            return Err(Error::param("ob_db", "must be finite"));
        }
        effective_error_probability(self.e_opt)?;
        if !(self.eta_bob > 0.0 && self.eta_bob <= 1.0) {
            return Err(Error::param("eta_bob", "must be in (0, 1]"));
        }
        if self
            .dark_rates_cps
            .iter()
            .any(|r| *r < 0.0 || !r.is_finite())
        {
            return Err(Error::param("dark_rates_cps", "must be finite and >= 0"));
        }
        if self.dead_time_s < 0.0 || !self.dead_time_s.is_finite() {
            return Err(Error::param("dead_time_s", "must be finite and >= 0"));
        }
        if self.jitter_sigma_s < 0.0 || !self.jitter_sigma_s.is_finite() {
            return Err(Error::param("jitter_sigma_s", "must be finite and >= 0"));
        }
        if !(self.window_fraction > 0.0 && self.window_fraction <= 1.0) {
            return Err(Error::param("window_fraction", "must be in (0, 1]"));
        }
        if self.pulse_count == 0 {
            return Err(Error::param("pulse_count", "must be >= 1"));
        }
        Ok(())
    }

    /// Symbol period in picoseconds.
    pub fn symbol_period_ps(&self) -> f64 {
        1e12 / self.symbol_rate_hz
    }

    /// Mean photon number per pulse after the channel: μ_Q · 10^(−OB/10).
    pub fn mu_effective(&self) -> f64 {
        self.mu_q * 10f64.powf(-self.ob_db / 10.0)
    }

    /// Mean *detected* photons per pulse (channel plus receiver efficiency).
    pub fn mu_detected(&self) -> f64 {
        self.mu_effective() * self.eta_bob
    }

    /// Wall-clock duration covered by one full run, seconds.
    ///
    /// Consecutive mode measures the pattern once per basis, back to back,
    /// so it spans two pattern durations.
    pub fn run_duration_s(&self) -> f64 {
        let passes = match self.measurement_mode {
            MeasurementMode::Consecutive => 2.0,
            MeasurementMode::Simultaneous => 1.0,
        };
        passes * self.pulse_count as f64 / self.symbol_rate_hz
    }

    /// Copy with a different optical budget.
    pub fn with_ob(&self, ob_db: f64) -> LinkParams {
        LinkParams {
            ob_db,
            ..self.clone()
        }
    }
}

/// Non-paralyzable dead-time saturation: the registered rate for a Poisson
/// process of `incident_rate` hitting a detector blind for `dead_time_s`
/// after each registered click.
pub fn saturate(incident_rate: f64, dead_time_s: f64) -> f64 {
    incident_rate / (1.0 + incident_rate * dead_time_s)
}

const THRESHOLD_SEARCH_CAP_DB: f64 = 60.0;

/// Optical budget at which the analytic QBER crosses `q_max`.
///
/// The QBER is monotone increasing in the budget whenever dark counts are
/// present, so the crossing is unique; it is bracketed on [0, 60] dB and
/// bisected to 0.01 dB.
pub fn threshold_budget(params: &LinkParams, q_max: f64) -> Result<f64> {
    params.validate()?;
    if !(q_max > 0.0 && q_max < 0.5) {
        return Err(Error::param("q_max", "must be in (0, 0.5)"));
    }
    let q0 = analytic_rates(&params.with_ob(0.0))?.qber;
    if q0 > q_max {
        return Err(Error::param(
            "q_max",
            format!("QBER at 0 dB is already {q0:.4}, above the requested {q_max}"),
        ));
    }
    if q0 == q_max {
        return Ok(0.0);
    }
    let q_cap = analytic_rates(&params.with_ob(THRESHOLD_SEARCH_CAP_DB))?.qber;
    if q_cap < q_max {
        return Err(Error::NoThreshold {
            q_max,
            cap_db: THRESHOLD_SEARCH_CAP_DB,
        });
    }
    let (mut lo, mut hi) = (0.0, THRESHOLD_SEARCH_CAP_DB);
    while hi - lo > 0.01 {
        let mid = 0.5 * (lo + hi);
        if analytic_rates(&params.with_ob(mid))?.qber < q_max {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
