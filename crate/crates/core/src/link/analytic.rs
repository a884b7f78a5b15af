//! Closed-form expectation of the sifted rate and QBER.
//!
//! Serves two roles: an independent oracle for the Monte Carlo path and a
//! fast evaluator for sweeps, threshold searches and calibration. The model
//! follows the chain detector by detector:
//!
//! 1. per-pulse click probability `1 − exp(−μ_det)` of the thinned Poisson
//!    photon number,
//! 2. non-paralyzable dead-time survival from each detector's total incident
//!    click rate (signal share plus dark counts),
//! 3. temporal-window acceptance — an erf band for jittered signal clicks,
//!    the plain window fraction for uniform dark counts,
//! 4. a 1/2 basis-sifting factor for both populations,
//! 5. the error mixture `QBER = (e_opt·R_sig + ½·(R_dark + R_mis)) / R_total`,
//!    where `R_mis` is the (normally negligible) rate of signal clicks
//!    jittered into a neighboring symbol slot, which contribute like noise.

use super::{saturate, LinkParams, MeasurementMode};
use crate::polarization::Basis;
use crate::timetag::basis_detectors;
use crate::Result;

/// Expected steady-state rates of the sifted key.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticRates {
    /// Total sifted detection rate (signal + noise), counts/s. This is the
    /// observable raw key rate.
    pub r_sifted: f64,
    /// Dark-count contribution inside the sifted key, counts/s.
    pub r_dark_sifted: f64,
    /// Expected quantum bit error rate of the sifted key.
    pub qber: f64,
}

/// Probability that a Gaussian-jittered click stays within the temporal
/// window of its own symbol slot.
///
/// Timestamps are quantized to 1 ps, which widens the inclusive acceptance
/// band by half a tick on each side.
fn signal_window_acceptance(sigma_ps: f64, half_window_ps: f64) -> f64 {
    if sigma_ps <= 0.0 {
        return 1.0;
    }
    let half = half_window_ps + 0.5;
    libm::erf(half / (std::f64::consts::SQRT_2 * sigma_ps)).min(1.0)
}

/// Probability that a jittered click lands inside the window of a *wrong*
/// (neighboring) slot. Negligible for jitter well below the symbol period.
fn misassigned_acceptance(sigma_ps: f64, half_window_ps: f64, period_ps: f64) -> f64 {
    if sigma_ps <= 0.0 {
        return 0.0;
    }
    let half = half_window_ps + 0.5;
    let phi = |x: f64| 0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2));
    let mut total = 0.0;
    for k in 1..=3 {
        let center = k as f64 * period_ps;
        let band = phi((center + half) / sigma_ps) - phi((center - half) / sigma_ps);
        total += 2.0 * band; // both neighbors
    }
    total
}

/// Window acceptance for uniformly distributed dark counts, on the 1 ps
/// timestamp grid.
fn dark_window_acceptance(window_fraction: f64, period_ps: f64) -> f64 {
    ((window_fraction * period_ps + 1.0) / period_ps).min(1.0)
}

/// Rates surviving dead time on one active detector group, before windowing
/// and sifting: `(signal, dark)` counts/s.
fn survived_rates(params: &LinkParams, detectors: &[u8], mean_photons_per_det: f64) -> (f64, f64) {
    let f = params.symbol_rate_hz;
    let m = params.mu_detected();
    // Click rate of the whole group: one count per pulse with >= 1 detected
    // photon (the pipeline keeps at most one event per symbol).
    let group_click = f * (-(-m).exp_m1());
    let share = 1.0 / detectors.len() as f64;
    // Per-detector incident rate for the dead-time load: photons routed to
    // this output plus its dark counts.
    let per_det_click = f * (-(-mean_photons_per_det).exp_m1());
    let mut signal = 0.0;
    let mut dark = 0.0;
    for &d in detectors {
        let dark_rate = params.dark_rates_cps[d as usize];
        let incident = per_det_click + dark_rate;
        let survival = if params.dead_time_s > 0.0 && incident > 0.0 {
            saturate(incident, params.dead_time_s) / incident
        } else {
            1.0
        };
        signal += group_click * share * survival;
        dark += dark_rate * survival;
    }
    (signal, dark)
}

/// Sifted-rate components before the error mixture. Rates do not depend on
/// `e_opt`, which lets the calibration solve for it in closed form.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RateBreakdown {
    /// Correctly slotted signal clicks, counts/s.
    pub r_signal: f64,
    /// Signal clicks jittered into a wrong slot, counts/s.
    pub r_misassigned: f64,
    /// Dark counts, counts/s.
    pub r_dark: f64,
}

impl RateBreakdown {
    pub fn total(&self) -> f64 {
        self.r_signal + self.r_misassigned + self.r_dark
    }

    /// QBER of the mixture for a given intrinsic error probability.
    pub fn qber(&self, e_opt: f64) -> f64 {
        let total = self.total();
        if total > 0.0 {
            (e_opt * self.r_signal + 0.5 * (self.r_dark + self.r_misassigned)) / total
        } else {
            0.0
        }
    }
}

/// Sifted dark rate the configuration would show without dead-time losses;
/// linear in the dark rates, used to express calibration results as one
/// effective noise number.
pub(crate) fn unsaturated_sifted_dark(params: &LinkParams) -> f64 {
    let acc_dark = dark_window_acceptance(params.window_fraction, params.symbol_period_ps());
    let sum: f64 = params.dark_rates_cps.iter().sum();
    let active = match params.measurement_mode {
        MeasurementMode::Consecutive => 0.5 * sum, // one pair at a time
        MeasurementMode::Simultaneous => sum,
    };
    active * acc_dark * 0.5
}

pub(crate) fn rate_breakdown(params: &LinkParams) -> Result<RateBreakdown> {
    params.validate()?;
    let m = params.mu_detected();
    let period_ps = params.symbol_period_ps();
    let sigma_ps = params.jitter_sigma_s * 1e12;
    let half_window_ps = 0.5 * params.window_fraction * period_ps;

    let (signal_det, dark_det) = match params.measurement_mode {
        MeasurementMode::Consecutive => {
            // Two equal-length passes, one basis each; average their rates.
            let mut signal = 0.0;
            let mut dark = 0.0;
            for basis in Basis::ALL {
                let (s, d) = survived_rates(params, &basis_detectors(basis), m / 2.0);
                signal += 0.5 * s;
                dark += 0.5 * d;
            }
            (signal, dark)
        }
        MeasurementMode::Simultaneous => survived_rates(params, &[0, 1, 2, 3], m / 4.0),
    };

    let acc_signal = signal_window_acceptance(sigma_ps, half_window_ps);
    let acc_mis = misassigned_acceptance(sigma_ps, half_window_ps, period_ps);
    let acc_dark = dark_window_acceptance(params.window_fraction, period_ps);

    const SIFT_FACTOR: f64 = 0.5;
    Ok(RateBreakdown {
        r_signal: signal_det * acc_signal * SIFT_FACTOR,
        r_misassigned: signal_det * acc_mis * SIFT_FACTOR,
        r_dark: dark_det * acc_dark * SIFT_FACTOR,
    })
}

/// Closed-form sifted rate and QBER for the given link configuration.
pub fn analytic_rates(params: &LinkParams) -> Result<AnalyticRates> {
    let parts = rate_breakdown(params)?;
    Ok(AnalyticRates {
        r_sifted: parts.total(),
        r_dark_sifted: parts.r_dark,
        qber: parts.qber(params.e_opt),
    })
}
