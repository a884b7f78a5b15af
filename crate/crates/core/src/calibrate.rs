//! Fits effective link parameters to measured anchor points.
//!
//! A deployed receiver is characterized by a handful of observables — the
//! raw key rate and QBER at zero extra loss, and the loss at which the QBER
//! crosses the secret-key cut-off. Three knobs of the model reproduce them:
//!
//! * `eta_bob`, the lumped receiver transmission × detector efficiency,
//!   pins the signal rate;
//! * `e_opt`, the intrinsic optical error, pins the QBER floor;
//! * an effective sifted dark rate pins where loss drives the QBER up.
//!
//! The quoted hardware dark rates over-predict the sifted noise floor
//! substantially (detector gating and software coincidence criteria are not
//! modeled individually), so the effective dark level is fitted rather than
//! derived and reported as [`CalibrationResult::dark_eff_cps`].
//!
//! Starting from the closed-form two-equation solution of the mixture model
//! (exact when rates scale linearly with loss), the solver refines the fit
//! against the full analytic model — Poisson click statistics, dead-time
//! saturation, window acceptance — by nested bisection, so feeding the
//! fitted parameters back through [`analytic_rates`] reproduces every anchor
//! to better than 1e-9 relative.

use crate::link::{analytic_rates, rate_breakdown, unsaturated_sifted_dark, LinkParams};
use crate::{Error, Result};

/// Anchor points a calibration must reproduce.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationTargets {
    /// Raw (sifted) key rate at 0 dB optical budget, bits/s.
    pub raw_rate_bps: f64,
    /// QBER at 0 dB optical budget.
    pub qber: f64,
    /// Optical budget at which the QBER crosses `qber_threshold`, dB.
    pub ob_threshold_db: f64,
    /// The QBER value crossed at `ob_threshold_db`.
    pub qber_threshold: f64,
}

/// Relative error of the fitted model at each anchor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationResiduals {
    pub raw_rate: f64,
    pub qber: f64,
    pub qber_threshold: f64,
}

impl CalibrationResiduals {
    pub fn max_abs(&self) -> f64 {
        self.raw_rate
            .abs()
            .max(self.qber.abs())
            .max(self.qber_threshold.abs())
    }
}

/// Fitted effective parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationResult {
    pub eta_bob: f64,
    pub e_opt: f64,
    /// Effective sifted dark rate (dead-time losses excluded), counts/s.
    pub dark_eff_cps: f64,
    pub residuals: CalibrationResiduals,
}

impl CalibrationResult {
    /// Writes the fitted values into a parameter set: `e_opt`, `eta_bob`,
    /// and the per-detector dark rates rescaled (preserving their ratios) so
    /// that the sifted dark level equals `dark_eff_cps`.
    pub fn apply(&self, base: &LinkParams) -> LinkParams {
        let mut params = base.clone();
        params.e_opt = self.e_opt;
        params.eta_bob = self.eta_bob;
        let unscaled = unsaturated_sifted_dark(base);
        let scale = if unscaled > 0.0 {
            self.dark_eff_cps / unscaled
        } else {
            0.0
        };
        for r in params.dark_rates_cps.iter_mut() {
            *r *= scale;
        }
        params
    }
}

const ETA_FLOOR: f64 = 1e-15;

/// Total sifted rate is monotone in `eta`; find the `eta` that reproduces
/// `raw_rate` at OB = 0 for the given dark scale.
fn solve_eta(base: &LinkParams, dark_scale: f64, raw_rate: f64) -> Result<f64> {
    let probe = |eta: f64| -> Result<f64> {
        Ok(rate_breakdown(&with_fit(base, 0.0, eta, dark_scale))?.total())
    };
    if probe(ETA_FLOOR)? > raw_rate {
        return Err(Error::InfeasibleCalibration(format!(
            "dark counts alone exceed the {raw_rate} b/s rate target"
        )));
    }
    if probe(1.0)? < raw_rate {
        return Err(Error::InfeasibleCalibration(format!(
            "rate target {raw_rate} b/s unreachable even at unit receiver efficiency"
        )));
    }
    let (mut lo, mut hi) = (ETA_FLOOR, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if probe(mid)? < raw_rate {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) / hi < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn with_fit(base: &LinkParams, ob_db: f64, eta: f64, dark_scale: f64) -> LinkParams {
    let mut p = base.clone();
    p.ob_db = ob_db;
    p.eta_bob = eta;
    for r in p.dark_rates_cps.iter_mut() {
        *r *= dark_scale;
    }
    p
}

/// `e_opt` that makes the mixture hit `qber` at OB = 0, given rates.
fn solve_e_opt(base: &LinkParams, eta: f64, dark_scale: f64, qber: f64) -> Result<f64> {
    let parts = rate_breakdown(&with_fit(base, 0.0, eta, dark_scale))?;
    let noise = parts.r_dark + parts.r_misassigned;
    if parts.r_signal <= 0.0 {
        return Err(Error::InfeasibleCalibration(
            "no signal rate left to carry the QBER target".into(),
        ));
    }
    Ok((qber * parts.total() - 0.5 * noise) / parts.r_signal)
}

/// Fits (`e_opt`, `eta_bob`, effective dark) to a rate/QBER anchor plus a
/// QBER-threshold anchor.
///
/// `fixed` supplies everything not being fitted: symbol rate, μ_Q, window,
/// dead time, jitter, measurement mode and the dark-rate ratios between
/// detectors.
pub fn calibrate(targets: &CalibrationTargets, fixed: &LinkParams) -> Result<CalibrationResult> {
    fixed.validate()?;
    let CalibrationTargets {
        raw_rate_bps: r0,
        qber: q0,
        ob_threshold_db: ob_th,
        qber_threshold: q_max,
    } = *targets;
    if !r0.is_finite() || r0 <= 0.0 {
        return Err(Error::InfeasibleCalibration(
            "raw rate target must be > 0".into(),
        ));
    }
    if !(0.0..0.5).contains(&q0) || !(0.0..0.5).contains(&q_max) {
        return Err(Error::InfeasibleCalibration(
            "QBER targets must lie in [0, 0.5)".into(),
        ));
    }
    if q0 >= q_max {
        return Err(Error::InfeasibleCalibration(format!(
            "zero dynamic range: base QBER {q0} must be below threshold QBER {q_max}"
        )));
    }
    if ob_th.is_nan() || ob_th <= 0.0 {
        return Err(Error::InfeasibleCalibration(
            "threshold budget must be positive".into(),
        ));
    }
    if fixed.dark_rates_cps.iter().sum::<f64>() <= 0.0 {
        return Err(Error::InfeasibleCalibration(
            "all dark rates are zero: the QBER cannot reach the threshold at any loss".into(),
        ));
    }

    // Threshold QBER grows with the dark level; bracket the dark scale and
    // bisect. The upper bracket is where e_opt would go negative (the noise
    // floor alone would exceed the QBER target at 0 dB).
    let unscaled_dark = unsaturated_sifted_dark(fixed);
    let q_at_threshold = |dark_scale: f64| -> Result<f64> {
        let eta = solve_eta(fixed, dark_scale, r0)?;
        let e_opt = solve_e_opt(fixed, eta, dark_scale, q0)?;
        if e_opt < -1e-9 {
            // Too much dark for the requested floor; treat as "past the
            // bracket" so bisection backs off.
            return Ok(f64::INFINITY);
        }
        Ok(rate_breakdown(&with_fit(fixed, ob_th, eta, dark_scale))?.qber(e_opt.max(0.0)))
    };

    // Initial upper bracket from the linear closed form: observed sifted
    // dark D with (q_max − q0)·r0·x / ((0.5 − q_max)(1 − x)).
    let x = 10f64.powf(-ob_th / 10.0);
    let d_linear = (q_max - q0) * r0 * x / ((0.5 - q_max) * (1.0 - x));
    let mut hi = (4.0 * d_linear / unscaled_dark).max(1e-6);
    let mut grow = 0;
    while q_at_threshold(hi)? < q_max {
        hi *= 2.0;
        grow += 1;
        if grow > 40 {
            return Err(Error::InfeasibleCalibration(format!(
                "threshold QBER {q_max} at {ob_th} dB is unreachable for these targets"
            )));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if q_at_threshold(mid)? < q_max {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 * hi.max(1.0) {
            break;
        }
    }
    let dark_scale = 0.5 * (lo + hi);
    let eta_bob = solve_eta(fixed, dark_scale, r0)?;
    let e_opt = solve_e_opt(fixed, eta_bob, dark_scale, q0)?;
    if !(-1e-12..=0.5).contains(&e_opt) {
        return Err(Error::InfeasibleCalibration(format!(
            "fitted intrinsic error {e_opt:.6} outside [0, 0.5]"
        )));
    }
    let e_opt = e_opt.max(0.0);

    let result = CalibrationResult {
        eta_bob,
        e_opt,
        dark_eff_cps: unscaled_dark * dark_scale,
        residuals: residuals_for(targets, fixed, eta_bob, e_opt, dark_scale)?,
    };
    if result.residuals.max_abs() > 1e-6 {
        return Err(Error::InfeasibleCalibration(format!(
            "fit did not close: residuals {:?}",
            result.residuals
        )));
    }
    Ok(result)
}

/// Fits (`e_opt`, `eta_bob`) to a single rate/QBER anchor with the dark
/// level pinned (e.g. reusing the receiver noise fitted on another source).
pub fn calibrate_point(
    raw_rate_bps: f64,
    qber: f64,
    dark_eff_cps: f64,
    fixed: &LinkParams,
) -> Result<CalibrationResult> {
    fixed.validate()?;
    if !raw_rate_bps.is_finite() || raw_rate_bps <= 0.0 {
        return Err(Error::InfeasibleCalibration(
            "raw rate target must be > 0".into(),
        ));
    }
    if !(0.0..0.5).contains(&qber) {
        return Err(Error::InfeasibleCalibration(
            "QBER target must lie in [0, 0.5)".into(),
        ));
    }
    if dark_eff_cps < 0.0 {
        return Err(Error::InfeasibleCalibration(
            "dark level must be >= 0".into(),
        ));
    }
    let unscaled_dark = unsaturated_sifted_dark(fixed);
    let dark_scale = if unscaled_dark > 0.0 {
        dark_eff_cps / unscaled_dark
    } else if dark_eff_cps == 0.0 {
        0.0
    } else {
        return Err(Error::InfeasibleCalibration(
            "cannot impose a dark level on a configuration with zero dark rates".into(),
        ));
    };
    let eta_bob = solve_eta(fixed, dark_scale, raw_rate_bps)?;
    let e_opt = solve_e_opt(fixed, eta_bob, dark_scale, qber)?;
    if !(-1e-12..=0.5).contains(&e_opt) {
        return Err(Error::InfeasibleCalibration(format!(
            "fitted intrinsic error {e_opt:.6} outside [0, 0.5]"
        )));
    }
    let e_opt = e_opt.max(0.0);
    let params = with_fit(fixed, 0.0, eta_bob, dark_scale);
    let rates = analytic_rates(&params)?;
    Ok(CalibrationResult {
        eta_bob,
        e_opt,
        dark_eff_cps,
        residuals: CalibrationResiduals {
            raw_rate: rates.r_sifted / raw_rate_bps - 1.0,
            qber: if qber > 0.0 {
                rates.qber / qber - 1.0
            } else {
                rates.qber
            },
            qber_threshold: 0.0,
        },
    })
}

fn residuals_for(
    targets: &CalibrationTargets,
    fixed: &LinkParams,
    eta: f64,
    e_opt: f64,
    dark_scale: f64,
) -> Result<CalibrationResiduals> {
    let mut at_zero = with_fit(fixed, 0.0, eta, dark_scale);
    at_zero.e_opt = e_opt;
    let r0 = analytic_rates(&at_zero)?;
    let at_th = at_zero.with_ob(targets.ob_threshold_db);
    let rth = analytic_rates(&at_th)?;
    Ok(CalibrationResiduals {
        raw_rate: r0.r_sifted / targets.raw_rate_bps - 1.0,
        qber: r0.qber / targets.qber - 1.0,
        qber_threshold: rth.qber / targets.qber_threshold - 1.0,
    })
}
