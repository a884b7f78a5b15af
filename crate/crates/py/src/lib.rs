//! Python bindings for the bb84link simulator: the link parameter set, the
//! analytic rate model, Monte Carlo runs through the full post-processing
//! pipeline, calibration, and the small photon-budget helpers.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use bb84link::calibrate as calibrate_mod;
use bb84link::calibrate::CalibrationTargets;
use bb84link::experiment;
use bb84link::link::{self, MeasurementMode};
use bb84link::pipeline;
use bb84link::polarization::{self, Basis, PolarizationAngle};
use bb84link::prbs;
use bb84link::source;

fn to_py_err(err: bb84link::Error) -> PyErr {
    PyValueError::new_err(format!("{}: {err}", err.category()))
}

fn parse_basis(name: &str) -> PyResult<Basis> {
    match name {
        "HV" | "hv" => Ok(Basis::Hv),
        "DA" | "da" => Ok(Basis::Da),
        other => Err(PyValueError::new_err(format!(
            "basis must be 'HV' or 'DA', got '{other}'"
        ))),
    }
}

/// Full physical configuration of one link run.
#[pyclass(name = "LinkParams", skip_from_py_object)]
#[derive(Clone)]
struct PyLinkParams {
    inner: link::LinkParams,
}

#[pymethods]
impl PyLinkParams {
    #[new]
    #[pyo3(signature = (
        symbol_rate_hz = 1e9,
        mu_q = 0.1,
        ob_db = 0.0,
        e_opt = 0.042,
        eta_bob = 2e-4,
        dark_rates_cps = [560.0, 525.0, 560.0, 525.0],
        dead_time_s = 10e-6,
        jitter_sigma_s = 100e-12,
        window_fraction = 0.5,
        measurement_mode = "consecutive",
        pulse_count = 10_000_000,
        rng_seed = 7,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        symbol_rate_hz: f64,
        mu_q: f64,
        ob_db: f64,
        e_opt: f64,
        eta_bob: f64,
        dark_rates_cps: [f64; 4],
        dead_time_s: f64,
        jitter_sigma_s: f64,
        window_fraction: f64,
        measurement_mode: &str,
        pulse_count: u64,
        rng_seed: u64,
    ) -> PyResult<Self> {
        let inner = link::LinkParams {
            symbol_rate_hz,
            mu_q,
            ob_db,
            e_opt,
            eta_bob,
            dark_rates_cps,
            dead_time_s,
            jitter_sigma_s,
            window_fraction,
            measurement_mode: measurement_mode
                .parse::<MeasurementMode>()
                .map_err(to_py_err)?,
            pulse_count,
            rng_seed,
        };
        inner.validate().map_err(to_py_err)?;
        Ok(PyLinkParams { inner })
    }

    #[getter]
    fn ob_db(&self) -> f64 {
        self.inner.ob_db
    }

    #[getter]
    fn e_opt(&self) -> f64 {
        self.inner.e_opt
    }

    #[getter]
    fn eta_bob(&self) -> f64 {
        self.inner.eta_bob
    }

    #[getter]
    fn dark_rates_cps(&self) -> [f64; 4] {
        self.inner.dark_rates_cps
    }

    #[getter]
    fn pulse_count(&self) -> u64 {
        self.inner.pulse_count
    }

    /// Mean photon number per pulse after the channel.
    fn mu_effective(&self) -> f64 {
        self.inner.mu_effective()
    }

    /// Copy with a different optical budget.
    fn with_ob(&self, ob_db: f64) -> PyLinkParams {
        PyLinkParams {
            inner: self.inner.with_ob(ob_db),
        }
    }

    /// Copy with a different seed.
    fn with_seed(&self, rng_seed: u64) -> PyLinkParams {
        let mut inner = self.inner.clone();
        inner.rng_seed = rng_seed;
        PyLinkParams { inner }
    }

    /// Copy with a different pulse count.
    fn with_pulses(&self, pulse_count: u64) -> PyLinkParams {
        let mut inner = self.inner.clone();
        inner.pulse_count = pulse_count;
        PyLinkParams { inner }
    }

    /// Closed-form expectation of the sifted rate and QBER.
    fn analytic_rates<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let rates = link::analytic_rates(&self.inner).map_err(to_py_err)?;
        let d = PyDict::new(py);
        d.set_item("r_sifted_bps", rates.r_sifted)?;
        d.set_item("r_dark_sifted_bps", rates.r_dark_sifted)?;
        d.set_item("qber", rates.qber)?;
        Ok(d)
    }

    /// Optical budget at which the analytic QBER crosses `q_max`.
    fn threshold_budget(&self, q_max: f64) -> PyResult<f64> {
        link::threshold_budget(&self.inner, q_max).map_err(to_py_err)
    }

    /// Runs the Monte Carlo simulation through temporal filtering, frame
    /// sync, sifting and QBER estimation; returns the report as a dict.
    #[pyo3(signature = (prbs_seed = 1, block_size_s = 5.0))]
    fn simulate_qber<'py>(
        &self,
        py: Python<'py>,
        prbs_seed: u64,
        block_size_s: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let outcome = experiment::run_link_pipeline(&self.inner, prbs_seed, block_size_s)
            .map_err(to_py_err)?;
        let d = PyDict::new(py);
        d.set_item("raw_rate_bps", outcome.report.raw_rate_bps)?;
        d.set_item("qber", outcome.report.qber_total)?;
        d.set_item("qber_hv", outcome.report.qber_hv)?;
        d.set_item("qber_da", outcome.report.qber_da)?;
        d.set_item("n_sifted", outcome.report.n_sifted)?;
        d.set_item("block_mean", outcome.report.block_mean)?;
        d.set_item("block_3sigma", outcome.report.block_3sigma)?;
        d.set_item("duration_s", outcome.duration_s)?;
        d.set_item("sync_offset", outcome.sync.offset)?;
        d.set_item("sync_agreement", outcome.sync.agreement)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!(
            "LinkParams(symbol_rate_hz={}, mu_q={}, ob_db={}, e_opt={}, eta_bob={}, mode={})",
            self.inner.symbol_rate_hz,
            self.inner.mu_q,
            self.inner.ob_db,
            self.inner.e_opt,
            self.inner.eta_bob,
            self.inner.measurement_mode.as_str(),
        )
    }
}

/// Fitted effective link parameters.
#[pyclass(name = "CalibrationResult", skip_from_py_object)]
#[derive(Clone)]
struct PyCalibrationResult {
    inner: calibrate_mod::CalibrationResult,
}

#[pymethods]
impl PyCalibrationResult {
    #[getter]
    fn eta_bob(&self) -> f64 {
        self.inner.eta_bob
    }

    #[getter]
    fn e_opt(&self) -> f64 {
        self.inner.e_opt
    }

    #[getter]
    fn dark_eff_cps(&self) -> f64 {
        self.inner.dark_eff_cps
    }

    /// Writes the fitted values into a parameter set.
    fn apply(&self, base: &PyLinkParams) -> PyLinkParams {
        PyLinkParams {
            inner: self.inner.apply(&base.inner),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "CalibrationResult(eta_bob={:.6e}, e_opt={:.6}, dark_eff_cps={:.3})",
            self.inner.eta_bob, self.inner.e_opt, self.inner.dark_eff_cps
        )
    }
}

/// Fits (eta_bob, e_opt, effective dark rate) to a rate/QBER anchor plus a
/// QBER-threshold anchor.
#[pyfunction]
fn calibrate(
    raw_rate_bps: f64,
    qber: f64,
    ob_threshold_db: f64,
    qber_threshold: f64,
    fixed: &PyLinkParams,
) -> PyResult<PyCalibrationResult> {
    calibrate_mod::calibrate(
        &CalibrationTargets {
            raw_rate_bps,
            qber,
            ob_threshold_db,
            qber_threshold,
        },
        &fixed.inner,
    )
    .map(|inner| PyCalibrationResult { inner })
    .map_err(to_py_err)
}

/// Fits (eta_bob, e_opt) to a single rate/QBER anchor with the dark level
/// pinned.
#[pyfunction]
fn calibrate_point(
    raw_rate_bps: f64,
    qber: f64,
    dark_eff_cps: f64,
    fixed: &PyLinkParams,
) -> PyResult<PyCalibrationResult> {
    calibrate_mod::calibrate_point(raw_rate_bps, qber, dark_eff_cps, &fixed.inner)
        .map(|inner| PyCalibrationResult { inner })
        .map_err(to_py_err)
}

/// State emitted for a (basis, bit) pair, as a one-letter name.
#[pyfunction]
fn state_of(basis: &str, bit: bool) -> PyResult<String> {
    Ok(polarization::state_of(parse_basis(basis)?, bit).to_string())
}

/// Malus' law for linear polarization angles in radians.
#[pyfunction]
fn projection_probability(state_angle_rad: f64, analyzer_angle_rad: f64) -> f64 {
    polarization::projection_probability(
        PolarizationAngle::new(state_angle_rad),
        PolarizationAngle::new(analyzer_angle_rad),
    )
}

/// Validates an intrinsic optical error probability.
#[pyfunction]
fn effective_error_probability(e_opt: f64) -> PyResult<f64> {
    polarization::effective_error_probability(e_opt).map_err(to_py_err)
}

/// Mean photon number per pulse: P·λ/(h·c·f).
#[pyfunction]
fn photons_per_pulse(power_w: f64, wavelength_nm: f64, symbol_rate_hz: f64) -> PyResult<f64> {
    source::photons_per_pulse(power_w, wavelength_nm, symbol_rate_hz).map_err(to_py_err)
}

/// Attenuation (dB) from `mu_source` down to `mu_target`.
#[pyfunction]
fn attenuation_to_target(mu_source: f64, mu_target: f64) -> PyResult<f64> {
    source::attenuation_to_target(mu_source, mu_target).map_err(to_py_err)
}

/// Non-paralyzable dead-time saturation of a click rate.
#[pyfunction]
fn saturate(incident_rate: f64, dead_time_s: f64) -> f64 {
    link::saturate(incident_rate, dead_time_s)
}

/// Binary entropy h₂(x) in bits.
#[pyfunction]
fn binary_entropy(x: f64) -> f64 {
    pipeline::binary_entropy(x)
}

/// Asymptotic BB84 secret fraction max(0, 1 − 2·h₂(q)).
#[pyfunction]
fn secret_fraction(q: f64) -> f64 {
    pipeline::secret_fraction(q)
}

/// Largest power-of-two passive split fitting the loss budget.
#[pyfunction]
fn max_split(ob_threshold_db: f64, excess_loss_db_per_stage: f64) -> u32 {
    experiment::max_split(ob_threshold_db, excess_loss_db_per_stage)
}

/// First `n` symbols of the PRBS-15 pattern as (basis, bit) tuples.
#[pyfunction]
fn prbs_symbols(seed: u64, n: usize) -> PyResult<Vec<(String, u8)>> {
    Ok(prbs::prbs_symbols(seed, n)
        .map_err(to_py_err)?
        .into_iter()
        .map(|s| (s.basis.to_string(), s.bit as u8))
        .collect())
}

#[pymodule]
fn bb84link_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLinkParams>()?;
    m.add_class::<PyCalibrationResult>()?;
    m.add_function(wrap_pyfunction!(calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_point, m)?)?;
    m.add_function(wrap_pyfunction!(state_of, m)?)?;
    m.add_function(wrap_pyfunction!(projection_probability, m)?)?;
    m.add_function(wrap_pyfunction!(effective_error_probability, m)?)?;
    m.add_function(wrap_pyfunction!(photons_per_pulse, m)?)?;
    m.add_function(wrap_pyfunction!(attenuation_to_target, m)?)?;
    m.add_function(wrap_pyfunction!(saturate, m)?)?;
    m.add_function(wrap_pyfunction!(binary_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(secret_fraction, m)?)?;
    m.add_function(wrap_pyfunction!(max_split, m)?)?;
    m.add_function(wrap_pyfunction!(prbs_symbols, m)?)?;
    m.add("PRBS15_SYMBOL_PERIOD", prbs::PRBS15_SYMBOL_PERIOD)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
