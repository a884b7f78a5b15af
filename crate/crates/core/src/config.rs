//! Harness configuration: a flat UTF-8 `key = value` file.
//!
//! Lines starting with `#` (or blank) are skipped; keys are namespaced with
//! dots (`link.mu_q`, `sweep.ob_min`, `emitter.preset`, `run.duration`).
//! Unknown and duplicate keys are hard errors so typos cannot silently fall
//! back to defaults.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use crate::link::{LinkParams, MeasurementMode};
use crate::presets;
use crate::{Error, Result};

/// Optical-budget grid of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub ob_min_db: f64,
    pub ob_max_db: f64,
    pub step_db: f64,
}

impl SweepSpec {
    /// Grid points, emitted in ascending order.
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.ob_max_db - self.ob_min_db) / self.step_db).round() as i64;
        (0..=n.max(0))
            .map(|i| self.ob_min_db + i as f64 * self.step_db)
            .filter(|ob| *ob <= self.ob_max_db + 1e-9)
            .collect()
    }
}

/// How the effective link parameters are obtained for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CalibrationMode {
    /// Fit `e_opt`, `eta_bob` and the dark level to the preset's anchors.
    Preset,
    /// Use the `link.*` values exactly as configured.
    Explicit,
}

/// Full harness configuration for one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub link: LinkParams,
    pub emitter_preset: String,
    pub prbs_seed: u64,
    pub sweep: SweepSpec,
    /// Per-basis trace length of a time-evolution run, seconds.
    pub duration_s: f64,
    /// Evaluation interval for per-block statistics, seconds.
    pub block_size_s: f64,
    pub output_path: Option<PathBuf>,
    pub calibration: CalibrationMode,
    /// Skip Monte Carlo: fill rate/QBER columns from the analytic model.
    pub analytic_only: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            link: LinkParams::default(),
            emitter_preset: "ase_sliced".into(),
            prbs_seed: 1,
            sweep: SweepSpec {
                ob_min_db: -6.0,
                ob_max_db: 20.0,
                step_db: 1.0,
            },
            duration_s: 120.0,
            block_size_s: 5.0,
            output_path: None,
            calibration: CalibrationMode::Preset,
            analytic_only: false,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut config = RunConfig::default();
        let mut seen: HashSet<String> = HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                line: lineno,
                reason: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Config {
                    line: lineno,
                    reason: format!("duplicate key `{key}`"),
                });
            }
            config.apply(key, value).map_err(|reason| Error::Config {
                line: lineno,
                reason,
            })?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::parse(&text)
    }

    fn apply(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num(value: &str) -> std::result::Result<f64, String> {
            value
                .parse::<f64>()
                .map_err(|_| format!("`{value}` is not a number"))
        }
        fn int(value: &str) -> std::result::Result<u64, String> {
            value
                .parse::<f64>()
                .ok()
                .filter(|v| v.fract() == 0.0 && *v >= 0.0 && *v <= u64::MAX as f64)
                .map(|v| v as u64)
                .ok_or_else(|| format!("`{value}` is not a non-negative integer"))
        }
        match key {
            "link.symbol_rate" => self.link.symbol_rate_hz = num(value)?,
            "link.mu_q" => self.link.mu_q = num(value)?,
            "link.ob_db" => self.link.ob_db = num(value)?,
            "link.e_opt" => self.link.e_opt = num(value)?,
            "link.eta_bob" => self.link.eta_bob = num(value)?,
            "link.dark_rates" => {
                let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                if parts.len() != 4 {
                    return Err(format!(
                        "`link.dark_rates` needs 4 comma-separated rates (H,V,D,A), got {}",
                        parts.len()
                    ));
                }
                for (slot, part) in self.link.dark_rates_cps.iter_mut().zip(parts) {
                    *slot = num(part)?;
                }
            }
            "link.dead_time" => self.link.dead_time_s = num(value)?,
            "link.jitter_sigma" => self.link.jitter_sigma_s = num(value)?,
            "link.window_fraction" => self.link.window_fraction = num(value)?,
            "link.measurement_mode" => {
                self.link.measurement_mode = value
                    .parse::<MeasurementMode>()
                    .map_err(|e| e.to_string())?
            }
            "link.pulse_count" => self.link.pulse_count = int(value)?,
            "link.rng_seed" => self.link.rng_seed = int(value)?,
            "link.prbs_seed" => self.prbs_seed = int(value)?,
            "sweep.ob_min" => self.sweep.ob_min_db = num(value)?,
            "sweep.ob_max" => self.sweep.ob_max_db = num(value)?,
            "sweep.step" => self.sweep.step_db = num(value)?,
            "emitter.preset" => {
                if presets::preset(value).is_none() {
                    return Err(format!(
                        "unknown preset `{value}` (available: {})",
                        presets::PRESET_NAMES.join(", ")
                    ));
                }
                self.emitter_preset = value.to_string();
            }
            "run.duration" => self.duration_s = num(value)?,
            "run.block_size" => self.block_size_s = num(value)?,
            "run.output" => self.output_path = Some(PathBuf::from(value)),
            "run.calibration" => {
                self.calibration = match value {
                    "preset" => CalibrationMode::Preset,
                    "explicit" => CalibrationMode::Explicit,
                    other => {
                        return Err(format!(
                            "`run.calibration` must be `preset` or `explicit`, got `{other}`"
                        ))
                    }
                }
            }
            unknown => return Err(format!("unknown key `{unknown}`")),
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        if self.sweep.ob_min_db > self.sweep.ob_max_db {
            return Err(Error::param("sweep", "ob_min must be <= ob_max"));
        }
        if self.sweep.step_db.is_nan() || self.sweep.step_db <= 0.0 {
            return Err(Error::param("sweep.step", "must be > 0"));
        }
        if self.duration_s.is_nan() || self.duration_s <= 0.0 {
            return Err(Error::param("run.duration", "must be > 0"));
        }
        if self.block_size_s.is_nan() || self.block_size_s <= 0.0 {
            return Err(Error::param("run.block_size", "must be > 0"));
        }
        if self.prbs_seed & 0x7fff == 0 {
            return Err(Error::PrbsSeed(self.prbs_seed));
        }
        // Field-level link checks run at simulation entry; surfacing them
        // here gives config-time feedback for explicit configurations.
        if self.calibration == CalibrationMode::Explicit {
            self.link.validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_from_empty_text() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn full_config_round_trips_values() {
        let text = "
# experiment setup
link.symbol_rate = 1e9
link.mu_q = 0.1
link.e_opt = 0.03
link.eta_bob = 2e-4
link.dark_rates = 560, 525, 560, 525
link.dead_time = 1e-5
link.jitter_sigma = 1e-10
link.window_fraction = 0.5
link.measurement_mode = simultaneous
link.pulse_count = 1000000
link.rng_seed = 99
link.prbs_seed = 5
sweep.ob_min = -3
sweep.ob_max = 18
sweep.step = 0.5
emitter.preset = sige_filtered
run.duration = 30
run.block_size = 2
run.output = out.csv
run.calibration = explicit
";
        let c = RunConfig::parse(text).unwrap();
        assert_eq!(c.link.measurement_mode, MeasurementMode::Simultaneous);
        assert_eq!(c.link.rng_seed, 99);
        assert_eq!(c.prbs_seed, 5);
        assert_eq!(c.sweep.step_db, 0.5);
        assert_eq!(c.emitter_preset, "sige_filtered");
        assert_eq!(c.calibration, CalibrationMode::Explicit);
        assert_eq!(c.output_path.as_deref(), Some(Path::new("out.csv")));
    }

    #[test]
    fn unknown_keys_are_hard_errors_with_line_numbers() {
        let text = "link.mu_q = 0.1\nlink.mu_p = 0.2\n";
        match RunConfig::parse(text) {
            Err(Error::Config { line, reason }) => {
                assert_eq!(line, 2);
                assert!(reason.contains("unknown key"), "{reason}");
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        let text = "link.mu_q = 0.1\nlink.mu_q = 0.2\n";
        assert!(matches!(
            RunConfig::parse(text),
            Err(Error::Config { line: 2, .. })
        ));
    }

    #[test]
    fn malformed_lines_and_values_are_rejected() {
        assert!(RunConfig::parse("just words\n").is_err());
        assert!(RunConfig::parse("link.mu_q = banana\n").is_err());
        assert!(RunConfig::parse("link.dark_rates = 1,2,3\n").is_err());
        assert!(RunConfig::parse("emitter.preset = martian_laser\n").is_err());
        assert!(RunConfig::parse("sweep.step = 0\n").is_err());
    }

    #[test]
    fn sweep_grid_is_inclusive_and_ordered() {
        let spec = SweepSpec {
            ob_min_db: -2.0,
            ob_max_db: 2.0,
            step_db: 1.0,
        };
        assert_eq!(spec.points(), vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
    }
}
