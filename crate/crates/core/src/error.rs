use std::path::PathBuf;

/// Unified error type for the simulator, pipeline and harness.
///
/// Every variant maps to a stable machine-parsable category string (see
/// [`Error::category`]) which the CLI prints on failure.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("current {current_ma} mA outside L-I curve range [{min_ma}, {max_ma}] mA")]
    CurrentOutOfRange {
        current_ma: f64,
        min_ma: f64,
        max_ma: f64,
    },

    #[error("attenuation infeasible: source mu {mu_source} is below target mu {mu_target}")]
    InfeasibleAttenuation { mu_source: f64, mu_target: f64 },

    #[error("PRBS seed {0:#x} has no bits set in the 15-bit register (lock-up state)")]
    PrbsSeed(u64),

    #[error("empty symbol sequence")]
    EmptySymbols,

    #[error("frame sync failed: best agreement {agreement:.4} at offset {offset} is below the 0.75 lock threshold")]
    SyncFailure { offset: usize, agreement: f64 },

    #[error("no sifted bits; QBER undefined")]
    UndefinedQber,

    #[error("QBER stays below {q_max} up to the {cap_db} dB search cap; no threshold")]
    NoThreshold { q_max: f64, cap_db: f64 },

    #[error("calibration infeasible: {0}")]
    InfeasibleCalibration(String),

    #[error("{path}:{line}: {reason}")]
    TimeTagFormat {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable one-word category used in CLI error lines and exit reporting.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "invalid-parameter",
            Error::CurrentOutOfRange { .. } => "range-error",
            Error::InfeasibleAttenuation { .. } => "infeasible-attenuation",
            Error::PrbsSeed(_) => "seed-error",
            Error::EmptySymbols => "argument-error",
            Error::SyncFailure { .. } => "sync-failure",
            Error::UndefinedQber => "undefined-qber",
            Error::NoThreshold { .. } => "no-threshold",
            Error::InfeasibleCalibration(_) => "infeasible-calibration",
            Error::TimeTagFormat { .. } => "format-error",
            Error::Config { .. } => "config-error",
            Error::Io { .. } => "io-error",
        }
    }

    /// I/O error with path context.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Parameter-validation error.
    pub fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
