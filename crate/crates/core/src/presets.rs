//! Built-in source configurations with their measured anchor points.
//!
//! Each preset bundles the emitter's spectral metadata with the operating
//! points observed on the reference receiver: the aggregate raw key rate and
//! QBER at zero extra loss, per-basis trace anchors where available, and the
//! loss threshold of the noise-limited reference source. Calibration fits
//! the model to these anchors, so runs built from presets *reproduce* the
//! measured behavior rather than predict it — see the README.

use crate::source::{EmitterKind, EmitterSpec, LiCurve};

/// One measured (raw key rate, QBER) operating point at 0 dB budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub raw_rate_bps: f64,
    pub qber: f64,
}

/// A measured QBER crossing on the loss axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdPoint {
    pub ob_db: f64,
    pub qber: f64,
}

/// A light source plus everything needed to calibrate the link model to it.
#[derive(Debug, Clone, PartialEq)]
pub struct SourcePreset {
    pub name: &'static str,
    pub emitter: EmitterSpec,
    /// Aggregate anchor at 0 dB budget.
    pub anchor: OperatingPoint,
    /// Per-basis trace anchors (H/V first), when measured separately.
    pub per_basis: Option<[OperatingPoint; 2]>,
    /// QBER-vs-loss crossing, measured for the reference source only.
    pub threshold: Option<ThresholdPoint>,
}

/// Names of all built-in presets.
pub const PRESET_NAMES: [&str; 3] = ["ase_sliced", "sige_unfiltered", "sige_filtered"];

/// L-I curve of the junction emitter: anchored at the origin and at the one
/// characterized drive point (46 mA → 100 pW). Densify with measured points
/// for anything beyond interpolation between these two.
pub fn sige_li_curve() -> LiCurve {
    LiCurve::new(vec![(0.0, 0.0), (46.0, 100e-12)]).expect("static curve is valid")
}

/// Looks up a built-in source preset by name.
pub fn preset(name: &str) -> Option<SourcePreset> {
    let p = match name {
        // Spectrally sliced ASE reference: 25 GHz slice (≈ 0.2 nm) at
        // 1539.1 nm.
        "ase_sliced" => SourcePreset {
            name: "ase_sliced",
            emitter: EmitterSpec::new("ase_sliced", 1539.1, 0.2, EmitterKind::Ase, None)
                .expect("static spec is valid"),
            anchor: OperatingPoint {
                raw_rate_bps: 7600.0,
                qber: 0.042,
            },
            per_basis: Some([
                OperatingPoint {
                    raw_rate_bps: 1870.0,
                    qber: 0.0537,
                },
                OperatingPoint {
                    raw_rate_bps: 1920.0,
                    qber: 0.0428,
                },
            ]),
            threshold: Some(ThresholdPoint {
                ob_db: 15.2,
                qber: 0.11,
            }),
        },
        // Broadband junction emitter, LED-like emission across the C+L band.
        "sige_unfiltered" => SourcePreset {
            name: "sige_unfiltered",
            emitter: EmitterSpec::new(
                "sige_unfiltered",
                1581.0,
                95.0,
                EmitterKind::Led,
                Some(sige_li_curve()),
            )
            .expect("static spec is valid"),
            anchor: OperatingPoint {
                raw_rate_bps: 2150.0,
                qber: 0.0771,
            },
            per_basis: None,
            threshold: None,
        },
        // Same emitter behind a 14 nm bandpass filter.
        "sige_filtered" => SourcePreset {
            name: "sige_filtered",
            emitter: EmitterSpec::new(
                "sige_filtered",
                1581.0,
                14.0,
                EmitterKind::Led,
                Some(sige_li_curve()),
            )
            .expect("static spec is valid"),
            anchor: OperatingPoint {
                raw_rate_bps: 1360.0,
                qber: 0.0853,
            },
            per_basis: None,
            threshold: None,
        },
        _ => return None,
    };
    Some(p)
}
