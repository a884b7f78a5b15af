//! Experiment harness: calibrated sweeps, time-evolution runs, split-ratio
//! planning and CSV emission.

use std::io::Write;

use crate::calibrate::{calibrate, calibrate_point, CalibrationResult, CalibrationTargets};
use crate::config::{CalibrationMode, RunConfig};
use crate::link::{analytic_rates, simulate_pulses, simulate_single_basis_run, LinkParams};
use crate::pipeline::{
    block_series, block_summary, frame_sync, qber_report, resolve_symbols, secret_fraction, sift,
    temporal_filter, FrameSyncResult, Measurement, QberReport, SiftedKey,
};
use crate::polarization::{Basis, Bb84Symbol};
use crate::prbs::{prbs_symbols, PRBS15_SYMBOL_PERIOD};
use crate::presets::{self, SourcePreset};
use crate::timetag::DetectionEvent;
use crate::{Error, Result};

/// Largest 1:N power-of-two passive split that fits inside the loss budget:
/// each doubling adds 3.01 dB of intrinsic split loss plus
/// `excess_loss_db_per_stage`.
///
/// Returns 1 when not even a 1:2 split fits.
pub fn max_split(ob_threshold_db: f64, excess_loss_db_per_stage: f64) -> u32 {
    if ob_threshold_db.is_nan() || ob_threshold_db <= 0.0 || excess_loss_db_per_stage < 0.0 {
        return 1;
    }
    let mut best = 1u32;
    for stages in 1..=30u32 {
        let n = 1u32 << stages;
        let loss = 10.0 * (n as f64).log10() + stages as f64 * excess_loss_db_per_stage;
        if loss <= ob_threshold_db {
            best = n;
        } else {
            break;
        }
    }
    best
}

/// Rounds a pulse count up to whole transmitter-pattern periods so that the
/// replayed pattern stays aligned with absolute slot indices in all modes.
pub fn align_pulse_count(pulse_count: u64) -> u64 {
    let period = PRBS15_SYMBOL_PERIOD as u64;
    pulse_count.div_ceil(period).max(1) * period
}

/// Deterministic per-task seed derivation (splitmix64 finalizer).
pub(crate) fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Link parameters ready to run, plus where they came from.
#[derive(Debug, Clone)]
pub struct ResolvedLink {
    pub params: LinkParams,
    /// Source label for CSV rows: preset name or `explicit`.
    pub source: String,
    /// The fit behind `params`, when calibration ran.
    pub fit: Option<CalibrationResult>,
    pub preset: Option<SourcePreset>,
}

/// Effective sifted dark rate of the receiver, fitted once on the reference
/// source's loss sweep. The junction-emitter presets share the receiver, so
/// they reuse this noise level.
pub fn receiver_dark_eff(fixed: &LinkParams) -> Result<f64> {
    let reference = presets::preset("ase_sliced").expect("built-in preset");
    let threshold = reference
        .threshold
        .expect("reference preset has a threshold");
    let fit = calibrate(
        &CalibrationTargets {
            raw_rate_bps: reference.anchor.raw_rate_bps,
            qber: reference.anchor.qber,
            ob_threshold_db: threshold.ob_db,
            qber_threshold: threshold.qber,
        },
        fixed,
    )?;
    Ok(fit.dark_eff_cps)
}

/// Produces the link parameters for a run: either the explicit `link.*`
/// values or a calibration fit to the configured preset's anchors.
pub fn resolve_link(config: &RunConfig) -> Result<ResolvedLink> {
    match config.calibration {
        CalibrationMode::Explicit => Ok(ResolvedLink {
            params: config.link.clone(),
            source: "explicit".into(),
            fit: None,
            preset: presets::preset(&config.emitter_preset),
        }),
        CalibrationMode::Preset => {
            let preset = presets::preset(&config.emitter_preset).ok_or_else(|| {
                Error::param(
                    "emitter.preset",
                    format!("unknown preset `{}`", config.emitter_preset),
                )
            })?;
            let fit = match preset.threshold {
                Some(threshold) => calibrate(
                    &CalibrationTargets {
                        raw_rate_bps: preset.anchor.raw_rate_bps,
                        qber: preset.anchor.qber,
                        ob_threshold_db: threshold.ob_db,
                        qber_threshold: threshold.qber,
                    },
                    &config.link,
                )?,
                None => calibrate_point(
                    preset.anchor.raw_rate_bps,
                    preset.anchor.qber,
                    receiver_dark_eff(&config.link)?,
                    &config.link,
                )?,
            };
            Ok(ResolvedLink {
                params: fit.apply(&config.link),
                source: preset.name.to_string(),
                fit: Some(fit),
                preset: Some(preset),
            })
        }
    }
}

/// Everything one simulated run produced after post-processing.
#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub key: SiftedKey,
    pub report: QberReport,
    pub sync: FrameSyncResult,
    /// Wall-clock span of the run, seconds.
    pub duration_s: f64,
}

/// Runs the post-processing chain over an event stream: temporal filter →
/// per-symbol resolution → frame sync → sift → QBER.
pub fn process_events(
    events: &[DetectionEvent],
    params: &LinkParams,
    symbols: &[Bb84Symbol],
    prbs_seed: u64,
    duration_s: f64,
    block_size_s: f64,
) -> Result<PipelineOutcome> {
    let filtered = temporal_filter(events, params.symbol_period_ps(), params.window_fraction);
    let measurements = resolve_symbols(&filtered);
    let sync = frame_sync(&measurements, prbs_seed, PRBS15_SYMBOL_PERIOD)?;
    let aligned: Vec<Measurement> = if sync.offset == 0 {
        measurements
    } else {
        measurements
            .into_iter()
            .map(|mut m| {
                m.symbol_index += sync.offset as u64;
                m
            })
            .collect()
    };
    let key = sift(symbols, &aligned);
    let report = qber_report(
        &key,
        symbols,
        params.symbol_rate_hz,
        duration_s,
        block_size_s,
    )?;
    Ok(PipelineOutcome {
        key,
        report,
        sync,
        duration_s,
    })
}

/// Simulates one run at the given parameters and processes it end to end.
pub fn run_link_pipeline(
    params: &LinkParams,
    prbs_seed: u64,
    block_size_s: f64,
) -> Result<PipelineOutcome> {
    let mut params = params.clone();
    params.pulse_count = align_pulse_count(params.pulse_count);
    let symbols = prbs_symbols(prbs_seed, PRBS15_SYMBOL_PERIOD)?;
    let events = simulate_pulses(&params, &symbols)?;
    process_events(
        &events,
        &params,
        &symbols,
        prbs_seed,
        params.run_duration_s(),
        block_size_s,
    )
}

/// One line of the sweep CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub ob_db: f64,
    pub r_raw_bps: f64,
    pub qber: f64,
    pub qber_hv: f64,
    pub qber_da: f64,
    pub secret_fraction: f64,
    pub source: String,
    pub r_analytic_bps: f64,
    pub qber_analytic: f64,
}

/// Sweeps the optical budget over the configured grid.
///
/// Each grid point is an independent run with a seed derived from
/// `(rng_seed, point index)`; rows come back in grid order. With
/// `analytic_only` the Monte Carlo columns are filled from the closed-form
/// model instead.
pub fn run_ob_sweep(config: &RunConfig) -> Result<Vec<SweepRow>> {
    let resolved = resolve_link(config)?;
    let mut rows = Vec::new();
    for (i, ob_db) in config.sweep.points().into_iter().enumerate() {
        let mut params = resolved.params.with_ob(ob_db);
        let analytic = analytic_rates(&params)?;
        let row = if config.analytic_only {
            SweepRow {
                ob_db,
                r_raw_bps: analytic.r_sifted,
                qber: analytic.qber,
                qber_hv: analytic.qber,
                qber_da: analytic.qber,
                secret_fraction: secret_fraction(analytic.qber),
                source: resolved.source.clone(),
                r_analytic_bps: analytic.r_sifted,
                qber_analytic: analytic.qber,
            }
        } else {
            params.rng_seed = derive_seed(config.link.rng_seed, i as u64);
            let outcome = run_link_pipeline(&params, config.prbs_seed, config.block_size_s)?;
            SweepRow {
                ob_db,
                r_raw_bps: outcome.report.raw_rate_bps,
                qber: outcome.report.qber_total,
                qber_hv: outcome.report.qber_hv.unwrap_or(f64::NAN),
                qber_da: outcome.report.qber_da.unwrap_or(f64::NAN),
                secret_fraction: secret_fraction(outcome.report.qber_total),
                source: resolved.source.clone(),
                r_analytic_bps: analytic.r_sifted,
                qber_analytic: analytic.qber,
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(mut w: W, rows: &[SweepRow]) -> std::io::Result<()> {
    writeln!(
        w,
        "ob_db,r_raw_bps,qber,qber_hv,qber_da,secret_fraction,source,r_analytic_bps,qber_analytic"
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            sig6(r.ob_db),
            sig6(r.r_raw_bps),
            sig6(r.qber),
            sig6(r.qber_hv),
            sig6(r.qber_da),
            sig6(r.secret_fraction),
            r.source,
            sig6(r.r_analytic_bps),
            sig6(r.qber_analytic),
        )?;
    }
    Ok(())
}

/// One per-block line of the evolution CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionBlockRow {
    pub t_s: f64,
    pub basis: Basis,
    pub qber_block: f64,
    pub rate_block_bps: f64,
}

/// Per-basis summary of an evolution run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionSummary {
    pub basis: Basis,
    pub qber_mean: f64,
    pub qber_3sigma: f64,
    pub rate_mean_bps: f64,
    pub rate_3sigma_bps: f64,
    pub n_blocks: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionTable {
    pub blocks: Vec<EvolutionBlockRow>,
    pub summary: Vec<EvolutionSummary>,
}

/// Short-term evolution run: one trace per basis, measured back to back as a
/// two-detector receiver would, with per-block QBER and rate.
///
/// With a preset that carries per-basis anchors each trace is calibrated to
/// its own operating point (sharing the fitted receiver dark level);
/// otherwise both traces use the aggregate parameters.
pub fn run_time_evolution(config: &RunConfig) -> Result<EvolutionTable> {
    if config.duration_s < 10.0 * config.block_size_s {
        return Err(Error::param(
            "run.duration",
            format!(
                "need at least 10 blocks: duration {} s < 10 × block size {} s",
                config.duration_s, config.block_size_s
            ),
        ));
    }
    let resolved = resolve_link(config)?;
    let per_basis_fits: Option<[CalibrationResult; 2]> =
        match (&resolved.preset, config.calibration) {
            (Some(preset), CalibrationMode::Preset) => match (preset.per_basis, &resolved.fit) {
                (Some(anchors), Some(fit)) => {
                    let mut fits = Vec::with_capacity(2);
                    for anchor in anchors {
                        fits.push(calibrate_point(
                            anchor.raw_rate_bps,
                            anchor.qber,
                            fit.dark_eff_cps,
                            &config.link,
                        )?);
                    }
                    Some([fits[0], fits[1]])
                }
                _ => None,
            },
            _ => None,
        };

    let symbols = prbs_symbols(config.prbs_seed, PRBS15_SYMBOL_PERIOD)?;
    let pulse_count =
        align_pulse_count((config.duration_s * config.link.symbol_rate_hz).ceil() as u64);
    let mut table = EvolutionTable {
        blocks: Vec::new(),
        summary: Vec::new(),
    };
    for (idx, basis) in Basis::ALL.into_iter().enumerate() {
        let mut params = match &per_basis_fits {
            Some(fits) => fits[idx].apply(&config.link),
            None => resolved.params.clone(),
        };
        params.pulse_count = pulse_count;
        let trace_duration_s = pulse_count as f64 / params.symbol_rate_hz;
        let events = simulate_single_basis_run(&params, &symbols, basis)?;
        let filtered = temporal_filter(&events, params.symbol_period_ps(), params.window_fraction);
        let measurements = resolve_symbols(&filtered);
        frame_sync(&measurements, config.prbs_seed, PRBS15_SYMBOL_PERIOD)?;
        let key = sift(&symbols, &measurements);
        let blocks = block_series(
            &key,
            &symbols,
            params.symbol_rate_hz,
            trace_duration_s,
            config.block_size_s,
            None,
        );
        let (qber_mean, qber_3sigma) = block_summary(&blocks);
        let rates: Vec<f64> = blocks
            .iter()
            .map(|b| b.n_bits as f64 / config.block_size_s)
            .collect();
        let rate_mean = rates.iter().sum::<f64>() / rates.len().max(1) as f64;
        let rate_3sigma = if rates.len() > 1 {
            let var = rates.iter().map(|r| (r - rate_mean).powi(2)).sum::<f64>()
                / (rates.len() - 1) as f64;
            3.0 * var.sqrt()
        } else {
            0.0
        };
        for b in &blocks {
            table.blocks.push(EvolutionBlockRow {
                t_s: b.t_start_s,
                basis,
                qber_block: b.qber(),
                rate_block_bps: b.n_bits as f64 / config.block_size_s,
            });
        }
        table.summary.push(EvolutionSummary {
            basis,
            qber_mean,
            qber_3sigma,
            rate_mean_bps: rate_mean,
            rate_3sigma_bps: rate_3sigma,
            n_blocks: blocks.len(),
        });
    }
    Ok(table)
}

pub fn write_evolution_csv<W: Write>(mut w: W, table: &EvolutionTable) -> std::io::Result<()> {
    writeln!(w, "t_s,basis,qber_block,rate_block_bps")?;
    for b in &table.blocks {
        writeln!(
            w,
            "{},{},{},{}",
            sig6(b.t_s),
            b.basis,
            sig6(b.qber_block),
            sig6(b.rate_block_bps)
        )?;
    }
    for s in &table.summary {
        writeln!(
            w,
            "mean,{},{},{}",
            s.basis,
            sig6(s.qber_mean),
            sig6(s.rate_mean_bps)
        )?;
        writeln!(
            w,
            "3sigma,{},{},{}",
            s.basis,
            sig6(s.qber_3sigma),
            sig6(s.rate_3sigma_bps)
        )?;
    }
    Ok(())
}

/// Formats with six significant digits (full precision above 10^6,
/// scientific notation below 10^-4).
pub fn sig6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    if mag < -4 {
        return format!("{x:.5e}");
    }
    let decimals = (5 - mag).max(0) as usize;
    format!("{:.*}", decimals, x)
}
