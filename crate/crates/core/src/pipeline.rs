//! Receiver-side classical processing.
//!
//! Stages run in order over a time-sorted event stream:
//! temporal filter → per-symbol resolution → frame synchronization →
//! basis sifting → QBER/rate estimation. Each stage is a pure function so
//! the stages can be exercised (and tested) independently.

use crate::polarization::{Basis, Bb84Symbol};
use crate::prbs::prbs_symbols;
use crate::timetag::DetectionEvent;
use crate::{Error, Result};

/// An ingested time-tag row is the same record the simulator emits; see
/// [`crate::timetag`] for the CSV wire format.
pub use crate::timetag::DetectionEvent as TimeTagRecord;

/// Agreement needed to declare frame lock (inclusive).
pub const SYNC_LOCK_THRESHOLD: f64 = 0.75;

/// Events fed into the offset search; more adds nothing but time once the
/// agreement estimate is at the percent level.
const SYNC_EVENT_CAP: usize = 2048;

/// One detection resolved to a symbol slot: Bob's measurement record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Measurement {
    pub symbol_index: u64,
    pub basis: Basis,
    pub bit: bool,
}

/// Assigns each event to its nearest symbol slot and keeps it only if it
/// falls within the accepted window around the slot center.
///
/// The window is `window_fraction · symbol_period` wide, centered on the
/// slot; at most one event per (symbol, detector) survives — the earliest.
pub fn temporal_filter(
    events: &[DetectionEvent],
    symbol_period_ps: f64,
    window_fraction: f64,
) -> Vec<(u64, DetectionEvent)> {
    let half_window = 0.5 * window_fraction * symbol_period_ps;
    let mut kept = Vec::new();
    let mut last_slot: [Option<u64>; 4] = [None; 4];
    for &ev in events {
        let t = ev.timestamp_ps as f64;
        let slot = (t / symbol_period_ps).round().max(0.0) as u64;
        let center = slot as f64 * symbol_period_ps;
        if (t - center).abs() > half_window {
            continue;
        }
        let det = ev.detector_id as usize;
        if last_slot[det] == Some(slot) {
            continue; // a click already claimed this slot on this detector
        }
        last_slot[det] = Some(slot);
        kept.push((slot, ev));
    }
    kept
}

/// Collapses filtered events to one measurement per symbol and decodes the
/// detector id to (basis, bit).
///
/// When several detectors fire inside one symbol window — multi-photon
/// pulses, or a dark count next to a signal click — the earliest click wins;
/// exact timestamp ties go to the lower detector id, which is how a
/// threshold discriminator bank resolves them.
pub fn resolve_symbols(filtered: &[(u64, DetectionEvent)]) -> Vec<Measurement> {
    let mut out: Vec<Measurement> = Vec::with_capacity(filtered.len());
    let mut current: Option<(u64, DetectionEvent)> = None;
    for &(slot, ev) in filtered {
        match current {
            Some((s, best)) if s == slot => {
                if (ev.timestamp_ps, ev.detector_id) < (best.timestamp_ps, best.detector_id) {
                    current = Some((slot, ev));
                }
            }
            Some((s, best)) => {
                debug_assert!(s < slot, "temporal filter output must be slot-ordered");
                out.push(to_measurement(s, best));
                current = Some((slot, ev));
            }
            None => current = Some((slot, ev)),
        }
    }
    if let Some((s, best)) = current {
        out.push(to_measurement(s, best));
    }
    out
}

fn to_measurement(slot: u64, ev: DetectionEvent) -> Measurement {
    let state = ev.state();
    Measurement {
        symbol_index: slot,
        basis: state.basis(),
        bit: state.bit(),
    }
}

/// Result of the frame-offset search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSyncResult {
    /// Cyclic offset of the reference pattern relative to Bob's indices.
    pub offset: usize,
    /// Bit agreement of basis-matched events at that offset.
    pub agreement: f64,
}

/// Aligns Bob's symbol indices with the transmitted PRBS pattern.
///
/// Evaluates the bit agreement of basis-matched events against the reference
/// pattern at every cyclic offset in `[0, frame_len)` and picks the maximum
/// (smallest offset on ties). Lock is declared iff the best agreement reaches
/// [`SYNC_LOCK_THRESHOLD`]; below it a [`Error::SyncFailure`] carrying the
/// best candidate is returned.
///
/// The default frame length used by the harness is the full symbol-sequence
/// period of the PRBS (32767 symbols — two bits per symbol with an odd bit
/// period make the symbol period equal the bit period). Reliable lock wants
/// on the order of a thousand basis-matched events.
pub fn frame_sync(
    measured: &[Measurement],
    reference_seed: u64,
    frame_len: usize,
) -> Result<FrameSyncResult> {
    if frame_len == 0 {
        return Err(Error::param("frame_len", "must be >= 1"));
    }
    if measured.is_empty() {
        return Err(Error::SyncFailure {
            offset: 0,
            agreement: 0.0,
        });
    }
    let reference = prbs_symbols(reference_seed, frame_len)?;
    let ref_basis: Vec<u8> = reference.iter().map(|s| s.basis as u8).collect();
    let ref_bit: Vec<u8> = reference.iter().map(|s| s.bit as u8).collect();

    let sample: Vec<(usize, u8, u8)> = measured
        .iter()
        .take(SYNC_EVENT_CAP)
        .map(|m| {
            (
                (m.symbol_index % frame_len as u64) as usize,
                m.basis as u8,
                m.bit as u8,
            )
        })
        .collect();

    let mut best_offset = 0usize;
    let mut best_agreement = -1.0f64;
    for offset in 0..frame_len {
        let mut compared = 0u32;
        let mut matched = 0u32;
        for &(idx, basis, bit) in &sample {
            let mut j = idx + offset;
            if j >= frame_len {
                j -= frame_len;
            }
            if ref_basis[j] == basis {
                compared += 1;
                matched += (ref_bit[j] == bit) as u32;
            }
        }
        if compared == 0 {
            continue;
        }
        let agreement = matched as f64 / compared as f64;
        if agreement > best_agreement {
            best_agreement = agreement;
            best_offset = offset;
        }
    }
    if best_agreement >= SYNC_LOCK_THRESHOLD {
        Ok(FrameSyncResult {
            offset: best_offset,
            agreement: best_agreement,
        })
    } else {
        Err(Error::SyncFailure {
            offset: best_offset,
            agreement: best_agreement.max(0.0),
        })
    }
}

/// Basis-sifted key material.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SiftedKey {
    /// Bob's bit values.
    pub bits: Vec<bool>,
    /// Symbol slot of each kept bit, strictly increasing.
    pub symbol_indices: Vec<u64>,
    /// Measurement basis of each kept bit.
    pub bases: Vec<Basis>,
}

impl SiftedKey {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// Keeps exactly the measurements taken in Alice's preparation basis.
///
/// `alice` is the transmitted pattern; indices address it cyclically, so one
/// pattern period describes arbitrarily long runs.
pub fn sift(alice: &[Bb84Symbol], measurements: &[Measurement]) -> SiftedKey {
    assert!(!alice.is_empty(), "alice pattern must be non-empty");
    let n = alice.len() as u64;
    let mut key = SiftedKey::default();
    for m in measurements {
        let sent = alice[(m.symbol_index % n) as usize];
        if sent.basis == m.basis {
            key.bits.push(m.bit);
            key.symbol_indices.push(m.symbol_index);
            key.bases.push(m.basis);
        }
    }
    debug_assert!(key.symbol_indices.windows(2).all(|w| w[0] < w[1]));
    key
}

/// Per-basis and aggregate QBER with raw-rate and per-block statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct QberReport {
    /// Errors / sifted bits over the whole run.
    pub qber_total: f64,
    /// QBER restricted to H/V-basis bits (absent if none were kept).
    pub qber_hv: Option<f64>,
    /// QBER restricted to D/A-basis bits.
    pub qber_da: Option<f64>,
    /// Sifted bits per second of observation.
    pub raw_rate_bps: f64,
    pub n_sifted: u64,
    /// Mean of per-block QBER over consecutive blocks.
    pub block_mean: f64,
    /// 3 × sample standard deviation of per-block QBER.
    pub block_3sigma: f64,
}

/// One block of the per-block QBER series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockStat {
    /// Block start time, seconds from run start.
    pub t_start_s: f64,
    pub n_bits: u64,
    pub n_errors: u64,
}

impl BlockStat {
    pub fn qber(&self) -> f64 {
        self.n_errors as f64 / self.n_bits as f64
    }
}

/// Splits the sifted key into consecutive `block_size_s` blocks (optionally
/// restricted to one basis) and counts errors against the transmitted
/// pattern.
///
/// Only complete blocks enter the series: bits falling into a fractional
/// block at the end of `duration_s` are dropped, since a near-empty sliver
/// would contribute a meaninglessly noisy QBER sample. Blocks without any
/// bits are dropped too.
pub fn block_series(
    key: &SiftedKey,
    alice: &[Bb84Symbol],
    symbol_rate_hz: f64,
    duration_s: f64,
    block_size_s: f64,
    basis_filter: Option<Basis>,
) -> Vec<BlockStat> {
    assert!(!alice.is_empty(), "alice pattern must be non-empty");
    assert!(block_size_s > 0.0 && symbol_rate_hz > 0.0);
    let n = alice.len() as u64;
    let complete_blocks = (duration_s / block_size_s + 1e-9).floor() as u64;
    let mut blocks: Vec<BlockStat> = Vec::new();
    let mut current: Option<(u64, BlockStat)> = None;
    for i in 0..key.len() {
        if let Some(basis) = basis_filter {
            if key.bases[i] != basis {
                continue;
            }
        }
        let t = key.symbol_indices[i] as f64 / symbol_rate_hz;
        let block_idx = (t / block_size_s).floor() as u64;
        if block_idx >= complete_blocks {
            continue;
        }
        let error = key.bits[i] != alice[(key.symbol_indices[i] % n) as usize].bit;
        match &mut current {
            Some((idx, stat)) if *idx == block_idx => {
                stat.n_bits += 1;
                stat.n_errors += u64::from(error);
            }
            _ => {
                if let Some((_, stat)) = current.take() {
                    blocks.push(stat);
                }
                current = Some((
                    block_idx,
                    BlockStat {
                        t_start_s: block_idx as f64 * block_size_s,
                        n_bits: 1,
                        n_errors: u64::from(error),
                    },
                ));
            }
        }
    }
    if let Some((_, stat)) = current {
        blocks.push(stat);
    }
    blocks
}

/// Mean and 3σ (sample standard deviation) of per-block QBER.
pub fn block_summary(blocks: &[BlockStat]) -> (f64, f64) {
    if blocks.is_empty() {
        return (0.0, 0.0);
    }
    let qs: Vec<f64> = blocks.iter().map(BlockStat::qber).collect();
    let mean = qs.iter().sum::<f64>() / qs.len() as f64;
    if qs.len() < 2 {
        return (mean, 0.0);
    }
    let var = qs.iter().map(|q| (q - mean).powi(2)).sum::<f64>() / (qs.len() - 1) as f64;
    (mean, 3.0 * var.sqrt())
}

/// Full QBER evaluation of a sifted key against the transmitted pattern.
pub fn qber_report(
    key: &SiftedKey,
    alice: &[Bb84Symbol],
    symbol_rate_hz: f64,
    duration_s: f64,
    block_size_s: f64,
) -> Result<QberReport> {
    if duration_s <= 0.0 {
        return Err(Error::param("duration_s", "must be > 0"));
    }
    if block_size_s <= 0.0 {
        return Err(Error::param("block_size_s", "must be > 0"));
    }
    if key.is_empty() {
        return Err(Error::UndefinedQber);
    }
    let n = alice.len() as u64;
    let mut errors = 0u64;
    let mut per_basis = [(0u64, 0u64); 2]; // (bits, errors) for HV, DA
    for i in 0..key.len() {
        let sent = alice[(key.symbol_indices[i] % n) as usize];
        let err = key.bits[i] != sent.bit;
        errors += u64::from(err);
        let slot = match key.bases[i] {
            Basis::Hv => &mut per_basis[0],
            Basis::Da => &mut per_basis[1],
        };
        slot.0 += 1;
        slot.1 += u64::from(err);
    }
    let n_sifted = key.len() as u64;
    let per = |(bits, errs): (u64, u64)| (bits > 0).then(|| errs as f64 / bits as f64);
    let blocks = block_series(key, alice, symbol_rate_hz, duration_s, block_size_s, None);
    let (block_mean, block_3sigma) = block_summary(&blocks);
    Ok(QberReport {
        qber_total: errors as f64 / n_sifted as f64,
        qber_hv: per(per_basis[0]),
        qber_da: per(per_basis[1]),
        raw_rate_bps: n_sifted as f64 / duration_s,
        n_sifted,
        block_mean,
        block_3sigma,
    })
}

/// Binary entropy h₂(x) in bits; zero at the endpoints.
pub fn binary_entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

/// Asymptotic BB84 secret fraction: max(0, 1 − 2·h₂(q)).
///
/// Inputs are clamped to [0, 1]; the fraction reaches zero near q ≈ 11%.
pub fn secret_fraction(q: f64) -> f64 {
    let q = q.clamp(0.0, 1.0);
    (1.0 - 2.0 * binary_entropy(q)).max(0.0)
}
