//! Pulse-by-pulse Monte Carlo simulation of the link.
//!
//! Per pulse the detected photon number is Poisson(μ_eff·η_bob) — the
//! Poisson thinning of per-photon survival — so pulses with no detected
//! photon are skipped in bulk by sampling the geometric gap between clicking
//! pulses. This makes the cost proportional to the number of detection
//! events, not pulses, without changing the sampled distribution.
//!
//! The pulse stream is split into fixed-size chunks, each driven by its own
//! RNG stream derived from `(rng_seed, run, chunk index)`. Chunks are
//! independent, so they may run on any number of threads; the merged, sorted
//! candidate list is identical regardless of scheduling. Dead time couples
//! neighboring events and is applied in a single deterministic pass over the
//! merged list.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;

use super::{LinkParams, MeasurementMode};
use crate::polarization::{projection_probability, Basis, Bb84Symbol};
use crate::timetag::{basis_detectors, DetectionEvent};
use crate::{Error, Result};

/// Pulses per RNG chunk. Fixed so that results do not depend on thread
/// scheduling.
const CHUNK_PULSES: u64 = 1 << 20;

/// Simulates one full run and returns the registered events, sorted by
/// timestamp.
///
/// `symbols` is the transmitted pattern; pulse `i` carries
/// `symbols[i % symbols.len()]`, i.e. the transmitter replays the pattern
/// cyclically up to `params.pulse_count` pulses. In consecutive mode the
/// pattern is measured twice — first with the H/V pair live, then, starting
/// right after, with the D/A pair — mirroring a two-SPAD receiver.
pub fn simulate_pulses(params: &LinkParams, symbols: &[Bb84Symbol]) -> Result<Vec<DetectionEvent>> {
    params.validate()?;
    if symbols.is_empty() {
        return Err(Error::EmptySymbols);
    }
    let candidates = match params.measurement_mode {
        MeasurementMode::Consecutive => {
            let mut c = pass_candidates(params, symbols, PassKind::Pair(Basis::Hv), 0, 0);
            c.extend(pass_candidates(
                params,
                symbols,
                PassKind::Pair(Basis::Da),
                1,
                params.pulse_count,
            ));
            c
        }
        MeasurementMode::Simultaneous => pass_candidates(params, symbols, PassKind::AllFour, 0, 0),
    };
    Ok(apply_dead_time(candidates, params.dead_time_s))
}

/// Simulates a single pass with only one basis's detector pair live, on a
/// local timeline starting at zero. Used by the harness for per-basis traces;
/// with equal parameters the H/V pass is bit-identical to the first half of a
/// consecutive-mode run.
pub(crate) fn simulate_single_basis_run(
    params: &LinkParams,
    symbols: &[Bb84Symbol],
    basis: Basis,
) -> Result<Vec<DetectionEvent>> {
    params.validate()?;
    if symbols.is_empty() {
        return Err(Error::EmptySymbols);
    }
    let run_idx = match basis {
        Basis::Hv => 0,
        Basis::Da => 1,
    };
    let candidates = pass_candidates(params, symbols, PassKind::Pair(basis), run_idx, 0);
    Ok(apply_dead_time(candidates, params.dead_time_s))
}

#[derive(Clone, Copy)]
enum PassKind {
    Pair(Basis),
    AllFour,
}

/// Candidate click before dead-time arbitration.
type Candidate = (i64, u8);

fn stream_id(run_idx: u64, chunk_idx: u64) -> u64 {
    (run_idx << 48) | chunk_idx
}

fn pass_candidates(
    params: &LinkParams,
    symbols: &[Bb84Symbol],
    kind: PassKind,
    run_idx: u64,
    slot_offset: u64,
) -> Vec<Candidate> {
    let n = params.pulse_count;
    let chunk_count = n.div_ceil(CHUNK_PULSES);
    (0..chunk_count)
        .into_par_iter()
        .map(|chunk_idx| {
            let start = chunk_idx * CHUNK_PULSES;
            let end = (start + CHUNK_PULSES).min(n);
            chunk_candidates(
                params,
                symbols,
                kind,
                run_idx,
                slot_offset,
                start,
                end,
                chunk_idx,
            )
        })
        .reduce(Vec::new, |mut a, mut b| {
            a.append(&mut b);
            a
        })
}

#[allow(clippy::too_many_arguments)]
fn chunk_candidates(
    params: &LinkParams,
    symbols: &[Bb84Symbol],
    kind: PassKind,
    run_idx: u64,
    slot_offset: u64,
    start: u64,
    end: u64,
    chunk_idx: u64,
) -> Vec<Candidate> {
    let mut rng = ChaCha12Rng::seed_from_u64(params.rng_seed);
    rng.set_stream(stream_id(run_idx, chunk_idx));

    let period_ps = params.symbol_period_ps();
    let sigma_ps = params.jitter_sigma_s * 1e12;
    let jitter = (sigma_ps > 0.0).then(|| Normal::new(0.0, sigma_ps).expect("valid sigma"));
    let m = params.mu_detected();
    let p_click = -(-m).exp_m1();

    let mut out = Vec::new();

    // Signal clicks: jump between pulses that detect at least one photon.
    if p_click > 0.0 {
        let log_q = (-m).exp_m1().ln_1p(); // ln(1 - p_click) = -m, kept in log form for tiny p
        let mut pos = start;
        loop {
            let skip = sample_geometric(&mut rng, log_q);
            pos = pos.saturating_add(skip);
            if pos >= end {
                break;
            }
            let photons = sample_truncated_poisson(&mut rng, m);
            let symbol = symbols[(pos % symbols.len() as u64) as usize];
            for _ in 0..photons {
                let detector = route_photon(&mut rng, symbol, kind, params.e_opt);
                let center = (slot_offset + pos) as f64 * period_ps;
                let t = match &jitter {
                    Some(dist) => center + dist.sample(&mut rng),
                    None => center,
                };
                out.push(((t.round() as i64).max(0), detector));
            }
            pos += 1;
            if pos >= end {
                break;
            }
        }
    }

    // Dark counts: homogeneous Poisson process on each live detector.
    let span_s = (end - start) as f64 / params.symbol_rate_hz;
    let t0_ps = (slot_offset + start) as f64 * period_ps;
    let span_ps = (end - start) as f64 * period_ps;
    for detector in live_detectors(kind) {
        let rate = params.dark_rates_cps[detector as usize];
        if rate <= 0.0 {
            continue;
        }
        let count = Poisson::new(rate * span_s)
            .expect("valid mean")
            .sample(&mut rng) as u64;
        for _ in 0..count {
            let t = t0_ps + rng.random::<f64>() * span_ps;
            out.push(((t.round() as i64).max(0), detector));
        }
    }
    out
}

fn live_detectors(kind: PassKind) -> Vec<u8> {
    match kind {
        PassKind::Pair(basis) => basis_detectors(basis).to_vec(),
        PassKind::AllFour => vec![0, 1, 2, 3],
    }
}

/// Number of non-clicking pulses before the next clicking one.
/// `log_q = ln(1 − p_click)`.
fn sample_geometric(rng: &mut ChaCha12Rng, log_q: f64) -> u64 {
    if log_q == f64::NEG_INFINITY {
        return 0; // every pulse clicks
    }
    let u: f64 = rng.random();
    let skip = ((1.0 - u).ln() / log_q).floor();
    if skip >= u64::MAX as f64 {
        u64::MAX
    } else {
        skip as u64
    }
}

/// Detected photon count of a clicking pulse: Poisson(m) conditioned on ≥ 1.
fn sample_truncated_poisson(rng: &mut ChaCha12Rng, m: f64) -> u64 {
    let p_ge1 = -(-m).exp_m1();
    let target: f64 = rng.random::<f64>() * p_ge1;
    let mut k = 1u64;
    let mut term = m * (-m).exp(); // P(k = 1)
    let mut cum = term;
    while target > cum && k < 1000 {
        k += 1;
        term *= m / k as f64;
        cum += term;
    }
    k
}

/// Routes one detected photon to a detector output.
fn route_photon(rng: &mut ChaCha12Rng, symbol: Bb84Symbol, kind: PassKind, e_opt: f64) -> u8 {
    let basis = match kind {
        PassKind::Pair(b) => b,
        PassKind::AllFour => {
            if rng.random::<f64>() < 0.5 {
                Basis::Hv
            } else {
                Basis::Da
            }
        }
    };
    let pair = basis_detectors(basis);
    let p_first = projection_probability(symbol.state().angle(), basis.analyzer_angle());
    let mut idx = usize::from(rng.random::<f64>() >= p_first);
    // Intrinsic transmitter/analyzer imperfection: flip within the pair.
    if rng.random::<f64>() < e_opt {
        idx ^= 1;
    }
    pair[idx]
}

/// Sorts candidates and drops clicks landing in a detector's dead window.
/// Non-paralyzable: a blocked click does not extend the blindness.
fn apply_dead_time(mut candidates: Vec<Candidate>, dead_time_s: f64) -> Vec<DetectionEvent> {
    candidates.sort_unstable();
    let dead_ps = (dead_time_s * 1e12).round() as i64;
    let mut last_kept = [i64::MIN; 4];
    let mut events = Vec::with_capacity(candidates.len());
    for &(t, det) in candidates.iter() {
        let last = last_kept[det as usize];
        if last == i64::MIN || t - last >= dead_ps {
            last_kept[det as usize] = t;
            events.push(DetectionEvent::new(det, t as u64));
        }
    }
    events
}
