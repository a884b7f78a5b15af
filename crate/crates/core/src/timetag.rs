//! Detection-event records and their CSV wire format.
//!
//! Simulated and recorded data share one path through the pipeline, so the
//! time-tag file format is defined once here: UTF-8 CSV with the header
//! `detector_id,timestamp_ps`, one event per line, timestamps as non-negative
//! integers in picoseconds, rows sorted by timestamp.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::polarization::{Basis, Bb84State};
use crate::{Error, Result};

/// Detector output channels, in fixed order H, V, D, A.
pub const DETECTOR_COUNT: usize = 4;

/// One registered click: which detector fired and when.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct DetectionEvent {
    pub timestamp_ps: u64,
    pub detector_id: u8,
}

impl DetectionEvent {
    pub fn new(detector_id: u8, timestamp_ps: u64) -> Self {
        DetectionEvent {
            timestamp_ps,
            detector_id,
        }
    }

    /// Polarization state this detector output monitors.
    pub fn state(self) -> Bb84State {
        detector_state(self.detector_id)
    }
}

/// Fixed detector-id mapping: 0 → H, 1 → V, 2 → D, 3 → A.
pub fn detector_state(detector_id: u8) -> Bb84State {
    match detector_id {
        0 => Bb84State::H,
        1 => Bb84State::V,
        2 => Bb84State::D,
        3 => Bb84State::A,
        other => panic!("detector id {other} out of range 0..4"),
    }
}

/// Detector id monitoring the given state.
pub fn state_detector(state: Bb84State) -> u8 {
    match state {
        Bb84State::H => 0,
        Bb84State::V => 1,
        Bb84State::D => 2,
        Bb84State::A => 3,
    }
}

/// The two detector ids forming one basis's analyzer pair (bit 0 first).
pub fn basis_detectors(basis: Basis) -> [u8; 2] {
    match basis {
        Basis::Hv => [0, 1],
        Basis::Da => [2, 3],
    }
}

const HEADER: &str = "detector_id,timestamp_ps";

/// Writes events in the time-tag CSV format.
pub fn write_time_tags<W: Write>(mut w: W, events: &[DetectionEvent]) -> std::io::Result<()> {
    writeln!(w, "{HEADER}")?;
    for ev in events {
        writeln!(w, "{},{}", ev.detector_id, ev.timestamp_ps)?;
    }
    Ok(())
}

/// Writes events to a file at `path`, creating or truncating it.
pub fn write_time_tag_file(path: &Path, events: &[DetectionEvent]) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_time_tags(std::io::BufWriter::new(f), events).map_err(|e| Error::io(path, e))
}

/// Parses the time-tag CSV format.
///
/// Rejects a missing or wrong header, malformed fields, detector ids outside
/// the configured set and unsorted rows; every error carries the offending
/// line number. `origin` is used in error messages only.
pub fn read_time_tags<R: Read>(reader: R, origin: &str) -> Result<Vec<DetectionEvent>> {
    let mut events = Vec::new();
    let mut last_ts: Option<u64> = None;
    let mut saw_header = false;
    let fail = |line: usize, reason: String| Error::TimeTagFormat {
        path: origin.to_string(),
        line,
        reason,
    };
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| fail(lineno, e.to_string()))?;
        let line = line.trim_end_matches('\r');
        if idx == 0 {
            if line != HEADER {
                return Err(fail(
                    lineno,
                    format!("expected header `{HEADER}`, got `{line}`"),
                ));
            }
            saw_header = true;
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let (det_s, ts_s) = line
            .split_once(',')
            .ok_or_else(|| fail(lineno, "expected two comma-separated fields".into()))?;
        let detector_id: u8 = det_s
            .trim()
            .parse()
            .map_err(|_| fail(lineno, format!("bad detector id `{det_s}`")))?;
        if detector_id as usize >= DETECTOR_COUNT {
            return Err(fail(
                lineno,
                format!("detector id {detector_id} out of range 0..4"),
            ));
        }
        let timestamp_ps: u64 = ts_s.trim().parse().map_err(|_| {
            fail(
                lineno,
                format!("bad timestamp `{ts_s}` (need a non-negative integer)"),
            )
        })?;
        if let Some(prev) = last_ts {
            if timestamp_ps < prev {
                return Err(fail(
                    lineno,
                    format!("timestamps not sorted: {timestamp_ps} after {prev}"),
                ));
            }
        }
        last_ts = Some(timestamp_ps);
        events.push(DetectionEvent::new(detector_id, timestamp_ps));
    }
    if !saw_header {
        return Err(fail(1, format!("empty stream; expected header `{HEADER}`")));
    }
    Ok(events)
}

/// Reads a time-tag CSV file.
pub fn read_time_tag_file(path: &Path) -> Result<Vec<DetectionEvent>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_time_tags(f, &path.display().to_string())
}
