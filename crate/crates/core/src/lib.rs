//! Photon-level simulation and classical post-processing for a
//! polarization-encoded BB84 link driven by incoherent light sources
//! (broadband LED / spectrally sliced ASE).
//!
//! The crate is organized around the stations of such a link:
//!
//! * [`polarization`] — the four BB84 states and analyzer projection
//!   probabilities (Malus' law).
//! * [`source`] — light-source models: L-I curves, optical power to mean
//!   photon number per pulse, attenuation planning.
//! * [`prbs`] — the PRBS-15 pattern generator that drives the transmitter.
//! * [`link`] — pulse-by-pulse Monte Carlo simulation of the
//!   Alice→channel→Bob chain plus a closed-form rate/QBER model used as an
//!   oracle and for fast sweeps.
//! * [`timetag`] — the detection-event record and its CSV wire format, shared
//!   by simulated and recorded data.
//! * [`pipeline`] — receiver-side processing: temporal filtering, frame
//!   synchronization, basis sifting, QBER estimation, secret fraction.
//! * [`calibrate`] — fits the effective link parameters to measured anchor
//!   points (raw key rate, QBER, loss threshold).
//! * [`presets`], [`config`], [`experiment`] — the experiment harness:
//!   built-in source configurations, the `key = value` config format, loss
//!   sweeps, time-evolution runs and split-ratio planning.

pub mod calibrate;
pub mod config;
mod error;
pub mod experiment;
pub mod link;
pub mod pipeline;
pub mod polarization;
pub mod prbs;
pub mod presets;
pub mod source;
pub mod timetag;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
