//! PRBS-15 pattern generation for the transmitter.
//!
//! The transmitter is driven by a maximal-length LFSR with characteristic
//! polynomial x¹⁵ + x¹⁴ + 1 (period 2¹⁵ − 1 = 32767 bits). Symbols consume
//! two bits each: the first selects the basis (0 → H/V, 1 → D/A), the second
//! the bit value. Because the bit period is odd, the symbol sequence also
//! repeats with period 32767.

use crate::polarization::{Basis, Bb84Symbol};
use crate::{Error, Result};

/// Period of the PRBS-15 bit stream.
pub const PRBS15_BIT_PERIOD: usize = (1 << 15) - 1;

/// Period of the derived symbol stream (two bits per symbol, odd bit period).
pub const PRBS15_SYMBOL_PERIOD: usize = PRBS15_BIT_PERIOD;

/// Fibonacci LFSR for x¹⁵ + x¹⁴ + 1.
#[derive(Debug, Clone)]
pub struct Prbs15 {
    state: u16,
}

impl Prbs15 {
    /// Seeds the register with the low 15 bits of `seed`.
    ///
    /// The all-zero register is the LFSR lock-up state and is rejected.
    pub fn new(seed: u64) -> Result<Self> {
        let state = (seed & 0x7fff) as u16;
        if state == 0 {
            return Err(Error::PrbsSeed(seed));
        }
        Ok(Prbs15 { state })
    }

    /// Produces the next bit of the sequence.
    pub fn next_bit(&mut self) -> bool {
        let fb = ((self.state >> 14) ^ (self.state >> 13)) & 1;
        self.state = ((self.state << 1) | fb) & 0x7fff;
        fb == 1
    }

    /// Produces the next symbol (two bits: basis, then value).
    pub fn next_symbol(&mut self) -> Bb84Symbol {
        let basis = if self.next_bit() {
            Basis::Da
        } else {
            Basis::Hv
        };
        let bit = self.next_bit();
        Bb84Symbol::new(basis, bit)
    }
}

/// First `n` symbols of the PRBS-15 symbol stream for the given seed.
///
/// Deterministic: equal seeds give equal sequences. Indexing past `n` wraps
/// with period [`PRBS15_SYMBOL_PERIOD`], so one period is a complete
/// description of the transmitted pattern.
pub fn prbs_symbols(seed: u64, n: usize) -> Result<Vec<Bb84Symbol>> {
    if n == 0 {
        return Err(Error::param("n", "must be >= 1"));
    }
    let mut lfsr = Prbs15::new(seed)?;
    Ok((0..n).map(|_| lfsr.next_symbol()).collect())
}
