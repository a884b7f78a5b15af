//! Polarization-state algebra for the four BB84 states.
//!
//! All states handled here are linearly polarized, so a single angle from the
//! horizontal axis is a complete description. The analyzer is an ideal linear
//! polarizer: projection probabilities follow Malus' law.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use crate::{Error, Result};

/// One of the two conjugate measurement bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Basis {
    /// Horizontal/vertical (rectilinear) basis.
    Hv,
    /// Diagonal/anti-diagonal basis, rotated 45° from H/V.
    Da,
}

impl Basis {
    pub const ALL: [Basis; 2] = [Basis::Hv, Basis::Da];

    /// Analyzer angle of the basis's bit-0 detector (H or D).
    pub fn analyzer_angle(self) -> PolarizationAngle {
        match self {
            Basis::Hv => PolarizationAngle::new(0.0),
            Basis::Da => PolarizationAngle::new(FRAC_PI_4),
        }
    }
}

impl std::fmt::Display for Basis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Basis::Hv => "HV",
            Basis::Da => "DA",
        })
    }
}

/// The four polarization states used by the encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Bb84State {
    /// Horizontal — bit 0 in the H/V basis.
    H,
    /// Vertical — bit 1 in the H/V basis.
    V,
    /// Diagonal (+45°) — bit 0 in the D/A basis.
    D,
    /// Anti-diagonal (135°) — bit 1 in the D/A basis.
    A,
}

impl Bb84State {
    pub const ALL: [Bb84State; 4] = [Bb84State::H, Bb84State::V, Bb84State::D, Bb84State::A];

    /// Basis this state belongs to.
    pub fn basis(self) -> Basis {
        match self {
            Bb84State::H | Bb84State::V => Basis::Hv,
            Bb84State::D | Bb84State::A => Basis::Da,
        }
    }

    /// Bit value this state encodes.
    pub fn bit(self) -> bool {
        matches!(self, Bb84State::V | Bb84State::A)
    }

    /// Inverse of [`state_of`].
    pub fn decode(self) -> (Basis, bool) {
        (self.basis(), self.bit())
    }

    /// Angle of linear polarization from horizontal.
    pub fn angle(self) -> PolarizationAngle {
        match self {
            Bb84State::H => PolarizationAngle::new(0.0),
            Bb84State::V => PolarizationAngle::new(FRAC_PI_2),
            Bb84State::D => PolarizationAngle::new(FRAC_PI_4),
            Bb84State::A => PolarizationAngle::new(3.0 * FRAC_PI_4),
        }
    }
}

impl std::fmt::Display for Bb84State {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Bb84State::H => "H",
            Bb84State::V => "V",
            Bb84State::D => "D",
            Bb84State::A => "A",
        })
    }
}

/// State emitted for a (basis, bit) pair: H↔(HV,0), V↔(HV,1), D↔(DA,0), A↔(DA,1).
pub fn state_of(basis: Basis, bit: bool) -> Bb84State {
    match (basis, bit) {
        (Basis::Hv, false) => Bb84State::H,
        (Basis::Hv, true) => Bb84State::V,
        (Basis::Da, false) => Bb84State::D,
        (Basis::Da, true) => Bb84State::A,
    }
}

/// One transmitted pulse: preparation basis and bit value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bb84Symbol {
    pub basis: Basis,
    pub bit: bool,
}

impl Bb84Symbol {
    pub fn new(basis: Basis, bit: bool) -> Self {
        Bb84Symbol { basis, bit }
    }

    /// Polarization state the encoder prepares for this symbol.
    pub fn state(self) -> Bb84State {
        state_of(self.basis, self.bit)
    }
}

/// Angle of linear polarization from horizontal, reduced modulo π.
///
/// Linear polarization is unoriented, so θ and θ+π describe the same state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationAngle {
    radians: f64,
}

impl PolarizationAngle {
    /// Wraps an arbitrary finite angle into [0, π).
    pub fn new(radians: f64) -> Self {
        let mut r = radians % PI;
        if r < 0.0 {
            r += PI;
        }
        PolarizationAngle { radians: r }
    }

    pub fn radians(self) -> f64 {
        self.radians
    }

    /// This angle rotated by `delta` radians (e.g. residual channel
    /// misalignment after manual polarization control).
    pub fn rotated(self, delta: f64) -> Self {
        PolarizationAngle::new(self.radians + delta)
    }
}

/// Malus' law: probability that light polarized at `state_angle` passes an
/// ideal analyzer oriented at `analyzer_angle`.
///
/// The two detectors of one basis sit at analyzer angles 90° apart, so their
/// probabilities sum to one for any input state.
pub fn projection_probability(
    state_angle: PolarizationAngle,
    analyzer_angle: PolarizationAngle,
) -> f64 {
    let delta = state_angle.radians - analyzer_angle.radians;
    let c = delta.cos();
    c * c
}

/// Validates the intrinsic optical error probability of a source
/// configuration.
///
/// `e_opt` is the probability that a detected signal photon lands on the
/// wrong detector of the correct (matched) basis. Transmitter imperfections
/// (finite modulator extinction, combiner crosstalk) are collapsed into this
/// single depolarization-equivalent number, applied uniformly to all four
/// states.
pub fn effective_error_probability(e_opt: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&e_opt) || e_opt.is_nan() {
        return Err(Error::param("e_opt", format!("{e_opt} outside [0, 0.5]")));
    }
    Ok(e_opt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn state_of_matches_fixed_mapping() {
        assert_eq!(state_of(Basis::Hv, false), Bb84State::H);
        assert_eq!(state_of(Basis::Hv, true), Bb84State::V);
        assert_eq!(state_of(Basis::Da, false), Bb84State::D);
        assert_eq!(state_of(Basis::Da, true), Bb84State::A);
    }

    #[test]
    fn decode_inverts_state_of() {
        for basis in Basis::ALL {
            for bit in [false, true] {
                assert_eq!(state_of(basis, bit).decode(), (basis, bit));
            }
        }
    }

    #[test]
    fn four_states_have_distinct_angles() {
        for a in Bb84State::ALL {
            for b in Bb84State::ALL {
                if a != b {
                    assert_ne!(a.angle().radians(), b.angle().radians());
                }
            }
        }
    }

    #[test]
    fn aligned_analyzer_passes_everything() {
        let h = Bb84State::H.angle();
        assert_abs_diff_eq!(projection_probability(h, h), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn diagonal_on_horizontal_analyzer_is_half() {
        let p = projection_probability(Bb84State::D.angle(), Bb84State::H.angle());
        assert_abs_diff_eq!(p, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn small_misalignment_leaks_sin_squared() {
        // H rotated by 5° seen through a V analyzer: sin²(5°).
        // Oracle: 5° = 0.0872664626 rad, sin = 0.0871557427, squared
        // = 7.59612349389e-3 (evaluated with extended precision).
        let eps = 5.0_f64.to_radians();
        let p = projection_probability(Bb84State::H.angle().rotated(eps), Bb84State::V.angle());
        assert_abs_diff_eq!(p, 7.59612349389e-3, epsilon = 1e-12);
    }

    #[test]
    fn effective_error_probability_validates_range() {
        assert_eq!(effective_error_probability(0.0).unwrap(), 0.0);
        assert_eq!(effective_error_probability(0.042).unwrap(), 0.042);
        assert_eq!(effective_error_probability(0.0771).unwrap(), 0.0771);
        assert!(effective_error_probability(-0.01).is_err());
        assert!(effective_error_probability(0.51).is_err());
        assert!(effective_error_probability(f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn basis_detector_probabilities_sum_to_one(
            state in prop::sample::select(Bb84State::ALL.to_vec()),
            basis in prop::sample::select(Basis::ALL.to_vec()),
            misalign in -1.0f64..1.0,
        ) {
            let input = state.angle().rotated(misalign);
            let a0 = basis.analyzer_angle();
            let a1 = a0.rotated(std::f64::consts::FRAC_PI_2);
            let sum = projection_probability(input, a0) + projection_probability(input, a1);
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }

        #[test]
        fn projection_is_symmetric_and_pi_periodic(theta in -10.0f64..10.0, phi in -10.0f64..10.0) {
            let a = PolarizationAngle::new(theta);
            let b = PolarizationAngle::new(phi);
            let p = projection_probability(a, b);
            prop_assert!((p - projection_probability(b, a)).abs() < 1e-12);
            let shifted = PolarizationAngle::new(theta + std::f64::consts::PI);
            prop_assert!((p - projection_probability(shifted, b)).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&p));
        }

        #[test]
        fn matched_basis_is_deterministic_mismatched_is_even(
            basis in prop::sample::select(Basis::ALL.to_vec()),
            bit in any::<bool>(),
        ) {
            let state = state_of(basis, bit);
            // Matched basis, zero misalignment: correct detector fires with
            // probability one.
            let own = basis.analyzer_angle();
            let correct = if bit { own.rotated(std::f64::consts::FRAC_PI_2) } else { own };
            prop_assert!((projection_probability(state.angle(), correct) - 1.0).abs() < 1e-12);
            // The other basis sees exactly one half on each detector.
            let other = match basis { Basis::Hv => Basis::Da, Basis::Da => Basis::Hv };
            let p = projection_probability(state.angle(), other.analyzer_angle());
            prop_assert!((p - 0.5).abs() < 1e-12);
        }
    }
}
