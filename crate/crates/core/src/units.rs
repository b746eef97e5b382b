//! Physical constants and the unit convention shared by every module.
//!
//! Everything crossing a module boundary is SI, with frequencies in angular
//! units (rad/s). Ordinary frequencies (Hz) only appear at the I/O layer and
//! in functions whose name says so (`free_spectral_range`, `extract_fwhm`).
//!
//! Linewidth-type rates (`gamma1`, `gamma2`, `gamma`, `gamma_m`, `gamma_opt`)
//! in the OMIT response are amplitude decay rates, i.e. half widths at half
//! maximum in rad/s, so a full linewidth in Hz is `gamma / PI`.

use std::f64::consts::TAU;

/// Speed of light in vacuum, m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Reduced Planck constant, J·s (CODATA 2018).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K (exact).
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Molar gas constant, J/(mol·K) (CODATA 2018).
pub const GAS_CONSTANT: f64 = 8.314_462_618;

/// Pascals per millibar.
pub const PA_PER_MBAR: f64 = 100.0;

/// Bundle of the constants, for callers that prefer passing them around
/// explicitly (e.g. to print them alongside results).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub c: f64,
    pub hbar: f64,
    pub k_b: f64,
    pub r_gas: f64,
}

impl PhysicalConstants {
    pub const CODATA: Self = Self {
        c: SPEED_OF_LIGHT,
        hbar: HBAR,
        k_b: BOLTZMANN,
        r_gas: GAS_CONSTANT,
    };
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::CODATA
    }
}

/// Ordinary frequency (Hz) to angular frequency (rad/s).
#[inline]
pub fn hz_to_angular(f: f64) -> f64 {
    TAU * f
}

/// Angular frequency (rad/s) to ordinary frequency (Hz).
#[inline]
pub fn angular_to_hz(omega: f64) -> f64 {
    omega / TAU
}

#[inline]
pub fn mbar_to_pa(p: f64) -> f64 {
    p * PA_PER_MBAR
}

#[inline]
pub fn pa_to_mbar(p: f64) -> f64 {
    p / PA_PER_MBAR
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_and_unit_frequencies() {
        assert_eq!(hz_to_angular(0.0), 0.0);
        assert_eq!(hz_to_angular(1.0), std::f64::consts::TAU);
    }

    #[test]
    fn mechanical_resonance_in_angular_units() {
        let w = hz_to_angular(402.7e3);
        assert!((w - 2.0 * std::f64::consts::PI * 402.7e3).abs() < 1e-9);
        assert!((w / 2.5302e6 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn round_trip_units() {
        assert!((angular_to_hz(hz_to_angular(123.4)) - 123.4).abs() < 1e-12);
        assert_eq!(mbar_to_pa(1e-2), 1.0);
        assert_eq!(pa_to_mbar(100.0), 1.0);
    }

    proptest! {
        #[test]
        fn hz_to_angular_is_additive(a in -1e12f64..1e12, b in -1e12f64..1e12) {
            let lhs = hz_to_angular(a + b);
            let rhs = hz_to_angular(a) + hz_to_angular(b);
            // Two roundings on each side; allow a couple of ulps of the result.
            let tol = 4.0 * f64::EPSILON * (hz_to_angular(a).abs() + hz_to_angular(b).abs()).max(f64::MIN_POSITIVE);
            prop_assert!((lhs - rhs).abs() <= tol);
        }
    }
}
