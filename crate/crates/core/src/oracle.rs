//! Exact two-sideband solution of the linearized optomechanical equations.
//!
//! Per sideband frequency `Omega` the unknowns are the membrane displacement
//! `x(Omega)`, the upper cavity sideband `a(Omega)` and the lower sideband
//! `b = a^dagger(-Omega)`:
//!
//! ```text
//! chi x + hbar Gbar0 (a + b)         = 0
//! -Gbar0 x + (Omega - Delta + i gamma) a = i sqrt(2 gamma1)
//! -Gbar0 x - (Omega + Delta + i gamma) b = 0
//! chi = m (omega_m² - Omega² - 2 i gamma_m Omega)
//! ```
//!
//! with unit signal input and no thermal force. No resolved-sideband or
//! near-resonance approximation is made.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{OmitError, Result};
use crate::linalg::solve3_equilibrated;
use crate::omit::{transmissivity, ComplexResponse, OmitParams};
use crate::units::HBAR;

/// Largest accepted condition number of the per-frequency system.
pub const MAX_CONDITION: f64 = 1e12;

/// Oracle output on a frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResponse {
    /// `sqrt(2 gamma2) a(Omega)` for unit input, including the bare cavity line.
    pub raw: ComplexResponse,
    /// `t0 * raw / t_bare(Omega)`: the raw response divided by the empty
    /// cavity Lorentzian, on the same scale as the closed-form transmissivity.
    pub normalized: ComplexResponse,
    /// Largest condition number met on the grid.
    pub max_condition: f64,
}

/// Bare-cavity transmission `2 i sqrt(gamma1 gamma2) / (Omega - Delta + i gamma)`.
pub fn bare_cavity_transmission(p: &OmitParams, omega: f64) -> Complex64 {
    let num = Complex64::new(0.0, 2.0 * (p.gamma1() * p.gamma2()).sqrt());
    num / Complex64::new(omega - p.cavity_detuning(), p.gamma())
}

/// Mechanical susceptibility `m (omega_m² - Omega² - 2 i gamma_m Omega)`.
pub fn mechanical_susceptibility(p: &OmitParams, omega: f64) -> Complex64 {
    let wm = p.omega_m();
    p.m_eff() * Complex64::new(wm * wm - omega * omega, -2.0 * p.gamma_m() * omega)
}

/// Solve the exact system at one frequency; returns `(t_raw, condition)`.
pub fn exact_transmission(p: &OmitParams, omega: f64) -> Result<(Complex64, f64)> {
    let g = p.g_bar();
    let det = p.cavity_detuning();
    let gamma = p.gamma();
    let zero = Complex64::new(0.0, 0.0);
    let hg = Complex64::new(HBAR * g, 0.0);
    let a = [
        [mechanical_susceptibility(p, omega), hg, hg],
        [
            Complex64::new(-g, 0.0),
            Complex64::new(omega - det, gamma),
            zero,
        ],
        [
            Complex64::new(-g, 0.0),
            zero,
            Complex64::new(-omega - det, -gamma),
        ],
    ];
    let b = [zero, Complex64::new(0.0, (2.0 * p.gamma1()).sqrt()), zero];
    let singular = |condition| OmitError::SingularSystem { omega, condition };
    let solved = solve3_equilibrated(&a, &b).ok_or_else(|| singular(f64::INFINITY))?;
    if !(solved.condition <= MAX_CONDITION) {
        return Err(singular(solved.condition));
    }
    Ok(((2.0 * p.gamma2()).sqrt() * solved.x[1], solved.condition))
}

/// Run the oracle over `omegas` (rad/s).
pub fn exact_response_oracle(p: &OmitParams, omegas: &[f64]) -> Result<OracleResponse> {
    let solved: Vec<(Complex64, f64)> = omegas
        .par_iter()
        .map(|&w| exact_transmission(p, w))
        .collect::<Result<_>>()?;
    let t0 = p.t0();
    let raw: Vec<Complex64> = solved.iter().map(|s| s.0).collect();
    let normalized = raw
        .iter()
        .zip(omegas)
        .map(|(t, &w)| t0 * t / bare_cavity_transmission(p, w))
        .collect();
    let max_condition = solved.iter().map(|s| s.1).fold(0.0, f64::max);
    Ok(OracleResponse {
        raw: ComplexResponse::from_samples(omegas.to_vec(), raw),
        normalized: ComplexResponse::from_samples(omegas.to_vec(), normalized),
        max_condition,
    })
}

/// Largest `|t_oracle - t_closed| / t0` over the grid.
pub fn max_deviation(p: &OmitParams, oracle: &OracleResponse) -> f64 {
    let t0 = p.t0();
    oracle
        .normalized
        .omega
        .iter()
        .zip(&oracle.normalized.t)
        .map(|(&w, t)| (t - transmissivity(p, w)).norm() / t0)
        .fold(0.0, f64::max)
}

/// Frequency pull of the transparency dip caused by the off-resonant cavity
/// sideband, `gamma Gamma_opt / (2 omega_m)` (rad/s). The closed form omits it.
pub fn sideband_spring_shift(p: &OmitParams) -> f64 {
    p.gamma() * crate::omit::optical_damping(p) / (2.0 * p.omega_m())
}
