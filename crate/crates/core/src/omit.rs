//! Closed-form OMIT response of the filter cavity.
//!
//! In the resolved-sideband, near-resonance limit the signal transmissivity is
//!
//! ```text
//! t(Omega) = 2 sqrt(eta_c (1 - eta_c)) (x + i gamma_m) / (x + i gamma_m + i Gamma_opt),
//! x = Omega - omega_m,   Gamma_opt = hbar Gbar0² / (2 m omega_m gamma)
//! ```
//!
//! Time dependence is `e^{-i Omega t}` throughout, so a causal response has
//! its poles in the lower half plane and a delay `tau` appears as a phase
//! `+Omega tau`.

use log::warn;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{require, Result};
use crate::phase::unwrap;
use crate::units::{BOLTZMANN, HBAR};

/// Reduced parameter set of the OMIT filter cavity. All rates are amplitude
/// (half-width) rates in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OmitParams {
    gamma1: f64,
    gamma2: f64,
    gamma: f64,
    eta_c: f64,
    g_bar: f64,
    gamma_m: f64,
    omega_m: f64,
    delta: f64,
    m_eff: f64,
}

impl OmitParams {
    /// `gamma = gamma1 + gamma2` and `eta_c = gamma1 / gamma` are derived.
    /// `delta` is the control offset with cavity detuning `Delta = omega_m - delta`.
    pub fn new(
        gamma1: f64,
        gamma2: f64,
        g_bar: f64,
        gamma_m: f64,
        omega_m: f64,
        delta: f64,
        m_eff: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("gamma1", gamma1),
            ("gamma2", gamma2),
            ("gamma_m", gamma_m),
            ("omega_m", omega_m),
            ("m_eff", m_eff),
        ] {
            require(v.is_finite() && v > 0.0, || {
                format!("{name} must be > 0, got {v}")
            })?;
        }
        require(g_bar.is_finite() && g_bar >= 0.0, || {
            format!("g_bar must be >= 0, got {g_bar}")
        })?;
        require(delta.is_finite(), || "delta must be finite".into())?;
        let gamma = gamma1 + gamma2;
        Ok(Self {
            gamma1,
            gamma2,
            gamma,
            eta_c: gamma1 / gamma,
            g_bar,
            gamma_m,
            omega_m,
            delta,
            m_eff,
        })
    }

    /// Split a total linewidth `gamma` between the mirrors with coupling
    /// parameter `eta_c`.
    pub fn from_linewidth(
        gamma: f64,
        eta_c: f64,
        g_bar: f64,
        gamma_m: f64,
        omega_m: f64,
        delta: f64,
        m_eff: f64,
    ) -> Result<Self> {
        require(eta_c > 0.0 && eta_c < 1.0, || {
            format!("eta_c out of (0,1): {eta_c}")
        })?;
        Self::new(
            gamma * eta_c,
            gamma * (1.0 - eta_c),
            g_bar,
            gamma_m,
            omega_m,
            delta,
            m_eff,
        )
    }

    /// Same parameters with `g_bar` chosen so that `optical_damping` equals
    /// `gamma_opt`.
    pub fn with_gamma_opt(self, gamma_opt: f64) -> Result<Self> {
        require(gamma_opt >= 0.0, || {
            format!("gamma_opt must be >= 0, got {gamma_opt}")
        })?;
        let g_bar = (gamma_opt * 2.0 * self.m_eff * self.omega_m * self.gamma / HBAR).sqrt();
        Ok(Self { g_bar, ..self })
    }

    pub fn with_g_bar(self, g_bar: f64) -> Result<Self> {
        require(g_bar.is_finite() && g_bar >= 0.0, || {
            format!("g_bar must be >= 0, got {g_bar}")
        })?;
        Ok(Self { g_bar, ..self })
    }

    pub fn with_gamma_m(self, gamma_m: f64) -> Result<Self> {
        require(gamma_m > 0.0, || {
            format!("gamma_m must be > 0, got {gamma_m}")
        })?;
        Ok(Self { gamma_m, ..self })
    }

    pub fn gamma1(&self) -> f64 {
        self.gamma1
    }
    pub fn gamma2(&self) -> f64 {
        self.gamma2
    }
    /// Total cavity amplitude linewidth, rad/s.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn eta_c(&self) -> f64 {
        self.eta_c
    }
    /// Pump-enhanced coupling `G0 * a_bar`.
    pub fn g_bar(&self) -> f64 {
        self.g_bar
    }
    pub fn gamma_m(&self) -> f64 {
        self.gamma_m
    }
    pub fn omega_m(&self) -> f64 {
        self.omega_m
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    /// Control detuning from the cavity, `Delta = omega_m - delta`.
    pub fn cavity_detuning(&self) -> f64 {
        self.omega_m - self.delta
    }
    pub fn m_eff(&self) -> f64 {
        self.m_eff
    }

    /// Off-resonance transmissivity `2 sqrt(eta_c (1 - eta_c))`.
    pub fn t0(&self) -> f64 {
        2.0 * (self.eta_c * (1.0 - self.eta_c)).sqrt()
    }
}

/// Optical damping `Gamma_opt = hbar Gbar0² / (2 m omega_m gamma)`, rad/s.
pub fn optical_damping(p: &OmitParams) -> f64 {
    HBAR * p.g_bar * p.g_bar / (2.0 * p.m_eff * p.omega_m * p.gamma)
}

/// Squared intracavity control amplitude (photon number),
/// `2 gamma1 P / (hbar omega_p (Delta² + gamma²))`. Exactly linear in `power`.
pub fn intracavity_photon_number(
    power: f64,
    omega_p: f64,
    detuning: f64,
    gamma1: f64,
    gamma: f64,
) -> Result<f64> {
    require(power >= 0.0, || {
        format!("control power must be >= 0, got {power}")
    })?;
    require(omega_p > 0.0 && gamma1 > 0.0 && gamma > 0.0, || {
        "omega_p, gamma1 and gamma must be > 0".into()
    })?;
    Ok(power * (2.0 * gamma1 / (HBAR * omega_p * (detuning * detuning + gamma * gamma))))
}

/// Steady-state intracavity control amplitude `|a_bar|` for input coupling
/// `sqrt(2 gamma1)`, taken real and positive.
pub fn intracavity_amplitude(
    power: f64,
    omega_p: f64,
    detuning: f64,
    gamma1: f64,
    gamma: f64,
) -> Result<f64> {
    Ok(intracavity_photon_number(power, omega_p, detuning, gamma1, gamma)?.sqrt())
}

/// Effective mechanical response `chi_eff(omega)`, with `omega = Omega - Delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveSusceptibility(pub Complex64);

impl EffectiveSusceptibility {
    pub fn value(&self) -> Complex64 {
        self.0
    }
}

/// `chi_eff(omega) = -2 m omega_m (omega - delta + i gamma_m) - i hbar Gbar0² / gamma`.
pub fn effective_susceptibility(p: &OmitParams, omega: f64) -> EffectiveSusceptibility {
    if omega.abs() > p.omega_m / 10.0 {
        warn!(
            "effective susceptibility evaluated at |omega| = {:e} rad/s, outside the near-resonance regime",
            omega.abs()
        );
    }
    let mech = Complex64::new(omega - p.delta, p.gamma_m) * (-2.0 * p.m_eff * p.omega_m);
    let optical = Complex64::new(0.0, -HBAR * p.g_bar * p.g_bar / p.gamma);
    EffectiveSusceptibility(mech + optical)
}

/// Normalized transmissivity `t / t0 = (x + i gamma_m) / (x + i gamma_m + i Gamma_opt)`.
pub fn normalized_transmissivity(p: &OmitParams, omega: f64) -> Complex64 {
    let x = omega - p.omega_m;
    let g = optical_damping(p);
    Complex64::new(x, p.gamma_m) / Complex64::new(x, p.gamma_m + g)
}

/// Effective signal transmissivity of the OMIT cavity.
pub fn transmissivity(p: &OmitParams, omega: f64) -> Complex64 {
    normalized_transmissivity(p, omega) * p.t0()
}

/// Transmission phase, exact and in the far-detuned approximation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseResponse {
    /// `arg t(Omega)`, continuous in `Omega` and zero far from resonance.
    pub exact: f64,
    /// `-arctan(Gamma_opt / (Omega - omega_m))`, valid for
    /// `|Omega - omega_m| >> sqrt(gamma_m Gamma_opt)`.
    pub approx: f64,
}

pub fn phase_response(p: &OmitParams, omega: f64) -> PhaseResponse {
    let x = omega - p.omega_m;
    let g = optical_damping(p);
    // Both atan2 terms live in (0, pi) for every real x, so the difference
    // is continuous without unwrapping.
    let exact = p.gamma_m.atan2(x) - (p.gamma_m + g).atan2(x);
    PhaseResponse {
        exact,
        approx: -(g / x).atan(),
    }
}

/// Noise-ellipse rotation angle in the literal form
/// `-arctan(Gamma_opt x / (x² + gamma_m Gamma_opt))`.
///
/// Differs from the exact `arg t` by at most `gamma_m² / (2 (x² + gamma_m Gamma_opt))`;
/// see [`rotation_angle_exact`].
pub fn rotation_angle(p: &OmitParams, omega: f64) -> f64 {
    let x = omega - p.omega_m;
    let g = optical_damping(p);
    -(g * x / (x * x + p.gamma_m * g)).atan()
}

/// `-arctan(Gamma_opt x / (x² + gamma_m (gamma_m + Gamma_opt)))`, identical to `arg t`.
pub fn rotation_angle_exact(p: &OmitParams, omega: f64) -> f64 {
    let x = omega - p.omega_m;
    let g = optical_damping(p);
    -(g * x / (x * x + p.gamma_m * (p.gamma_m + g))).atan()
}

/// Group delay `d arg t / d Omega`, s. Negative values are a signal advance.
pub fn group_delay(p: &OmitParams, omega: f64) -> f64 {
    let x = omega - p.omega_m;
    let gm = p.gamma_m;
    let gt = gm + optical_damping(p);
    gt / (x * x + gt * gt) - gm / (x * x + gm * gm)
}

/// Outcome of the low-temperature requirement `8 k_B T / Q_m < hbar Gamma_opt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Feasibility {
    pub satisfied: bool,
    /// `(8 k_B T / Q_m) / (hbar Gamma_opt)`.
    pub ratio: f64,
    /// Largest admissible `T / Q_m`, K.
    pub max_t_over_q: f64,
}

pub fn feasibility_bound(temperature: f64, q_m: f64, gamma_opt: f64) -> Result<Feasibility> {
    require(temperature >= 0.0, || {
        format!("temperature must be >= 0, got {temperature}")
    })?;
    require(q_m > 0.0 && gamma_opt > 0.0, || {
        "Q_m and Gamma_opt must be > 0".into()
    })?;
    let thermal = 8.0 * BOLTZMANN * temperature / q_m;
    let quantum = HBAR * gamma_opt;
    Ok(Feasibility {
        satisfied: thermal < quantum,
        ratio: thermal / quantum,
        max_t_over_q: quantum / (8.0 * BOLTZMANN),
    })
}

/// Radiation-pressure force noise from classical signal noise,
/// `2 gamma1 (hbar Gbar0 |delta a|)² / (gamma² gamma_m)`.
pub fn radiation_pressure_psd(p: &OmitParams, noise_amplitude: f64) -> f64 {
    let f = HBAR * p.g_bar * noise_amplitude;
    2.0 * p.gamma1 * f * f / (p.gamma * p.gamma * p.gamma_m)
}

/// Sampled complex transmissivity with its unwrapped phase.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexResponse {
    pub omega: Vec<f64>,
    pub t: Vec<Complex64>,
    pub magnitude: Vec<f64>,
    pub phase: Vec<f64>,
}

impl ComplexResponse {
    /// Build from samples; the phase is unwrapped starting from the first
    /// (far-detuned) sample.
    pub fn from_samples(omega: Vec<f64>, t: Vec<Complex64>) -> Self {
        let wrapped: Vec<f64> = t.iter().map(|z| z.arg()).collect();
        Self {
            magnitude: t.iter().map(|z| z.norm()).collect(),
            phase: unwrap(&wrapped),
            omega,
            t,
        }
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }
}

/// One row of a closed-form response sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResponsePoint {
    pub omega: f64,
    pub t: [f64; 2],
    pub abs_t: f64,
    pub phase: f64,
    pub phase_approx: f64,
    pub theta: f64,
    pub group_delay: f64,
}

/// Closed-form `|t|`, phase, rotation angle and group delay over a grid.
pub fn response_sweep(p: &OmitParams, omegas: &[f64]) -> Vec<ResponsePoint> {
    omegas
        .iter()
        .map(|&w| {
            let t = transmissivity(p, w);
            let ph = phase_response(p, w);
            ResponsePoint {
                omega: w,
                t: [t.re, t.im],
                abs_t: t.norm(),
                phase: ph.exact,
                phase_approx: ph.approx,
                theta: rotation_angle(p, w),
                group_delay: group_delay(p, w),
            }
        })
        .collect()
}

/// Closed-form response as a [`ComplexResponse`].
pub fn closed_form_response(p: &OmitParams, omegas: &[f64]) -> ComplexResponse {
    let t = omegas.iter().map(|&w| transmissivity(p, w)).collect();
    ComplexResponse::from_samples(omegas.to_vec(), t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::hz_to_angular;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    /// Fig. 3 style parameters: 402.7 kHz membrane, 40 ng, gamma = 5.34e5 rad/s.
    fn params(gamma_opt: f64, gamma_m: f64) -> OmitParams {
        OmitParams::from_linewidth(
            5.34e5,
            0.935,
            0.0,
            gamma_m,
            hz_to_angular(402.7e3),
            0.0,
            4e-11,
        )
        .unwrap()
        .with_gamma_opt(gamma_opt)
        .unwrap()
    }

    #[test]
    fn invariants_of_construction() {
        let p = OmitParams::new(2.161e5, 1.493e4, 1e19, 0.84, 2.53e6, 0.0, 4e-11).unwrap();
        assert!(rel(p.gamma(), p.gamma1() + p.gamma2()) < 1e-12);
        assert!(p.eta_c() > 0.0 && p.eta_c() < 1.0);
        assert!(OmitParams::new(-1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0).is_err());
        assert!(OmitParams::new(1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn optical_damping_values() {
        let p = params(0.0, 0.84);
        assert_eq!(optical_damping(&p), 0.0);
        let target = hz_to_angular(300.0);
        let p = params(target, 0.84);
        assert!(rel(optical_damping(&p), target) < 1e-12);
        // g_bar needed for 2 pi x 300 Hz, from direct evaluation of the inverse
        assert!(rel(p.g_bar(), 4.395_505_746e19) < 1e-9, "{}", p.g_bar());
        let doubled = p.with_g_bar(p.g_bar() * 2f64.sqrt()).unwrap();
        assert!(rel(optical_damping(&doubled), 2.0 * target) < 1e-12);
    }

    #[test]
    fn intracavity_amplitude_values() {
        assert_eq!(
            intracavity_amplitude(0.0, 1.77e15, 0.0, 1.0, 1.0).unwrap(),
            0.0
        );
        let omega_p = hz_to_angular(crate::units::SPEED_OF_LIGHT / 1064e-9);
        let on_res = intracavity_amplitude(1e-3, omega_p, 0.0, 2.161e5, 5.34e5).unwrap();
        let expect = (2.0 * 2.161e5 * 1e-3 / (HBAR * omega_p)).sqrt() / 5.34e5;
        assert!(rel(on_res, expect) < 1e-14);
        let a = intracavity_amplitude(1.3e-3, omega_p, hz_to_angular(402.7e3), 2.161e5, 5.34e5)
            .unwrap();
        assert!(rel(a, 21_213.985_670_57) < 1e-9, "{a}");
        assert!(intracavity_amplitude(-1.0, omega_p, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn susceptibility_identities() {
        let p0 = params(0.0, 0.84);
        let chi = effective_susceptibility(&p0, p0.delta()).value();
        let pure = Complex64::new(0.0, -2.0 * p0.m_eff() * p0.omega_m() * p0.gamma_m());
        assert!((chi - pure).norm() < 1e-12 * pure.norm());

        let p = params(hz_to_angular(300.0), 0.84);
        let w = 37.0;
        let diff =
            effective_susceptibility(&p, w).value() - effective_susceptibility(&p, 0.0).value();
        assert!(
            (diff - Complex64::new(-2.0 * p.m_eff() * p.omega_m() * w, 0.0)).norm()
                < 1e-9 * diff.norm()
        );

        let g = optical_damping(&p);
        let expected = 2.0 * p.m_eff() * p.omega_m() * (g + p.gamma_m());
        let at_delta = effective_susceptibility(&p, p.delta()).value().norm();
        assert!(rel(at_delta, expected) < 1e-9);
        // with gamma_m << Gamma_opt this is ~ 2 m omega_m Gamma_opt
        assert!(rel(at_delta, 2.0 * p.m_eff() * p.omega_m() * g) < p.gamma_m() / g * 1.01);
    }

    #[test]
    fn transmissivity_limits() {
        let p0 = params(0.0, 0.84);
        for x in [-1e4, -1.0, 0.0, 2.0, 1e5] {
            let t = transmissivity(&p0, p0.omega_m() + x);
            assert!((t - Complex64::new(p0.t0(), 0.0)).norm() < 1e-15);
        }
        let p = params(hz_to_angular(300.0), 0.84);
        let far = transmissivity(&p, p.omega_m() + 1e12);
        assert!((far.norm() - p.t0()).abs() < 1e-8);
        let on = transmissivity(&p, p.omega_m()).norm();
        let g = optical_damping(&p);
        assert!(rel(on, p.t0() * p.gamma_m() / (p.gamma_m() + g)) < 1e-12);
    }

    #[test]
    fn half_power_point() {
        let g = 1e3;
        let p = params(g, 1e-9);
        let tn = normalized_transmissivity(&p, p.omega_m() + g);
        assert!((tn.norm() - 1.0 / 2f64.sqrt()).abs() < 1e-9);
        assert!((tn.arg() + FRAC_PI_4).abs() < 1e-9);
    }

    #[test]
    fn normalized_transmissivity_dip() {
        let gm = 0.84;
        let g_total = PI * 15.0;
        let p = params(g_total - gm, gm);
        let tn = normalized_transmissivity(&p, p.omega_m()).norm();
        assert!(rel(tn, gm / g_total) < 1e-12);
        assert!(rel(tn, 0.017_825_353_626) < 1e-9);
        let off = params(0.0, gm);
        assert!(
            (normalized_transmissivity(&off, off.omega_m() + 3.0) - Complex64::new(1.0, 0.0))
                .norm()
                < 1e-15
        );
    }

    #[test]
    fn phase_exact_and_approx() {
        let g = 500.0;
        let p = params(g, 1e-9);
        let ph = phase_response(&p, p.omega_m() + g);
        assert!((ph.exact + FRAC_PI_4).abs() < 1e-9);
        assert!((ph.approx + FRAC_PI_4).abs() < 1e-12);
        let far = phase_response(&p, p.omega_m() + 1e12);
        assert!(far.exact.abs() < 1e-8 && far.approx.abs() < 1e-8);
        let far = phase_response(&p, p.omega_m() - 1e12);
        assert!(far.exact.abs() < 1e-8 && far.approx.abs() < 1e-8);
    }

    #[test]
    fn phase_drop_inside_mechanical_band() {
        let gm = 0.84;
        let g = hz_to_angular(300.0);
        let p = params(g, gm);
        let edge = (gm * g).sqrt();
        // exact phase returns to 0 on resonance, approximation heads to -/+ pi/2
        assert!(phase_response(&p, p.omega_m()).exact.abs() < 1e-15);
        let just_above = phase_response(&p, p.omega_m() + 1e-3 * edge);
        let just_below = phase_response(&p, p.omega_m() - 1e-3 * edge);
        assert!(just_above.approx < -FRAC_PI_2 + 1e-2 && just_below.approx > FRAC_PI_2 - 1e-2);
        assert!(just_above.exact.abs() < 0.1 && just_below.exact.abs() < 0.1);
        assert!(just_above.exact < 0.0 && just_below.exact > 0.0);
    }

    #[test]
    fn rotation_angle_values() {
        let gm = 1.0;
        let g = 1000.0;
        let p = params(g, gm);
        assert_eq!(rotation_angle(&p, p.omega_m()), 0.0);
        let x = (gm * g).sqrt();
        let theta = rotation_angle(&p, p.omega_m() + x);
        assert!((theta + ((g / gm).sqrt() / 2.0).atan()).abs() < 1e-12);
        assert!((theta.to_degrees() + 86.381_116_77).abs() < 1e-6);
        for i in 1..100 {
            let x = i as f64 * 3.7;
            let a = rotation_angle(&p, p.omega_m() + x);
            let b = rotation_angle(&p, p.omega_m() - x);
            assert!((a + b).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_angle_is_extremal_at_geometric_mean() {
        let gm = 2.0;
        let g = 800.0;
        let p = params(g, gm);
        let x0 = (gm * g).sqrt();
        let at = rotation_angle(&p, p.omega_m() + x0);
        for f in [0.9, 0.99, 1.01, 1.1] {
            assert!(rotation_angle(&p, p.omega_m() + f * x0) > at);
        }
    }

    #[test]
    fn group_delay_on_resonance_is_an_advance() {
        let p0 = params(0.0, 0.84);
        assert!(group_delay(&p0, p0.omega_m() + 3.0).abs() < 1e-18);
        let p = params(hz_to_angular(300.0), 0.84);
        let g = optical_damping(&p);
        let tau = group_delay(&p, p.omega_m());
        assert!(rel(tau, 1.0 / (p.gamma_m() + g) - 1.0 / p.gamma_m()) < 1e-12);
        assert!(tau < 0.0);
    }

    #[test]
    fn group_delay_matches_phase_derivative() {
        let p = params(hz_to_angular(300.0), 0.84);
        let gm = p.gamma_m();
        let mut checked = 0;
        for i in -200..=200 {
            let x = i as f64 * 25.0 + 0.37;
            if x.abs() < gm / 10.0 {
                continue;
            }
            let h = 1e-4 * (x.abs() + gm).min(1e3);
            let fd = (phase_response(&p, p.omega_m() + x + h).exact
                - phase_response(&p, p.omega_m() + x - h).exact)
                / (2.0 * h);
            let an = group_delay(&p, p.omega_m() + x);
            if an.abs() < 1e-12 {
                continue;
            }
            assert!(rel(fd, an) < 1e-5, "x={x}: {fd} vs {an}");
            checked += 1;
        }
        assert!(checked > 300);
    }

    #[test]
    fn feasibility_threshold() {
        let f = feasibility_bound(293.0, 1.5e6, hz_to_angular(100.0)).unwrap();
        assert!(rel(f.max_t_over_q, 6.0e-10) < 0.02);
        assert!(!f.satisfied);
        assert!(f.ratio > 1e5);
        let cold = feasibility_bound(0.0, 1.5e6, 1e-3).unwrap();
        assert!(cold.satisfied);
        assert!(293.0 / 1.5e6 > 1e5 * f.max_t_over_q);
    }

    #[test]
    fn radiation_pressure_noise() {
        let p = params(hz_to_angular(300.0), 0.84);
        assert_eq!(radiation_pressure_psd(&p, 0.0), 0.0);
        let s1 = radiation_pressure_psd(&p, 1e6);
        assert!(rel(radiation_pressure_psd(&p, 2e6), 4.0 * s1) < 1e-14);
    }

    #[test]
    fn closed_form_response_phase_is_continuous() {
        let g = hz_to_angular(300.0);
        let p = params(g, 0.84);
        let omegas: Vec<f64> = (0..4001)
            .map(|i| p.omega_m() + (i as f64 - 2000.0) * g / 20.0)
            .collect();
        let r = closed_form_response(&p, &omegas);
        let jump = r
            .phase
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .fold(0.0, f64::max);
        assert!(jump < FRAC_PI_2);
        assert!(r.magnitude.iter().all(|&m| m <= 1.0));
    }

    proptest! {
        #[test]
        fn arg_tn_equals_exact_rotation_angle(x in -1e4f64..1e4, gm in 0.01f64..10.0, g in 0.1f64..5e3) {
            let p = params(g, gm);
            let w = p.omega_m() + x;
            let arg = normalized_transmissivity(&p, w).arg();
            prop_assert!((arg - rotation_angle_exact(&p, w)).abs() < 1e-12);
            prop_assert!((arg - phase_response(&p, w).exact).abs() < 1e-12);
            let bound = gm * gm / (x * x + gm * g);
            prop_assert!((arg - rotation_angle(&p, w)).abs() <= bound * (1.0 + 1e-9) + 1e-15);
        }

        #[test]
        fn normalized_magnitude_in_unit_interval(x in -1e4f64..1e4, gm in 0.01f64..10.0, g in 0.0f64..5e3) {
            let p = params(g, gm);
            let m = normalized_transmissivity(&p, p.omega_m() + x).norm();
            prop_assert!(m > 0.0 && m <= 1.0);
        }
    }
}
