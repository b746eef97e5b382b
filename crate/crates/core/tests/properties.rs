//! Property tests of the model invariants.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use proptest::prelude::*;

use omitlab_core::cavity::{coupling_constant, finesse_scan, CavityConfig};
use omitlab_core::detection::{
    beat_signal, demodulate, propagate_ellipse_closed_form, NoiseEllipse,
};
use omitlab_core::lineshape::{closed_form_fwhm, ControlDrive};
use omitlab_core::membrane::{
    effective_mass, gas_damping_rate, quality_factor, GasEnvironment, MembraneConfig,
};
use omitlab_core::omit::{
    group_delay, optical_damping, phase_response, transmissivity, OmitParams,
};
use omitlab_core::phase::{wrap_to_half_pi, wrap_to_pi};
use omitlab_core::rng::stream_rng;
use omitlab_core::units::{hz_to_angular, SPEED_OF_LIGHT};

fn params(gamma_m: f64, gamma_opt: f64) -> OmitParams {
    OmitParams::from_linewidth(
        5.34e5,
        0.935,
        0.0,
        gamma_m,
        hz_to_angular(402.7e3),
        0.0,
        3.875e-11,
    )
    .unwrap()
    .with_gamma_opt(gamma_opt)
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn group_delay_is_the_phase_slope(x in -2e3f64..2e3, gm in 0.05f64..5.0, g in 1.0f64..2e3) {
        let p = params(gm, g);
        let w = p.omega_m() + x;
        let h = 1e-4 * (gm + x.abs());
        let slope = (phase_response(&p, w + h).exact - phase_response(&p, w - h).exact) / (2.0 * h);
        let tau = group_delay(&p, w);
        prop_assert!((slope - tau).abs() <= 1e-5 * tau.abs().max(1.0 / (gm + g)));
    }

    #[test]
    fn transparency_is_symmetric_about_resonance(x in 0.0f64..2e3, gm in 0.05f64..5.0, g in 0.0f64..2e3) {
        let p = params(gm, g);
        let above = transmissivity(&p, p.omega_m() + x);
        let below = transmissivity(&p, p.omega_m() - x);
        prop_assert!((above - below.conj()).norm() <= 1e-12 * above.norm());
    }

    #[test]
    fn linewidth_is_affine_in_power(p1 in 1e-4f64..1e-2, p2 in 1e-4f64..1e-2) {
        let base = params(0.84, 0.0);
        let omega_p = TAU * SPEED_OF_LIGHT / 1064e-9;
        let drive = ControlDrive::calibrated(&base, omega_p, 4e-3, 15.0).unwrap();
        // Zero power leaves only the bare mechanical width.
        let w0 = base.gamma_m() / PI;
        let w1 = closed_form_fwhm(&drive.params_at(&base, p1).unwrap()).unwrap();
        let w2 = closed_form_fwhm(&drive.params_at(&base, p2).unwrap()).unwrap();
        prop_assert!(((w1 - w0) / p1 - (w2 - w0) / p2).abs() <= 1e-9 * (w2 - w0) / p2);
    }

    #[test]
    fn optical_damping_round_trips(g in 0.0f64..1e4) {
        let p = params(1.0, g);
        prop_assert!((optical_damping(&p) - g).abs() <= 1e-12 * g.max(1.0));
    }

    #[test]
    fn quality_factor_falls_with_pressure(a in 0.0f64..0.5, b in 0.0f64..0.5) {
        prop_assume!(a < b);
        let mem = MembraneConfig::reference();
        let env = GasEnvironment::air_mbar(0.0);
        let qa = quality_factor(&mem, &env.with_pressure(a)).unwrap();
        let qb = quality_factor(&mem, &env.with_pressure(b)).unwrap();
        prop_assert!(qb < qa);
        let ga = gas_damping_rate(&mem, &env.with_pressure(a)).unwrap();
        prop_assert!(gas_damping_rate(&mem, &env.with_pressure(2.0 * a)).unwrap() == 2.0 * ga);
    }

    #[test]
    fn effective_mass_scales_with_area(s in 1e-4f64..1e-2, d in 1e-8f64..1e-6) {
        let mem = MembraneConfig { side_length: s, thickness: d, ..MembraneConfig::reference() };
        let doubled = MembraneConfig { side_length: 2.0 * s, ..mem };
        prop_assert!((effective_mass(&doubled) / effective_mass(&mem) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn coupling_is_odd_about_the_node(z in 1e-9f64..2.6e-7) {
        let cfg = CavityConfig::reference();
        let a = coupling_constant(z, 0.38, &cfg).unwrap();
        let b = coupling_constant(-z, 0.38, &cfg).unwrap();
        prop_assert!((a + b).abs() <= 1e-9 * a.abs());
    }

    #[test]
    fn finesse_repeats_every_half_wavelength(z in 0.0f64..5.32e-7) {
        let cfg = CavityConfig::reference();
        let mem = MembraneConfig::reference();
        let r = finesse_scan(&cfg, &mem, &[z, z + cfg.wavelength / 2.0]).unwrap();
        prop_assert!((r[1].finesse / r[0].finesse - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rank_one_ellipse_turns_with_the_transmission_phase(phi in -3.0f64..3.0, mag in 0.01f64..1.0) {
        let input = NoiseEllipse::from_axes(0.0, 1e-3, 0.0, Complex64::new(0.015, 0.0)).unwrap();
        let out = propagate_ellipse_closed_form(&input, Complex64::from_polar(mag, phi)).unwrap();
        prop_assert!(wrap_to_half_pi(out.angle - phi).abs() < 1e-9);
        prop_assert!((out.semi_major / (mag * 1e-3) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn lock_in_recovers_any_beat_phase(phi in -3.1f64..3.1, amp in 1e-3f64..0.1) {
        let omega = hz_to_angular(400e3);
        let period = TAU / omega;
        let mut rng = stream_rng(0, 0);
        let control = Complex64::new(1.0, 0.0);
        let s = beat_signal(control, Complex64::from_polar(amp, phi), omega, 50.0 * period, 16.0 / period, 0.0, &mut rng).unwrap();
        let out = demodulate(&s, omega, 50.0 * period).unwrap();
        prop_assert!(wrap_to_pi(out.phase - phi).abs() < 1e-6);
        prop_assert!((out.magnitude / (2.0 * amp) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn wrapping_is_idempotent(x in -100.0f64..100.0) {
        let w = wrap_to_pi(x);
        prop_assert!(w > -PI && w <= PI);
        prop_assert!(wrap_to_pi(w) == w);
        prop_assert!(((x - w) / TAU - ((x - w) / TAU).round()).abs() < 1e-9);
    }
}
