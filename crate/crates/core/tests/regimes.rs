//! End-to-end checks of the reduced model built from a full apparatus.

use omitlab_core::apparatus::{Apparatus, LinewidthCalibration};
use omitlab_core::cavity::CavityConfig;
use omitlab_core::lineshape::closed_form_fwhm;
use omitlab_core::membrane::{thermal_force_psd, GasEnvironment, MembraneConfig};
use omitlab_core::omit::{optical_damping, radiation_pressure_psd, transmissivity};
use omitlab_core::oracle::{exact_response_oracle, max_deviation};
use omitlab_core::units::{hz_to_angular, HBAR};

/// The broad-linewidth 394.6 kHz operating point.
fn broad() -> Apparatus {
    Apparatus {
        cavity: CavityConfig::reference(),
        membrane: MembraneConfig {
            omega_m: hz_to_angular(394.6e3),
            ..MembraneConfig::reference()
        },
        gas: GasEnvironment::air_mbar(1e-6),
        membrane_z: 133e-9,
        power: 4e-3,
        delta: 0.0,
    }
}

fn calibration(fwhm_hz: f64) -> Option<LinewidthCalibration> {
    Some(LinewidthCalibration {
        power_w: 4e-3,
        fwhm_hz,
    })
}

#[test]
fn radiation_pressure_noise_dominates_thermal_noise() {
    let a = broad();
    let model = a.model(calibration(600.0)).unwrap();
    // beta = 0.015 rad/V, 1 V of amplitude noise on the 4 mW beam
    let flux = (a.power / (HBAR * a.omega_p())).sqrt();
    let delta_a = 0.015 * 1.0 * flux;
    assert!(
        (delta_a / 2.2e6 - 1.0).abs() < 0.05,
        "delta_a = {delta_a:e}"
    );
    let s_rp = radiation_pressure_psd(&model.params, delta_a);
    assert!((1e-22..=1e-20).contains(&s_rp), "S_rp = {s_rp:e}");
    let s_th = thermal_force_psd(&a.membrane, &a.gas).unwrap();
    assert!(s_rp / s_th > 1e6, "ratio {}", s_rp / s_th);
}

#[test]
fn calibrated_model_reproduces_the_requested_linewidth() {
    for fwhm in [15.0, 600.0] {
        let model = broad().model(calibration(fwhm)).unwrap();
        let got = closed_form_fwhm(&model.params).unwrap();
        assert!((got / fwhm - 1.0).abs() < 1e-9, "{got} vs {fwhm}");
    }
}

#[test]
fn transparency_peak_sits_at_the_membrane_frequency() {
    let model = broad().model(calibration(600.0)).unwrap();
    let p = model.params;
    let w = p.omega_m();
    let centre = transmissivity(&p, w);
    assert!(centre.im.abs() < 1e-12 * centre.norm());
    let g = optical_damping(&p);
    assert!(transmissivity(&p, w + g).norm() > centre.norm());
}

#[test]
fn oracle_deviation_shrinks_as_the_sidebands_resolve() {
    let model = broad().model(calibration(15.0)).unwrap();
    let p = model.params;
    let g = optical_damping(&p);
    let grid: Vec<f64> = (0..401)
        .map(|i| p.omega_m() - 10.0 * g + 20.0 * g * i as f64 / 400.0)
        .collect();
    let configured = max_deviation(&p, &exact_response_oracle(&p, &grid).unwrap());
    let resolved = omitlab_core::omit::OmitParams::from_linewidth(
        p.omega_m() / 40.0,
        p.eta_c(),
        0.0,
        p.gamma_m(),
        p.omega_m(),
        p.delta(),
        p.m_eff(),
    )
    .unwrap()
    .with_gamma_opt(g)
    .unwrap();
    let better = max_deviation(&resolved, &exact_response_oracle(&resolved, &grid).unwrap());
    assert!(better < configured, "{better} vs {configured}");
}
