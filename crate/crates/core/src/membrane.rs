//! Membrane oscillator: effective mass, intrinsic and residual-gas damping,
//! quality factor, ringdown and thermal force noise.
//!
//! Damping rates in this module are energy decay rates (rad/s), so that
//! `Q = omega_m / (gamma_m + gamma_gas)`. The OMIT response works with the
//! amplitude rate, half of this; see [`MembraneConfig::amplitude_linewidth`].
//!
//! The quality-factor relation is the standard `Q = omega/gamma`. A reading
//! with an extra `2*pi` (`Q = 2*pi*omega_m/gamma`) is only consistent with the
//! ringdown relation `Q = pi*f*tau` if `omega_m` there denotes an ordinary
//! frequency, so it is not used.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{require, OmitError, Result};
use crate::units::{hz_to_angular, mbar_to_pa, BOLTZMANN, GAS_CONSTANT};

/// Density of stoichiometric silicon nitride, kg/m³.
pub const SILICON_NITRIDE_DENSITY: f64 = 3100.0;
/// Molar mass of air, kg/mol.
pub const AIR_MOLAR_MASS: f64 = 0.029;
/// Upper pressure bound of the free-molecular damping model, Pa (1e-2 mbar).
pub const FREE_MOLECULAR_CEILING: f64 = 1.0;

/// Square drum membrane, fundamental mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MembraneConfig {
    /// Side of the square window, m.
    pub side_length: f64,
    /// Thickness, m.
    pub thickness: f64,
    /// Mass density, kg/m³.
    pub density: f64,
    /// Complex refractive index; the imaginary part is absorption.
    pub refractive_index: Complex64,
    /// Mechanical resonance, rad/s.
    pub omega_m: f64,
    /// Intrinsic (vacuum) quality factor.
    pub q_intrinsic: f64,
}

impl MembraneConfig {
    pub fn new(
        side_length: f64,
        thickness: f64,
        density: f64,
        refractive_index: Complex64,
        omega_m: f64,
        q_intrinsic: f64,
    ) -> Result<Self> {
        let cfg = Self {
            side_length,
            thickness,
            density,
            refractive_index,
            omega_m,
            q_intrinsic,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// 1 mm × 1 mm × 50 nm Si₃N₄, n = 2 + 2.5e-5 i, 402.7 kHz, Q = 1.5e6.
    pub fn reference() -> Self {
        Self {
            side_length: 1e-3,
            thickness: 50e-9,
            density: SILICON_NITRIDE_DENSITY,
            refractive_index: Complex64::new(2.0, 2.5e-5),
            omega_m: hz_to_angular(402.7e3),
            q_intrinsic: 1.5e6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("side_length", self.side_length),
            ("thickness", self.thickness),
            ("density", self.density),
            ("omega_m", self.omega_m),
            ("q_intrinsic", self.q_intrinsic),
        ];
        for (name, v) in positive {
            require(v.is_finite() && v > 0.0, || {
                format!("membrane {name} must be > 0, got {v}")
            })?;
        }
        require(
            self.refractive_index.re.is_finite() && self.refractive_index.im >= 0.0,
            || {
                format!(
                    "membrane refractive index must have Im(n) >= 0, got {}",
                    self.refractive_index
                )
            },
        )
    }

    /// Intrinsic energy damping rate `omega_m / q_intrinsic`, rad/s.
    pub fn intrinsic_damping(&self) -> f64 {
        self.omega_m / self.q_intrinsic
    }

    /// Amplitude (half-width) linewidth entering the OMIT response, rad/s:
    /// half the total energy damping rate.
    pub fn amplitude_linewidth(&self, env: &GasEnvironment) -> Result<f64> {
        Ok(0.5 * (self.intrinsic_damping() + gas_damping_rate(self, env)?))
    }
}

/// Residual gas around the membrane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasEnvironment {
    /// Pressure, Pa.
    pub pressure: f64,
    /// Temperature, K.
    pub temperature: f64,
    /// Molar mass, kg/mol.
    pub molar_mass: f64,
    /// Largest pressure (Pa) for which the free-molecular model is applied.
    pub max_pressure: f64,
}

impl GasEnvironment {
    pub fn new(pressure: f64, temperature: f64, molar_mass: f64) -> Result<Self> {
        let env = Self {
            pressure,
            temperature,
            molar_mass,
            max_pressure: FREE_MOLECULAR_CEILING,
        };
        env.validate()?;
        Ok(env)
    }

    /// Air at 293 K and the given pressure in mbar.
    pub fn air_mbar(pressure_mbar: f64) -> Self {
        Self {
            pressure: mbar_to_pa(pressure_mbar),
            temperature: 293.0,
            molar_mass: AIR_MOLAR_MASS,
            max_pressure: FREE_MOLECULAR_CEILING,
        }
    }

    pub fn with_pressure(self, pressure: f64) -> Self {
        Self { pressure, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        require(self.pressure >= 0.0, || {
            format!("gas pressure must be >= 0, got {}", self.pressure)
        })?;
        require(self.temperature > 0.0, || {
            format!("gas temperature must be > 0, got {}", self.temperature)
        })?;
        require(self.molar_mass > 0.0, || {
            format!("gas molar mass must be > 0, got {}", self.molar_mass)
        })?;
        require(self.max_pressure > 0.0, || {
            format!("pressure ceiling must be > 0, got {}", self.max_pressure)
        })
    }
}

/// Fundamental-mode effective mass of a square membrane, `rho * side² * d / 4`.
pub fn effective_mass(cfg: &MembraneConfig) -> f64 {
    cfg.density * cfg.side_length * cfg.side_length * cfg.thickness / 4.0
}

/// Mean molecular speed `sqrt(3 R T / M)`, m/s.
pub fn gas_mean_speed(env: &GasEnvironment) -> f64 {
    (3.0 * GAS_CONSTANT * env.temperature / env.molar_mass).sqrt()
}

/// Free-molecular gas damping `16 P / (pi rho d v)`, rad/s.
///
/// Errors with [`OmitError::OutOfValidityRange`] above `env.max_pressure`.
pub fn gas_damping_rate(cfg: &MembraneConfig, env: &GasEnvironment) -> Result<f64> {
    if env.pressure > env.max_pressure {
        return Err(OmitError::OutOfValidityRange {
            quantity: "gas pressure (Pa)",
            value: env.pressure,
            limit: env.max_pressure,
        });
    }
    // Written as P * k so the result is exactly linear in P.
    let k = 16.0 / (std::f64::consts::PI * cfg.density * cfg.thickness * gas_mean_speed(env));
    Ok(env.pressure * k)
}

/// `Q = omega_m / (gamma_m + gamma_gas)`, with `gamma_m = omega_m / q_intrinsic`.
pub fn quality_factor(cfg: &MembraneConfig, env: &GasEnvironment) -> Result<f64> {
    let gamma_gas = gas_damping_rate(cfg, env)?;
    // Same quantity as omega_m/(gamma_m + gamma_gas), but exact at zero pressure.
    Ok(cfg.q_intrinsic / (1.0 + gamma_gas / cfg.intrinsic_damping()))
}

/// Quality factor from an amplitude ringdown time: `Q = pi f tau`.
pub fn ringdown_q(f: f64, tau: f64) -> Result<f64> {
    require(f > 0.0 && tau > 0.0, || {
        format!("ringdown needs f > 0 and tau > 0, got f={f}, tau={tau}")
    })?;
    Ok(std::f64::consts::PI * f * tau)
}

/// Thermal force spectral density `4 m gamma k_B T`, N²/Hz, with the total
/// (intrinsic + gas) damping.
pub fn thermal_force_psd(cfg: &MembraneConfig, env: &GasEnvironment) -> Result<f64> {
    let gamma = cfg.intrinsic_damping() + gas_damping_rate(cfg, env)?;
    Ok(4.0 * effective_mass(cfg) * gamma * BOLTZMANN * env.temperature)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn effective_mass_of_reference_membrane() {
        let m = effective_mass(&MembraneConfig::reference());
        assert!(rel(m, 3.875e-11) < 1e-12);
        // 40 ng quoted for the device
        assert!(rel(m, 40e-12) < 0.05);
        assert!((38e-12..=42e-12).contains(&m));
    }

    #[test]
    fn effective_mass_scaling() {
        let base = MembraneConfig::reference();
        let big = MembraneConfig {
            side_length: 2e-3,
            ..base
        };
        assert!(rel(effective_mass(&big), 4.0 * effective_mass(&base)) < 1e-15);
        let thin = MembraneConfig {
            thickness: 1e-30,
            ..base
        };
        assert!(effective_mass(&thin) < 1e-30);
    }

    #[test]
    fn mean_speed_of_air() {
        let env = GasEnvironment::air_mbar(0.0);
        let v = gas_mean_speed(&env);
        assert!((v - 502.0).abs() < 1.0, "{v}");
        let hot = GasEnvironment {
            temperature: 4.0 * 293.0,
            ..env
        };
        assert!(rel(gas_mean_speed(&hot), 2.0 * v) < 1e-14);
        let heavy = GasEnvironment {
            molar_mass: 4.0 * AIR_MOLAR_MASS,
            ..env
        };
        assert!(rel(gas_mean_speed(&heavy), 0.5 * v) < 1e-14);
    }

    #[test]
    fn gas_damping_values() {
        let mem = MembraneConfig::reference();
        assert_eq!(
            gas_damping_rate(&mem, &GasEnvironment::air_mbar(0.0)).unwrap(),
            0.0
        );
        let env = GasEnvironment::air_mbar(1e-5);
        let g = gas_damping_rate(&mem, &env).unwrap();
        let expected = 16e-3 / (std::f64::consts::PI * 3100.0 * 50e-9 * gas_mean_speed(&env));
        assert!(rel(g, expected) < 1e-14);
        assert!((g - 0.0655).abs() < 5e-4, "{g}");
    }

    #[test]
    fn gas_damping_refuses_viscous_regime() {
        let mem = MembraneConfig::reference();
        let err = gas_damping_rate(&mem, &GasEnvironment::air_mbar(0.1)).unwrap_err();
        assert!(matches!(err, OmitError::OutOfValidityRange { .. }));
        assert!(gas_damping_rate(&mem, &GasEnvironment::air_mbar(1e-2)).is_ok());
    }

    #[test]
    fn quality_factor_limits() {
        let mem = MembraneConfig::reference();
        assert_eq!(
            quality_factor(&mem, &GasEnvironment::air_mbar(0.0)).unwrap(),
            mem.q_intrinsic
        );

        // Equal intrinsic and gas damping halves Q.
        let mem400 = MembraneConfig {
            omega_m: hz_to_angular(400e3),
            ..mem
        };
        let env = GasEnvironment::air_mbar(1e-5);
        let k = gas_damping_rate(&mem400, &env).unwrap() / env.pressure;
        let matched = env.with_pressure(mem400.intrinsic_damping() / k);
        let q = quality_factor(&mem400, &matched).unwrap();
        assert!(rel(q, 7.5e5) < 1e-12, "{q}");
    }

    #[test]
    fn ringdown() {
        let q = ringdown_q(400e3, 1.19).unwrap();
        assert!(rel(q, 1.5e6) < 0.01);
        assert!(rel(ringdown_q(400e3, 2.38).unwrap(), 2.0 * q) < 1e-15);
        assert!(rel(ringdown_q(1.0 / std::f64::consts::PI, 1.0).unwrap(), 1.0) < 1e-15);
        assert!(ringdown_q(0.0, 1.0).is_err());
    }

    #[test]
    fn thermal_force_magnitude() {
        // 4 m gamma k_B T with m = 40 ng, gamma = 1.7 rad/s, T = 293 K
        let s = 4.0 * 4e-11 * 1.7 * BOLTZMANN * 293.0;
        assert!((s - 1.1e-30).abs() < 0.05e-30);

        let mem = MembraneConfig::reference();
        let env = GasEnvironment::air_mbar(1e-6);
        let psd = thermal_force_psd(&mem, &env).unwrap();
        assert!((1e-31..1e-29).contains(&psd), "{psd}");
        let cold = GasEnvironment {
            temperature: 1e-300,
            ..GasEnvironment::air_mbar(0.0)
        };
        assert!(thermal_force_psd(&mem, &cold).unwrap() < 1e-300);
        let heavy = MembraneConfig {
            density: 2.0 * mem.density,
            ..mem
        };
        // gas damping also changes with density; compare in vacuum
        let vac = GasEnvironment::air_mbar(0.0);
        assert!(
            rel(
                thermal_force_psd(&heavy, &vac).unwrap(),
                2.0 * thermal_force_psd(&mem, &vac).unwrap()
            ) < 1e-14
        );
    }

    #[test]
    fn validation() {
        assert!(
            MembraneConfig::new(1e-3, 50e-9, 3100.0, Complex64::new(2.0, -1e-3), 1.0, 1.0).is_err()
        );
        assert!(
            MembraneConfig::new(0.0, 50e-9, 3100.0, Complex64::new(2.0, 0.0), 1.0, 1.0).is_err()
        );
        assert!(GasEnvironment::new(-1.0, 293.0, 0.029).is_err());
        assert!(GasEnvironment::new(0.0, 0.0, 0.029).is_err());
    }

    proptest! {
        #[test]
        fn gas_damping_is_linear_in_pressure(p in 0.0f64..0.5) {
            let mem = MembraneConfig::reference();
            let env = GasEnvironment { pressure: p, ..GasEnvironment::air_mbar(0.0) };
            let one = gas_damping_rate(&mem, &env).unwrap();
            let two = gas_damping_rate(&mem, &env.with_pressure(2.0 * p)).unwrap();
            prop_assert_eq!(two, 2.0 * one);
        }

        #[test]
        fn quality_factor_decreases_with_pressure(p in 0.0f64..0.5, dp in 1e-9f64..0.4) {
            let mem = MembraneConfig::reference();
            let env = GasEnvironment { pressure: p, ..GasEnvironment::air_mbar(0.0) };
            let q1 = quality_factor(&mem, &env).unwrap();
            let q2 = quality_factor(&mem, &env.with_pressure(p + dp)).unwrap();
            prop_assert!(q2 < q1);
            prop_assert!(q1 <= mem.q_intrinsic);
        }

        #[test]
        fn thermal_psd_non_negative(t in 0.0f64..1000.0, p in 0.0f64..1.0) {
            let mem = MembraneConfig::reference();
            let env = GasEnvironment { temperature: t.max(1e-12), pressure: p, ..GasEnvironment::air_mbar(0.0) };
            prop_assert!(thermal_force_psd(&mem, &env).unwrap() >= 0.0);
        }
    }
}
