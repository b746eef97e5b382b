//! Reduction of the physical apparatus (cavity, membrane, gas, control beam)
//! to the OMIT parameter set.

use serde::Serialize;

use crate::cavity::{
    coupled_linewidth, coupling_constant, membrane_slab_optics, CavityConfig, MembraneCavity,
    MembraneOptics, Resonance,
};
use crate::error::{require, Result};
use crate::lineshape::ControlDrive;
use crate::membrane::{effective_mass, GasEnvironment, MembraneConfig};
use crate::omit::{intracavity_amplitude, OmitParams};
use crate::units::hz_to_angular;

/// Complete physical description of one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Apparatus {
    pub cavity: CavityConfig,
    pub membrane: MembraneConfig,
    pub gas: GasEnvironment,
    /// Membrane position from the cavity centre, m.
    pub membrane_z: f64,
    /// Control input power, W.
    pub power: f64,
    /// Control detuning offset `delta`, rad/s (`Delta = omega_m - delta`).
    pub delta: f64,
}

/// Fixes `G0` so that the OMIT full linewidth equals `fwhm_hz` at `power_w`,
/// in place of the geometric coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinewidthCalibration {
    pub power_w: f64,
    pub fwhm_hz: f64,
}

/// Derived quantities of an [`Apparatus`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApparatusModel {
    pub params: OmitParams,
    pub drive: ControlDrive,
    pub optics: MembraneOptics,
    pub resonance: Resonance,
    /// Geometric coupling `d omega_c / dz` at the membrane position, rad/(s m).
    pub geometric_g0: f64,
    /// Intracavity control amplitude.
    pub a_bar: f64,
}

impl Apparatus {
    pub fn validate(&self) -> Result<()> {
        self.cavity.validate()?;
        self.membrane.validate()?;
        self.gas.validate()?;
        require(self.power.is_finite() && self.power >= 0.0, || {
            format!("control power must be >= 0, got {}", self.power)
        })?;
        require(self.delta.is_finite(), || "delta must be finite".into())
    }

    /// Control laser angular frequency.
    pub fn omega_p(&self) -> f64 {
        hz_to_angular(self.cavity.optical_frequency())
    }

    /// Reduce to OMIT parameters.
    ///
    /// The cavity linewidth comes from the transfer-matrix finesse at the
    /// membrane position and is shared between the ports in the ratio of the
    /// mirror transmissions. Without a calibration the coupling is the
    /// geometric `d omega_c / dz`.
    pub fn model(&self, calibration: Option<LinewidthCalibration>) -> Result<ApparatusModel> {
        self.validate()?;
        let optics = membrane_slab_optics(&self.membrane, self.cavity.wavelength)?;
        let resonance = MembraneCavity::new(&self.cavity, optics, self.membrane_z)?.resonance();
        let gamma = coupled_linewidth(resonance.finesse, &self.cavity)?;
        let eta_c = self.cavity.t1 / (self.cavity.t1 + self.cavity.t2);
        let gamma_m = self.membrane.amplitude_linewidth(&self.gas)?;
        let m_eff = effective_mass(&self.membrane);
        let omega_m = self.membrane.omega_m;
        let base =
            OmitParams::from_linewidth(gamma, eta_c, 0.0, gamma_m, omega_m, self.delta, m_eff)?;
        let geometric_g0 = coupling_constant(self.membrane_z, optics.r_m.norm(), &self.cavity)?;
        let omega_p = self.omega_p();
        let drive = match calibration {
            Some(c) => ControlDrive::calibrated(&base, omega_p, c.power_w, c.fwhm_hz)?,
            None => ControlDrive::new(geometric_g0.abs(), omega_p)?,
        };
        let a_bar = intracavity_amplitude(
            self.power,
            omega_p,
            base.cavity_detuning(),
            base.gamma1(),
            base.gamma(),
        )?;
        let params = drive.params_at(&base, self.power)?;
        Ok(ApparatusModel {
            params,
            drive,
            optics,
            resonance,
            geometric_g0,
            a_bar,
        })
    }
}
