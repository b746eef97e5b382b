//! Run configuration: a sectioned TOML file validated at load time.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use omitlab_core::apparatus::{Apparatus, LinewidthCalibration};
use omitlab_core::cavity::CavityConfig;
use omitlab_core::detection::SignalSource;
use omitlab_core::membrane::{GasEnvironment, MembraneConfig, AIR_MOLAR_MASS};
use omitlab_core::units::{hz_to_angular, mbar_to_pa};

/// Configuration shipped with the binary.
pub const DEFAULT_CONFIG: &str = include_str!("../configs/default.toml");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("validation error: {0}")]
    Validation(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CavitySection {
    pub length_m: f64,
    pub t1: f64,
    pub t2: f64,
    pub wavelength_m: f64,
    pub excess_loss: f64,
    /// Membrane displacement from the cavity centre.
    pub membrane_z_m: f64,
    #[serde(default)]
    pub z_origin_m: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MembraneSection {
    pub side_length_m: f64,
    pub thickness_m: f64,
    pub density_kg_m3: f64,
    pub index_re: f64,
    pub index_im: f64,
    pub resonance_hz: f64,
    pub q_intrinsic: f64,
}

fn default_molar_mass() -> f64 {
    AIR_MOLAR_MASS
}

fn default_max_pressure() -> f64 {
    1e-2
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GasSection {
    pub pressure_mbar: f64,
    pub temperature_k: f64,
    #[serde(default = "default_molar_mass")]
    pub molar_mass_kg_mol: f64,
    /// Upper end of the free-molecular regime.
    #[serde(default = "default_max_pressure")]
    pub max_pressure_mbar: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSection {
    pub power_w: f64,
    #[serde(default)]
    pub detuning_offset_rad_s: f64,
    #[serde(default)]
    pub sweep_powers_w: Vec<f64>,
    /// When both are set, the coupling is calibrated so the OMIT full
    /// linewidth equals `calibration_fwhm_hz` at `calibration_power_w`.
    #[serde(default)]
    pub calibration_power_w: Option<f64>,
    #[serde(default)]
    pub calibration_fwhm_hz: Option<f64>,
}

fn default_min_step() -> f64 {
    0.25
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Sideband offset frequency range, Hz.
    pub start_hz: f64,
    pub stop_hz: f64,
    pub points: usize,
    /// Step of the refined grid around the mechanical resonance.
    #[serde(default = "default_min_step")]
    pub min_step_hz: f64,
}

fn default_samples() -> usize {
    100_000
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub drive_amplitude_v: f64,
    pub modulation_index_rad_per_v: f64,
    pub amplitude_noise_sigma: f64,
    #[serde(default)]
    pub detector_noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

fn default_path() -> String {
    "omitlab-out".into()
}

fn default_format() -> Format {
    Format::Csv
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_path")]
    pub path: String,
    #[serde(default = "default_format")]
    pub format: Format,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            path: default_path(),
            format: default_format(),
        }
    }
}

/// Configuration file as written.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub cavity: CavitySection,
    pub membrane: MembraneSection,
    pub gas: GasSection,
    pub control: ControlSection,
    pub sweep: SweepSection,
    pub noise: NoiseSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Sideband frequency sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub start_hz: f64,
    pub stop_hz: f64,
    pub points: usize,
    pub min_step_hz: f64,
}

/// Noise and lock-in settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub source: SignalSource,
    pub detector_sigma: f64,
    pub samples: usize,
}

/// Fully validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub apparatus: Apparatus,
    pub calibration: Option<LinewidthCalibration>,
    pub sweep_powers_w: Vec<f64>,
    pub sweep: SweepSpec,
    pub noise: NoiseSpec,
    pub output: OutputSection,
    /// Hex SHA-256 of the configuration text.
    pub sha256: String,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn invalid(e: omitlab_core::OmitError) -> ConfigError {
    ConfigError::Validation(e.to_string())
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), ConfigError> {
    if cond {
        Ok(())
    } else {
        Err(ConfigError::Validation(msg()))
    }
}

impl FileConfig {
    fn into_run_config(self, sha256: String) -> Result<(RunConfig, Vec<String>), ConfigError> {
        let c = &self.cavity;
        let mut cavity = CavityConfig::new(c.length_m, c.t1, c.t2, c.wavelength_m, c.excess_loss)
            .map_err(invalid)?;
        cavity.z_origin = c.z_origin_m;
        cavity.validate().map_err(invalid)?;
        check(c.membrane_z_m.abs() < c.length_m / 2.0, || {
            format!(
                "membrane_z_m must lie inside the cavity: |{}| >= {}",
                c.membrane_z_m,
                c.length_m / 2.0
            )
        })?;

        let m = &self.membrane;
        let membrane = MembraneConfig::new(
            m.side_length_m,
            m.thickness_m,
            m.density_kg_m3,
            Complex64::new(m.index_re, m.index_im),
            hz_to_angular(m.resonance_hz),
            m.q_intrinsic,
        )
        .map_err(invalid)?;

        let g = &self.gas;
        let mut gas = GasEnvironment::new(
            mbar_to_pa(g.pressure_mbar),
            g.temperature_k,
            g.molar_mass_kg_mol,
        )
        .map_err(invalid)?;
        gas.max_pressure = mbar_to_pa(g.max_pressure_mbar);
        gas.validate().map_err(invalid)?;

        let ctl = &self.control;
        check(ctl.power_w.is_finite() && ctl.power_w >= 0.0, || {
            format!("control power must be >= 0, got {}", ctl.power_w)
        })?;
        check(
            ctl.sweep_powers_w
                .iter()
                .all(|p| p.is_finite() && *p >= 0.0),
            || "sweep_powers_w entries must be >= 0".into(),
        )?;
        check(ctl.detuning_offset_rad_s.is_finite(), || {
            "detuning offset must be finite".into()
        })?;
        let calibration = match (ctl.calibration_power_w, ctl.calibration_fwhm_hz) {
            (Some(power_w), Some(fwhm_hz)) => {
                check(power_w > 0.0, || {
                    format!("calibration power must be > 0, got {power_w}")
                })?;
                check(fwhm_hz > 0.0, || {
                    format!("calibration linewidth must be > 0, got {fwhm_hz}")
                })?;
                Some(LinewidthCalibration { power_w, fwhm_hz })
            }
            (None, None) => None,
            _ => {
                return Err(ConfigError::Validation(
                    "calibration_power_w and calibration_fwhm_hz must be given together".into(),
                ))
            }
        };

        let s = &self.sweep;
        check(s.points >= 2, || {
            format!("sweep.points must be >= 2, got {}", s.points)
        })?;
        check(s.stop_hz > s.start_hz, || {
            format!("sweep stop {} must exceed start {}", s.stop_hz, s.start_hz)
        })?;
        check(s.start_hz > 0.0, || {
            format!("sweep start must be > 0, got {}", s.start_hz)
        })?;
        check(s.min_step_hz > 0.0, || {
            format!("min_step_hz must be > 0, got {}", s.min_step_hz)
        })?;
        let step = (s.stop_hz - s.start_hz) / (s.points - 1) as f64;
        check(step >= s.min_step_hz, || {
            format!(
                "sweep step {step} Hz is below min_step_hz {}",
                s.min_step_hz
            )
        })?;

        let n = &self.noise;
        let source = SignalSource::new(
            n.drive_amplitude_v,
            n.modulation_index_rad_per_v,
            hz_to_angular(m.resonance_hz),
            n.amplitude_noise_sigma,
            n.seed,
        )
        .map_err(invalid)?;
        check(
            n.detector_noise_sigma.is_finite() && n.detector_noise_sigma >= 0.0,
            || {
                format!(
                    "detector noise must be >= 0, got {}",
                    n.detector_noise_sigma
                )
            },
        )?;
        check(n.samples >= 1000, || {
            format!("noise.samples must be >= 1000, got {}", n.samples)
        })?;

        let apparatus = Apparatus {
            cavity,
            membrane,
            gas,
            membrane_z: c.membrane_z_m,
            power: ctl.power_w,
            delta: ctl.detuning_offset_rad_s,
        };
        apparatus.validate().map_err(invalid)?;

        let mut warnings = cavity.warnings();
        warnings.extend(source.warnings());
        Ok((
            RunConfig {
                apparatus,
                calibration,
                sweep_powers_w: ctl.sweep_powers_w.clone(),
                sweep: SweepSpec {
                    start_hz: s.start_hz,
                    stop_hz: s.stop_hz,
                    points: s.points,
                    min_step_hz: s.min_step_hz,
                },
                noise: NoiseSpec {
                    source,
                    detector_sigma: n.detector_noise_sigma,
                    samples: n.samples,
                },
                output: self.output.clone(),
                sha256,
            },
            warnings,
        ))
    }
}

/// Parse and validate configuration text. Returns the configuration and any
/// non-fatal warnings.
pub fn parse_config(text: &str) -> Result<(RunConfig, Vec<String>), ConfigError> {
    let file: FileConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
        message: e.message().to_string(),
    })?;
    let sha256 = hex::encode(Sha256::digest(text.as_bytes()));
    file.into_run_config(sha256)
}

/// Read, parse and validate a configuration file.
pub fn load_config(path: &Path) -> Result<(RunConfig, Vec<String>), ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}
