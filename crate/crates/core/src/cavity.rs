//! Membrane-in-the-middle cavity optics.
//!
//! The cavity is modelled as a 1-D cascade of transfer matrices:
//! input mirror, free space `L/2 + z`, membrane slab, free space `L/2 - z`,
//! output mirror. `z` is the membrane displacement from the cavity midpoint.
//! Laser detunings are ordinary frequencies (Hz) relative to `c / lambda`.

use std::f64::consts::{PI, TAU};
use std::ops::Mul;

use log::warn;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{require, OmitError, Result};
use crate::membrane::MembraneConfig;
use crate::units::SPEED_OF_LIGHT;

/// Points per free spectral range in the coarse resonance search.
pub const COARSE_POINTS_PER_FSR: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityConfig {
    /// Mirror separation, m.
    pub length: f64,
    /// Input mirror power transmission.
    pub t1: f64,
    /// Output mirror power transmission.
    pub t2: f64,
    /// Optical wavelength, m.
    pub wavelength: f64,
    /// Extra round-trip power loss, split equally between the mirrors.
    pub excess_loss: f64,
    /// Membrane position (m) at which the resonance formula's cosine
    /// argument is zero.
    pub z_origin: f64,
}

impl CavityConfig {
    pub fn new(length: f64, t1: f64, t2: f64, wavelength: f64, excess_loss: f64) -> Result<Self> {
        let cfg = Self {
            length,
            t1,
            t2,
            wavelength,
            excess_loss,
            z_origin: 0.0,
        };
        cfg.validate()?;
        for w in cfg.warnings() {
            warn!("{w}");
        }
        Ok(cfg)
    }

    /// 85 mm cavity, T1 = 245.1 ppm, T2 = 16.93 ppm, 1064 nm, 18.4 ppm
    /// excess loss (empty-cavity finesse 22400).
    pub fn reference() -> Self {
        Self {
            length: 0.085,
            t1: 245.1e-6,
            t2: 16.93e-6,
            wavelength: 1064e-9,
            excess_loss: 18.4e-6,
            z_origin: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        require(self.t1 > 0.0 && self.t1 < 1.0, || {
            format!("T1 out of (0,1): {}", self.t1)
        })?;
        require(self.t2 > 0.0 && self.t2 < 1.0, || {
            format!("T2 out of (0,1): {}", self.t2)
        })?;
        require(self.length > 0.0, || {
            format!("cavity length must be > 0, got {}", self.length)
        })?;
        require(self.wavelength > 0.0, || {
            format!("wavelength must be > 0, got {}", self.wavelength)
        })?;
        require(self.excess_loss >= 0.0, || {
            format!("excess_loss must be >= 0, got {}", self.excess_loss)
        })?;
        require(
            self.t1 + self.excess_loss / 2.0 < 1.0 && self.t2 + self.excess_loss / 2.0 < 1.0,
            || "mirror transmission plus loss share exceeds 1".to_string(),
        )
    }

    /// Non-fatal configuration remarks.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.t1 <= self.t2 {
            out.push(format!(
                "cavity is not over-coupled (T1 = {} <= T2 = {})",
                self.t1, self.t2
            ));
        }
        out
    }

    /// Carrier optical frequency `c / lambda`, Hz.
    pub fn optical_frequency(&self) -> f64 {
        SPEED_OF_LIGHT / self.wavelength
    }

    /// Finesse of the empty cavity in the high-finesse limit,
    /// `2 pi / (T1 + T2 + loss)`.
    pub fn empty_finesse_estimate(&self) -> f64 {
        TAU / (self.t1 + self.t2 + self.excess_loss)
    }

    /// Rough linewidth (FWHM, Hz) used for grid checks and search tolerances.
    pub fn linewidth_estimate(&self) -> f64 {
        free_spectral_range(self) / self.empty_finesse_estimate()
    }
}

/// Mirror coupling rates `(c T1 / 4L, c T2 / 4L)`, rad/s.
pub fn mirror_coupling_rates(cfg: &CavityConfig) -> (f64, f64) {
    let k = SPEED_OF_LIGHT / (4.0 * cfg.length);
    (k * cfg.t1, k * cfg.t2)
}

/// Free spectral range `c / 2L`, Hz.
pub fn free_spectral_range(cfg: &CavityConfig) -> f64 {
    SPEED_OF_LIGHT / (2.0 * cfg.length)
}

/// Coupled-cavity amplitude linewidth `pi f_FSR / F`, rad/s.
pub fn coupled_linewidth(finesse: f64, cfg: &CavityConfig) -> Result<f64> {
    require(finesse > 0.0, || {
        format!("finesse must be > 0, got {finesse}")
    })?;
    Ok(PI * free_spectral_range(cfg) / finesse)
}

/// Amplitude reflection/transmission of the membrane at normal incidence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MembraneOptics {
    pub r_m: Complex64,
    pub t_m: Complex64,
    /// Absorbed power fraction per pass.
    pub absorption: f64,
}

impl MembraneOptics {
    /// A membrane that is not there.
    pub fn transparent() -> Self {
        Self {
            r_m: Complex64::new(0.0, 0.0),
            t_m: Complex64::new(1.0, 0.0),
            absorption: 0.0,
        }
    }
}

/// Thin dielectric slab at normal incidence.
///
/// With `r0 = (1-n)/(1+n)` and `beta = 2 pi n d / lambda`:
/// `r = r0 (1 - e^{2i beta}) / (1 - r0² e^{2i beta})`,
/// `t = (1 - r0²) e^{i beta} / (1 - r0² e^{2i beta})`.
pub fn membrane_slab_optics(mem: &MembraneConfig, wavelength: f64) -> Result<MembraneOptics> {
    require(mem.thickness > 0.0, || {
        "membrane thickness must be > 0".into()
    })?;
    require(mem.refractive_index.im >= 0.0, || {
        "membrane Im(n) must be >= 0".into()
    })?;
    let n = mem.refractive_index;
    let one = Complex64::new(1.0, 0.0);
    let r0 = (one - n) / (one + n);
    let beta = n * (TAU * mem.thickness / wavelength);
    let e1 = (Complex64::i() * beta).exp();
    let e2 = e1 * e1;
    let denom = one - r0 * r0 * e2;
    let r_m = r0 * (one - e2) / denom;
    let t_m = (one - r0 * r0) * e1 / denom;
    let absorption = 1.0 - r_m.norm_sqr() - t_m.norm_sqr();
    Ok(MembraneOptics {
        r_m,
        t_m,
        absorption,
    })
}

fn check_reflectivity(r: f64) -> Result<()> {
    if r.abs() < 1.0 {
        Ok(())
    } else {
        Err(OmitError::Domain(format!("|r_m| must be < 1, got {r}")))
    }
}

/// Cavity resonance vs membrane position, `(c/L) arccos(|r_m| cos(4 pi z / lambda))`, rad/s.
pub fn cavity_resonance_shift(z: f64, r_m_mag: f64, cfg: &CavityConfig) -> Result<f64> {
    check_reflectivity(r_m_mag)?;
    let phase = 4.0 * PI * (z - cfg.z_origin) / cfg.wavelength;
    Ok(SPEED_OF_LIGHT / cfg.length * (r_m_mag.abs() * phase.cos()).acos())
}

/// Linear optomechanical coupling `G0 = d omega_c / dz`, rad/(s·m).
pub fn coupling_constant(z: f64, r_m_mag: f64, cfg: &CavityConfig) -> Result<f64> {
    check_reflectivity(r_m_mag)?;
    let r = r_m_mag.abs();
    let k4 = 4.0 * PI / cfg.wavelength;
    let phase = k4 * (z - cfg.z_origin);
    let c = r * phase.cos();
    Ok(SPEED_OF_LIGHT / cfg.length * r * k4 * phase.sin() / (1.0 - c * c).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Mat2([[Complex64; 2]; 2]);

impl Mat2 {
    /// Transfer matrix of a reciprocal element with transmission `t` and
    /// reflections `r_left`, `r_right`, mapping right-side (forward,
    /// backward) amplitudes to the left side.
    fn interface(r_left: Complex64, r_right: Complex64, t: Complex64) -> Self {
        let inv = 1.0 / t;
        Mat2([
            [inv, -r_right * inv],
            [r_left * inv, (t * t - r_left * r_right) * inv],
        ])
    }

    fn propagation(phase: f64) -> Self {
        let e = Complex64::from_polar(1.0, phase);
        Mat2([
            [e.conj(), Complex64::new(0.0, 0.0)],
            [Complex64::new(0.0, 0.0), e],
        ])
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        let a = self.0;
        let b = o.0;
        Mat2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }
}

/// A cavity with the membrane at a fixed position, ready for repeated
/// transmission evaluations.
#[derive(Debug, Clone, Copy)]
pub struct MembraneCavity {
    cfg: CavityConfig,
    optics: MembraneOptics,
    z: f64,
    mirror1: Mat2,
    mirror2: Mat2,
    slab: Mat2,
    // carrier propagation phases (mod 2 pi) of the two sub-cavities
    phase_left: f64,
    phase_right: f64,
}

impl MembraneCavity {
    pub fn new(cfg: &CavityConfig, optics: MembraneOptics, z: f64) -> Result<Self> {
        cfg.validate()?;
        require(z.abs() < cfg.length / 2.0, || {
            format!("membrane z = {z} outside (-L/2, L/2)")
        })?;
        let mirror = |t_pow: f64| {
            let r = (1.0 - t_pow - cfg.excess_loss / 2.0).sqrt();
            let r = Complex64::new(r, 0.0);
            Mat2::interface(r, -r, Complex64::new(t_pow.sqrt(), 0.0))
        };
        let k0 = TAU / cfg.wavelength;
        Ok(Self {
            cfg: *cfg,
            optics,
            z,
            mirror1: mirror(cfg.t1),
            mirror2: mirror(cfg.t2),
            slab: Mat2::interface(optics.r_m, optics.r_m, optics.t_m),
            phase_left: ((k0 * cfg.length / 2.0).rem_euclid(TAU) + k0 * z).rem_euclid(TAU),
            phase_right: ((k0 * cfg.length / 2.0).rem_euclid(TAU) - k0 * z).rem_euclid(TAU),
        })
    }

    /// Cavity without a membrane.
    pub fn empty(cfg: &CavityConfig) -> Result<Self> {
        Self::new(cfg, MembraneOptics::transparent(), 0.0)
    }

    pub fn config(&self) -> &CavityConfig {
        &self.cfg
    }

    pub fn optics(&self) -> &MembraneOptics {
        &self.optics
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    /// Complex amplitude transmission at a laser detuning (Hz).
    pub fn amplitude(&self, detuning_hz: f64) -> Complex64 {
        // The membrane offset enters at the carrier wavenumber only; its
        // detuning correction (dk z, below 1e-4 rad for sub-micron z) would
        // otherwise break the lambda/2 periodicity of the coupled cavity.
        let detuning_phase = TAU * detuning_hz / SPEED_OF_LIGHT * self.cfg.length / 2.0;
        let left = Mat2::propagation(self.phase_left + detuning_phase);
        let right = Mat2::propagation(self.phase_right + detuning_phase);
        let total = self.mirror1 * left * self.slab * right * self.mirror2;
        1.0 / total.0[0][0]
    }

    /// Power transmission at a laser detuning (Hz).
    pub fn transmission(&self, detuning_hz: f64) -> f64 {
        self.amplitude(detuning_hz).norm_sqr()
    }

    /// Locate the transmission resonance in `[0, FSR)` and measure its width.
    pub fn resonance(&self) -> Resonance {
        let fsr = free_spectral_range(&self.cfg);
        let step = fsr / COARSE_POINTS_PER_FSR as f64;
        let coarse = (0..COARSE_POINTS_PER_FSR)
            .map(|i| {
                let x = i as f64 * step;
                (x, self.transmission(x))
            })
            .fold((0.0, f64::NEG_INFINITY), |best, p| {
                if p.1 > best.1 {
                    p
                } else {
                    best
                }
            });

        let width = self.cfg.linewidth_estimate();
        let center = golden_section_max(
            |x| self.transmission(x),
            coarse.0 - step,
            coarse.0 + step,
            1e-7 * width,
        );
        let peak = self.transmission(center);
        let half = 0.5 * peak;
        let f = |x: f64| self.transmission(x) - half;

        let edge = |dir: f64| {
            let mut inner = center;
            let mut outer = center + dir * 0.25 * width;
            let mut n = 0;
            while f(outer) > 0.0 && n < 200 {
                inner = outer;
                outer += dir * 0.25 * width;
                n += 1;
            }
            bisect(f, inner, outer, 1e-10 * width)
        };
        let lo = edge(-1.0);
        let hi = edge(1.0);
        let fwhm = hi - lo;
        Resonance {
            detuning_hz: center.rem_euclid(fsr),
            peak_transmission: peak,
            fwhm_hz: fwhm,
            finesse: fsr / fwhm,
        }
    }
}

/// A located cavity resonance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Resonance {
    /// Laser detuning of the transmission peak, in `[0, FSR)`, Hz.
    pub detuning_hz: f64,
    pub peak_transmission: f64,
    /// Full width at half maximum, Hz.
    pub fwhm_hz: f64,
    pub finesse: f64,
}

pub(crate) fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= tol || c >= d {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Root of `f` between `a` and `b` (which must bracket a sign change).
pub(crate) fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Power transmission on a grid of laser detunings (Hz).
///
/// The grid must resolve the cavity line: every spacing has to be at most a
/// tenth of the estimated linewidth.
pub fn transmission_spectrum(
    cfg: &CavityConfig,
    mem: &MembraneConfig,
    z: f64,
    detunings_hz: &[f64],
) -> Result<Vec<f64>> {
    let optics = membrane_slab_optics(mem, cfg.wavelength)?;
    spectrum_with_optics(cfg, optics, z, detunings_hz)
}

/// [`transmission_spectrum`] for explicit membrane optics (e.g. no membrane).
pub fn spectrum_with_optics(
    cfg: &CavityConfig,
    optics: MembraneOptics,
    z: f64,
    detunings_hz: &[f64],
) -> Result<Vec<f64>> {
    let limit = cfg.linewidth_estimate() / 10.0;
    let spacing = detunings_hz
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(0.0, f64::max);
    if spacing > limit {
        return Err(OmitError::GridTooCoarse { spacing, limit });
    }
    let cavity = MembraneCavity::new(cfg, optics, z)?;
    Ok(detunings_hz
        .iter()
        .map(|&d| cavity.transmission(d))
        .collect())
}

/// Coupled-cavity finesse at each membrane position, evaluated in parallel.
pub fn finesse_scan(
    cfg: &CavityConfig,
    mem: &MembraneConfig,
    z_grid: &[f64],
) -> Result<Vec<Resonance>> {
    let optics = membrane_slab_optics(mem, cfg.wavelength)?;
    z_grid
        .par_iter()
        .map(|&z| MembraneCavity::new(cfg, optics, z).map(|c| c.resonance()))
        .collect()
}
