//! Dip linewidth extraction, Lorentzian fitting and the linewidth-versus-power
//! law of the OMIT feature.

use serde::Serialize;

use crate::cavity::{bisect, golden_section_max};
use crate::error::{require, OmitError, Result};
use crate::linalg::{inverse3_real, solve3_real};
use crate::omit::{intracavity_photon_number, optical_damping, OmitParams};
use crate::units::{angular_to_hz, HBAR};

/// Fewest samples that must lie below the half-depth level.
pub const MIN_IN_DIP_SAMPLES: usize = 20;
/// Iteration cap of the Levenberg-Marquardt fit.
pub const MAX_FIT_ITERATIONS: usize = 200;
/// Fewest samples accepted by [`fit_lorentzian`].
pub const MIN_FIT_SAMPLES: usize = 50;

struct Dip {
    min_index: usize,
    level: f64,
    in_dip: usize,
    left: usize,
    right: usize,
}

/// Locate the dip minimum and the sample intervals holding its half-depth
/// crossings. The baseline of a normalized `|t_n|²` curve is 1.
fn locate_dip(freq: &[f64], y: &[f64]) -> Result<Dip> {
    require(freq.len() == y.len(), || {
        format!("grid has {} points, data {}", freq.len(), y.len())
    })?;
    require(freq.len() >= 3, || "need at least 3 samples".into())?;
    require(freq.windows(2).all(|w| w[1] > w[0]), || {
        "frequency grid must be strictly increasing".into()
    })?;
    require(y.iter().all(|v| v.is_finite()), || {
        "samples must be finite".into()
    })?;
    let min_index = y
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let level = 0.5 * (1.0 + y[min_index]);
    let in_dip = y.iter().filter(|&&v| v < level).count();
    if in_dip < MIN_IN_DIP_SAMPLES {
        return Err(OmitError::DipNotResolved {
            in_dip,
            required: MIN_IN_DIP_SAMPLES,
        });
    }
    let left = (0..min_index).rev().find(|&i| y[i] >= level);
    let right = (min_index + 1..y.len()).find(|&i| y[i] >= level);
    match (left, right) {
        (Some(left), Some(right)) => Ok(Dip {
            min_index,
            level,
            in_dip,
            left,
            right,
        }),
        _ => Err(OmitError::Domain(
            "dip is not enclosed by the grid on both sides".into(),
        )),
    }
}

fn interpolate(f0: f64, y0: f64, f1: f64, y1: f64, level: f64) -> f64 {
    f0 + (level - y0) * (f1 - f0) / (y1 - y0)
}

/// Full width (Hz) between the half-depth crossings of a sampled normalized
/// `|t_n|²` dip, using linear interpolation between samples.
pub fn extract_fwhm(freq_hz: &[f64], tn_sq: &[f64]) -> Result<f64> {
    let d = locate_dip(freq_hz, tn_sq)?;
    let lo = interpolate(
        freq_hz[d.left],
        tn_sq[d.left],
        freq_hz[d.left + 1],
        tn_sq[d.left + 1],
        d.level,
    );
    let hi = interpolate(
        freq_hz[d.right - 1],
        tn_sq[d.right - 1],
        freq_hz[d.right],
        tn_sq[d.right],
        d.level,
    );
    Ok(hi - lo)
}

/// As [`extract_fwhm`], but with the minimum and both crossings refined on
/// the underlying curve `eval` (golden section and bisection inside the
/// bracketing samples).
pub fn extract_fwhm_refined(
    freq_hz: &[f64],
    tn_sq: &[f64],
    eval: impl Fn(f64) -> f64,
) -> Result<f64> {
    let d = locate_dip(freq_hz, tn_sq)?;
    let lo_i = d.min_index.saturating_sub(1);
    let hi_i = (d.min_index + 1).min(freq_hz.len() - 1);
    let f_min = golden_section_max(|f| -eval(f), freq_hz[lo_i], freq_hz[hi_i], 0.0);
    let level = 0.5 * (1.0 + eval(f_min).min(tn_sq[d.min_index]));
    let g = |f: f64| eval(f) - level;
    let last = freq_hz.len() - 1;
    // Widen each bracket by one sample so a crossing that falls exactly on a
    // grid point stays strictly inside it.
    let crossing = |outer: usize, inner: f64| {
        let a = freq_hz[outer];
        if g(a) > 0.0 && g(inner) <= 0.0 {
            Ok(bisect(g, a, inner, 0.0))
        } else {
            Err(OmitError::Domain(
                "half-depth crossing is not bracketed by the samples".into(),
            ))
        }
    };
    let lo = crossing(d.left.saturating_sub(1), freq_hz[d.left + 1].min(f_min))?;
    let hi = crossing((d.right + 1).min(last), freq_hz[d.right - 1].max(f_min))?;
    log::debug!("fwhm refined with {} in-dip samples", d.in_dip);
    Ok(hi - lo)
}

/// Result of a Lorentzian dip fit `y = 1 - D h² / ((f - f0)² + h²)`, `h = FWHM/2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LorentzFit {
    pub center_hz: f64,
    pub fwhm_hz: f64,
    pub depth: f64,
    /// RMS of the final residuals.
    pub residual_rms: f64,
    /// One-sigma uncertainties from the residual-scaled covariance; infinite
    /// when the normal matrix is singular.
    pub center_err_hz: f64,
    pub fwhm_err_hz: f64,
    pub depth_err: f64,
    pub iterations: usize,
    /// Set when the dip is not significant or the width is unconstrained.
    pub degenerate: bool,
}

fn model(theta: &[f64; 3], u: f64) -> (f64, [f64; 3]) {
    let [d, u0, w] = *theta;
    let h = 0.5 * w;
    let dx = u - u0;
    let q = dx * dx + h * h;
    let l = h * h / q;
    let jac = [
        -l,
        -2.0 * d * h * h * dx / (q * q),
        -d * h * dx * dx / (q * q),
    ];
    (1.0 - d * l, jac)
}

fn cost(theta: &[f64; 3], u: &[f64], y: &[f64]) -> f64 {
    u.iter()
        .zip(y)
        .map(|(&ui, &yi)| (yi - model(theta, ui).0).powi(2))
        .sum()
}

fn normal_equations(theta: &[f64; 3], u: &[f64], y: &[f64]) -> ([[f64; 3]; 3], [f64; 3]) {
    let mut jtj = [[0.0; 3]; 3];
    let mut jtr = [0.0; 3];
    for (&ui, &yi) in u.iter().zip(y) {
        let (m, j) = model(theta, ui);
        let r = yi - m;
        for a in 0..3 {
            jtr[a] += j[a] * r;
            for b in 0..3 {
                jtj[a][b] += j[a] * j[b];
            }
        }
    }
    (jtj, jtr)
}

/// Initial guess from the sample minimum and half-depth crossings.
fn initial_guess(freq: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let span = freq[freq.len() - 1] - freq[0];
    let (imin, ymin) = y
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, &v)| (i, v))
        .unwrap_or((0, 1.0));
    let level = 0.5 * (1.0 + ymin);
    let left = (0..imin).rev().find(|&i| y[i] >= level).map(|i| freq[i]);
    let right = (imin + 1..y.len())
        .find(|&i| y[i] >= level)
        .map(|i| freq[i]);
    let width = match (left, right) {
        (Some(l), Some(r)) if r > l => r - l,
        _ => span / 10.0,
    };
    ((1.0 - ymin).max(0.0), freq[imin], width)
}

/// Least-squares Lorentzian dip fit by Levenberg-Marquardt.
///
/// Needs at least 50 samples spanning three initial linewidths. Fails with
/// `NoConvergence` (carrying the last iterate) after 200 iterations.
pub fn fit_lorentzian(freq_hz: &[f64], y: &[f64]) -> Result<LorentzFit> {
    require(freq_hz.len() == y.len(), || {
        format!("grid has {} points, data {}", freq_hz.len(), y.len())
    })?;
    require(freq_hz.len() >= MIN_FIT_SAMPLES, || {
        format!(
            "need at least {MIN_FIT_SAMPLES} samples, got {}",
            freq_hz.len()
        )
    })?;
    require(freq_hz.windows(2).all(|w| w[1] > w[0]), || {
        "frequency grid must be strictly increasing".into()
    })?;
    require(y.iter().all(|v| v.is_finite()), || {
        "samples must be finite".into()
    })?;
    let (d0, f_ref, w0) = initial_guess(freq_hz, y);
    let span = freq_hz[freq_hz.len() - 1] - freq_hz[0];
    require(span >= 3.0 * w0, || {
        format!("samples span {span} Hz, less than three linewidths of {w0} Hz")
    })?;

    // Centre on the initial guess so that small offsets are well resolved.
    let u: Vec<f64> = freq_hz.iter().map(|f| f - f_ref).collect();
    let mut theta = [d0, 0.0, w0];
    let mut s = cost(&theta, &u, y);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_FIT_ITERATIONS {
        iterations += 1;
        let (jtj, jtr) = normal_equations(&theta, &u, y);
        let mut improved = false;
        while lambda < 1e16 {
            let mut a = jtj;
            for (k, row) in a.iter_mut().enumerate() {
                row[k] += lambda * jtj[k][k].max(f64::MIN_POSITIVE);
            }
            let Some(step) = solve3_real(&a, &jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial = [theta[0] + step[0], theta[1] + step[1], theta[2] + step[2]];
            let st = cost(&trial, &u, y);
            if st.is_finite() && st <= s {
                let rel_step = (0..3)
                    .map(|k| step[k].abs() / (trial[k].abs() + 1e-300))
                    .fold(0.0, f64::max);
                let small = s - st <= 1e-15 * s || rel_step < 1e-12;
                theta = trial;
                s = st;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                converged = small;
                break;
            }
            lambda *= 10.0;
        }
        if !improved || converged || s == 0.0 {
            converged = true;
            break;
        }
    }

    let n = y.len() as f64;
    let (jtj, _) = normal_equations(&theta, &u, y);
    let sigma2 = s / (n - 3.0);
    let errs = match inverse3_real(&jtj) {
        Some(inv) => [0, 1, 2].map(|k| (sigma2 * inv[k][k]).abs().sqrt()),
        None => [f64::INFINITY; 3],
    };
    let fwhm = theta[2].abs();
    let degenerate = !(theta[0] > 3.0 * errs[0]) || !errs[2].is_finite() || errs[2] > fwhm;
    let fit = LorentzFit {
        center_hz: f_ref + theta[1],
        fwhm_hz: fwhm,
        depth: theta[0],
        residual_rms: (s / n).sqrt(),
        center_err_hz: errs[1],
        fwhm_err_hz: errs[2],
        depth_err: errs[0],
        iterations,
        degenerate,
    };
    if !converged {
        return Err(OmitError::NoConvergence {
            iterations,
            last: Box::new(fit),
        });
    }
    Ok(fit)
}

/// Control-beam drive: single-photon coupling and laser frequency. With the
/// cavity rates of an [`OmitParams`] this fixes `Gbar0` at any input power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ControlDrive {
    /// Single-photon coupling `G0`, rad/(s m).
    pub g0: f64,
    /// Control laser angular frequency, rad/s.
    pub omega_p: f64,
}

impl ControlDrive {
    pub fn new(g0: f64, omega_p: f64) -> Result<Self> {
        require(g0.is_finite() && g0 >= 0.0, || {
            format!("G0 must be >= 0, got {g0}")
        })?;
        require(omega_p.is_finite() && omega_p > 0.0, || {
            format!("omega_p must be > 0, got {omega_p}")
        })?;
        Ok(Self { g0, omega_p })
    }

    /// Choose `g0` so that the OMIT full linewidth `(gamma_m + Gamma_opt)/pi`
    /// equals `fwhm_hz` at `power`.
    pub fn calibrated(base: &OmitParams, omega_p: f64, power: f64, fwhm_hz: f64) -> Result<Self> {
        require(power > 0.0, || {
            format!("calibration power must be > 0, got {power}")
        })?;
        let floor = angular_to_hz(2.0 * base.gamma_m());
        require(fwhm_hz > floor, || {
            format!(
                "target linewidth {fwhm_hz} Hz is below the bare mechanical linewidth {floor} Hz"
            )
        })?;
        let gamma_opt = std::f64::consts::PI * fwhm_hz - base.gamma_m();
        let n = intracavity_photon_number(
            power,
            omega_p,
            base.cavity_detuning(),
            base.gamma1(),
            base.gamma(),
        )?;
        let g0 =
            (gamma_opt * 2.0 * base.m_eff() * base.omega_m() * base.gamma() / (HBAR * n)).sqrt();
        Self::new(g0, omega_p)
    }

    /// `Gbar0 = G0 |a_bar|` at `power`.
    pub fn g_bar(&self, base: &OmitParams, power: f64) -> Result<f64> {
        let n = intracavity_photon_number(
            power,
            self.omega_p,
            base.cavity_detuning(),
            base.gamma1(),
            base.gamma(),
        )?;
        Ok(self.g0 * n.sqrt())
    }

    /// `Gamma_opt` at `power`, computed from the photon number so that it is
    /// exactly proportional to the power.
    pub fn gamma_opt(&self, base: &OmitParams, power: f64) -> Result<f64> {
        let n = intracavity_photon_number(
            power,
            self.omega_p,
            base.cavity_detuning(),
            base.gamma1(),
            base.gamma(),
        )?;
        Ok(HBAR * self.g0 * self.g0 * n / (2.0 * base.m_eff() * base.omega_m() * base.gamma()))
    }

    /// Parameters with the coupling set by `power`.
    pub fn params_at(&self, base: &OmitParams, power: f64) -> Result<OmitParams> {
        base.with_gamma_opt(self.gamma_opt(base, power)?)
    }
}

/// One row of the linewidth-versus-power table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinewidthPoint {
    pub power_w: f64,
    /// rad/s
    pub gamma_opt: f64,
    pub fwhm_hz: f64,
    /// `|t_n(omega_m)| = gamma_m / (gamma_m + Gamma_opt)`.
    pub dip_depth: f64,
}

/// Points per side of the synthetic curve used to measure each linewidth.
const SWEEP_HALF_POINTS: usize = 1200;

/// Linewidth measured on a closed-form `|t_n|²` curve.
pub fn closed_form_fwhm(p: &OmitParams) -> Result<f64> {
    let gm = p.gamma_m();
    let total = gm + optical_damping(p);
    // x in Hz measured from omega_m keeps the crossings free of cancellation.
    let eval = |x_hz: f64| {
        let x = std::f64::consts::TAU * x_hz;
        (x * x + gm * gm) / (x * x + total * total)
    };
    let half_span = 6.0 * angular_to_hz(2.0 * total);
    let n = 2 * SWEEP_HALF_POINTS + 1;
    let grid: Vec<f64> = (0..n)
        .map(|i| half_span * (i as f64 - SWEEP_HALF_POINTS as f64) / SWEEP_HALF_POINTS as f64)
        .collect();
    let values: Vec<f64> = grid.iter().map(|&x| eval(x)).collect();
    extract_fwhm_refined(&grid, &values, eval)
}

/// OMIT linewidth and dip depth for each control power.
pub fn linewidth_vs_power_sweep(
    base: &OmitParams,
    drive: &ControlDrive,
    powers: &[f64],
) -> Result<Vec<LinewidthPoint>> {
    powers
        .iter()
        .map(|&power| {
            let p = drive.params_at(base, power)?;
            let gamma_opt = optical_damping(&p);
            let fwhm_hz = if gamma_opt == 0.0 {
                angular_to_hz(2.0 * p.gamma_m())
            } else {
                closed_form_fwhm(&p)?
            };
            Ok(LinewidthPoint {
                power_w: power,
                gamma_opt,
                fwhm_hz,
                dip_depth: p.gamma_m() / (p.gamma_m() + gamma_opt),
            })
        })
        .collect()
}
