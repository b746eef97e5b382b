//! Measurement chain: noisy BEOM sideband, OMIT transmission, photodetector
//! beat, lock-in demodulation and Monte Carlo noise ellipses.
//!
//! Quadratures are measured relative to the control field, which sets the
//! phase origin. Only the upper sideband `omega_p + Omega` is carried; the
//! lower one is reflected by the cavity.

use std::f64::consts::{PI, TAU};

use log::warn;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{require, OmitError, Result};
use crate::omit::{phase_response, rotation_angle, transmissivity, OmitParams};
use crate::phase::wrap_to_half_pi;
use crate::rng::stream_rng;

/// Largest modulation depth `beta A` treated as small.
pub const SMALL_MODULATION_LIMIT: f64 = 0.1;
/// Samples drawn per parallel Monte Carlo task.
const CHUNK: usize = 4096;
/// Fewest samples accepted by [`ellipse_monte_carlo`].
pub const MIN_MC_SAMPLES: usize = 1000;

/// Electro-optic sideband source driven with a noisy voltage amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignalSource {
    /// Drive amplitude `A`, V.
    pub drive_amplitude: f64,
    /// Modulation index `beta`, rad/V.
    pub modulation_index: f64,
    /// Drive (sideband offset) frequency, rad/s.
    pub drive_frequency: f64,
    /// Relative standard deviation of the drive amplitude.
    pub amplitude_noise_sigma: f64,
    pub seed: u64,
}

impl SignalSource {
    pub fn new(
        drive_amplitude: f64,
        modulation_index: f64,
        drive_frequency: f64,
        amplitude_noise_sigma: f64,
        seed: u64,
    ) -> Result<Self> {
        let src = Self {
            drive_amplitude,
            modulation_index,
            drive_frequency,
            amplitude_noise_sigma,
            seed,
        };
        src.validate()?;
        if src.modulation_depth() > SMALL_MODULATION_LIMIT {
            warn!(
                "modulation depth {} rad exceeds the small-modulation limit",
                src.modulation_depth()
            );
        }
        Ok(src)
    }

    pub fn validate(&self) -> Result<()> {
        require(
            self.drive_amplitude.is_finite() && self.drive_amplitude >= 0.0,
            || format!("drive amplitude must be >= 0, got {}", self.drive_amplitude),
        )?;
        require(
            self.modulation_index.is_finite() && self.modulation_index >= 0.0,
            || {
                format!(
                    "modulation index must be >= 0, got {}",
                    self.modulation_index
                )
            },
        )?;
        require(self.drive_frequency.is_finite(), || {
            "drive frequency must be finite".into()
        })?;
        require(
            self.amplitude_noise_sigma.is_finite() && self.amplitude_noise_sigma >= 0.0,
            || {
                format!(
                    "amplitude noise sigma must be >= 0, got {}",
                    self.amplitude_noise_sigma
                )
            },
        )
    }

    /// `beta A`, rad.
    pub fn modulation_depth(&self) -> f64 {
        self.modulation_index * self.drive_amplitude
    }

    pub fn warnings(&self) -> Vec<String> {
        if self.modulation_depth() > SMALL_MODULATION_LIMIT {
            vec![format!(
                "modulation depth {} rad exceeds {SMALL_MODULATION_LIMIT} rad",
                self.modulation_depth()
            )]
        } else {
            Vec::new()
        }
    }

    pub fn with_frequency(self, drive_frequency: f64) -> Self {
        Self {
            drive_frequency,
            ..self
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// One sideband amplitude `beta (A + dA) |a_c|`, `dA ~ N(0, sigma A)`, drawn
/// from `rng`. The phase is zero relative to the control.
pub fn sample_signal_field<R: Rng + ?Sized>(
    src: &SignalSource,
    control_amplitude: f64,
    rng: &mut R,
) -> Complex64 {
    let noise = if src.amplitude_noise_sigma > 0.0 {
        let z: f64 = rng.sample(StandardNormal);
        src.amplitude_noise_sigma * src.drive_amplitude * z
    } else {
        0.0
    };
    Complex64::new(
        src.modulation_index * (src.drive_amplitude + noise) * control_amplitude,
        0.0,
    )
}

/// First sideband realization of the source's seed.
pub fn generate_signal_field(src: &SignalSource, control_amplitude: f64) -> Complex64 {
    sample_signal_field(src, control_amplitude, &mut stream_rng(src.seed, 0))
}

/// `n` sideband realizations of the source's seed, drawn in parallel
/// chunks with one stream per chunk.
pub fn generate_signal_fields(
    src: &SignalSource,
    control_amplitude: f64,
    n: usize,
) -> Vec<Complex64> {
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = stream_rng(src.seed, c as u64);
            let len = CHUNK.min(n - c * CHUNK);
            (0..len)
                .map(|_| sample_signal_field(src, control_amplitude, &mut rng))
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Gaussian noise ellipse in the (amplitude, phase) quadrature plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseEllipse {
    /// `[[c_xx, c_xy], [c_xy, c_yy]]` over (Re, Im).
    pub covariance: [[f64; 2]; 2],
    pub mean_phasor: Complex64,
    /// Orientation of the major axis, in `(-pi/2, pi/2]`.
    pub angle: f64,
    pub semi_major: f64,
    pub semi_minor: f64,
    pub n_samples: usize,
}

impl NoiseEllipse {
    /// Diagonalize a covariance matrix. A zero matrix yields a flagged
    /// zero ellipse with angle 0.
    pub fn from_covariance(
        covariance: [[f64; 2]; 2],
        mean_phasor: Complex64,
        n_samples: usize,
    ) -> Result<Self> {
        let [[cxx, cxy], [cyx, cyy]] = covariance;
        require(covariance.iter().flatten().all(|v| v.is_finite()), || {
            "covariance must be finite".into()
        })?;
        require((cxy - cyx).abs() <= 1e-12 * (cxx.abs() + cyy.abs()), || {
            "covariance must be symmetric".into()
        })?;
        let trace = cxx + cyy;
        let split = (cxx - cyy).hypot(2.0 * cxy);
        let major = 0.5 * (trace + split);
        let minor = 0.5 * (trace - split);
        let scale = major.abs().max(f64::MIN_POSITIVE);
        require(cxx >= 0.0 && cyy >= 0.0 && minor >= -1e-12 * scale, || {
            format!("covariance is not positive semi-definite (eigenvalues {major}, {minor})")
        })?;
        let angle = if split == 0.0 {
            0.0
        } else {
            wrap_to_half_pi(0.5 * (2.0 * cxy).atan2(cxx - cyy))
        };
        Ok(Self {
            covariance,
            mean_phasor,
            angle,
            semi_major: major.max(0.0).sqrt(),
            semi_minor: minor.max(0.0).sqrt(),
            n_samples,
        })
    }

    /// Amplitude-quadrature ellipse with standard deviations `major` along
    /// `angle` and `minor` across it.
    pub fn from_axes(angle: f64, major: f64, minor: f64, mean_phasor: Complex64) -> Result<Self> {
        require(major >= minor && minor >= 0.0, || {
            format!("axes must satisfy major >= minor >= 0: {major}, {minor}")
        })?;
        let (s, c) = angle.sin_cos();
        let (a2, b2) = (major * major, minor * minor);
        let cov = [
            [a2 * c * c + b2 * s * s, (a2 - b2) * s * c],
            [(a2 - b2) * s * c, a2 * s * s + b2 * c * c],
        ];
        Self::from_covariance(cov, mean_phasor, 0)
    }

    /// True when the covariance vanishes.
    pub fn is_degenerate(&self) -> bool {
        self.covariance.iter().flatten().all(|&v| v == 0.0)
    }

    /// `pi * semi_major * semi_minor`.
    pub fn area(&self) -> f64 {
        PI * self.semi_major * self.semi_minor
    }

    /// Asymptotic standard error of a sample-covariance angle estimate, rad.
    pub fn angle_standard_error(&self) -> f64 {
        let (l1, l2) = (self.semi_major.powi(2), self.semi_minor.powi(2));
        if self.n_samples < 2 || l1 == l2 {
            return f64::INFINITY;
        }
        (l1 * l2 / (self.n_samples as f64 - 1.0)).sqrt() / (l1 - l2)
    }
}

/// Pass an ellipse through a transmissivity `t = |t| e^{i phi}`: the
/// covariance is rotated by `phi` and scaled by `|t|²`.
pub fn propagate_ellipse_closed_form(input: &NoiseEllipse, t: Complex64) -> Result<NoiseEllipse> {
    if input.is_degenerate() {
        return Err(OmitError::DegenerateInput(
            "input covariance is zero".into(),
        ));
    }
    require(t.norm() > 0.0 && t.is_finite(), || {
        "transmissivity must be finite and non-zero".into()
    })?;
    let (s, c) = t.arg().sin_cos();
    let r = [[c, -s], [s, c]];
    let g = t.norm_sqr();
    let cov = input.covariance;
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let mut acc = 0.0;
            for k in 0..2 {
                for l in 0..2 {
                    acc += r[i][k] * cov[k][l] * r[j][l];
                }
            }
            out[i][j] = g * acc;
        }
    }
    out[1][0] = out[0][1];
    let mut e = NoiseEllipse::from_covariance(out, t * input.mean_phasor, input.n_samples)?;
    e.angle = wrap_to_half_pi(input.angle + t.arg());
    Ok(e)
}

#[derive(Default, Clone, Copy)]
struct Moments {
    n: f64,
    sx: f64,
    sy: f64,
    sxx: f64,
    syy: f64,
    sxy: f64,
}

impl Moments {
    fn add(&mut self, x: f64, y: f64) {
        self.n += 1.0;
        self.sx += x;
        self.sy += y;
        self.sxx += x * x;
        self.syy += y * y;
        self.sxy += x * y;
    }

    fn merge(self, o: Self) -> Self {
        Self {
            n: self.n + o.n,
            sx: self.sx + o.sx,
            sy: self.sy + o.sy,
            sxx: self.sxx + o.sxx,
            syy: self.syy + o.syy,
            sxy: self.sxy + o.sxy,
        }
    }
}

fn monte_carlo(
    src: &SignalSource,
    t: Complex64,
    n: usize,
    stream_base: u64,
) -> Result<NoiseEllipse> {
    require(n >= MIN_MC_SAMPLES, || {
        format!("need at least {MIN_MC_SAMPLES} samples, got {n}")
    })?;
    // Moments are accumulated about the noiseless phasor to avoid cancellation.
    let centre = t * Complex64::new(src.modulation_depth(), 0.0);
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(src.seed, stream_base + c as u64);
            let mut m = Moments::default();
            for _ in 0..CHUNK.min(n - c * CHUNK) {
                let z = t * sample_signal_field(src, 1.0, &mut rng) - centre;
                m.add(z.re, z.im);
            }
            m
        })
        .collect();
    let m = parts.into_iter().fold(Moments::default(), Moments::merge);
    let (mx, my) = (m.sx / m.n, m.sy / m.n);
    let d = m.n - 1.0;
    let cxx = ((m.sxx - m.n * mx * mx) / d).max(0.0);
    let cyy = ((m.syy - m.n * my * my) / d).max(0.0);
    let cxy = (m.sxy - m.n * mx * my) / d;
    let cxy = cxy.clamp(-(cxx * cyy).sqrt(), (cxx * cyy).sqrt());
    NoiseEllipse::from_covariance([[cxx, cxy], [cxy, cyy]], centre + Complex64::new(mx, my), n)
}

/// Sample covariance of `n` noisy sideband amplitudes after transmission
/// through `t(omega)`, in units of the control amplitude.
///
/// With `sigma = 0` the result is a flagged zero ellipse (see
/// [`NoiseEllipse::is_degenerate`]).
pub fn ellipse_monte_carlo(
    src: &SignalSource,
    p: &OmitParams,
    omega: f64,
    n_samples: usize,
) -> Result<NoiseEllipse> {
    monte_carlo(src, transmissivity(p, omega), n_samples, 0)
}

/// Change of the mean-phasor argument between `omega_m - x` and
/// `omega_m + x`, rad. Negative for a clockwise flip.
pub fn mean_phasor_flip(p: &OmitParams, x: f64) -> f64 {
    let below = transmissivity(p, p.omega_m() - x).arg();
    let above = transmissivity(p, p.omega_m() + x).arg();
    above - below
}

/// Uniformly sampled photocurrent.
#[derive(Debug, Clone, PartialEq)]
pub struct BeatSeries {
    /// Samples per second.
    pub sample_rate: f64,
    /// `s(k / sample_rate)`, `k = 0..len`.
    pub samples: Vec<f64>,
}

impl BeatSeries {
    pub fn duration(&self) -> f64 {
        (self.samples.len().saturating_sub(1)) as f64 / self.sample_rate
    }
}

/// Photocurrent `|a_c + a_s e^{i Omega t}|² + noise` sampled over
/// `[0, duration]`. Its beat term is `2 |a_c| |a_s| cos(Omega t + arg a_s - arg a_c)`.
pub fn beat_signal<R: Rng + ?Sized>(
    control: Complex64,
    signal: Complex64,
    omega: f64,
    duration: f64,
    sample_rate: f64,
    detector_sigma: f64,
    rng: &mut R,
) -> Result<BeatSeries> {
    require(omega > 0.0 && omega.is_finite(), || {
        format!("beat frequency must be > 0, got {omega}")
    })?;
    require(duration > 0.0, || {
        format!("duration must be > 0, got {duration}")
    })?;
    require(detector_sigma >= 0.0, || {
        format!("detector noise must be >= 0, got {detector_sigma}")
    })?;
    let nyquist_guard = 4.0 * omega / TAU;
    if !(sample_rate > nyquist_guard) {
        return Err(OmitError::Alias {
            sample_rate,
            frequency: omega / TAU,
        });
    }
    let n = (duration * sample_rate).round() as usize + 1;
    let samples = (0..n)
        .map(|k| {
            let t = k as f64 / sample_rate;
            let field = control + signal * Complex64::from_polar(1.0, omega * t);
            let noise = if detector_sigma > 0.0 {
                detector_sigma * rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            };
            field.norm_sqr() + noise
        })
        .collect();
    Ok(BeatSeries {
        sample_rate,
        samples,
    })
}

/// Lock-in output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LockInResult {
    pub i: f64,
    pub q: f64,
    /// `sqrt(I² + Q²)`
    pub magnitude: f64,
    /// `atan2(Q, I)`, rad
    pub phase: f64,
    /// s
    pub integration_time: f64,
}

/// Demodulate at `omega` over the first `integration_time` seconds:
/// `I = (2/T) ∫ s cos(omega t) dt`, `Q = -(2/T) ∫ s sin(omega t) dt`
/// (trapezoidal rule).
pub fn demodulate(series: &BeatSeries, omega: f64, integration_time: f64) -> Result<LockInResult> {
    require(omega > 0.0, || {
        format!("reference frequency must be > 0, got {omega}")
    })?;
    let required = 10.0 * TAU / omega;
    if !(integration_time >= required) {
        return Err(OmitError::WindowTooShort {
            window: integration_time,
            required,
        });
    }
    let steps = (integration_time * series.sample_rate).round() as usize;
    require(steps < series.samples.len(), || {
        format!(
            "integration time {integration_time} s exceeds the record length {} s",
            series.duration()
        )
    })?;
    let dt = 1.0 / series.sample_rate;
    let (mut si, mut sq) = (0.0, 0.0);
    for (k, &s) in series.samples[..=steps].iter().enumerate() {
        let w = if k == 0 || k == steps { 0.5 } else { 1.0 };
        let (sn, cs) = (omega * k as f64 * dt).sin_cos();
        si += w * s * cs;
        sq += w * s * sn;
    }
    let window = steps as f64 * dt;
    let i = 2.0 * si * dt / window;
    let q = -2.0 * sq * dt / window;
    Ok(LockInResult {
        i,
        q,
        magnitude: i.hypot(q),
        phase: q.atan2(i),
        integration_time: window,
    })
}

/// Sampling of the simulated lock-in measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainSettings {
    /// Control amplitude at the detector, in the units of the sideband.
    pub control_amplitude: f64,
    pub samples_per_period: usize,
    /// Integration window in beat periods.
    pub periods: usize,
    /// White detector noise per sample.
    pub detector_sigma: f64,
}

impl Default for ChainSettings {
    fn default() -> Self {
        Self {
            control_amplitude: 1.0,
            samples_per_period: 16,
            periods: 200,
            detector_sigma: 0.0,
        }
    }
}

/// One row of the full-chain sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainPoint {
    /// rad/s
    pub omega: f64,
    pub t_abs: f64,
    /// Lock-in phase, rad.
    pub phase: f64,
    /// Monte Carlo ellipse angle, rad.
    pub theta: f64,
    /// Standard error of `theta`, rad.
    pub theta_err: f64,
    /// Closed-form references for the same frequency.
    pub phase_closed: f64,
    pub theta_closed: f64,
    /// Monte Carlo ellipse behind `theta`.
    pub ellipse: NoiseEllipse,
}

/// Synthesize the beat, demodulate it and estimate the ellipse angle at each
/// grid frequency. The grid must span at least ten OMIT linewidths.
pub fn full_chain_sweep(
    src: &SignalSource,
    p: &OmitParams,
    omegas: &[f64],
    n_noise_trials: usize,
    settings: &ChainSettings,
) -> Result<Vec<ChainPoint>> {
    require(omegas.len() >= 2, || {
        "need at least two grid frequencies".into()
    })?;
    require(
        settings.samples_per_period >= 5 && settings.periods >= 10,
        || "need at least 5 samples per period and 10 periods".into(),
    )?;
    let linewidth = p.gamma_m() + crate::omit::optical_damping(p);
    let lo = omegas.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = omegas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    require(hi - lo >= 10.0 * 2.0 * linewidth, || {
        format!(
            "grid spans {} rad/s, less than ten linewidths of {} rad/s",
            hi - lo,
            2.0 * linewidth
        )
    })?;
    let control = Complex64::new(settings.control_amplitude, 0.0);
    omegas
        .par_iter()
        .enumerate()
        .map(|(k, &omega)| {
            let t = transmissivity(p, omega);
            let mut rng = stream_rng(src.seed, k as u64);
            let input = sample_signal_field(src, settings.control_amplitude, &mut rng);
            let period = TAU / omega;
            let sample_rate = settings.samples_per_period as f64 / period;
            let duration = settings.periods as f64 * period;
            let series = beat_signal(
                control,
                t * input,
                omega,
                duration,
                sample_rate,
                settings.detector_sigma,
                &mut rng,
            )?;
            let lock = demodulate(&series, omega, duration)?;
            let scale = 2.0 * control.norm() * input.norm();
            let ellipse = monte_carlo(src, t, n_noise_trials, (k as u64 + 1) << 32)?;
            Ok(ChainPoint {
                omega,
                t_abs: lock.magnitude / scale,
                phase: lock.phase,
                theta: ellipse.angle,
                theta_err: ellipse.angle_standard_error().min(PI / 2.0),
                phase_closed: phase_response(p, omega).exact,
                theta_closed: rotation_angle(p, omega),
                ellipse,
            })
        })
        .collect()
}
