//! Subcommand implementations. Each returns an [`Output`] table; nothing here
//! touches the filesystem.

use rand_distr::{Distribution, StandardNormal};
use serde_json::json;

use omitlab_core::apparatus::ApparatusModel;
use omitlab_core::cavity::{coupled_linewidth, finesse_scan, MembraneCavity};
use omitlab_core::detection::{full_chain_sweep, ChainSettings};
use omitlab_core::lineshape::{fit_lorentzian, linewidth_vs_power_sweep};
use omitlab_core::membrane::{gas_damping_rate, quality_factor, thermal_force_psd};
use omitlab_core::omit::{
    feasibility_bound, optical_damping, radiation_pressure_psd, response_sweep, transmissivity,
    OmitParams,
};
use omitlab_core::oracle::{exact_response_oracle, max_deviation, sideband_spring_shift};
use omitlab_core::rng::stream_rng;
use omitlab_core::units::{angular_to_hz, hz_to_angular, mbar_to_pa, pa_to_mbar, HBAR};
use omitlab_core::{OmitError, Result};

use crate::config::{RunConfig, SweepSpec};
use crate::output::{Output, Table};

/// Half-width of the refined grid, in OMIT full linewidths.
const REFINE_LINEWIDTHS: f64 = 3.0;
/// Membrane positions per half wavelength in a finesse scan.
const DEFAULT_Z_POINTS: usize = 64;
/// Pressures in a gas-damping table.
const DEFAULT_PRESSURE_POINTS: usize = 41;
const LOWEST_PRESSURE_MBAR: f64 = 1e-6;
/// Samples of the synthetic dip fitted per control power.
const FIT_SAMPLES: usize = 500;
/// Cavity linewidth-to-mechanical-frequency ratio of the oracle reference run.
const RESOLVED_RATIO: f64 = 20.0;

/// Per-run options from the command line.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub points: Option<usize>,
}

struct Context<'a> {
    cfg: &'a RunConfig,
    seed: u64,
    points: Option<usize>,
    model: ApparatusModel,
}

impl<'a> Context<'a> {
    fn new(cfg: &'a RunConfig, opts: RunOptions) -> Result<Self> {
        Ok(Self {
            cfg,
            seed: opts.seed.unwrap_or(cfg.noise.source.seed),
            points: opts.points,
            model: cfg.apparatus.model(cfg.calibration)?,
        })
    }

    fn params(&self) -> &OmitParams {
        &self.model.params
    }

    fn output(&self, command: &'static str, table: Table) -> Output {
        let p = self.params();
        let mut out = Output {
            command,
            config_sha256: self.cfg.sha256.clone(),
            seed: self.seed,
            notes: Vec::new(),
            table,
            extra: None,
        };
        out.note("gamma_rad_s", format!("{:e}", p.gamma()));
        out.note("eta_c", format!("{:e}", p.eta_c()));
        out.note("gamma_m_rad_s", format!("{:e}", p.gamma_m()));
        out.note("gamma_opt_rad_s", format!("{:e}", optical_damping(p)));
        out.note("omega_m_rad_s", format!("{:e}", p.omega_m()));
        out
    }

    /// OMIT full linewidth, Hz.
    fn omit_fwhm_hz(&self) -> f64 {
        let p = self.params();
        angular_to_hz(2.0 * (p.gamma_m() + optical_damping(p)))
    }

    fn sweep(&self) -> Result<SweepSpec> {
        let mut s = self.cfg.sweep;
        if let Some(points) = self.points {
            s.points = points;
        }
        check_sweep(&s)?;
        Ok(s)
    }
}

fn precondition(msg: String) -> OmitError {
    OmitError::InvalidParameter(msg)
}

fn check_sweep(s: &SweepSpec) -> Result<()> {
    if s.points < 2 {
        return Err(precondition(format!(
            "sweep needs at least 2 points, got {}",
            s.points
        )));
    }
    let step = (s.stop_hz - s.start_hz) / (s.points - 1) as f64;
    if step < s.min_step_hz {
        return Err(precondition(format!(
            "sweep step {step} Hz is below min_step_hz {}",
            s.min_step_hz
        )));
    }
    Ok(())
}

/// Uniform sweep with the part within `half_width_hz` of `center_hz`
/// replaced by a grid of step `min_step_hz` anchored on `center_hz`. No
/// two points are closer than `min_step_hz`.
pub fn sweep_grid(s: &SweepSpec, center_hz: f64, half_width_hz: f64) -> Vec<f64> {
    let step = (s.stop_hz - s.start_hz) / (s.points - 1) as f64;
    let coarse = (0..s.points).map(|i| s.start_hz + i as f64 * step);
    let lo = (center_hz - half_width_hz).max(s.start_hz);
    let hi = (center_hz + half_width_hz).min(s.stop_hz);
    if hi <= lo || step <= s.min_step_hz {
        return coarse.collect();
    }
    let k_lo = ((lo - center_hz) / s.min_step_hz).ceil() as i64;
    let k_hi = ((hi - center_hz) / s.min_step_hz).floor() as i64;
    let fine: Vec<f64> = (k_lo..=k_hi)
        .map(|k| center_hz + k as f64 * s.min_step_hz)
        .collect();
    let (first, last) = (fine[0], fine[fine.len() - 1]);
    let mut grid: Vec<f64> = coarse
        .filter(|&f| f <= first - s.min_step_hz || f >= last + s.min_step_hz)
        .chain(fine)
        .collect();
    grid.sort_by(f64::total_cmp);
    grid
}

fn omit_grid(ctx: &Context) -> Result<Vec<f64>> {
    let s = ctx.sweep()?;
    let f_m = angular_to_hz(ctx.params().omega_m());
    Ok(sweep_grid(&s, f_m, REFINE_LINEWIDTHS * ctx.omit_fwhm_hz()))
}

/// Closed-form `|t|`, phase, rotation angle and group delay over the sweep.
pub fn response_sweep_cmd(cfg: &RunConfig, opts: RunOptions) -> Result<Output> {
    let ctx = Context::new(cfg, opts)?;
    let grid = omit_grid(&ctx)?;
    let omegas: Vec<f64> = grid.iter().map(|&f| hz_to_angular(f)).collect();
    let mut table = Table::new(vec![
        "f_Hz",
        "re_t",
        "im_t",
        "abs_t",
        "phase_rad",
        "theta_rad",
        "group_delay_s",
    ]);
    for (f, r) in grid.iter().zip(response_sweep(ctx.params(), &omegas)) {
        table.push(vec![
            *f,
            r.t[0],
            r.t[1],
            r.abs_t,
            r.phase,
            r.theta,
            r.group_delay,
        ]);
    }
    let mut out = ctx.output("response-sweep", table);
    out.note("omit_fwhm_hz", format!("{:e}", ctx.omit_fwhm_hz()));
    Ok(out)
}

/// OMIT linewidth and dip depth versus control power, with a Lorentzian fit
/// of a synthetic dip at each power.
pub fn linewidth_vs_power_cmd(cfg: &RunConfig, opts: RunOptions) -> Result<Output> {
    let ctx = Context::new(cfg, opts)?;
    let powers = &cfg.sweep_powers_w;
    if powers.is_empty() {
        return Err(precondition("control.sweep_powers_w is empty".into()));
    }
    let base = ctx.params();
    let rows = linewidth_vs_power_sweep(base, &ctx.model.drive, powers)?;
    let f_m = angular_to_hz(base.omega_m());
    let sigma = cfg.noise.detector_sigma;
    let mut table = Table::new(vec![
        "power_W",
        "gamma_opt_rad_s",
        "fwhm_Hz",
        "dip_depth",
        "fit_fwhm_Hz",
        "fit_fwhm_err_Hz",
        "fit_center_Hz",
        "fit_depth",
    ]);
    let mut fits = Vec::new();
    for (k, row) in rows.iter().enumerate() {
        let p = ctx.model.drive.params_at(base, row.power_w)?;
        let half_span = 5.0 * row.fwhm_hz;
        let mut rng = stream_rng(ctx.seed, k as u64);
        let freq: Vec<f64> = (0..FIT_SAMPLES)
            .map(|i| f_m - half_span + 2.0 * half_span * i as f64 / (FIT_SAMPLES - 1) as f64)
            .collect();
        let y: Vec<f64> = freq
            .iter()
            .map(|&f| {
                let clean = (transmissivity(&p, hz_to_angular(f)) / p.t0()).norm_sqr();
                let z: f64 = StandardNormal.sample(&mut rng);
                clean + sigma * z
            })
            .collect();
        let fit = fit_lorentzian(&freq, &y)?;
        table.push(vec![
            row.power_w,
            row.gamma_opt,
            row.fwhm_hz,
            row.dip_depth,
            fit.fwhm_hz,
            fit.fwhm_err_hz,
            fit.center_hz,
            fit.depth,
        ]);
        fits.push(json!({ "power_W": row.power_w, "fit": fit }));
    }
    let mut out = ctx.output("linewidth-vs-power", table);
    out.note("coupling_g0_rad_s_m", format!("{:e}", ctx.model.drive.g0));
    out.note("fit_noise_sigma", format!("{sigma:e}"));
    out.extra = Some(json!({ "fits": fits }));
    Ok(out)
}

/// Coupled-cavity finesse over one half-wavelength of membrane travel.
pub fn finesse_scan_cmd(cfg: &RunConfig, opts: RunOptions) -> Result<Output> {
    let ctx = Context::new(cfg, opts)?;
    let cav = &cfg.apparatus.cavity;
    let n = ctx.points.unwrap_or(DEFAULT_Z_POINTS);
    if n < 2 {
        return Err(precondition(format!(
            "finesse scan needs at least 2 points, got {n}"
        )));
    }
    let period = cav.wavelength / 2.0;
    let z: Vec<f64> = (0..n)
        .map(|i| cav.z_origin + period * i as f64 / n as f64)
        .collect();
    let scan = finesse_scan(cav, &cfg.apparatus.membrane, &z)?;
    let empty = MembraneCavity::empty(cav)?.resonance();
    let mut table = Table::new(vec![
        "z_m",
        "finesse",
        "fwhm_Hz",
        "resonance_detuning_Hz",
        "peak_transmission",
        "gamma_rad_s",
    ]);
    for (z, r) in z.iter().zip(&scan) {
        table.push(vec![
            *z,
            r.finesse,
            r.fwhm_hz,
            r.detuning_hz,
            r.peak_transmission,
            coupled_linewidth(r.finesse, cav)?,
        ]);
    }
    let mut out = ctx.output("finesse-scan", table);
    out.note("empty_cavity_finesse", format!("{:e}", empty.finesse));
    let (lo, hi) = scan.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), r| {
        (lo.min(r.finesse), hi.max(r.finesse))
    });
    out.note("finesse_min", format!("{lo:e}"));
    out.note("finesse_max", format!("{hi:e}"));
    Ok(out)
}

/// Lock-in amplitude and phase plus Monte Carlo ellipse angle over the sweep.
pub fn ellipse_cmd(cfg: &RunConfig, opts: RunOptions) -> Result<Output> {
    let ctx = Context::new(cfg, opts)?;
    let grid = omit_grid(&ctx)?;
    let omegas: Vec<f64> = grid.iter().map(|&f| hz_to_angular(f)).collect();
    let src = cfg.noise.source.with_seed(ctx.seed);
    let settings = ChainSettings {
        detector_sigma: cfg.noise.detector_sigma,
        ..ChainSettings::default()
    };
    let rows = full_chain_sweep(&src, ctx.params(), &omegas, cfg.noise.samples, &settings)?;
    let mut table = Table::new(vec![
        "f_Hz",
        "t_abs",
        "phase_rad",
        "theta_deg",
        "theta_mc_err_deg",
        "theta_closed_deg",
        "phase_closed_rad",
    ]);
    let mut dumps = Vec::new();
    for (f, r) in grid.iter().zip(&rows) {
        table.push(vec![
            *f,
            r.t_abs,
            r.phase,
            r.theta.to_degrees(),
            r.theta_err.to_degrees(),
            r.theta_closed.to_degrees(),
            r.phase_closed,
        ]);
        let e = &r.ellipse;
        dumps.push(json!({
            "f_Hz": f,
            "covariance": [e.covariance[0][0], e.covariance[0][1], e.covariance[1][1]],
            "mean_phasor": [e.mean_phasor.re, e.mean_phasor.im],
            "angle_rad": e.angle,
            "semi_major": e.semi_major,
            "semi_minor": e.semi_minor,
            "n_samples": e.n_samples,
            "seed": ctx.seed,
        }));
    }
    let mut out = ctx.output("ellipse", table);
    out.note("samples", cfg.noise.samples);
    out.note(
        "amplitude_noise_sigma",
        format!("{:e}", src.amplitude_noise_sigma),
    );
    out.extra = Some(json!({ "ellipses": dumps }));
    Ok(out)
}

fn oracle_grid(p: &OmitParams, n: usize) -> Vec<f64> {
    let span = 10.0 * (p.gamma_m() + optical_damping(p));
    (0..n)
        .map(|i| p.omega_m() - span + 2.0 * span * i as f64 / (n - 1) as f64)
        .collect()
}

/// Exact two-sideband oracle against the closed-form response, for the
/// configured cavity and for a resolved-sideband reference cavity.
pub fn oracle_compare_cmd(cfg: &RunConfig, opts: RunOptions) -> Result<Output> {
    let ctx = Context::new(cfg, opts)?;
    let p = *ctx.params();
    let n = ctx.points.unwrap_or(cfg.sweep.points).max(2);
    let omegas = oracle_grid(&p, n);
    let oracle = exact_response_oracle(&p, &omegas)?;
    let mut table = Table::new(vec![
        "f_Hz",
        "re_oracle",
        "im_oracle",
        "re_closed",
        "im_closed",
        "deviation",
    ]);
    for (&w, t) in omegas.iter().zip(&oracle.normalized.t) {
        let c = transmissivity(&p, w);
        table.push(vec![
            angular_to_hz(w),
            t.re,
            t.im,
            c.re,
            c.im,
            (t - c).norm() / p.t0(),
        ]);
    }
    let config_dev = max_deviation(&p, &oracle);

    let resolved = OmitParams::from_linewidth(
        p.omega_m() / RESOLVED_RATIO,
        p.eta_c(),
        0.0,
        p.gamma_m(),
        p.omega_m(),
        p.delta(),
        p.m_eff(),
    )?
    .with_gamma_opt(optical_damping(&p))?;
    let resolved_oracle = exact_response_oracle(&resolved, &oracle_grid(&resolved, n))?;
    let resolved_dev = max_deviation(&resolved, &resolved_oracle);

    let mut out = ctx.output("oracle-compare", table);
    out.note(
        "omega_m_over_gamma",
        format!("{:e}", p.omega_m() / p.gamma()),
    );
    out.note("max_deviation", format!("{config_dev:e}"));
    out.note("max_condition", format!("{:e}", oracle.max_condition));
    out.note("resolved_omega_m_over_gamma", format!("{RESOLVED_RATIO:e}"));
    out.note("resolved_max_deviation", format!("{resolved_dev:e}"));
    out.note(
        "resolved_sideband_pull_rad_s",
        format!("{:e}", sideband_spring_shift(&resolved)),
    );
    out.extra = Some(json!({
        "configured": { "omega_m_over_gamma": p.omega_m() / p.gamma(), "max_deviation": config_dev },
        "resolved": { "omega_m_over_gamma": RESOLVED_RATIO, "max_deviation": resolved_dev },
    }));
    Ok(out)
}

/// Low-temperature requirement and force-noise budget.
pub fn design_check_cmd(cfg: &RunConfig, opts: RunOptions) -> Result<Output> {
    let ctx = Context::new(cfg, opts)?;
    let p = ctx.params();
    let a = &cfg.apparatus;
    let q = quality_factor(&a.membrane, &a.gas)?;
    let temperature = a.gas.temperature;
    let reference = hz_to_angular(100.0);
    let mut table = Table::new(vec![
        "gamma_opt_rad_s",
        "t_over_q_threshold_K",
        "t_over_q_K",
        "ratio",
        "satisfied",
    ]);
    let mut threshold_ref = f64::NAN;
    for gamma_opt in [optical_damping(p), reference] {
        let f = feasibility_bound(temperature, q, gamma_opt)?;
        if gamma_opt == reference {
            threshold_ref = f.max_t_over_q;
        }
        table.push(vec![
            gamma_opt,
            f.max_t_over_q,
            temperature / q,
            f.ratio,
            if f.satisfied { 1.0 } else { 0.0 },
        ]);
    }
    // Classical signal-amplitude noise driving the membrane.
    let src = &cfg.noise.source;
    let photon_flux_amp = (a.power / (HBAR * a.omega_p())).sqrt();
    let delta_a =
        src.modulation_index * src.amplitude_noise_sigma * src.drive_amplitude * photon_flux_amp;
    let s_rp = radiation_pressure_psd(p, delta_a);
    let s_th = thermal_force_psd(&a.membrane, &a.gas)?;
    let mut out = ctx.output("design-check", table);
    out.note("reference_gamma_opt_rad_s", format!("{reference:e}"));
    out.note(
        "reference_t_over_q_threshold_K",
        format!("{threshold_ref:e}"),
    );
    out.note("quality_factor", format!("{q:e}"));
    out.note("radiation_pressure_psd_N2_Hz", format!("{s_rp:e}"));
    out.note("thermal_force_psd_N2_Hz", format!("{s_th:e}"));
    out.note("psd_ratio", format!("{:e}", s_rp / s_th));
    Ok(out)
}

/// Membrane quality factor versus background gas pressure.
pub fn gas_damping_cmd(cfg: &RunConfig, opts: RunOptions) -> Result<Output> {
    let ctx = Context::new(cfg, opts)?;
    let a = &cfg.apparatus;
    let n = ctx.points.unwrap_or(DEFAULT_PRESSURE_POINTS);
    if n < 2 {
        return Err(precondition(format!(
            "pressure table needs at least 2 points, got {n}"
        )));
    }
    let top = pa_to_mbar(a.gas.max_pressure);
    if top <= LOWEST_PRESSURE_MBAR {
        return Err(precondition(format!(
            "max pressure {top} mbar is below {LOWEST_PRESSURE_MBAR} mbar"
        )));
    }
    let ratio = (top / LOWEST_PRESSURE_MBAR).ln();
    let mut table = Table::new(vec![
        "pressure_mbar",
        "gamma_gas_rad_s",
        "Q",
        "Q_over_q_intrinsic",
    ]);
    for i in 0..n {
        let mbar = if i == n - 1 {
            top
        } else {
            LOWEST_PRESSURE_MBAR * (ratio * i as f64 / (n - 1) as f64).exp()
        };
        let env = a.gas.with_pressure(mbar_to_pa(mbar));
        let q = quality_factor(&a.membrane, &env)?;
        table.push(vec![
            mbar,
            gas_damping_rate(&a.membrane, &env)?,
            q,
            q / a.membrane.q_intrinsic,
        ]);
    }
    let mut out = ctx.output("gas-damping", table);
    let q_vac = quality_factor(&a.membrane, &a.gas.with_pressure(0.0))?;
    let q_plateau = quality_factor(&a.membrane, &a.gas.with_pressure(mbar_to_pa(3e-5)))?;
    out.note("q_at_zero_pressure", format!("{q_vac:e}"));
    out.note("q_at_3e-5_mbar", format!("{q_plateau:e}"));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse_config, DEFAULT_CONFIG};
    use std::f64::consts::PI;

    fn cfg() -> RunConfig {
        parse_config(DEFAULT_CONFIG).unwrap().0
    }

    #[test]
    fn refined_grid_honors_min_step() {
        let s = SweepSpec {
            start_hz: 402600.0,
            stop_hz: 402800.0,
            points: 101,
            min_step_hz: 0.25,
        };
        let g = sweep_grid(&s, 402700.1, 45.0);
        assert!(g.windows(2).all(|w| w[1] - w[0] >= 0.25 - 1e-9));
        assert!(g.iter().any(|&f| (f - 402700.1).abs() < 1e-9));
        assert_eq!(g[0], 402600.0);
        assert_eq!(*g.last().unwrap(), 402800.0);
        let fine = g
            .windows(2)
            .filter(|w| (w[1] - w[0] - 0.25).abs() < 1e-9)
            .count();
        assert!(fine >= 350);
    }

    #[test]
    fn design_check_reports_reference_threshold() {
        let out = design_check_cmd(&cfg(), RunOptions::default()).unwrap();
        let thr = out.table.column("t_over_q_threshold_K").unwrap()[1];
        assert!((thr / 6.0e-10 - 1.0).abs() < 0.02);
    }

    #[test]
    fn gas_table_is_monotone() {
        let out = gas_damping_cmd(&cfg(), RunOptions::default()).unwrap();
        let q = out.table.column("Q").unwrap();
        assert!(q.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn response_sweep_phase_is_continuous() {
        let c = cfg();
        let out = response_sweep_cmd(&c, RunOptions::default()).unwrap();
        let phase = out.table.column("phase_rad").unwrap();
        assert!(phase.windows(2).all(|w| (w[1] - w[0]).abs() < PI / 2.0));
        let f = out.table.column("f_Hz").unwrap();
        assert!(f
            .windows(2)
            .all(|w| w[1] - w[0] >= c.sweep.min_step_hz - 1e-9));
    }

    #[test]
    fn too_many_points_violate_min_step() {
        let opts = RunOptions {
            points: Some(100_000),
            ..RunOptions::default()
        };
        let err = response_sweep_cmd(&cfg(), opts).unwrap_err();
        assert!(err.is_precondition());
    }
}
