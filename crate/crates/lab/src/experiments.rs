//! Two-flow separation and single-flow rate experiments.
//!
//! Every flow goes through the same preparation: an MCF run long enough to
//! fit the area law, an estimate of `(T, x₀)`, and the exact rescaling of
//! the initial curve, `τ₀ = -log T`, `N = (M₀ - x₀)/√T`. Flows share the
//! frame cadence in `τ`, so two prepared flows are aligned by their
//! singular data and compared on common frame times. No rotational
//! alignment is applied.

use std::f64::consts::{PI, SQRT_2};

use serde::Serialize;
use shrinkerlab_core::curvegeo::{self, hausdorff_refined, DiscreteCurve};
use shrinkerlab_core::flowcore::{
    estimate_singularity, rescale_curve, run_mcf, run_rmcf, FlowTrajectory, Frame, Picture,
    RunOptions, SingularEstimate, StepControl,
};
use shrinkerlab_core::frequency::{
    cumulative_integral, d_series, gradient_series, lojasiewicz_fit, monitor,
    superexponential_collapse, FrequencyTrace, GradientSeries, LojasiewiczOutcome, MonitorOptions,
};
use shrinkerlab_core::gauge::{normal_graph, residual, ResidualReport};
use shrinkerlab_core::{Error, Exec};

use crate::config::ScenarioConfig;
use crate::error::{Context, Result};

/// Refinement factor for Hausdorff distances between flows.
pub const HAUSDORFF_REFINE: usize = 8;
/// Distances below this count as zero.
pub const DISTANCE_FLOOR: f64 = 1e-14;
/// Maximum distance to the shrinker for a flow to count as exact.
pub const EXACT_SHRINKER_DISTANCE: f64 = 1e-8;
/// Tolerance for the `log d_H` and `log √I` slopes to count as matching.
pub const SLOPE_MATCH: f64 = 0.3;
/// Minimum `R²` of the `log d_H` line fit over the window.
pub const MIN_LINEARITY: f64 = 0.95;

/// Initial curve of the rescaled flow together with its singular data.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub singular: SingularEstimate,
    pub tau0: f64,
    pub start: DiscreteCurve,
}

pub fn prepare(curve: &DiscreteCurve, ctl: &StepControl) -> shrinkerlab_core::Result<Prepared> {
    let t_guess = curve.area() / (2.0 * PI);
    let opts = RunOptions {
        cadence: t_guess / 100.0,
        stop_area_fraction: Some(0.5),
        ..RunOptions::default()
    };
    let mcf = run_mcf(curve, 0.0, 2.0 * t_guess, ctl, &opts)?;
    let singular = estimate_singularity(&mcf, 0.4)?;
    let (tau0, start) = rescale_curve(&mcf.frames()[0].curve, 0.0, singular.data())?;
    Ok(Prepared {
        singular,
        tau0,
        start,
    })
}

pub fn rescaled_flow(
    p: &Prepared,
    tau_end: f64,
    ctl: &StepControl,
    cadence: f64,
) -> shrinkerlab_core::Result<FlowTrajectory> {
    if !(tau_end > p.tau0) {
        return Err(Error::InvalidArgument(format!(
            "tau_end {tau_end} is not after the rescaled start time {}",
            p.tau0
        )));
    }
    let opts = RunOptions {
        cadence,
        ..RunOptions::default()
    };
    Ok(run_rmcf(&p.start, p.tau0, tau_end, ctl, &opts)?
        .trajectory
        .with_singular(p.singular.data()))
}

fn restrict(
    traj: &FlowTrajectory,
    other: &FlowTrajectory,
) -> shrinkerlab_core::Result<FlowTrajectory> {
    let frames: Vec<Frame> = traj
        .frames()
        .iter()
        .filter(|f| other.index_of(f.time).is_some())
        .cloned()
        .collect();
    let out = FlowTrajectory::new(Picture::Rmcf, frames, traj.singular())?;
    Ok(out)
}

/// Both trajectories cut down to their common frame times.
pub fn common_frames(
    a: &FlowTrajectory,
    b: &FlowTrajectory,
) -> shrinkerlab_core::Result<(FlowTrajectory, FlowTrajectory)> {
    Ok((restrict(a, b)?, restrict(b, a)?))
}

fn require_convex(curve: &DiscreteCurve, which: &str) -> Result<()> {
    let geom = curvegeo::geometry(curve).context(which)?;
    if geom.curvature.iter().all(|h| *h > 0.0) {
        Ok(())
    } else {
        Err(Error::InvalidCurve("initial curve is not convex".into())).context(which)
    }
}

/// Least-squares line through `(x, y)`: `(intercept, slope, R²)`.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let xm = x.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - xm).powi(2)).sum();
    let syy: f64 = y.iter().map(|v| (v - ym).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - xm) * (b - ym)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let r2 = if sxx > 0.0 && syy > 0.0 {
        sxy * sxy / (sxx * syy)
    } else {
        1.0
    };
    (ym - slope * xm, slope, r2)
}

fn window_start(n: usize, fraction: f64) -> usize {
    n - ((fraction * n as f64).ceil() as usize).clamp(2.min(n), n)
}

/// Fit of `log y` against `τ` over the trailing window, skipping values at
/// or below [`DISTANCE_FLOOR`]. `None` with fewer than three usable points.
pub fn log_fit(times: &[f64], values: &[f64], window: f64) -> Option<LogFit> {
    let start = window_start(times.len(), window);
    let (x, y): (Vec<f64>, Vec<f64>) = (start..times.len())
        .filter(|&j| values[j] > DISTANCE_FLOOR)
        .map(|j| (times[j], values[j].ln()))
        .unzip();
    if x.len() < 3 {
        return None;
    }
    let (intercept, slope, r2) = fit_line(&x, &y);
    Some(LogFit {
        slope,
        intercept,
        r2,
        from: x[0],
        to: x[x.len() - 1],
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub from: f64,
    pub to: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Consistent,
    SuperexponentialFlagged,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SeparationReport {
    /// Fit of `log d_H(N¹_τ, N²_τ)`; absent when the flows coincide.
    pub distance_fit: Option<LogFit>,
    #[serde(rename = "lambdaFit")]
    pub lambda_fit: f64,
    pub offset_fit: f64,
    /// Slope of `log √I`, i.e. `-λ/2`.
    pub log_sqrt_i_slope: f64,
    #[serde(rename = "Uinf")]
    pub u_inf: f64,
    #[serde(rename = "Ulate")]
    pub u_late: f64,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    pub asymptotically_linear: bool,
    pub slopes_match: bool,
    pub collapse_detected: bool,
    pub i_underflow: bool,
    pub verdict: Verdict,
    pub singular: [SingularEstimate; 2],
    pub frames: usize,
}

pub struct SeparationRun {
    pub report: SeparationReport,
    pub base: FlowTrajectory,
    pub target: FlowTrajectory,
    pub distances: Vec<f64>,
    pub trace: FrequencyTrace,
}

fn monitor_options(cfg: &ScenarioConfig) -> MonitorOptions {
    MonitorOptions {
        fit_window: cfg.fit_window,
        lambda_stride: cfg.lambda_stride,
        ..MonitorOptions::default()
    }
}

fn tau_end(cfg: &ScenarioConfig) -> f64 {
    cfg.tau_end.expect("validated config has tau_end")
}

/// Both initial curves prepared and evolved concurrently, then cut to
/// common frames.
fn prepared_pair(cfg: &ScenarioConfig) -> Result<([Prepared; 2], FlowTrajectory, FlowTrajectory)> {
    let curves = cfg.curves().context("sampling initial curves")?;
    require_convex(&curves[0], "curve1")?;
    require_convex(&curves[1], "curve2")?;
    let ctl = cfg.step_control();
    let run = |c: &DiscreteCurve, which: &str| -> Result<(Prepared, FlowTrajectory)> {
        let p = prepare(c, &ctl).context(&format!("{which}: singular time"))?;
        let flow = rescaled_flow(&p, tau_end(cfg), &ctl, cfg.frame_every)
            .context(&format!("{which}: rescaled flow"))?;
        Ok((p, flow))
    };
    let (a, b) = Exec::Parallel.join(|| run(&curves[0], "curve1"), || run(&curves[1], "curve2"));
    let ((pa, fa), (pb, fb)) = (a?, b?);
    let (base, target) = common_frames(&fa, &fb).context("aligning flows")?;
    Ok(([pa, pb], base, target))
}

pub fn experiment_separation(cfg: &ScenarioConfig) -> Result<SeparationRun> {
    let ([pa, pb], base, target) = prepared_pair(cfg)?;
    let trace = monitor(&base, &target, &monitor_options(cfg)).context("frequency monitor")?;
    let distances: Vec<f64> = Exec::Parallel.map_range(base.len(), |j| {
        hausdorff_refined(
            &base.frames()[j].curve,
            &target.frames()[j].curve,
            HAUSDORFF_REFINE,
        )
    });
    let times = base.times();
    let distance_fit = log_fit(&times, &distances, cfg.fit_window);
    let sq: Vec<f64> = distances.iter().map(|d| d * d).collect();
    let collapse_detected =
        trace.checks.superexponential || superexponential_collapse(&times, &sq, cfg.fit_window);
    let s = &trace.summary;
    let log_sqrt_i_slope = -0.5 * s.lambda_fit;
    let asymptotically_linear = distance_fit.is_some_and(|f| f.r2 >= MIN_LINEARITY);
    let slopes_match =
        distance_fit.is_some_and(|f| (f.slope - log_sqrt_i_slope).abs() <= SLOPE_MATCH);
    let report = SeparationReport {
        distance_fit,
        lambda_fit: s.lambda_fit,
        offset_fit: s.offset_fit,
        log_sqrt_i_slope,
        u_inf: s.u_inf,
        u_late: trace.checks.u_late,
        lambda: s.lambda,
        asymptotically_linear,
        slopes_match,
        collapse_detected,
        i_underflow: trace.records.iter().any(|r| r.underflow),
        verdict: if collapse_detected {
            Verdict::SuperexponentialFlagged
        } else {
            Verdict::Consistent
        },
        singular: [pa.singular, pb.singular],
        frames: base.len(),
    };
    Ok(SeparationRun {
        report,
        base,
        target,
        distances,
        trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateOutcome {
    Fitted,
    ExactShrinker,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RateReport {
    pub outcome: RateOutcome,
    /// Fit of `log d_H(N_τ, Σ)` with `Σ` the circle of radius `√2`.
    pub distance_fit: Option<LogFit>,
    /// Fit of `log ‖φ‖_{L²(dμ̃)}` along the flow.
    pub phi_fit: Option<LogFit>,
    /// Lowest mode `k ≥ 2` present in the initial height over `Σ`.
    pub slowest_mode: Option<u32>,
    /// `1 - k²/2` for that mode.
    pub predicted_slope: Option<f64>,
    #[serde(rename = "lambdaFit")]
    pub lambda_fit: f64,
    #[serde(rename = "Ulate")]
    pub u_late: f64,
    #[serde(rename = "thetaFit")]
    pub theta_fit: Option<f64>,
    /// `∫ ‖φ‖_{L²(dμ̃)} dτ` along the flow.
    #[serde(rename = "integralPhi")]
    pub integral_phi: f64,
    /// `∫ D dτ` along the flow.
    #[serde(rename = "integralD")]
    pub integral_d: f64,
    pub max_distance: f64,
    pub singular: SingularEstimate,
    pub frames: usize,
}

/// Per-frame quantities of a single flow.
#[derive(Debug, Clone)]
pub struct FlowSeries {
    pub gradient: GradientSeries,
    /// `‖φ‖_{L²(dμ̃)}` with the unnormalised Gaussian weight.
    pub phi_l2: Vec<f64>,
    pub d: Vec<f64>,
}

impl FlowSeries {
    pub fn of(flow: &FlowTrajectory) -> shrinkerlab_core::Result<Self> {
        let gradient = gradient_series(flow, Exec::Parallel)?;
        let phi_l2 = gradient.itilde.iter().map(|i| i.sqrt()).collect();
        let d = d_series(flow, Exec::Parallel)?;
        Ok(Self {
            gradient,
            phi_l2,
            d,
        })
    }
}

/// `trace` is the monitor along the flow written over the static shrinker,
/// so its `F`, `Ĩ` and `D` columns describe the shrinker; `series` holds
/// those quantities for the flow.
pub struct RateRun {
    pub report: RateReport,
    pub flow: FlowTrajectory,
    pub distances: Vec<f64>,
    pub trace: FrequencyTrace,
    pub series: FlowSeries,
}

/// Lowest Fourier mode `k ≥ 2` of `u` over a uniformly sampled circle whose
/// amplitude is at least `rel` times the largest amplitude with `k ≥ 2`.
pub fn slowest_mode(u: &[f64], rel: f64) -> Option<u32> {
    let m = u.len();
    let amp = |k: usize| -> f64 {
        let (mut c, mut s) = (0.0, 0.0);
        for (j, v) in u.iter().enumerate() {
            let t = 2.0 * PI * (k * j) as f64 / m as f64;
            c += v * t.cos();
            s += v * t.sin();
        }
        2.0 * c.hypot(s) / m as f64
    };
    let amps: Vec<f64> = (2..m / 4).map(amp).collect();
    let top = amps.iter().cloned().fold(0.0, f64::max);
    if !(top > DISTANCE_FLOOR) {
        return None;
    }
    amps.iter()
        .position(|a| *a >= rel * top)
        .map(|i| i as u32 + 2)
}

pub fn experiment_rate(cfg: &ScenarioConfig) -> Result<RateRun> {
    let curves = cfg.curves().context("sampling initial curve")?;
    require_convex(&curves[0], "curve1")?;
    let ctl = cfg.step_control();
    let p = prepare(&curves[0], &ctl).context("curve1: singular time")?;
    let flow =
        rescaled_flow(&p, tau_end(cfg), &ctl, cfg.frame_every).context("curve1: rescaled flow")?;
    let shrinker = DiscreteCurve::circle(SQRT_2, [0.0, 0.0], cfg.m).context("shrinker")?;
    let times = flow.times();
    let base = FlowTrajectory::stationary(Picture::Rmcf, &shrinker, &times).context("shrinker")?;
    let trace = monitor(&base, &flow, &monitor_options(cfg)).context("frequency monitor")?;
    let distances: Vec<f64> = Exec::Parallel.map(flow.frames(), |f| {
        hausdorff_refined(&f.curve, &shrinker, HAUSDORFF_REFINE)
    });
    let max_distance = distances.iter().cloned().fold(0.0, f64::max);
    let exact = max_distance < EXACT_SHRINKER_DISTANCE;
    let u0 = normal_graph(&shrinker, &flow.frames()[0].curve).context("initial graph")?;
    let slowest = if exact {
        None
    } else {
        slowest_mode(u0.u(), 1e-3)
    };
    let theta_fit = lojasiewicz_fit(
        &flow,
        shrinkerlab_core::frequency::f_circle_shrinker(),
        cfg.fit_window,
        Exec::Parallel,
    )
    .ok()
    .filter(|f| f.outcome == LojasiewiczOutcome::Fitted)
    .and_then(|f| f.theta);
    let series = FlowSeries::of(&flow).context("flow series")?;
    let total = |v: &[f64]| {
        cumulative_integral(&times, v)
            .last()
            .copied()
            .unwrap_or(0.0)
    };
    let report = RateReport {
        outcome: if exact {
            RateOutcome::ExactShrinker
        } else {
            RateOutcome::Fitted
        },
        distance_fit: if exact {
            None
        } else {
            log_fit(&times, &distances, cfg.fit_window)
        },
        phi_fit: if exact {
            None
        } else {
            log_fit(&times, &series.phi_l2, cfg.fit_window)
        },
        slowest_mode: slowest,
        predicted_slope: slowest.map(|k| 1.0 - (k * k) as f64 / 2.0),
        lambda_fit: trace.summary.lambda_fit,
        u_late: trace.checks.u_late,
        theta_fit,
        integral_phi: total(&series.phi_l2),
        integral_d: total(&series.d),
        max_distance,
        singular: p.singular,
        frames: flow.len(),
    };
    Ok(RateRun {
        report,
        flow,
        distances,
        trace,
        series,
    })
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ResidualSummary {
    pub reports: usize,
    #[serde(rename = "maxFittedC")]
    pub max_fitted_c: f64,
    pub max_quad_ratio: f64,
    /// Slope of `log fittedC` over the window.
    #[serde(rename = "fittedCSlope")]
    pub fitted_c_slope: Option<f64>,
    /// Slope of `log (‖u‖_∞ + ‖∇u‖_∞)` over the window.
    #[serde(rename = "normC1Slope")]
    pub norm_c1_slope: Option<f64>,
    pub singular: [SingularEstimate; 2],
}

pub struct ResidualRun {
    pub summary: ResidualSummary,
    pub reports: Vec<ResidualReport>,
    pub base: FlowTrajectory,
    pub target: FlowTrajectory,
}

pub fn experiment_residual(cfg: &ScenarioConfig) -> Result<ResidualRun> {
    let ([pa, pb], base, target) = prepared_pair(cfg)?;
    let times = base.times();
    if times.len() < 3 {
        return Err(Error::WindowTooShort {
            frames: times.len(),
            required: 3,
        })
        .context("residual");
    }
    let reports = Exec::Parallel
        .map(&times[1..times.len() - 1], |&t| residual(&base, &target, t))
        .into_iter()
        .collect::<shrinkerlab_core::Result<Vec<_>>>()
        .context("residual")?;
    let taus: Vec<f64> = reports.iter().map(|r| r.tau).collect();
    let c: Vec<f64> = reports.iter().map(|r| r.fitted_c).collect();
    let c1: Vec<f64> = reports
        .iter()
        .map(|r| r.norms_u[0] + r.norms_u[1])
        .collect();
    let summary = ResidualSummary {
        reports: reports.len(),
        max_fitted_c: c.iter().cloned().fold(0.0, f64::max),
        max_quad_ratio: reports.iter().map(|r| r.quad_ratio).fold(0.0, f64::max),
        fitted_c_slope: log_fit(&taus, &c, cfg.fit_window).map(|f| f.slope),
        norm_c1_slope: log_fit(&taus, &c1, cfg.fit_window).map(|f| f.slope),
        singular: [pa.singular, pb.singular],
    };
    Ok(ResidualRun {
        summary,
        reports,
        base,
        target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_fit_recovers_exact_lines() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let (a, b, r2) = fit_line(&x, &y);
        assert!((a - 2.0).abs() < 1e-12 && (b + 0.5).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn slowest_mode_of_mixtures() {
        let m = 128;
        let u: Vec<f64> = (0..m)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / m as f64;
                0.3 + 1e-2 * (3.0 * t).cos() + 1e-3 * (5.0 * t).sin()
            })
            .collect();
        assert_eq!(slowest_mode(&u, 1e-3), Some(3));
        assert_eq!(slowest_mode(&vec![0.2; m], 1e-3), None);
    }

    #[test]
    fn prepared_circle_is_the_shrinker() {
        let c = DiscreteCurve::circle(2.0, [1.0, -0.5], 64).unwrap();
        let p = prepare(&c, &StepControl::default()).unwrap();
        assert!((p.singular.t - 2.0).abs() < 1e-6);
        assert!((p.tau0 + 2f64.ln()).abs() < 1e-6);
        let shrinker = DiscreteCurve::circle(SQRT_2, [0.0, 0.0], 64).unwrap();
        assert!(hausdorff_refined(&p.start, &shrinker, 4) < 1e-6);
    }

    #[test]
    fn log_fit_skips_zero_distances() {
        let t: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert!(log_fit(&t, &[0.0; 10], 0.5).is_none());
        let d: Vec<f64> = t.iter().map(|v| (-v).exp()).collect();
        let f = log_fit(&t, &d, 0.5).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-12 && f.from == 5.0);
    }
}
