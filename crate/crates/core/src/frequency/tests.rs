use std::f64::consts::{PI, SQRT_2};

use super::*;
use crate::flowcore::{run_rmcf, Frame, RunOptions, StepControl};
use crate::fourier::grid;
use crate::gauge::reconstruct;

fn circle(r: f64, m: usize) -> DiscreteCurve {
    DiscreteCurve::circle(r, [0.0, 0.0], m).unwrap()
}

fn times(n: usize, dt: f64) -> Vec<f64> {
    (0..n).map(|i| i as f64 * dt).collect()
}

fn mass() -> f64 {
    2.0 * PI * SQRT_2 * (-0.5f64).exp()
}

/// Radius of the round RMCF solution: `(r²)' = r² - 2`.
fn radial_radius(r0: f64, tau: f64) -> f64 {
    (2.0 + (r0 * r0 - 2.0) * tau.exp()).sqrt()
}

fn radial_trajectory(r0: f64, ts: &[f64], m: usize) -> FlowTrajectory {
    let frames = ts
        .iter()
        .map(|&time| Frame {
            time,
            curve: circle(radial_radius(r0, time), m),
        })
        .collect();
    FlowTrajectory::new(Picture::Rmcf, frames, None).unwrap()
}

/// Target curves `√2 - u(θ, τ)` over the static shrinker.
fn graph_trajectory(
    ts: &[f64],
    m: usize,
    u: impl Fn(f64, f64) -> f64,
) -> (FlowTrajectory, FlowTrajectory) {
    let base_curve = circle(SQRT_2, m);
    let base = FlowTrajectory::stationary(Picture::Rmcf, &base_curve, ts).unwrap();
    let frames = ts
        .iter()
        .map(|&time| {
            let field: Vec<f64> = grid(m).map(|t| u(t, time)).collect();
            Frame {
                time,
                curve: reconstruct(&base_curve, &field).unwrap(),
            }
        })
        .collect();
    (
        base,
        FlowTrajectory::new_unchecked(Picture::Rmcf, frames, None),
    )
}

fn opts() -> MonitorOptions {
    MonitorOptions {
        lambda_stride: 1000,
        ..MonitorOptions::default()
    }
}

#[test]
fn energy_closed_forms_on_shrinker() {
    let m = 256;
    let c = circle(SQRT_2, m);
    let ones = vec![1.0; m];
    assert!((energy_i(&c, &ones).unwrap() - mass()).abs() < 1e-12);
    let cos2: Vec<f64> = grid(m).map(|t| (2.0 * t).cos()).collect();
    assert!((energy_i(&c, &cos2).unwrap() - mass() / 2.0).abs() < 1e-12);
}

#[test]
fn frequency_of_eigenmodes() {
    let m = 256;
    let c = circle(SQRT_2, m);
    assert!((frequency_u(&c, &vec![1.0; m]).unwrap() - 2.0).abs() < 1e-10);
    for k in 1..6 {
        let u: Vec<f64> = grid(m).map(|t| (k as f64 * t + 0.3).cos()).collect();
        let expect = 2.0 * (1.0 - (k * k) as f64 / 2.0);
        assert!(
            (frequency_u(&c, &u).unwrap() - expect).abs() < 1e-9,
            "k = {k}"
        );
    }
    assert!(matches!(
        frequency_u(&c, &vec![0.0; m]),
        Err(Error::EnergyUnderflow { .. })
    ));
}

#[test]
fn itilde_closed_form_on_circles() {
    for r in [0.8, SQRT_2, 2.5] {
        let phi = 1.0 / r - r / 2.0;
        let expect = phi * phi * 2.0 * PI * r * (-r * r / 4.0).exp();
        let got = dirichlet_einstein(&circle(r, 256)).unwrap();
        assert!((got - expect).abs() < 1e-10, "r = {r}: {got} vs {expect}");
    }
    assert!(dirichlet_einstein(&circle(SQRT_2, 256)).unwrap() < 1e-20);
}

#[test]
fn f_decreases_at_the_gradient_rate() {
    let c = DiscreteCurve::ellipse(1.7, 1.25, 0.0, [0.0, 0.0], 128).unwrap();
    let run = run_rmcf(
        &c,
        0.0,
        0.3,
        &StepControl::default(),
        &RunOptions::default(),
    )
    .unwrap();
    let g = gradient_series(&run.trajectory, Exec::Sequential).unwrap();
    assert_eq!(g.times.len(), run.trajectory.len());
    assert!(g.dfdtau.iter().all(|d| *d < 0.0));
    for (j, d) in g.relative_defects(1e-8).into_iter().enumerate() {
        let d = d.expect("resolved");
        assert!(d < 1e-4, "frame {j}: {d:e}");
    }
}

#[test]
fn derivative_weights_are_exact_for_quartics() {
    let ts = [0.0, 0.1, 0.25, 0.3, 0.45];
    let f = |t: f64| t.powi(4) - 2.0 * t * t + t;
    let df = |t: f64| 4.0 * t.powi(3) - 4.0 * t + 1.0;
    let s: Vec<usize> = (0..5).collect();
    for at in 0..5 {
        let w = derivative_weights(&ts, &s, at);
        let got: f64 = w.iter().zip(&ts).map(|(w, t)| w * f(*t)).sum();
        assert!((got - df(ts[at])).abs() < 1e-10);
    }
    assert_eq!(stencil(0, 10), vec![0, 1, 2, 3, 4]);
    assert_eq!(stencil(1, 10), vec![0, 1, 2, 3, 4]);
    assert_eq!(stencil(5, 10), vec![3, 4, 5, 6, 7]);
    assert_eq!(stencil(9, 10), vec![5, 6, 7, 8, 9]);
    assert_eq!(stencil(2, 3), vec![0, 1, 2]);
}

#[test]
fn d_vanishes_on_static_shrinker() {
    let base =
        FlowTrajectory::stationary(Picture::Rmcf, &circle(SQRT_2, 128), &times(10, 0.05)).unwrap();
    let d = d_series(&base, Exec::Sequential).unwrap();
    assert!(d.iter().all(|v| *v < 1e-8), "{d:?}");
    assert!(d_coefficient(&base, 0.2).unwrap() < 1e-8);
}

#[test]
fn d_matches_radial_closed_form() {
    let r0 = 1.5;
    let ts = times(30, 0.01);
    let traj = radial_trajectory(r0, &ts, 128);
    let tau = ts[10];
    let r = radial_radius(r0, tau);
    let phi = 1.0 / r - r / 2.0;
    let dr = (r * r - 2.0) / (2.0 * r);
    let phi_tau = -(1.0 / (r * r) + 0.5) * dr;
    let expect = 2.0 * phi.abs() / r + 2.0 * phi.abs() / r.powi(3) + phi.abs() + phi_tau.abs();
    let got = d_coefficient(&traj, tau).unwrap();
    assert!((got - expect).abs() < 1e-8, "{got} vs {expect}");
    let series = d_series(&traj, Exec::Parallel).unwrap();
    assert!((series[10] - got).abs() < 1e-12);
    assert!(matches!(
        d_coefficient(&traj, 0.0),
        Err(Error::FrameMissing { .. })
    ));
    assert!(matches!(
        d_coefficient(&traj, 0.005),
        Err(Error::FrameMissing { .. })
    ));
}

#[test]
fn lojasiewicz_exponent_of_round_solutions() {
    // Near √2: ‖φ‖ ∝ |δ| and F - F_Σ ∝ -δ², so ‖φ‖ ∝ |F - F_Σ|^{1/2}.
    let ts = times(200, 0.02);
    let traj = radial_trajectory(SQRT_2 + 1e-4, &ts, 64);
    let fit = lojasiewicz_fit(&traj, f_circle_shrinker(), 0.5, Exec::Parallel).unwrap();
    assert_eq!(fit.outcome, LojasiewiczOutcome::Fitted);
    let theta = fit.theta.unwrap();
    assert!((theta - 0.5).abs() < 0.01, "theta {theta}");
    assert!(fit.partial_sums.windows(2).all(|w| w[1] >= w[0]));
    assert!(fit.f_gap.iter().all(|g| *g < 0.0));
}

#[test]
fn lojasiewicz_on_exact_shrinker_is_degenerate() {
    let base =
        FlowTrajectory::stationary(Picture::Rmcf, &circle(SQRT_2, 64), &times(30, 0.1)).unwrap();
    let fit = lojasiewicz_fit(&base, f_circle_shrinker(), 0.4, Exec::Sequential).unwrap();
    assert_eq!(fit.outcome, LojasiewiczOutcome::ExactShrinker);
    assert!(fit.theta.is_none());
    let short =
        FlowTrajectory::stationary(Picture::Rmcf, &circle(SQRT_2, 64), &times(5, 0.1)).unwrap();
    assert!(matches!(
        lojasiewicz_fit(&short, f_circle_shrinker(), 0.4, Exec::Sequential),
        Err(Error::WindowTooShort { .. })
    ));
}

#[test]
fn monitor_on_single_eigenmode() {
    // L cos 2θ = -cos 2θ on the shrinker, so u = ε e^{-τ} cos 2θ solves u_τ = Lu.
    let m = 128;
    let ts = times(60, 0.05);
    let (base, target) = graph_trajectory(&ts, m, |t, tau| 1e-3 * (-tau).exp() * (2.0 * t).cos());
    let trace = monitor(&base, &target, &opts()).unwrap();
    for r in &trace.records {
        let expect_i = 1e-6 * (-2.0 * r.tau).exp() * mass() / 2.0;
        assert!((r.i - expect_i).abs() < 1e-6 * expect_i);
        assert!((r.u + 2.0).abs() < 1e-6, "U {}", r.u);
        assert!((r.dlogi + 2.0).abs() < 1e-4, "dlogI {}", r.dlogi);
        assert!(
            r.d < 1e-8 && r.itilde < 1e-20,
            "D {} Itilde {}",
            r.d,
            r.itilde
        );
        assert!(r.fitted_c < 1e-3, "fittedC {}", r.fitted_c);
        assert!(r.v_err.abs() < 1e-4);
        assert!((r.lambda - 1.0).abs() < 1e-6);
    }
    let s = &trace.summary;
    assert!((s.lambda_fit - 2.0).abs() < 1e-4);
    assert!((s.u_inf + 2.0).abs() < 1e-6);
    assert!((s.lambda - 1.0).abs() < 1e-6);
    assert!(s.theta_fit.is_none());
    assert!(s.integral_d < 1e-7);
    assert!(trace.checks.log_derivative_violations.is_empty());
    assert!(trace.checks.rayleigh_violations.is_empty());
    assert!(!trace.checks.superexponential);
    let offset = s.offset_fit;
    assert!(trace
        .records
        .iter()
        .all(|r| r.i.ln() >= -s.lambda_fit * r.tau - offset - 1e-9));
}

#[test]
fn monitor_on_mode_mixture_is_nondecreasing() {
    let m = 128;
    let ts = times(80, 0.05);
    let (base, target) = graph_trajectory(&ts, m, |t, tau| {
        1e-3 * (-tau).exp() * (2.0 * t).cos() + 1e-3 * (-3.5 * tau).exp() * (3.0 * t).sin()
    });
    let trace = monitor(&base, &target, &opts()).unwrap();
    let u: Vec<f64> = trace.records.iter().map(|r| r.u).collect();
    assert!(u.windows(2).all(|w| w[1] >= w[0] - 1e-9), "{u:?}");
    assert!(u[0] < -3.0 && (u[u.len() - 1] + 2.0).abs() < 1e-2);
    assert!(trace.checks.log_derivative_violations.is_empty());
    assert!(trace.checks.rayleigh_violations.is_empty());
    assert!(!trace.checks.superexponential);
    let env: Vec<f64> = trace.records.iter().map(|r| r.lower_envelope).collect();
    assert!((env[env.len() - 1] - u[0]).abs() < 1e-12);
}

#[test]
fn monitor_flags_superexponential_decay() {
    let ts = times(60, 0.05);
    let (base, target) = graph_trajectory(&ts, 64, |t, tau| {
        1e-2 * (-tau * tau).exp() * (2.0 * t).cos()
    });
    let trace = monitor(&base, &target, &opts()).unwrap();
    assert!(trace.checks.superexponential);
}

#[test]
fn monitor_identical_flows_underflow() {
    let ts = times(20, 0.05);
    let (base, target) = graph_trajectory(&ts, 64, |_, _| 0.0);
    let trace = monitor(&base, &target, &opts()).unwrap();
    assert!(trace.checks.all_underflow);
    assert!(trace.records.iter().all(|r| r.underflow && r.u.is_nan()));
    assert!(!trace.checks.superexponential);
    let csv = trace.to_csv();
    assert!(csv.starts_with("tau,I,U,Itilde,F,dFdtau,phiL2,D,fittedC,dlogI,Vmain,Verr,underflow\n"));
    assert_eq!(csv.lines().count(), 21);
    assert!(csv.lines().nth(1).unwrap().ends_with(",true"));
}

#[test]
fn collapse_detector() {
    let ts = times(50, 0.1);
    let exp: Vec<f64> = ts.iter().map(|t| (-2.0 * t).exp()).collect();
    assert!(!superexponential_collapse(&ts, &exp, 0.4));
    let fast: Vec<f64> = ts.iter().map(|t| (-t * t).exp()).collect();
    assert!(superexponential_collapse(&ts, &fast, 0.4));
    let mut vanish = exp.clone();
    for v in vanish.iter_mut().skip(45) {
        *v = 0.0;
    }
    assert!(superexponential_collapse(&ts, &vanish, 0.4));
}

#[test]
fn monitor_rejects_mcf_and_missing_frames() {
    let ts = times(10, 0.05);
    let (base, target) = graph_trajectory(&ts, 64, |t, _| 1e-3 * t.cos());
    let shifted = graph_trajectory(&times(10, 0.07), 64, |t, _| 1e-3 * t.cos()).1;
    assert!(matches!(
        monitor(&base, &shifted, &opts()),
        Err(Error::FrameMissing { .. })
    ));
    let mcf = FlowTrajectory::new(Picture::Mcf, vec![target.frames()[0].clone()], None).unwrap();
    assert!(matches!(
        monitor(&base, &mcf, &opts()),
        Err(Error::InvalidTrajectory(_))
    ));
}
