use std::f64::consts::{PI, SQRT_2};
use std::fs;

use shrinkerlab::experiments::{
    experiment_rate, experiment_residual, experiment_separation, RateOutcome, Verdict,
};
use shrinkerlab::{parse_config, run, ScenarioConfig};

fn config(text: &str) -> ScenarioConfig {
    parse_config(text).expect("valid config")
}

/// Ellipse axes with the area of the circle of radius `r`.
fn equal_area_ellipse(r: f64, ratio: f64) -> (f64, f64) {
    (r * ratio.sqrt(), r / ratio.sqrt())
}

#[test]
fn spectrum_file_lists_the_circle_eigenvalues() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(&format!(
        "scenario = spectrum\ncurve1 = circle({SQRT_2})\nm = 128\nmodes = 9\n"
    ));
    cfg.out = dir.path().to_path_buf();
    run(&cfg).unwrap();
    let text = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("index,eigenvalue"));
    let values: Vec<f64> = lines
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(values.len(), 9);
    let expected = [1.0, 0.5, 0.5, -1.0, -1.0, -3.5, -3.5, -7.0, -7.0];
    for (v, e) in values.iter().zip(expected) {
        assert!((v - e).abs() < 1e-8, "{v} vs {e}");
    }
}

#[test]
fn mode_three_perturbation_decays_at_its_eigenvalue() {
    let cfg = config(&format!(
        "scenario = rate\ncurve1 = fourier({SQRT_2}, 3:0.02:0)\nm = 128\ntau_end = 2\n"
    ));
    let r = experiment_rate(&cfg).unwrap().report;
    assert_eq!(r.outcome, RateOutcome::Fitted);
    assert_eq!(r.slowest_mode, Some(3));
    assert_eq!(r.predicted_slope, Some(-3.5));
    let fit = r.distance_fit.unwrap();
    assert!((fit.slope + 3.5).abs() < 0.3, "{fit:?}");
    let phi = r.phi_fit.unwrap();
    assert!((phi.slope + 3.5).abs() < 0.3, "{phi:?}");
}

#[test]
fn circle_is_an_exact_shrinker() {
    let cfg = config("scenario = rate\ncurve1 = circle(3, 0.5, -1)\nm = 64\ntau_end = 1\n");
    let r = experiment_rate(&cfg).unwrap().report;
    assert_eq!(r.outcome, RateOutcome::ExactShrinker);
    assert!(r.distance_fit.is_none() && r.slowest_mode.is_none());
    assert!(r.max_distance < 1e-8, "{}", r.max_distance);
}

#[test]
fn generic_convex_curve_decays_at_mode_two() {
    let cfg = config("scenario = rate\ncurve1 = ellipse(1.2, 0.8, 30)\nm = 128\ntau_end = 6\n");
    let run = experiment_rate(&cfg).unwrap();
    let r = &run.report;
    assert_eq!(r.slowest_mode, Some(2));
    let fit = r.distance_fit.unwrap();
    assert!((fit.slope + 1.0).abs() < 0.15, "{fit:?}");
    assert!((r.u_late + 2.0).abs() < 0.2, "{}", r.u_late);
    // F decreases towards the shrinker value
    let f = &run.series.gradient.f;
    assert!(f.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    let limit = (2.0 * PI).sqrt() * (-0.5f64).exp();
    assert!(f.last().unwrap() - limit < 1e-4);
}

#[test]
fn rotated_ellipses_separate_at_rate_one() {
    let (a, b) = equal_area_ellipse(SQRT_2, 1.21);
    let cfg = config(&format!(
        "scenario = separation\ncurve1 = ellipse({a}, {b}, 45)\ncurve2 = ellipse({a}, {b}, -45)\nm = 128\ntau_end = 6\n"
    ));
    let r = experiment_separation(&cfg).unwrap().report;
    let fit = r.distance_fit.unwrap();
    assert!((fit.slope + 1.0).abs() < 0.15, "{fit:?}");
    assert!(r.asymptotically_linear && r.slopes_match);
    assert_eq!(r.verdict, Verdict::Consistent);
}

#[test]
fn identical_curves_underflow_without_a_flag() {
    let cfg = config(
        "scenario = separation\ncurve1 = ellipse(1.5, 1.3)\ncurve2 = ellipse(1.5, 1.3)\nm = 64\ntau_end = 1\n",
    );
    let run = experiment_separation(&cfg).unwrap();
    assert!(run.report.distance_fit.is_none());
    assert!(run.report.i_underflow && run.trace.checks.all_underflow);
    assert_eq!(run.report.verdict, Verdict::Consistent);
    assert!(run.distances.iter().all(|d| *d == 0.0));
}

#[test]
fn separation_slope_is_resolution_independent() {
    let (a, b) = equal_area_ellipse(SQRT_2, 1.21);
    let slope = |m: usize| {
        let cfg = config(&format!(
            "scenario = separation\ncurve1 = ellipse({a}, {b})\ncurve2 = circle({SQRT_2})\nm = {m}\ntau_end = 5\n"
        ));
        experiment_separation(&cfg)
            .unwrap()
            .report
            .distance_fit
            .unwrap()
            .slope
    };
    let (coarse, fine) = (slope(256), slope(512));
    assert!((coarse - fine).abs() < 0.05, "{coarse} vs {fine}");
    assert!((fine + 1.0).abs() < 0.15, "{fine}");
}

#[test]
fn residual_of_close_flows_is_quadratic() {
    let cfg = config(&format!(
        "scenario = gauge-residual\ncurve1 = fourier({SQRT_2}, 2:0.01:0, 4:0:0.005)\ncurve2 = circle({SQRT_2})\nm = 128\ntau_end = 1\nframe_every = 0.01\n"
    ));
    let run = experiment_residual(&cfg).unwrap();
    assert_eq!(run.summary.reports, run.base.len() - 2);
    assert!(
        run.summary.max_quad_ratio < 1.0,
        "{}",
        run.summary.max_quad_ratio
    );
    for r in &run.reports {
        assert!(r.max_residual.is_finite());
    }
}

#[test]
fn perturbations_depend_on_the_seed_only() {
    let base =
        "scenario = rate\ncurve1 = ellipse(1.3, 1.2)\nm = 64\ntau_end = 0.5\nperturb = 1e-3\n";
    let curves = |seed: u64| config(&format!("{base}seed = {seed}\n")).curves().unwrap();
    assert_eq!(curves(3), curves(3));
    assert_ne!(curves(3), curves(4));
    let plain = config("scenario = rate\ncurve1 = ellipse(1.3, 1.2)\nm = 64\ntau_end = 0.5\n")
        .curves()
        .unwrap();
    assert_ne!(plain, curves(3));
}
