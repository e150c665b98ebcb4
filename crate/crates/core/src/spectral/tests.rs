use std::f64::consts::SQRT_2;

use super::*;
use crate::fourier::grid;

fn circle(r: f64, m: usize) -> DiscreteCurve {
    DiscreteCurve::circle(r, [0.0, 0.0], m).unwrap()
}

/// Deterministic pseudo-random field in `[-1, 1)`.
fn noise(m: usize, seed: u64) -> Vec<f64> {
    let mut s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1);
    (0..m)
        .map(|_| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 52) as f64 - 1.0
        })
        .collect()
}

/// Strong form `u_ss - ½⟨x,T⟩u_s + (H² + ½)u` from the geometry fields.
fn strong_l(base: &DiscreteCurve, u: &[f64]) -> Vec<f64> {
    let g = curvegeo::geometry(base).unwrap();
    let (us, uss) = g.d_ds2(u);
    (0..u.len())
        .map(|j| {
            let x = base.points()[j];
            let xt = x[0] * g.tangent[j][0] + x[1] * g.tangent[j][1];
            uss[j] - 0.5 * xt * us[j] + (g.norm_sq_a[j] + 0.5) * u[j]
        })
        .collect()
}

fn circle_spectrum(count: usize) -> Vec<f64> {
    let mut v = vec![1.0];
    let mut k = 1.0;
    while v.len() < count {
        let l = 1.0 - k * k / 2.0;
        v.push(l);
        v.push(l);
        k += 1.0;
    }
    v.truncate(count);
    v
}

#[test]
fn circle_eigenvalues_are_one_minus_half_k_squared() {
    let op = assemble(&circle(SQRT_2, 512)).unwrap();
    let s = eigenpairs(&op, 13).unwrap();
    for (got, want) in s.eigenvalues.iter().zip(circle_spectrum(13)) {
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }
    for pair in s.eigenvalues[1..].chunks(2) {
        assert!((pair[0] - pair[1]).abs() < 1e-8);
    }
    assert!((s.lambda - 1.0).abs() < 1e-10);
}

#[test]
fn eigenpairs_are_orthonormal_with_small_residual() {
    let base = DiscreteCurve::ellipse(1.5, 1.3, 0.2, [0.1, 0.0], 128).unwrap();
    let form = WeightedForm::new(&base).unwrap();
    let s = eigenpairs(&assemble(&base).unwrap(), 10).unwrap();
    for (i, (l, v)) in s.eigenvalues.iter().zip(&s.eigenfunctions).enumerate() {
        for (j, w) in s.eigenfunctions.iter().enumerate() {
            let expect = if i == j { 1.0 } else { 0.0 };
            assert!((form.inner(v, w) - expect).abs() < 1e-8);
        }
        let lv = form.apply_l(v);
        let r: Vec<f64> = lv.iter().zip(v).map(|(a, b)| a - l * b).collect();
        assert!(form.inner(&r, &r).sqrt() < 1e-8);
    }
}

#[test]
fn trace_matches_eigenvalue_sum() {
    let base = DiscreteCurve::ellipse(1.5, 1.2, 0.0, [0.0, 0.0], 64).unwrap();
    let op = assemble(&base).unwrap();
    let s = eigenpairs(&op, 64).unwrap();
    let sum: f64 = s.eigenvalues.iter().sum();
    assert!((sum - op.trace()).abs() < 1e-6 * op.trace().abs());
    assert!(eigenpairs(&op, 65).is_err());
}

#[test]
fn form_is_symmetric() {
    let base =
        DiscreteCurve::polar(1.3, &[(2, 0.1, 0.0), (5, 0.0, 0.02)], [0.2, -0.1], 128).unwrap();
    let form = WeightedForm::new(&base).unwrap();
    for seed in 0..5 {
        let v = noise(128, seed);
        let w = noise(128, seed + 100);
        assert!((form.form(&v, &w) - form.form(&w, &v)).abs() < 1e-12);
        let lhs = form.inner(&v, &form.apply_l(&w));
        let rhs = form.inner(&form.apply_l(&v), &w);
        assert!((lhs - rhs).abs() < 1e-8 * lhs.abs().max(rhs.abs()).max(1.0));
    }
    let op = assemble(&base).unwrap();
    assert_eq!(op.form, op.form.transpose());
}

#[test]
fn apply_l_matches_strong_form_on_smooth_fields() {
    let base = DiscreteCurve::ellipse(1.6, 1.1, 0.4, [0.3, 0.2], 256).unwrap();
    let form = WeightedForm::new(&base).unwrap();
    let u: Vec<f64> = grid(256)
        .map(|t| (2.0 * t).cos() + 0.3 * (5.0 * t).sin() + 0.1)
        .collect();
    let weak = form.apply_l(&u);
    let strong = strong_l(&base, &u);
    let err = weak
        .iter()
        .zip(&strong)
        .fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()));
    assert!(err < 1e-8, "{err:e}");
}

#[test]
fn circle_eigenrelation_for_trig_modes() {
    let base = circle(SQRT_2, 512);
    let form = WeightedForm::new(&base).unwrap();
    let c: Vec<f64> = vec![0.7; 512];
    assert!(form.apply_l(&c).iter().all(|v| (v - 0.7).abs() < 1e-10));
    for k in 1..=8 {
        let kf = k as f64;
        let lambda = 1.0 - kf * kf / 2.0;
        for phase in [0.0, std::f64::consts::FRAC_PI_2] {
            let u: Vec<f64> = grid(512).map(|t| (kf * t + phase).cos()).collect();
            let lu = form.apply_l(&u);
            for (a, b) in lu.iter().zip(&u) {
                assert!((a - lambda * b).abs() < 1e-4);
            }
        }
    }
}

#[test]
fn sawtooth_is_not_a_spurious_top_mode() {
    let base = circle(SQRT_2, 64);
    let form = WeightedForm::new(&base).unwrap();
    let n: Vec<f64> = (0..64)
        .map(|j| if j % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    // interpolant stiffness of cos(32θ) is 32²/2 · π e/g, its sampled mass is
    // 2π e g (twice the continuum value): quotient 1 - 32²/4 on radius √2
    let q = form.rayleigh_quotient(&n).unwrap();
    assert!((q - (1.0 - 256.0)).abs() < 1e-8, "{q}");
}

#[test]
fn perturbed_circle_spectrum_is_close() {
    let want = circle_spectrum(9);
    for amp in [1e-2, 1e-3] {
        let base = DiscreteCurve::polar(SQRT_2, &[(2, amp, 0.0)], [0.0, 0.0], 256).unwrap();
        let s = eigenpairs(&assemble(&base).unwrap(), 9).unwrap();
        for (got, want) in s.eigenvalues.iter().zip(&want) {
            assert!((got - want).abs() < 5e-2 * amp / 1e-2);
        }
    }
}

#[test]
fn minus_one_eigenfunctions_are_mode_two() {
    let m = 256;
    let base = circle(SQRT_2, m);
    let form = WeightedForm::new(&base).unwrap();
    let s = eigenpairs(&assemble(&base).unwrap(), 5).unwrap();
    let cos2: Vec<f64> = grid(m).map(|t| (2.0 * t).cos()).collect();
    let sin2: Vec<f64> = grid(m).map(|t| (2.0 * t).sin()).collect();
    let nc = form.inner(&cos2, &cos2);
    let ns = form.inner(&sin2, &sin2);
    for v in &s.eigenfunctions[3..5] {
        let a = form.inner(v, &cos2);
        let b = form.inner(v, &sin2);
        let corr = (a * a / nc + b * b / ns) / form.inner(v, v);
        assert!(corr > 0.999, "{corr}");
    }
}

#[test]
fn spectral_accuracy_on_coarse_grids() {
    for m in [32, 64] {
        let s = eigenpairs(&assemble(&circle(SQRT_2, m)).unwrap(), 7).unwrap();
        for (got, want) in s.eigenvalues.iter().zip(circle_spectrum(7)) {
            assert!((got - want).abs() < 1e-10);
        }
    }
}

#[test]
fn inverse_iteration_matches_dense_top() {
    let base = DiscreteCurve::ellipse(1.7, 1.2, 0.3, [0.2, -0.1], 128).unwrap();
    let dense = eigenpairs(&assemble(&base).unwrap(), 1).unwrap();
    let (top, v) = top_eigenpair(&base).unwrap();
    assert!((top - dense.lambda).abs() < 1e-10);
    let form = WeightedForm::new(&base).unwrap();
    let lv = form.apply_l(&v);
    let r: Vec<f64> = lv.iter().zip(&v).map(|(a, b)| a - top * b).collect();
    assert!(form.inner(&r, &r).sqrt() < 1e-6 * form.inner(&v, &v).sqrt());
}

#[test]
fn rayleigh_quotient_never_exceeds_top() {
    let base = DiscreteCurve::polar(1.4, &[(3, 0.05, 0.02)], [0.1, 0.0], 128).unwrap();
    let form = WeightedForm::new(&base).unwrap();
    let (top, _) = top_eigenpair(&base).unwrap();
    for seed in 0..20 {
        let u = noise(128, seed);
        assert!(form.rayleigh_quotient(&u).unwrap() <= top + 1e-10);
    }
}

#[test]
fn static_circle_bound_is_one() {
    let c = circle(SQRT_2, 128);
    let traj =
        FlowTrajectory::stationary(crate::flowcore::Picture::Rmcf, &c, &[0.0, 0.5, 1.0, 1.5])
            .unwrap();
    let b = rayleigh_bound(&traj, 1, Exec::Parallel).unwrap();
    assert_eq!(b.values.len(), 4);
    assert!(b.values.iter().all(|v| (v - 1.0).abs() < 1e-10));
    assert!((b.at(0.7) - 1.0).abs() < 1e-10);
    let seq = rayleigh_bound(&traj, 3, Exec::Sequential).unwrap();
    assert_eq!(seq.times, vec![0.0, 1.5]);
}

#[test]
fn spectrum_json_shape() {
    let s = eigenpairs(&assemble(&circle(SQRT_2, 32)).unwrap(), 3).unwrap();
    let v = serde_json::to_value(&s).unwrap();
    assert_eq!(v["m"], 32);
    assert!(v.get("Lambda").is_some());
    assert!(v.get("eigenfunctions").is_none());
}
