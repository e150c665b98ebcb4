use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use super::DiscreteCurve;
use crate::error::{Error, Result};
use crate::fourier::{Periodic, TrigSeries};

/// Resample to `m_new` nodes equally spaced in arclength along the
/// trigonometric interpolant. Node 0 stays fixed.
pub fn resample(curve: &DiscreteCurve, m_new: usize) -> Result<DiscreteCurve> {
    if m_new < super::MIN_NODES || !m_new.is_multiple_of(2) {
        return Err(Error::InterpolationFailure(format!(
            "target node count {m_new} must be even and at least {}",
            super::MIN_NODES
        )));
    }
    curve
        .validate_cheap()
        .map_err(|e| Error::InterpolationFailure(e.to_string()))?;
    let out = resample_points(curve, m_new)?;
    DiscreteCurve::new(out).map_err(|e| Error::InterpolationFailure(e.to_string()))
}

/// Arclength-uniform resampling without the simplicity re-check, for use
/// inside the flow integrators.
pub(crate) fn resample_points(curve: &DiscreteCurve, m_new: usize) -> Result<Vec<[f64; 2]>> {
    let m = curve.len();
    let z = curve.to_complex();
    let mut p = Periodic::new(m);
    let mut dz = vec![Complex64::default(); m];
    p.derivative(&z, &mut dz);
    let position = p.series(&z);

    let speed: Vec<f64> = dz.iter().map(|d| d.norm()).collect();
    let mean_speed = speed.iter().sum::<f64>() / m as f64;
    let mut periodic_part = vec![0.0; m];
    p.antiderivative_into(&speed, &mut periodic_part);
    let p0 = periodic_part[0];
    let arclength_series = TrigSeries::from_samples(
        &periodic_part
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect::<Vec<_>>(),
    );
    let arclength = |theta: f64| mean_speed * theta + arclength_series.eval(theta).re - p0;

    let h = 2.0 * PI / m as f64;
    let grid_s: Vec<f64> = (0..m)
        .map(|j| mean_speed * h * j as f64 + periodic_part[j] - p0)
        .collect();
    if grid_s.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InterpolationFailure(
            "arclength is not monotone along the parameter".into(),
        ));
    }
    let total = 2.0 * PI * mean_speed;

    let mut out = Vec::with_capacity(m_new);
    for k in 0..m_new {
        let target = total * k as f64 / m_new as f64;
        let idx = grid_s.partition_point(|&s| s <= target).saturating_sub(1);
        let (s0, s1) = (
            grid_s[idx],
            if idx + 1 < m { grid_s[idx + 1] } else { total },
        );
        let mut theta = h * (idx as f64 + (target - s0) / (s1 - s0));
        let mut converged = false;
        for _ in 0..30 {
            let (_, d) = position.eval_with_derivative(theta);
            let step = (arclength(theta) - target) / d.norm();
            theta -= step;
            if step.abs() < 1e-14 {
                converged = true;
                break;
            }
        }
        if !converged || !theta.is_finite() {
            return Err(Error::InterpolationFailure(format!(
                "arclength inversion did not converge at node {k}"
            )));
        }
        let v = position.eval(theta);
        out.push([v.re, v.im]);
    }
    Ok(out)
}

/// Trigonometric upsampling by an integer factor (parameter-uniform).
pub fn upsample(curve: &DiscreteCurve, factor: usize) -> Result<DiscreteCurve> {
    let fine = curve.series().resample_uniform(curve.len() * factor.max(1));
    DiscreteCurve::new(fine.iter().map(|z| [z.re, z.im]).collect())
}
