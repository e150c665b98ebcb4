use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{FlowTrajectory, Picture, SingularData};
use crate::curvegeo::Point;
use crate::error::{Error, Result};

/// Singular time and point with error bars taken from the fit residuals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularEstimate {
    #[serde(rename = "T")]
    pub t: f64,
    pub x0: Point,
    #[serde(rename = "TErr")]
    pub t_err: f64,
    pub x0_err: f64,
    pub frames_used: usize,
}

impl SingularEstimate {
    pub fn data(&self) -> SingularData {
        SingularData {
            t: self.t,
            x0: self.x0,
        }
    }
}

/// Least-squares line `y ≈ a + b t`; returns `(a, b, rms residual)`.
pub(crate) fn line_fit(t: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let stt: f64 = t.iter().map(|v| (v - tm) * (v - tm)).sum();
    let sty: f64 = t.iter().zip(y).map(|(a, b)| (a - tm) * (b - ym)).sum();
    let b = if stt > 0.0 { sty / stt } else { 0.0 };
    let a = ym - b * tm;
    let rms = (t
        .iter()
        .zip(y)
        .map(|(ti, yi)| (yi - a - b * ti).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (a, b, rms)
}

/// Estimate `(T, x₀)` from an MCF trajectory over the last `fit_fraction`
/// of its frames, using the exact area law `A(t) = A(t₁) - 2π(t - t₁)` for
/// `T` and a linear extrapolation of the area centroid to `T` for `x₀`.
pub fn estimate_singularity(traj: &FlowTrajectory, fit_fraction: f64) -> Result<SingularEstimate> {
    if traj.picture() != Picture::Mcf {
        return Err(Error::InvalidTrajectory(
            "expected an MCF trajectory".into(),
        ));
    }
    let n = traj.len();
    let used = ((fit_fraction.clamp(0.0, 1.0) * n as f64).ceil() as usize).clamp(3.min(n), n);
    if used < 3 {
        return Err(Error::NotShrinking(format!("only {n} frames available")));
    }
    let window = &traj.frames()[n - used..];
    let times: Vec<f64> = window.iter().map(|f| f.time).collect();
    let areas: Vec<f64> = window.iter().map(|f| f.curve.area()).collect();
    if areas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::NotShrinking("area is not decreasing".into()));
    }
    let (_, slope, _) = line_fit(&times, &areas);
    if !((slope / (-2.0 * PI) - 1.0).abs() <= 0.05) {
        return Err(Error::NotShrinking(format!(
            "area slope {slope:.4} is not within 5% of -2π"
        )));
    }
    let extinction: Vec<f64> = times
        .iter()
        .zip(&areas)
        .map(|(t, a)| t + a / (2.0 * PI))
        .collect();
    let t_sing = extinction.iter().sum::<f64>() / used as f64;
    let t_err = extinction
        .iter()
        .map(|v| (v - t_sing).abs())
        .fold(0.0, f64::max);

    let centroids: Vec<Point> = window.iter().map(|f| f.curve.centroid()).collect();
    let cx: Vec<f64> = centroids.iter().map(|c| c[0]).collect();
    let cy: Vec<f64> = centroids.iter().map(|c| c[1]).collect();
    let (ax, bx, rx) = line_fit(&times, &cx);
    let (ay, by, ry) = line_fit(&times, &cy);
    Ok(SingularEstimate {
        t: t_sing,
        x0: [ax + bx * t_sing, ay + by * t_sing],
        t_err,
        x0_err: rx.hypot(ry),
        frames_used: used,
    })
}
