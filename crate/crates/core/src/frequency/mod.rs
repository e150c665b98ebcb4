//! Energies `I`, `Ĩ`, the frequency `U`, the coefficient `D(τ)`, the
//! Lojasiewicz fit and a monitor that evaluates every quantity of the
//! frequency argument along a pair of rescaled flows.

mod monitor;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::curvegeo::{self, DiscreteCurve};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::flowcore::{FlowTrajectory, Picture};
use crate::spectral::WeightedForm;

pub use monitor::{
    monitor, superexponential_collapse, FrequencyRecord, FrequencySummary, FrequencyTrace,
    MonitorChecks, MonitorOptions,
};

/// Energies below this are treated as zero.
pub const EPS_FLOOR: f64 = 1e-14;

/// `F[Σ]` of the shrinking circle of radius `√2`: `√(2π) e^{-1/2}`.
pub fn f_circle_shrinker() -> f64 {
    (2.0 * PI).sqrt() * (-0.5f64).exp()
}

/// `I = ∫ u² dμ̃`.
pub fn energy_i(base: &DiscreteCurve, u: &[f64]) -> Result<f64> {
    let form = WeightedForm::new(base)?;
    Ok(form.inner(u, u))
}

/// `U = 2 ∫ u L u dμ̃ / I = 2(-∫|∇u|² + ∫(|A|² + ½)u²) / I`.
pub fn frequency_u(base: &DiscreteCurve, u: &[f64]) -> Result<f64> {
    let form = WeightedForm::new(base)?;
    frequency_with(&form, u)
}

pub(crate) fn frequency_with(form: &WeightedForm, u: &[f64]) -> Result<f64> {
    let i = form.inner(u, u);
    if !(i > EPS_FLOOR) {
        return Err(Error::EnergyUnderflow { energy: i });
    }
    Ok(2.0 * form.form(u, u) / i)
}

/// `Ĩ = ∫ φ² dμ̃` with `dμ̃ = e^{-|x|²/4} ds` (no `(4π)^{-1/2}` factor).
pub fn dirichlet_einstein(curve: &DiscreteCurve) -> Result<f64> {
    curvegeo::dirichlet_energy_phi(curve)
}

/// Weights of the derivative at `times[at]` of the Lagrange interpolant
/// through `times[stencil]`.
pub(crate) fn derivative_weights(times: &[f64], stencil: &[usize], at: usize) -> Vec<f64> {
    let tj = times[at];
    stencil
        .iter()
        .map(|&k| {
            if k == at {
                stencil
                    .iter()
                    .filter(|&&l| l != at)
                    .map(|&l| 1.0 / (tj - times[l]))
                    .sum()
            } else {
                let num: f64 = stencil
                    .iter()
                    .filter(|&&l| l != k && l != at)
                    .map(|&l| tj - times[l])
                    .product();
                let den: f64 = stencil
                    .iter()
                    .filter(|&&l| l != k)
                    .map(|&l| times[k] - times[l])
                    .product();
                num / den
            }
        })
        .collect()
}

/// Stencil for the time derivative at frame `j` of `n`: the five nearest
/// frames (one-sided near the ends), or all frames when fewer than five.
pub(crate) fn stencil(j: usize, n: usize) -> Vec<usize> {
    if n < 2 {
        return vec![j];
    }
    let width = n.min(5);
    let start = j.saturating_sub(width / 2).min(n - width);
    (start..start + width).collect()
}

/// Time derivative of a scalar series.
pub(crate) fn series_derivative(times: &[f64], values: &[f64]) -> Vec<f64> {
    let n = times.len();
    (0..n)
        .map(|j| {
            let s = stencil(j, n);
            derivative_weights(times, &s, j)
                .iter()
                .zip(&s)
                .map(|(w, &k)| w * values[k])
                .sum()
        })
        .collect()
}

/// Time derivative at frame `j` of per-node fields (fixed node index).
pub(crate) fn field_derivative(times: &[f64], fields: &[Vec<f64>], j: usize) -> Vec<f64> {
    let s = stencil(j, times.len());
    let w = derivative_weights(times, &s, j);
    (0..fields[j].len())
        .map(|node| s.iter().zip(&w).map(|(&k, wk)| wk * fields[k][node]).sum())
        .collect()
}

fn sup(f: &[f64]) -> f64 {
    f.iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// Per-frame geometric data entering `D(τ)`.
struct PhiFrame {
    phi: Vec<f64>,
    phi_ss: Vec<f64>,
    curvature: Vec<f64>,
}

fn phi_frame(curve: &DiscreteCurve) -> Result<PhiFrame> {
    let geom = curvegeo::geometry(curve)?;
    let phi = curvegeo::shrinker_from(curve, &geom);
    let (_, phi_ss) = geom.d_ds2(&phi);
    Ok(PhiFrame {
        phi,
        phi_ss,
        curvature: geom.curvature,
    })
}

fn d_from(frame: &PhiFrame, phi_tau: &[f64]) -> f64 {
    let h = &frame.curvature;
    let metric = frame
        .phi
        .iter()
        .zip(h)
        .fold(0.0_f64, |a, (p, k)| a.max((2.0 * p * k).abs()));
    let second = (0..h.len()).fold(0.0_f64, |a, j| {
        let v = 2.0 * h[j] * frame.phi_ss[j] + 2.0 * frame.phi[j] * h[j].powi(3);
        a.max(v.abs())
    });
    metric + second + sup(&frame.phi) + sup(phi_tau)
}

fn require_rmcf(traj: &FlowTrajectory) -> Result<()> {
    if traj.picture() != Picture::Rmcf {
        return Err(Error::InvalidTrajectory(
            "expected an RMCF trajectory".into(),
        ));
    }
    Ok(())
}

/// `D(τ) = ‖2φH‖ + ‖2H ∂_s²φ + 2φH³‖ + ‖φ‖ + ‖∂_τ φ‖` (sup norms) at frame
/// `tau`, with `∂_τ φ` differenced over the neighbouring frames.
pub fn d_coefficient(traj: &FlowTrajectory, tau: f64) -> Result<f64> {
    require_rmcf(traj)?;
    let j = traj
        .index_of(tau)
        .ok_or(Error::FrameMissing { time: tau })?;
    let n = traj.len();
    if n < 3 || j == 0 || j + 1 == n {
        return Err(Error::FrameMissing {
            time: if j == 0 { tau - 1.0 } else { tau + 1.0 },
        });
    }
    let frames = traj.frames();
    let times = traj.times();
    let s = stencil(j, n);
    let w = derivative_weights(&times, &s, j);
    let mut phi_tau = vec![0.0; frames[j].curve.len()];
    let mut centre = None;
    for (&k, wk) in s.iter().zip(&w) {
        let pf = phi_frame(&frames[k].curve)?;
        for (acc, p) in phi_tau.iter_mut().zip(&pf.phi) {
            *acc += wk * p;
        }
        if k == j {
            centre = Some(pf);
        }
    }
    Ok(d_from(
        &centre.expect("stencil contains its centre"),
        &phi_tau,
    ))
}

/// `D(τ)` on every frame (one-sided differences at the ends).
pub fn d_series(traj: &FlowTrajectory, exec: Exec) -> Result<Vec<f64>> {
    require_rmcf(traj)?;
    let frames = traj.frames();
    let pf: Vec<PhiFrame> = exec
        .map(frames, |f| phi_frame(&f.curve))
        .into_iter()
        .collect::<Result<_>>()?;
    let phis: Vec<Vec<f64>> = pf.iter().map(|p| p.phi.clone()).collect();
    let times = traj.times();
    if times.len() < 2 {
        return Err(Error::WindowTooShort {
            frames: times.len(),
            required: 2,
        });
    }
    Ok(exec.map_range(frames.len(), |j| {
        d_from(&pf[j], &field_derivative(&times, &phis, j))
    }))
}

/// `F`, `dF/dτ` and `Ĩ` along one RMCF trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradientSeries {
    pub times: Vec<f64>,
    pub f: Vec<f64>,
    pub dfdtau: Vec<f64>,
    pub itilde: Vec<f64>,
}

impl GradientSeries {
    /// `|dF/dτ + (4π)^{-1/2} Ĩ| / ((4π)^{-1/2} Ĩ)` per frame; `None` where
    /// the normalised `Ĩ` is at most `floor`.
    pub fn relative_defects(&self, floor: f64) -> Vec<Option<f64>> {
        let c = 1.0 / (4.0 * PI).sqrt();
        self.itilde
            .iter()
            .zip(&self.dfdtau)
            .map(|(i, df)| {
                let rate = c * i;
                (rate > floor).then(|| (df + rate).abs() / rate)
            })
            .collect()
    }
}

/// Gradient-flow data of an RMCF trajectory; `dF/dτ` is a five-point
/// finite difference over frames.
pub fn gradient_series(traj: &FlowTrajectory, exec: Exec) -> Result<GradientSeries> {
    require_rmcf(traj)?;
    let frames = traj.frames();
    let pairs = exec
        .map(frames, |fr| -> Result<(f64, f64)> {
            Ok((
                curvegeo::f_functional(&fr.curve),
                dirichlet_einstein(&fr.curve)?,
            ))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let times = traj.times();
    let (f, itilde): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    Ok(GradientSeries {
        dfdtau: series_derivative(&times, &f),
        times,
        f,
        itilde,
    })
}

/// Cumulative trapezoidal integral, starting at zero.
pub fn cumulative_integral(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    for j in 0..times.len() {
        if j > 0 {
            acc += 0.5 * (values[j] + values[j - 1]) * (times[j] - times[j - 1]);
        }
        out.push(acc);
    }
    out
}

/// Least-squares line `y ≈ a + b x`: `(a, b)`.
pub(crate) fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let xm = x.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - xm) * (v - xm)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - xm) * (b - ym)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (ym - b * xm, b)
}

/// First index of the trailing `fraction` of `n` items (at least 2 items).
pub(crate) fn window_start(n: usize, fraction: f64) -> usize {
    let len = ((fraction.clamp(0.0, 1.0) * n as f64).ceil() as usize).clamp(2.min(n), n);
    n - len
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LojasiewiczOutcome {
    Fitted,
    /// `φ ≡ 0` and `F = F_limit` on the whole window.
    ExactShrinker,
}

/// Fit of `‖φ‖_{L²} ≈ c |F - F_limit|^{1-θ}` and the running integral of
/// `‖φ‖_{L²}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LojasiewiczFit {
    pub outcome: LojasiewiczOutcome,
    pub theta: Option<f64>,
    /// First time of the fit window.
    pub tau0: f64,
    pub times: Vec<f64>,
    pub phi_l2: Vec<f64>,
    pub f_gap: Vec<f64>,
    /// `∫_{τ_first}^{τ} ‖φ‖_{L²}`; nondecreasing.
    pub partial_sums: Vec<f64>,
    /// Per frame of the window: `|F - F_limit|^{1-θ} ≤ ‖φ‖_{L²}`.
    pub bound_holds: Vec<bool>,
}

/// Frames whose `|F - F_limit|` is below this are left out of the fit.
const GAP_FLOOR: f64 = 1e-12;
const MIN_FIT_FRAMES: usize = 20;

pub fn lojasiewicz_fit(
    traj: &FlowTrajectory,
    f_limit: f64,
    window: f64,
    exec: Exec,
) -> Result<LojasiewiczFit> {
    require_rmcf(traj)?;
    let n = traj.len();
    if n < MIN_FIT_FRAMES {
        return Err(Error::WindowTooShort {
            frames: n,
            required: MIN_FIT_FRAMES,
        });
    }
    let per_frame: Vec<(f64, f64)> = exec
        .map(traj.frames(), |f| {
            let gap = curvegeo::f_functional(&f.curve) - f_limit;
            dirichlet_einstein(&f.curve).map(|e| (gap, e.sqrt()))
        })
        .into_iter()
        .collect::<Result<_>>()?;
    let times = traj.times();
    let f_gap: Vec<f64> = per_frame.iter().map(|p| p.0).collect();
    let phi_l2: Vec<f64> = per_frame.iter().map(|p| p.1).collect();
    let partial_sums = cumulative_integral(&times, &phi_l2);
    let start = window_start(n, window);
    let usable: Vec<usize> = (start..n)
        .filter(|&j| f_gap[j].abs() > GAP_FLOOR && phi_l2[j] > 0.0)
        .collect();
    if usable.len() < 3 {
        if (start..n).all(|j| f_gap[j].abs() <= GAP_FLOOR && phi_l2[j] < 1e-8) {
            return Ok(LojasiewiczFit {
                outcome: LojasiewiczOutcome::ExactShrinker,
                theta: None,
                tau0: times[start],
                times,
                phi_l2,
                f_gap,
                partial_sums,
                bound_holds: Vec::new(),
            });
        }
        return Err(Error::WindowTooShort {
            frames: usable.len(),
            required: 3,
        });
    }
    let x: Vec<f64> = usable.iter().map(|&j| f_gap[j].abs().ln()).collect();
    let y: Vec<f64> = usable.iter().map(|&j| phi_l2[j].ln()).collect();
    let (_, slope) = line_fit(&x, &y);
    let theta = 1.0 - slope;
    let bound_holds = (start..n)
        .map(|j| f_gap[j].abs().powf(1.0 - theta) <= phi_l2[j] * (1.0 + 1e-9) + 1e-300)
        .collect();
    Ok(LojasiewiczFit {
        outcome: LojasiewiczOutcome::Fitted,
        theta: Some(theta),
        tau0: times[start],
        times,
        phi_l2,
        f_gap,
        partial_sums,
        bound_holds,
    })
}

#[cfg(test)]
mod tests;
