use serde::{Deserialize, Serialize};

use super::{
    cumulative_integral, d_from, derivative_weights, f_circle_shrinker, field_derivative, line_fit,
    lojasiewicz_fit, phi_frame, require_rmcf, series_derivative, stencil, window_start, PhiFrame,
    EPS_FLOOR,
};
use crate::curvegeo;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::flowcore::FlowTrajectory;
use crate::gauge::normal_graph;
use crate::io::fmt_float;
use crate::spectral::{rayleigh_bound, RayleighBound, WeightedForm};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MonitorOptions {
    /// Trailing fraction of frames used for slope fits.
    pub fit_window: f64,
    /// The top eigenvalue of `L` is computed on every `lambda_stride`-th
    /// base frame.
    pub lambda_stride: usize,
    /// Absolute slack added to the log-derivative inequality.
    pub tolerance: f64,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for MonitorOptions {
    fn default() -> Self {
        Self {
            fit_window: 0.4,
            lambda_stride: 20,
            tolerance: 1e-6,
            exec: Exec::Parallel,
        }
    }
}

/// One row of the trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FrequencyRecord {
    pub tau: f64,
    #[serde(rename = "I")]
    pub i: f64,
    #[serde(rename = "U")]
    pub u: f64,
    pub itilde: f64,
    #[serde(rename = "F")]
    pub f: f64,
    pub dfdtau: f64,
    #[serde(rename = "phiL2")]
    pub phi_l2: f64,
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "fittedC")]
    pub fitted_c: f64,
    #[serde(rename = "dlogI")]
    pub dlogi: f64,
    pub v_main: f64,
    pub v_err: f64,
    pub underflow: bool,
    /// Running minimum of `U` up to this frame.
    pub lower_envelope: f64,
    /// `∫ φ² u² dμ̃ / I`, the measure-evolution term of `d log I/dτ`.
    pub measure_term: f64,
    /// `∫ |∇u|² dμ̃ / I`.
    pub dirichlet_ratio: f64,
    /// Top eigenvalue of `L` at the nearest sampled base frame.
    #[serde(rename = "Lambda")]
    pub lambda: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrequencySummary {
    #[serde(rename = "lambdaFit")]
    pub lambda_fit: f64,
    #[serde(rename = "offsetFit")]
    pub offset_fit: f64,
    #[serde(rename = "Uinf")]
    pub u_inf: f64,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    #[serde(rename = "thetaFit")]
    pub theta_fit: Option<f64>,
    #[serde(rename = "integralD")]
    pub integral_d: f64,
    #[serde(rename = "integralC2")]
    pub integral_c2: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MonitorChecks {
    /// Records violating `|d log I/dτ - (U - measure term)| ≤ 3(C + D) + C·(Dirichlet ratio)`.
    pub log_derivative_violations: Vec<f64>,
    /// Records with `U > 2Λ(τ)` beyond round-off.
    pub rayleigh_violations: Vec<f64>,
    /// Mean of `U` over the last quarter of the fit window.
    pub u_late: f64,
    /// Slope of `log I` over the fit window.
    pub log_i_slope: f64,
    pub superexponential: bool,
    /// Every record is below the energy floor (identical flows).
    pub all_underflow: bool,
}

#[derive(Debug, Clone)]
pub struct FrequencyTrace {
    pub records: Vec<FrequencyRecord>,
    pub summary: FrequencySummary,
    pub checks: MonitorChecks,
    pub rayleigh: RayleighBound,
}

pub const TRACE_HEADER: &str = "tau,I,U,Itilde,F,dFdtau,phiL2,D,fittedC,dlogI,Vmain,Verr,underflow";

impl FrequencyTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRACE_HEADER);
        out.push('\n');
        for r in &self.records {
            let vals = [
                r.tau, r.i, r.u, r.itilde, r.f, r.dfdtau, r.phi_l2, r.d, r.fitted_c, r.dlogi,
                r.v_main, r.v_err,
            ];
            for v in vals {
                out.push_str(&fmt_float(v));
                out.push(',');
            }
            out.push_str(if r.underflow { "true" } else { "false" });
            out.push('\n');
        }
        out
    }
}

struct FrameData {
    form: WeightedForm,
    u: Vec<f64>,
    du: Vec<f64>,
    phi: PhiFrame,
    i: f64,
    b: f64,
    itilde: f64,
    f: f64,
    measure: f64,
    dirichlet: f64,
}

fn frame_data(
    base: &curvegeo::DiscreteCurve,
    target: &curvegeo::DiscreteCurve,
) -> Result<FrameData> {
    let graph = normal_graph(base, target)?;
    let form = WeightedForm::new(base)?;
    let phi = phi_frame(base)?;
    let u = graph.u().to_vec();
    let du = graph.du().to_vec();
    let w = form.weights();
    let i = form.inner(&u, &u);
    let b = form.form(&u, &u);
    let itilde = form.inner(&phi.phi, &phi.phi);
    let measure = (0..u.len())
        .map(|j| w[j] * phi.phi[j] * phi.phi[j] * u[j] * u[j])
        .sum();
    let dirichlet = form.inner(&du, &du);
    Ok(FrameData {
        f: curvegeo::f_functional(base),
        form,
        u,
        du,
        phi,
        i,
        b,
        itilde,
        measure,
        dirichlet,
    })
}

/// Detects decay of `log I` that accelerates over the fit window: the
/// finite-difference rate `Δ log I/Δτ` trending down faster than
/// `ACCELERATION` per unit time, or the energy dropping to the floor after
/// having been resolved.
pub fn superexponential_collapse(times: &[f64], energies: &[f64], window: f64) -> bool {
    const ACCELERATION: f64 = 0.5;
    let start = window_start(times.len(), window);
    let t = &times[start..];
    let e = &energies[start..];
    let resolved: Vec<bool> = e.iter().map(|v| *v > EPS_FLOOR).collect();
    if resolved.iter().all(|r| !r) {
        return false;
    }
    if let Some(first) = resolved.iter().position(|r| *r) {
        if resolved[first..].iter().any(|r| !r) {
            return true;
        }
    }
    let pts: Vec<(f64, f64)> = (1..t.len())
        .filter(|&j| resolved[j] && resolved[j - 1])
        .map(|j| {
            (
                0.5 * (t[j] + t[j - 1]),
                (e[j].ln() - e[j - 1].ln()) / (t[j] - t[j - 1]),
            )
        })
        .collect();
    if pts.len() < 3 {
        return false;
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    let (_, slope) = line_fit(&x, &y);
    slope < -ACCELERATION
}

/// Evaluate the frequency argument along `target` written as a normal graph
/// over `base`. Both trajectories must share the base frame times.
pub fn monitor(
    base: &FlowTrajectory,
    target: &FlowTrajectory,
    opts: &MonitorOptions,
) -> Result<FrequencyTrace> {
    require_rmcf(base)?;
    require_rmcf(target)?;
    if base.len() < 3 {
        return Err(Error::WindowTooShort {
            frames: base.len(),
            required: 3,
        });
    }
    let times = base.times();
    let targets = times
        .iter()
        .map(|&t| target.frame_at(t).map(|f| &f.curve))
        .collect::<Result<Vec<_>>>()?;
    let frames = base.frames();
    let data: Vec<FrameData> = opts
        .exec
        .map_range(frames.len(), |j| frame_data(&frames[j].curve, targets[j]))
        .into_iter()
        .collect::<Result<_>>()?;
    let rayleigh = rayleigh_bound(base, opts.lambda_stride, opts.exec)?;

    let n = data.len();
    let us: Vec<Vec<f64>> = data.iter().map(|d| d.u.clone()).collect();
    let phis: Vec<Vec<f64>> = data.iter().map(|d| d.phi.phi.clone()).collect();
    let underflow: Vec<bool> = data.iter().map(|d| !(d.i > EPS_FLOOR)).collect();
    let energies: Vec<f64> = data.iter().map(|d| d.i).collect();
    let freq: Vec<f64> = data
        .iter()
        .zip(&underflow)
        .map(|(d, &uf)| if uf { f64::NAN } else { 2.0 * d.b / d.i })
        .collect();
    let log_i: Vec<f64> = energies.iter().map(|e| e.ln()).collect();
    let fs: Vec<f64> = data.iter().map(|d| d.f).collect();
    let dfdtau = series_derivative(&times, &fs);
    let stencil_resolved = |j: usize| stencil(j, n).iter().all(|&k| !underflow[k]);
    let derivative_at = |values: &[f64], j: usize| -> f64 {
        if !stencil_resolved(j) {
            return f64::NAN;
        }
        let s = stencil(j, n);
        derivative_weights(&times, &s, j)
            .iter()
            .zip(&s)
            .map(|(w, &k)| w * values[k])
            .sum()
    };

    let per_record: Vec<(f64, f64, f64)> = opts.exec.map_range(n, |j| {
        let d = &data[j];
        let u_tau = field_derivative(&times, &us, j);
        let lu = d.form.apply_l(&d.u);
        let fitted_c = (0..d.u.len())
            .map(|k| {
                let e = u_tau[k] - lu[k];
                e.abs() / (d.u[k].abs() + d.du[k].abs() + EPS_FLOOR)
            })
            .fold(0.0, f64::max);
        let v_main = if underflow[j] {
            f64::NAN
        } else {
            let b_mixed = d.form.form(&d.u, &u_tau);
            let inner = d.form.inner(&d.u, &u_tau);
            4.0 * b_mixed / d.i - 4.0 * inner * d.b / (d.i * d.i)
        };
        let phi_tau = field_derivative(&times, &phis, j);
        (fitted_c, v_main, d_from(&d.phi, &phi_tau))
    });

    let mut records = Vec::with_capacity(n);
    let mut envelope = f64::INFINITY;
    for j in 0..n {
        let d = &data[j];
        let (fitted_c, v_main, dcoef) = per_record[j];
        if !underflow[j] {
            envelope = envelope.min(freq[j]);
        }
        let du_tau = derivative_at(&freq, j);
        let (measure_term, dirichlet_ratio) = if underflow[j] {
            (f64::NAN, f64::NAN)
        } else {
            (d.measure / d.i, d.dirichlet / d.i)
        };
        records.push(FrequencyRecord {
            tau: times[j],
            i: d.i,
            u: freq[j],
            itilde: d.itilde,
            f: d.f,
            dfdtau: dfdtau[j],
            phi_l2: d.itilde.sqrt(),
            d: dcoef,
            fitted_c,
            dlogi: derivative_at(&log_i, j),
            v_main,
            v_err: du_tau - v_main,
            underflow: underflow[j],
            lower_envelope: envelope,
            measure_term,
            dirichlet_ratio,
            lambda: rayleigh.at(times[j]),
        });
    }

    let log_derivative_violations = records
        .iter()
        .filter(|r| !r.underflow && r.dlogi.is_finite())
        .filter(|r| {
            let lhs = (r.dlogi - (r.u - r.measure_term)).abs();
            let rhs = 3.0 * (r.fitted_c + r.d) + r.fitted_c * r.dirichlet_ratio + opts.tolerance;
            lhs > rhs
        })
        .map(|r| r.tau)
        .collect();
    let rayleigh_violations = records
        .iter()
        .filter(|r| !r.underflow && r.u > 2.0 * r.lambda + 1e-10 * r.u.abs().max(1.0))
        .map(|r| r.tau)
        .collect();

    let start = window_start(n, opts.fit_window);
    let fit_idx: Vec<usize> = (start..n).filter(|&j| !underflow[j]).collect();
    let (lambda_fit, offset_fit, log_i_slope) = if fit_idx.len() >= 2 {
        let x: Vec<f64> = fit_idx.iter().map(|&j| times[j]).collect();
        let y: Vec<f64> = fit_idx.iter().map(|&j| log_i[j]).collect();
        let (_, slope) = line_fit(&x, &y);
        let lambda = -slope;
        let offset = fit_idx
            .iter()
            .map(|&j| -lambda * times[j] - log_i[j])
            .fold(f64::MIN, f64::max);
        (lambda, offset, slope)
    } else {
        (f64::NAN, f64::NAN, f64::NAN)
    };
    let late_start = start + 3 * (n - start) / 4;
    let late: Vec<f64> = (late_start..n)
        .filter(|&j| !underflow[j])
        .map(|j| freq[j])
        .collect();
    let u_late = if late.is_empty() {
        f64::NAN
    } else {
        late.iter().sum::<f64>() / late.len() as f64
    };
    let resolved: Vec<&FrequencyRecord> = records.iter().filter(|r| !r.underflow).collect();
    let u_inf = resolved.iter().map(|r| r.u).fold(f64::NAN, f64::min);
    let d_vals: Vec<f64> = records.iter().map(|r| r.d).collect();
    let integral_d = *cumulative_integral(&times, &d_vals).last().unwrap_or(&0.0);
    let c2: Vec<f64> = records
        .iter()
        .map(|r| {
            if r.underflow {
                0.0
            } else {
                r.fitted_c * r.fitted_c
            }
        })
        .collect();
    let integral_c2 = *cumulative_integral(&times, &c2).last().unwrap_or(&0.0);
    let theta_fit = lojasiewicz_fit(base, f_circle_shrinker(), opts.fit_window, opts.exec)
        .ok()
        .and_then(|f| f.theta);

    let checks = MonitorChecks {
        log_derivative_violations,
        rayleigh_violations,
        u_late,
        log_i_slope,
        superexponential: superexponential_collapse(&times, &energies, opts.fit_window),
        all_underflow: underflow.iter().all(|u| *u),
    };
    Ok(FrequencyTrace {
        records,
        summary: FrequencySummary {
            lambda_fit,
            offset_fit,
            u_inf,
            lambda: rayleigh.lambda,
            theta_fit,
            integral_d,
            integral_c2,
        },
        checks,
        rayleigh,
    })
}
