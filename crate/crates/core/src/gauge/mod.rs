//! One curve written as a normal graph over another, the drift operator `L`
//! applied to graph functions, and the measured linearisation residual
//! `∂_τ u - L u`.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::curvegeo::{self, DiscreteCurve, GeometryFields, Point};
use crate::error::{Error, Result};
use crate::flowcore::{FlowTrajectory, Picture};
use crate::fourier::TrigSeries;
use crate::spectral::WeightedForm;

/// Guard against division by zero in pointwise residual ratios.
pub const EPS_FLOOR: f64 = 1e-14;

/// Height function `u` along the inner normal of `base`, with arclength
/// derivatives.
#[derive(Debug, Clone)]
pub struct GraphFunction {
    base: DiscreteCurve,
    u: Vec<f64>,
    du: Vec<f64>,
    d2u: Vec<f64>,
}

impl GraphFunction {
    /// Requires `‖u‖_∞ < reach/2` with `reach = 1/max|H|`.
    pub fn new(base: &DiscreteCurve, u: Vec<f64>) -> Result<Self> {
        let geom = curvegeo::geometry(base)?;
        Self::with_geometry(base, &geom, u)
    }

    fn with_geometry(base: &DiscreteCurve, geom: &GeometryFields, u: Vec<f64>) -> Result<Self> {
        if u.len() != base.len() {
            return Err(Error::InvalidArgument(format!(
                "{} heights for {} nodes",
                u.len(),
                base.len()
            )));
        }
        let half_reach = 0.5 * reach(geom);
        if let Some((node, v)) = u.iter().enumerate().find(|(_, v)| !(v.abs() < half_reach)) {
            return Err(Error::NotAGraph {
                node,
                reason: format!("height {v:e} exceeds half the reach {half_reach:e}"),
            });
        }
        let (du, d2u) = geom.d_ds2(&u);
        Ok(Self {
            base: base.clone(),
            u,
            du,
            d2u,
        })
    }

    pub fn base(&self) -> &DiscreteCurve {
        &self.base
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    /// `∂_s u`.
    pub fn du(&self) -> &[f64] {
        &self.du
    }

    /// `∂_s² u`.
    pub fn d2u(&self) -> &[f64] {
        &self.d2u
    }

    /// `(‖u‖_∞, ‖∇u‖_∞, ‖∇²u‖_∞)`.
    pub fn norms(&self) -> [f64; 3] {
        [sup(&self.u), sup(&self.du), sup(&self.d2u)]
    }

    pub fn into_values(self) -> Vec<f64> {
        self.u
    }
}

fn sup(f: &[f64]) -> f64 {
    f.iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// Reach estimate `1/max|H|`.
pub fn reach(geom: &GeometryFields) -> f64 {
    1.0 / geom.max_abs_curvature()
}

/// `x + u(x) ν(x)` on every base node.
pub fn reconstruct(base: &DiscreteCurve, u: &[f64]) -> Result<DiscreteCurve> {
    let geom = curvegeo::geometry(base)?;
    if u.len() != base.len() {
        return Err(Error::InvalidArgument(
            "height field length mismatch".into(),
        ));
    }
    let pts = base
        .points()
        .iter()
        .zip(&geom.normal)
        .zip(u)
        .map(|((x, n), h)| [x[0] + h * n[0], x[1] + h * n[1]])
        .collect();
    DiscreteCurve::new(pts)
}

fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Tolerance on the segment parameter so that a normal through a vertex
/// is seen by both adjacent segments; duplicates are merged afterwards.
const VERTEX_SLACK: f64 = 1e-9;

/// Crossings of the normal segment `x + tν`, `|t| ≤ half`, with the target
/// polyline: `(t, segment index, segment parameter)`, one per distinct `t`.
fn crossings(x: Point, nu: Point, half: f64, target: &[Point]) -> Vec<(f64, usize, f64)> {
    let m = target.len();
    let pad = VERTEX_SLACK * half;
    let lo = [
        x[0] - half * nu[0].abs() - pad,
        x[1] - half * nu[1].abs() - pad,
    ];
    let hi = [
        x[0] + half * nu[0].abs() + pad,
        x[1] + half * nu[1].abs() + pad,
    ];
    let mut out: Vec<(f64, usize, f64)> = Vec::new();
    for i in 0..m {
        let q0 = target[i];
        let q1 = target[(i + 1) % m];
        if q0[0].max(q1[0]) < lo[0]
            || q0[0].min(q1[0]) > hi[0]
            || q0[1].max(q1[1]) < lo[1]
            || q0[1].min(q1[1]) > hi[1]
        {
            continue;
        }
        let e = [q1[0] - q0[0], q1[1] - q0[1]];
        let denom = cross(nu, e);
        if denom == 0.0 {
            continue;
        }
        let w = [q0[0] - x[0], q0[1] - x[1]];
        let t = cross(w, e) / denom;
        let s = cross(w, nu) / denom;
        if (-VERTEX_SLACK..=1.0 + VERTEX_SLACK).contains(&s) && t.abs() <= half {
            out.push((t, i, s));
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out.dedup_by(|b, a| (b.0 - a.0).abs() <= pad);
    out
}

/// Height of a crossing that lies on a target vertex, which is exactly on
/// the interpolant.
fn vertex_height(x: Point, nu: Point, hit: (f64, usize, f64), target: &[Point]) -> Option<f64> {
    let (_, i, s) = hit;
    let q = if s.abs() <= VERTEX_SLACK {
        target[i]
    } else if (1.0 - s).abs() <= VERTEX_SLACK {
        target[(i + 1) % target.len()]
    } else {
        return None;
    };
    let d = [q[0] - x[0], q[1] - x[1]];
    let scale = 1.0 + q[0].abs() + q[1].abs();
    (cross(d, nu).abs() <= 1e-13 * scale).then(|| d[0] * nu[0] + d[1] * nu[1])
}

/// Solve `x + u ν = γ(θ)` for `(u, θ)` on the trigonometric interpolant
/// `γ` of the target, starting from a polyline crossing.
fn polish(series: &TrigSeries, x: Point, nu: Point, mut u: f64, mut theta: f64) -> (f64, bool) {
    let xz = Complex64::new(x[0], x[1]);
    let nz = Complex64::new(nu[0], nu[1]);
    for _ in 0..12 {
        let (g, dg) = series.eval_with_derivative(theta);
        let f = xz + nz * u - g;
        // [ν, -γ'] (du, dθ)ᵀ = -f
        let det = cross([nz.re, nz.im], [-dg.re, -dg.im]);
        if det == 0.0 || !det.is_finite() {
            return (u, false);
        }
        let du = cross([-f.re, -f.im], [-dg.re, -dg.im]) / det;
        let dtheta = cross([nz.re, nz.im], [-f.re, -f.im]) / det;
        u += du;
        theta += dtheta;
        if du.abs() <= 1e-15 * (1.0 + u.abs()) && dtheta.abs() <= 1e-15 {
            return (u, true);
        }
    }
    let g = series.eval(theta);
    (u, (xz + nz * u - g).norm() < 1e-12)
}

/// Height of `target` over `base` along the inner normals of `base`.
///
/// Each normal line is intersected with the target polyline inside
/// `|t| ≤ reach/2`; exactly one crossing is required. The crossing is then
/// refined on the trigonometric interpolant of the target, so the result is
/// free of chord-sag error.
pub fn normal_graph(base: &DiscreteCurve, target: &DiscreteCurve) -> Result<GraphFunction> {
    let geom = curvegeo::geometry(base)?;
    let half = 0.5 * reach(&geom);
    let series = target.series();
    let tpts = target.points();
    let mt = tpts.len() as f64;
    let mut u = Vec::with_capacity(base.len());
    for (node, (x, nu)) in base.points().iter().zip(&geom.normal).enumerate() {
        let hits = crossings(*x, *nu, half, tpts);
        if hits.len() != 1 {
            return Err(Error::NotAGraph {
                node,
                reason: format!("normal line meets the target {} times", hits.len()),
            });
        }
        let (t, i, s) = hits[0];
        let (v, ok) = match vertex_height(*x, *nu, hits[0], tpts) {
            Some(v) => (v, true),
            None => polish(&series, *x, *nu, t, 2.0 * PI * (i as f64 + s) / mt),
        };
        if !ok || !(v.abs() < half) {
            return Err(Error::NotAGraph {
                node,
                reason: format!("root polish failed (height {v:e}, bound {half:e})"),
            });
        }
        u.push(v);
    }
    GraphFunction::with_geometry(base, &geom, u)
}

/// `L u = Δu - ½⟨x,∇u⟩ + (|A|² + ½) u` on `base`, in the self-adjoint
/// discretisation of [`WeightedForm`].
pub fn apply_l(base: &DiscreteCurve, u: &[f64]) -> Result<Vec<f64>> {
    Ok(WeightedForm::new(base)?.apply_l(u))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ResidualReport {
    pub tau: f64,
    /// `r = ∂_τ u - L u` per base node.
    #[serde(skip)]
    pub residual: Vec<f64>,
    pub max_residual: f64,
    /// `max_j |r_j| / (|u_j| + |∇u_j| + ε_floor)`.
    #[serde(rename = "fittedC")]
    pub fitted_c: f64,
    /// `[‖u‖_∞, ‖∇u‖_∞, ‖∇²u‖_∞]`.
    pub norms_u: [f64; 3],
    /// `‖r‖_∞ / (‖u‖_{C²} (‖u‖_∞ + ‖∇u‖_∞))`; zero when `u ≡ 0`.
    pub quad_ratio: f64,
}

impl ResidualReport {
    fn from_parts(tau: f64, graph: &GraphFunction, residual: Vec<f64>) -> Self {
        let fitted_c = residual
            .iter()
            .zip(graph.u.iter().zip(&graph.du))
            .map(|(r, (u, du))| r.abs() / (u.abs() + du.abs() + EPS_FLOOR))
            .fold(0.0, f64::max);
        let max_residual = sup(&residual);
        let norms_u = graph.norms();
        let c2 = norms_u.iter().sum::<f64>();
        let denom = c2 * (norms_u[0] + norms_u[1]);
        let quad_ratio = if denom > 0.0 {
            max_residual / denom
        } else {
            0.0
        };
        Self {
            tau,
            residual,
            max_residual,
            fitted_c,
            norms_u,
            quad_ratio,
        }
    }
}

/// Graph of the target over the base at frame time `tau` (both
/// trajectories must contain it).
pub fn graph_at(base: &FlowTrajectory, target: &FlowTrajectory, tau: f64) -> Result<GraphFunction> {
    normal_graph(&base.frame_at(tau)?.curve, &target.frame_at(tau)?.curve)
}

/// Residual `∂_τ u - L u` at frame `tau`, with `∂_τ u` a central difference
/// over the neighbouring frames of the base trajectory, taken at fixed base
/// node index.
pub fn residual(
    base: &FlowTrajectory,
    target: &FlowTrajectory,
    tau: f64,
) -> Result<ResidualReport> {
    for t in [base, target] {
        if t.picture() != Picture::Rmcf {
            return Err(Error::InvalidTrajectory(
                "expected RMCF trajectories".into(),
            ));
        }
    }
    let i = base
        .index_of(tau)
        .ok_or(Error::FrameMissing { time: tau })?;
    if i == 0 || i + 1 >= base.len() {
        return Err(Error::FrameMissing {
            time: if i == 0 { tau - 1.0 } else { tau + 1.0 },
        });
    }
    let frames = base.frames();
    let (t0, t1, t2) = (frames[i - 1].time, frames[i].time, frames[i + 1].time);
    let g0 = graph_at(base, target, t0)?;
    let g1 = graph_at(base, target, t1)?;
    let g2 = graph_at(base, target, t2)?;
    let form = WeightedForm::new(&frames[i].curve)?;
    let lu = form.apply_l(&g1.u);
    let dt = central_weights(t0, t1, t2);
    let r = (0..g1.u.len())
        .map(|j| dt[0] * g0.u[j] + dt[1] * g1.u[j] + dt[2] * g2.u[j] - lu[j])
        .collect();
    Ok(ResidualReport::from_parts(t1, &g1, r))
}

/// Weights of the three-point first derivative at `t1` on a possibly
/// non-uniform stencil.
pub(crate) fn central_weights(t0: f64, t1: f64, t2: f64) -> [f64; 3] {
    let (a, b) = (t1 - t0, t2 - t1);
    [-b / (a * (a + b)), (b - a) / (a * b), a / (b * (a + b))]
}
