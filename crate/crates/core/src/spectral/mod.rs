//! The drift operator `L = Δ - ½⟨x,∇·⟩ + (|A|² + ½)` on a curve, discretised
//! through its Gaussian-weighted quadratic form so that it is exactly
//! self-adjoint in the discrete `μ̃` inner product.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::curvegeo::{self, DiscreteCurve};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::flowcore::FlowTrajectory;
use crate::fourier::Periodic;

/// Quadrature data of the form
///
/// `B(u,v) = -∫ ∂_s u ∂_s v dμ̃ + ∫ (|A|² + ½) u v dμ̃`
///
/// on the grid: `B(u,v) = -[h Σ c (Du)(Dv) + κ (nᵀu)(nᵀv)] + Σ w V u v` with
/// `D` the Fourier derivative, `c = e/g`, `w = h g e`, `e = exp(-|x|²/4)`.
/// `D` annihilates the sawtooth `n_j = (-1)^j`; the rank-one term with
/// `κ = (h/8) Σ c` restores its stiffness so no spurious mode survives.
#[derive(Debug, Clone)]
pub struct WeightedForm {
    h: f64,
    c: Vec<f64>,
    weights: Vec<f64>,
    potential: Vec<f64>,
    kappa: f64,
}

impl WeightedForm {
    pub fn new(base: &DiscreteCurve) -> Result<Self> {
        let geom = curvegeo::geometry(base)?;
        let m = base.len();
        let h = 2.0 * PI / m as f64;
        let e: Vec<f64> = base
            .points()
            .iter()
            .map(|p| (-(p[0] * p[0] + p[1] * p[1]) / 4.0).exp())
            .collect();
        let c: Vec<f64> = e
            .iter()
            .zip(&geom.metric_speed)
            .map(|(e, g)| e / g)
            .collect();
        let weights = e
            .iter()
            .zip(&geom.metric_speed)
            .map(|(e, g)| h * g * e)
            .collect();
        let potential = geom.norm_sq_a.iter().map(|a| a + 0.5).collect();
        let kappa = h / 8.0 * c.iter().sum::<f64>();
        Ok(Self {
            h,
            c,
            weights,
            potential,
            kappa,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Gaussian quadrature weights `w_j`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `|A|² + ½` per node.
    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    /// `∫ u v dμ̃`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(u.iter().zip(v))
            .map(|(w, (a, b))| w * a * b)
            .sum()
    }

    fn sawtooth(u: &[f64]) -> f64 {
        u.iter()
            .enumerate()
            .map(|(j, v)| if j % 2 == 0 { *v } else { -*v })
            .sum()
    }

    /// `B(u, v)`.
    pub fn form(&self, u: &[f64], v: &[f64]) -> f64 {
        let mut p = Periodic::new(u.len());
        let du = p.derivative_real(u);
        let dv = p.derivative_real(v);
        let stiffness: f64 = self
            .c
            .iter()
            .zip(du.iter().zip(&dv))
            .map(|(c, (a, b))| c * a * b)
            .sum();
        let mass: f64 = self
            .weights
            .iter()
            .zip(&self.potential)
            .zip(u.iter().zip(v))
            .map(|((w, q), (a, b))| w * q * a * b)
            .sum();
        -(self.h * stiffness + self.kappa * Self::sawtooth(u) * Self::sawtooth(v)) + mass
    }

    /// `B u`, the vector with `(Bu)ᵀ v = B(u, v)`.
    pub fn apply_form(&self, u: &[f64]) -> Vec<f64> {
        let mut p = Periodic::new(u.len());
        let du = p.derivative_real(u);
        let flux: Vec<f64> = du.iter().zip(&self.c).map(|(d, c)| d * c).collect();
        // Dᵀ = -D, so -h Dᵀ(c Du) = h D(c Du)
        let div = p.derivative_real(&flux);
        let s = self.kappa * Self::sawtooth(u);
        div.iter()
            .enumerate()
            .map(|(j, d)| {
                let n = if j % 2 == 0 { 1.0 } else { -1.0 };
                self.h * d - s * n + self.weights[j] * self.potential[j] * u[j]
            })
            .collect()
    }

    /// `L u = W⁻¹ B u`.
    pub fn apply_l(&self, u: &[f64]) -> Vec<f64> {
        self.apply_form(u)
            .iter()
            .zip(&self.weights)
            .map(|(b, w)| b / w)
            .collect()
    }

    /// `B(u,u) / ∫ u² dμ̃`.
    pub fn rayleigh_quotient(&self, u: &[f64]) -> Result<f64> {
        let i = self.inner(u, u);
        if !(i > 0.0) {
            return Err(Error::EnergyUnderflow { energy: i });
        }
        Ok(self.form(u, u) / i)
    }
}

/// Dense representation of `L` in the weighted inner product.
#[derive(Debug, Clone)]
pub struct WeightedOperator {
    /// Symmetric matrix of the form `B`.
    pub form: DMatrix<f64>,
    pub weights: Vec<f64>,
}

impl WeightedOperator {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `W^{-1/2} B W^{-1/2}`, similar to `L` and symmetric.
    pub fn symmetric_scaled(&self) -> DMatrix<f64> {
        let s: Vec<f64> = self.weights.iter().map(|w| 1.0 / w.sqrt()).collect();
        DMatrix::from_fn(self.len(), self.len(), |i, j| {
            s[i] * self.form[(i, j)] * s[j]
        })
    }

    /// `tr L = Σ B_jj / w_j`.
    pub fn trace(&self) -> f64 {
        (0..self.len())
            .map(|j| self.form[(j, j)] / self.weights[j])
            .sum()
    }
}

/// Assemble the symmetric form matrix column by column from
/// [`WeightedForm::apply_form`], then symmetrise away round-off.
pub fn assemble(base: &DiscreteCurve) -> Result<WeightedOperator> {
    let form = WeightedForm::new(base)?;
    Ok(assemble_form(&form))
}

fn assemble_form(form: &WeightedForm) -> WeightedOperator {
    let m = form.len();
    let mut b = DMatrix::zeros(m, m);
    let mut e = vec![0.0; m];
    for j in 0..m {
        e[j] = 1.0;
        let col = form.apply_form(&e);
        b.set_column(j, &DVector::from_vec(col));
        e[j] = 0.0;
    }
    let sym = (&b + b.transpose()) * 0.5;
    WeightedOperator {
        form: sym,
        weights: form.weights.clone(),
    }
}

/// Eigenvalues in descending order with `μ̃`-orthonormal eigenfunctions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Spectrum {
    pub m: usize,
    pub eigenvalues: Vec<f64>,
    #[serde(skip)]
    pub eigenfunctions: Vec<Vec<f64>>,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
}

/// Top `k` eigenpairs of `L` by a dense symmetric eigensolve.
pub fn eigenpairs(op: &WeightedOperator, k: usize) -> Result<Spectrum> {
    let m = op.len();
    if k == 0 || k > m {
        return Err(Error::InvalidArgument(format!(
            "requested {k} eigenpairs of {m}"
        )));
    }
    let eig = SymmetricEigen::try_new(op.symmetric_scaled(), 1e-15, 10_000)
        .ok_or(Error::ConvergenceFailure)?;
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::ConvergenceFailure);
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    order.truncate(k);
    let scale: Vec<f64> = op.weights.iter().map(|w| 1.0 / w.sqrt()).collect();
    let eigenfunctions = order
        .iter()
        .map(|&i| {
            eig.eigenvectors
                .column(i)
                .iter()
                .zip(&scale)
                .map(|(y, s)| y * s)
                .collect()
        })
        .collect();
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    Ok(Spectrum {
        m,
        lambda: eigenvalues[0],
        eigenvalues,
        eigenfunctions,
    })
}

/// Largest eigenvalue of `L` and its eigenfunction by shifted inverse
/// iteration. `L ≤ max(|A|² + ½)` because the stiffness part is
/// nonpositive, so a shift just above that bound keeps the system positive
/// definite.
pub fn top_eigenpair(base: &DiscreteCurve) -> Result<(f64, Vec<f64>)> {
    let form = WeightedForm::new(base)?;
    let op = assemble_form(&form);
    let m = op.len();
    let shift = form.potential.iter().cloned().fold(f64::MIN, f64::max) + 0.05;
    let mut a = -op.symmetric_scaled();
    for j in 0..m {
        a[(j, j)] += shift;
    }
    let chol = a.clone().cholesky().ok_or(Error::ConvergenceFailure)?;
    let sqrt_w: Vec<f64> = op.weights.iter().map(|w| w.sqrt()).collect();
    // start from the constant function, which overlaps the ground state
    let mut y = DVector::from_iterator(m, sqrt_w.iter().cloned());
    y /= y.norm();
    let mut lambda = f64::NAN;
    for _ in 0..500 {
        let mut next = chol.solve(&y);
        let nrm = next.norm();
        if !(nrm.is_finite() && nrm > 0.0) {
            return Err(Error::ConvergenceFailure);
        }
        next /= nrm;
        let rq = shift - next.dot(&(&a * &next));
        let done = (rq - lambda).abs() <= 1e-13 * rq.abs().max(1.0);
        lambda = rq;
        y = next;
        if done {
            let v = y.iter().zip(&sqrt_w).map(|(y, s)| y / s).collect();
            return Ok((lambda, v));
        }
    }
    Err(Error::ConvergenceFailure)
}

/// Top eigenvalue of `L` along a trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RayleighBound {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Supremum over the sampled frames.
    #[serde(rename = "Lambda")]
    pub lambda: f64,
}

impl RayleighBound {
    /// Value at the sampled frame nearest to `time`.
    pub fn at(&self, time: f64) -> f64 {
        let i = self.times.partition_point(|t| *t < time);
        let j = if i == 0 {
            0
        } else if i == self.times.len() || time - self.times[i - 1] <= self.times[i] - time {
            i - 1
        } else {
            i
        };
        self.values[j]
    }
}

/// Top eigenvalue on every `stride`-th frame (and always the last one).
pub fn rayleigh_bound(traj: &FlowTrajectory, stride: usize, exec: Exec) -> Result<RayleighBound> {
    let stride = stride.max(1);
    let n = traj.len();
    let mut idx: Vec<usize> = (0..n).step_by(stride).collect();
    if idx.last() != Some(&(n - 1)) {
        idx.push(n - 1);
    }
    let frames = traj.frames();
    let values = exec
        .map(&idx, |&i| top_eigenpair(&frames[i].curve).map(|(l, _)| l))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let lambda = values.iter().cloned().fold(f64::MIN, f64::max);
    Ok(RayleighBound {
        times: idx.iter().map(|&i| frames[i].time).collect(),
        values,
        lambda,
    })
}

#[cfg(test)]
mod tests;
