//! Fourier differentiation and trigonometric interpolation on the uniform
//! periodic grid `θ_j = 2πj/m`, `m` even.
//!
//! First derivatives drop the Nyquist mode (the derivative of `cos(mθ/2)`
//! vanishes on the grid), second derivatives keep it. With that convention
//! the first-derivative matrix is exactly skew-symmetric.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
struct Plans {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

thread_local! {
    static PLANS: RefCell<HashMap<usize, Plans>> = RefCell::new(HashMap::new());
}

fn plans(m: usize) -> Plans {
    PLANS.with(|cell| {
        cell.borrow_mut()
            .entry(m)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                Plans {
                    fwd: planner.plan_fft_forward(m),
                    inv: planner.plan_fft_inverse(m),
                }
            })
            .clone()
    })
}

/// Signed wavenumber of FFT bin `j`; the Nyquist bin reports `+m/2`.
#[inline]
pub(crate) fn wavenumber(j: usize, m: usize) -> f64 {
    if j <= m / 2 {
        j as f64
    } else {
        j as f64 - m as f64
    }
}

/// Spectral differentiation on a fixed grid size with reusable buffers.
pub(crate) struct Periodic {
    m: usize,
    plans: Plans,
    spec: Vec<Complex64>,
    work: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Periodic {
    pub fn new(m: usize) -> Self {
        let plans = plans(m);
        let scratch_len = plans
            .fwd
            .get_inplace_scratch_len()
            .max(plans.inv.get_inplace_scratch_len());
        Self {
            m,
            plans,
            spec: vec![Complex64::default(); m],
            work: vec![Complex64::default(); m],
            scratch: vec![Complex64::default(); scratch_len],
        }
    }

    fn forward(&mut self, input: &[Complex64]) {
        self.spec.copy_from_slice(input);
        self.plans
            .fwd
            .process_with_scratch(&mut self.spec, &mut self.scratch);
    }

    /// Inverse transform of `self.work` scaled by `1/m`, written to `out`.
    fn inverse_work(&mut self, out: &mut [Complex64]) {
        self.plans
            .inv
            .process_with_scratch(&mut self.work, &mut self.scratch);
        let s = 1.0 / self.m as f64;
        for (o, w) in out.iter_mut().zip(&self.work) {
            *o = w * s;
        }
    }

    /// First and second θ-derivatives of complex samples.
    pub fn derivatives(&mut self, z: &[Complex64], d1: &mut [Complex64], d2: &mut [Complex64]) {
        let m = self.m;
        self.forward(z);
        for j in 0..m {
            let k = wavenumber(j, m);
            self.work[j] = if j == m / 2 {
                Complex64::default()
            } else {
                self.spec[j] * Complex64::new(0.0, k)
            };
        }
        self.inverse_work(d1);
        for j in 0..m {
            let k = wavenumber(j, m);
            self.work[j] = self.spec[j] * (-k * k);
        }
        self.inverse_work(d2);
    }

    /// First θ-derivative of complex samples.
    pub fn derivative(&mut self, z: &[Complex64], d1: &mut [Complex64]) {
        let m = self.m;
        self.forward(z);
        for j in 0..m {
            let k = wavenumber(j, m);
            self.work[j] = if j == m / 2 {
                Complex64::default()
            } else {
                self.spec[j] * Complex64::new(0.0, k)
            };
        }
        self.inverse_work(d1);
    }

    pub fn derivative_real(&mut self, f: &[f64]) -> Vec<f64> {
        let z: Vec<Complex64> = f.iter().map(|&a| Complex64::new(a, 0.0)).collect();
        let mut d = vec![Complex64::default(); self.m];
        self.derivative(&z, &mut d);
        d.iter().map(|c| c.re).collect()
    }

    /// First and second derivatives of a real field.
    #[cfg(test)]
    pub fn derivatives_real(&mut self, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let z: Vec<Complex64> = f.iter().map(|&a| Complex64::new(a, 0.0)).collect();
        let mut d1 = vec![Complex64::default(); self.m];
        let mut d2 = vec![Complex64::default(); self.m];
        self.derivatives(&z, &mut d1, &mut d2);
        (
            d1.iter().map(|c| c.re).collect(),
            d2.iter().map(|c| c.re).collect(),
        )
    }

    /// Zero-mean periodic antiderivative of a real field. The mean of `f`
    /// is discarded.
    pub fn antiderivative_into(&mut self, f: &[f64], out: &mut [f64]) {
        let m = self.m;
        for (s, &v) in self.work.iter_mut().zip(f) {
            *s = Complex64::new(v, 0.0);
        }
        let input = std::mem::take(&mut self.work);
        self.forward(&input);
        self.work = input;
        for j in 0..m {
            let k = wavenumber(j, m);
            self.work[j] = if j == 0 || j == m / 2 {
                Complex64::default()
            } else {
                self.spec[j] / Complex64::new(0.0, k)
            };
        }
        self.plans
            .inv
            .process_with_scratch(&mut self.work, &mut self.scratch);
        let s = 1.0 / m as f64;
        for (o, w) in out.iter_mut().zip(&self.work) {
            *o = w.re * s;
        }
    }

    /// In-place exponential filter `exp(-36 (|k|/(m/2))^36)`; the Nyquist
    /// mode is removed. Suppresses aliasing growth in nonlinear updates.
    pub fn smooth(&mut self, z: &mut [Complex64]) {
        let m = self.m;
        self.forward(z);
        let half = (m / 2) as f64;
        for j in 0..m {
            let k = wavenumber(j, m).abs();
            self.work[j] = if j == m / 2 {
                Complex64::default()
            } else {
                self.spec[j] * (-36.0 * (k / half).powi(36)).exp()
            };
        }
        self.inverse_work(z);
    }

    /// Forward transform of complex samples, returned as interpolation
    /// coefficients.
    pub fn series(&mut self, z: &[Complex64]) -> TrigSeries {
        self.forward(z);
        TrigSeries::from_fft(&self.spec)
    }
}

/// Trigonometric interpolant `z(θ) = Σ c_k e^{ikθ}` of periodic samples,
/// with the Nyquist coefficient split evenly between `±m/2` so real data
/// interpolates to a real function.
#[derive(Debug, Clone)]
pub(crate) struct TrigSeries {
    /// `coeffs[k]` for `k = 0..=m/2`.
    pos: Vec<Complex64>,
    /// `coeffs[-k]` for `k = 1..=m/2`, stored at index `k`.
    neg: Vec<Complex64>,
}

impl TrigSeries {
    fn from_fft(spec: &[Complex64]) -> Self {
        let m = spec.len();
        let half = m / 2;
        let scale = 1.0 / m as f64;
        let mut pos = vec![Complex64::default(); half + 1];
        let mut neg = vec![Complex64::default(); half + 1];
        for k in 0..half {
            pos[k] = spec[k] * scale;
        }
        for k in 1..half {
            neg[k] = spec[m - k] * scale;
        }
        pos[half] = spec[half] * (0.5 * scale);
        neg[half] = spec[half] * (0.5 * scale);
        Self { pos, neg }
    }

    pub fn from_samples(z: &[Complex64]) -> Self {
        Periodic::new(z.len()).series(z)
    }

    /// Value and θ-derivative at an arbitrary parameter.
    pub fn eval_with_derivative(&self, theta: f64) -> (Complex64, Complex64) {
        let step = Complex64::from_polar(1.0, theta);
        let step_conj = step.conj();
        let mut p = Complex64::new(1.0, 0.0);
        let mut q = Complex64::new(1.0, 0.0);
        let mut value = self.pos[0];
        let mut deriv = Complex64::default();
        for k in 1..self.pos.len() {
            p *= step;
            q *= step_conj;
            let kf = k as f64;
            let a = self.pos[k] * p;
            let b = self.neg[k] * q;
            value += a + b;
            deriv += Complex64::new(0.0, kf) * (a - b);
        }
        (value, deriv)
    }

    pub fn eval(&self, theta: f64) -> Complex64 {
        self.eval_with_derivative(theta).0
    }

    /// Samples of the interpolant on a finer uniform grid of `m_fine` nodes.
    pub fn resample_uniform(&self, m_fine: usize) -> Vec<Complex64> {
        let m = 2 * (self.pos.len() - 1);
        assert!(m_fine >= m && m_fine.is_multiple_of(2));
        let mut spec = vec![Complex64::default(); m_fine];
        let scale = m_fine as f64;
        for (s, p) in spec.iter_mut().zip(&self.pos) {
            *s += p * scale;
        }
        for k in 1..self.neg.len() {
            spec[m_fine - k] += self.neg[k] * scale;
        }
        let plan = plans(m_fine);
        plan.inv.process(&mut spec);
        let s = 1.0 / m_fine as f64;
        spec.iter().map(|c| c * s).collect()
    }
}

/// Uniform grid `θ_j = 2πj/m`.
pub(crate) fn grid(m: usize) -> impl Iterator<Item = f64> {
    (0..m).map(move |j| 2.0 * PI * j as f64 / m as f64)
}
