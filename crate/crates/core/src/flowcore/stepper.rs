use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use super::{Picture, Scheme, StepControl};
use crate::curvegeo::{self, DiscreteCurve};
use crate::error::{Error, Result};
use crate::fourier::Periodic;

/// Explicit integrator for curve shortening flow (`V = H`) and the rescaled
/// flow (`V = H + ½⟨x,ν⟩`), both along the inner normal. Steps are Heun or
/// second-order Runge–Kutta–Chebyshev, see [`Scheme`].
///
/// A tangential velocity `α T` with `∂_θ α = H V g - mean(H V g)` is added so
/// that `∂_t g` is independent of `θ`: an arclength-uniform parametrisation
/// stays uniform and nodes never cluster.
pub(crate) struct Stepper {
    picture: Picture,
    sign: f64,
    periodic: Periodic,
    z: Vec<Complex64>,
    trial: Vec<Complex64>,
    k1: Vec<Complex64>,
    k2: Vec<Complex64>,
    prev: Vec<Complex64>,
    next: Vec<Complex64>,
    rkc: Option<Chebyshev>,
    d1: Vec<Complex64>,
    d2: Vec<Complex64>,
    f: Vec<f64>,
    alpha: Vec<f64>,
    area: f64,
}

struct Buffers<'a> {
    periodic: &'a mut Periodic,
    d1: &'a mut [Complex64],
    d2: &'a mut [Complex64],
    f: &'a mut [f64],
    alpha: &'a mut [f64],
}

/// Velocity field of the flow; returns `max |H|`.
fn velocity(
    picture: Picture,
    sign: f64,
    b: Buffers<'_>,
    z: &[Complex64],
    out: &mut [Complex64],
) -> f64 {
    let m = z.len();
    b.periodic.derivatives(z, b.d1, b.d2);
    let mut max_h = 0.0_f64;
    let mut mean = 0.0;
    for j in 0..m {
        let d = b.d1[j];
        let g = d.norm();
        let t = d / g;
        let nu = Complex64::new(-t.im, t.re) * sign;
        let h = sign * (d.conj() * b.d2[j]).im / (g * g * g);
        let v = match picture {
            Picture::Mcf => h,
            Picture::Rmcf => h + 0.5 * (z[j].conj() * nu).re,
        };
        max_h = max_h.max(h.abs());
        b.f[j] = h * v * g;
        mean += b.f[j];
        // stash V·ν and the tangent; α is added once it is known
        out[j] = nu * v;
        b.d2[j] = t;
    }
    mean /= m as f64;
    for v in b.f.iter_mut() {
        *v -= mean;
    }
    b.periodic.antiderivative_into(b.f, b.alpha);
    for ((o, t), a) in out.iter_mut().zip(b.d2.iter()).zip(b.alpha.iter()) {
        *o += t * a;
    }
    if max_h.is_finite() {
        max_h
    } else {
        f64::INFINITY
    }
}

impl Stepper {
    pub fn new(curve: &DiscreteCurve, picture: Picture) -> Self {
        let m = curve.len();
        let z = curve.to_complex();
        let zero = vec![Complex64::default(); m];
        let mut s = Self {
            picture,
            sign: curve.orientation_sign(),
            periodic: Periodic::new(m),
            trial: zero.clone(),
            k1: zero.clone(),
            k2: zero.clone(),
            prev: zero.clone(),
            next: zero.clone(),
            rkc: None,
            d1: zero.clone(),
            d2: zero,
            f: vec![0.0; m],
            alpha: vec![0.0; m],
            z,
            area: 0.0,
        };
        s.area = s.area_of_state();
        s
    }

    fn area_of_state(&mut self) -> f64 {
        self.periodic.derivative(&self.z, &mut self.d1);
        curvegeo::signed_area_of(&self.z, &self.d1).abs()
    }

    pub fn curve(&self) -> DiscreteCurve {
        DiscreteCurve::from_complex_unchecked(&self.z)
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn min_spacing(&self) -> f64 {
        let m = self.z.len();
        (0..m)
            .map(|j| (self.z[(j + 1) % m] - self.z[j]).norm())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn spacing_ratio(&self) -> f64 {
        let m = self.z.len();
        let (lo, hi) = (0..m)
            .map(|j| (self.z[(j + 1) % m] - self.z[j]).norm())
            .fold((f64::INFINITY, 0.0_f64), |(lo, hi), d| {
                (lo.min(d), hi.max(d))
            });
        hi / lo
    }

    /// Arclength-uniform redistribution of the current state.
    pub fn resample(&mut self) -> Result<()> {
        let m = self.z.len();
        let pts = curvegeo::resample_points(&self.curve(), m)?;
        for (z, p) in self.z.iter_mut().zip(pts) {
            *z = Complex64::new(p[0], p[1]);
        }
        self.area = self.area_of_state();
        Ok(())
    }

    /// One Heun step of size `dt`. On error the state is left untouched.
    pub fn step(&mut self, dt: f64, ctl: &StepControl) -> Result<()> {
        if dt == 0.0 {
            return Ok(());
        }
        let max_h = velocity(
            self.picture,
            self.sign,
            Buffers {
                periodic: &mut self.periodic,
                d1: &mut self.d1,
                d2: &mut self.d2,
                f: &mut self.f,
                alpha: &mut self.alpha,
            },
            &self.z,
            &mut self.k1,
        );
        if max_h > ctl.max_curvature {
            return Err(Error::BlowupDetected {
                max_curvature: max_h,
                cap: ctl.max_curvature,
            });
        }
        match ctl.scheme {
            Scheme::Heun => self.heun(dt),
            Scheme::Chebyshev(stages) => self.chebyshev(dt, stages),
        }
        self.periodic.smooth(&mut self.trial);
        if self
            .trial
            .iter()
            .any(|c| !c.re.is_finite() || !c.im.is_finite())
        {
            return Err(Error::StepRejected("non-finite node position".into()));
        }

        self.periodic.derivative(&self.trial, &mut self.d1);
        let new_area = curvegeo::signed_area_of(&self.trial, &self.d1).abs();
        if ctl.area_projection {
            // exact area laws: dA/dt = -2π (MCF), dA/dτ = A - 2π (RMCF)
            let target = match self.picture {
                Picture::Mcf => self.area - 2.0 * PI * dt,
                Picture::Rmcf => 2.0 * PI + (self.area - 2.0 * PI) * dt.exp(),
            };
            if target <= 0.0 {
                return Err(Error::BlowupDetected {
                    max_curvature: f64::INFINITY,
                    cap: ctl.max_curvature,
                });
            }
            let c = curvegeo::centroid_of(&self.trial, &self.d1);
            let c = Complex64::new(c[0], c[1]);
            let factor = (target / new_area).sqrt();
            for z in self.trial.iter_mut() {
                *z = c + (*z - c) * factor;
            }
            self.area = target;
        } else {
            self.area = new_area;
        }
        std::mem::swap(&mut self.z, &mut self.trial);
        let ratio = self.spacing_ratio();
        if !(ratio <= curvegeo::MAX_SPACING_RATIO) {
            std::mem::swap(&mut self.z, &mut self.trial);
            self.area = self.area_of_state();
            return Err(Error::StepRejected(format!(
                "spacing ratio {ratio:.3} after step"
            )));
        }
        Ok(())
    }

    fn eval(&mut self, which: Stage) {
        let (src, dst) = match which {
            Stage::Trial => (&self.trial, &mut self.k2),
            Stage::Prev => (&self.prev, &mut self.k2),
        };
        velocity(
            self.picture,
            self.sign,
            Buffers {
                periodic: &mut self.periodic,
                d1: &mut self.d1,
                d2: &mut self.d2,
                f: &mut self.f,
                alpha: &mut self.alpha,
            },
            src,
            dst,
        );
    }

    /// Heun predictor-corrector from `k1 = F(z)`; result in `trial`.
    fn heun(&mut self, dt: f64) {
        for j in 0..self.z.len() {
            self.trial[j] = self.z[j] + self.k1[j] * dt;
        }
        self.eval(Stage::Trial);
        for j in 0..self.z.len() {
            self.trial[j] = self.z[j] + (self.k1[j] + self.k2[j]) * (0.5 * dt);
        }
    }

    /// `stages`-stage RKC2 from `k1 = F(z)`; result in `trial`.
    fn chebyshev(&mut self, dt: f64, stages: usize) {
        if self.rkc.as_ref().is_none_or(|c| c.stages() != stages) {
            self.rkc = Some(Chebyshev::new(stages));
        }
        let c = self.rkc.take().expect("coefficients just built");
        let m = self.z.len();
        // Y_{j-2} in `prev`, Y_{j-1} in `trial`
        self.prev.copy_from_slice(&self.z);
        for j in 0..m {
            self.trial[j] = self.z[j] + self.k1[j] * (c.mu_tilde[1] * dt);
        }
        for s in 2..=stages {
            std::mem::swap(&mut self.prev, &mut self.trial);
            // `prev` now holds Y_{s-1}, `trial` holds Y_{s-2}
            self.eval(Stage::Prev);
            let (mu, nu) = (c.mu[s], c.nu[s]);
            let (mt, gt) = (c.mu_tilde[s] * dt, c.gamma_tilde[s] * dt);
            let keep = 1.0 - mu - nu;
            for j in 0..m {
                self.next[j] = self.z[j] * keep
                    + self.prev[j] * mu
                    + self.trial[j] * nu
                    + self.k2[j] * mt
                    + self.k1[j] * gt;
            }
            // trial <- Y_s, prev <- Y_{s-1}
            std::mem::swap(&mut self.trial, &mut self.next);
        }
        self.rkc = Some(c);
    }
}

#[derive(Clone, Copy)]
enum Stage {
    Trial,
    Prev,
}

/// Damping `ε` of the Chebyshev polynomial; trades a little stability
/// length for a strictly contracting interior of the stability region.
const RKC_DAMPING: f64 = 2.0 / 13.0;

/// Coefficients of the second-order Runge–Kutta–Chebyshev method
/// (Sommeijer, Shampine and Verwer).
#[derive(Debug, Clone)]
pub(crate) struct Chebyshev {
    mu: Vec<f64>,
    nu: Vec<f64>,
    mu_tilde: Vec<f64>,
    gamma_tilde: Vec<f64>,
    /// Real stability interval `[-beta, 0]`.
    pub beta: f64,
}

impl Chebyshev {
    pub fn new(stages: usize) -> Self {
        let s = stages.max(2);
        let w0 = 1.0 + RKC_DAMPING / (s * s) as f64;
        let mut t = vec![0.0; s + 1];
        let mut t1 = vec![0.0; s + 1];
        let mut t2 = vec![0.0; s + 1];
        t[0] = 1.0;
        t[1] = w0;
        t1[1] = 1.0;
        for j in 2..=s {
            t[j] = 2.0 * w0 * t[j - 1] - t[j - 2];
            t1[j] = 2.0 * t[j - 1] + 2.0 * w0 * t1[j - 1] - t1[j - 2];
            t2[j] = 4.0 * t1[j - 1] + 2.0 * w0 * t2[j - 1] - t2[j - 2];
        }
        let w1 = t1[s] / t2[s];
        let mut b = vec![0.0; s + 1];
        for j in 2..=s {
            b[j] = t2[j] / (t1[j] * t1[j]);
        }
        b[0] = b[2];
        b[1] = b[2];
        let mut mu = vec![0.0; s + 1];
        let mut nu = vec![0.0; s + 1];
        let mut mu_tilde = vec![0.0; s + 1];
        let mut gamma_tilde = vec![0.0; s + 1];
        mu_tilde[1] = b[1] * w1;
        for j in 2..=s {
            mu[j] = 2.0 * b[j] * w0 / b[j - 1];
            nu[j] = -b[j] / b[j - 2];
            mu_tilde[j] = 2.0 * b[j] * w1 / b[j - 1];
            gamma_tilde[j] = -(1.0 - b[j - 1] * t[j - 1]) * mu_tilde[j];
        }
        Self {
            mu,
            nu,
            mu_tilde,
            gamma_tilde,
            beta: (w0 + 1.0) * t2[s] / t1[s],
        }
    }

    pub fn stages(&self) -> usize {
        self.mu.len() - 1
    }
}
