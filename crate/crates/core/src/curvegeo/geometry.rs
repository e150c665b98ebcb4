use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use super::DiscreteCurve;
use crate::error::{Error, Result};
use crate::fourier::Periodic;

/// Smallest admissible `|∂_θ x|`.
pub const MIN_METRIC_SPEED: f64 = 1e-10;

/// Pointwise differential geometry of a curve. The normal is inner
/// pointing and the curvature is measured against it, so convex curves have
/// `H > 0` regardless of the traversal direction.
#[derive(Debug, Clone)]
pub struct GeometryFields {
    pub tangent: Vec<[f64; 2]>,
    pub normal: Vec<[f64; 2]>,
    pub curvature: Vec<f64>,
    /// `|A|² = H²` for curves.
    pub norm_sq_a: Vec<f64>,
    /// Trapezoidal weights `g_j · 2π/m` (spectrally accurate arclength).
    pub arclength_weights: Vec<f64>,
    /// `g = |∂_θ x|`.
    pub metric_speed: Vec<f64>,
}

impl GeometryFields {
    pub fn len(&self) -> usize {
        self.curvature.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curvature.is_empty()
    }

    pub fn max_abs_curvature(&self) -> f64 {
        self.curvature.iter().fold(0.0, |a, h| a.max(h.abs()))
    }

    /// Arclength derivative of a field on the same grid.
    pub fn d_ds(&self, f: &[f64]) -> Vec<f64> {
        let d = Periodic::new(f.len()).derivative_real(f);
        d.iter()
            .zip(&self.metric_speed)
            .map(|(a, g)| a / g)
            .collect()
    }

    /// First and second arclength derivatives `(∂_s f, ∂_s² f)`.
    pub fn d_ds2(&self, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut p = Periodic::new(f.len());
        let d1: Vec<f64> = p
            .derivative_real(f)
            .iter()
            .zip(&self.metric_speed)
            .map(|(a, g)| a / g)
            .collect();
        let d2: Vec<f64> = p
            .derivative_real(&d1)
            .iter()
            .zip(&self.metric_speed)
            .map(|(a, g)| a / g)
            .collect();
        (d1, d2)
    }
}

pub fn geometry(curve: &DiscreteCurve) -> Result<GeometryFields> {
    let m = curve.len();
    let z = curve.to_complex();
    let mut d1 = vec![Complex64::default(); m];
    let mut d2 = vec![Complex64::default(); m];
    Periodic::new(m).derivatives(&z, &mut d1, &mut d2);
    let s = curve.orientation_sign();
    let h = 2.0 * PI / m as f64;

    let mut tangent = Vec::with_capacity(m);
    let mut normal = Vec::with_capacity(m);
    let mut curvature = Vec::with_capacity(m);
    let mut metric_speed = Vec::with_capacity(m);
    for (j, (a, b)) in d1.iter().zip(&d2).enumerate() {
        let g = a.norm();
        if !(g >= MIN_METRIC_SPEED) {
            return Err(Error::DegenerateCurve { node: j, speed: g });
        }
        let t = [a.re / g, a.im / g];
        tangent.push(t);
        normal.push([-s * t[1], s * t[0]]);
        curvature.push(s * (a.conj() * b).im / (g * g * g));
        metric_speed.push(g);
    }
    let norm_sq_a = curvature.iter().map(|k| k * k).collect();
    let arclength_weights = metric_speed.iter().map(|g| g * h).collect();
    Ok(GeometryFields {
        tangent,
        normal,
        curvature,
        norm_sq_a,
        arclength_weights,
        metric_speed,
    })
}

/// Per-node Gaussian measure `dμ̃ = e^{-|x|²/4} ds`.
#[derive(Debug, Clone)]
pub struct GaussianWeights {
    pub weights: Vec<f64>,
}

impl GaussianWeights {
    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `∫ f dμ̃`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    /// `∫ f g dμ̃`.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(f.iter().zip(g))
            .map(|(w, (a, b))| w * a * b)
            .sum()
    }
}

pub fn gaussian_weights(curve: &DiscreteCurve, geom: &GeometryFields) -> GaussianWeights {
    GaussianWeights {
        weights: curve
            .points()
            .iter()
            .zip(&geom.arclength_weights)
            .map(|(p, w)| w * (-(p[0] * p[0] + p[1] * p[1]) / 4.0).exp())
            .collect(),
    }
}

/// `φ = H + ½⟨x, ν⟩` given precomputed geometry.
pub fn shrinker_from(curve: &DiscreteCurve, geom: &GeometryFields) -> Vec<f64> {
    curve
        .points()
        .iter()
        .zip(geom.normal.iter().zip(&geom.curvature))
        .map(|(x, (n, h))| h + 0.5 * (x[0] * n[0] + x[1] * n[1]))
        .collect()
}

pub fn shrinker_quantity(curve: &DiscreteCurve) -> Result<Vec<f64>> {
    let geom = geometry(curve)?;
    Ok(shrinker_from(curve, &geom))
}

/// `F[M] = (4π)^{-1/2} ∫ e^{-|x|²/4} ds`.
pub fn f_functional(curve: &DiscreteCurve) -> f64 {
    let m = curve.len();
    let z = curve.to_complex();
    let mut d1 = vec![Complex64::default(); m];
    Periodic::new(m).derivative(&z, &mut d1);
    let h = 2.0 * PI / m as f64;
    let total: f64 = z
        .iter()
        .zip(&d1)
        .map(|(x, d)| d.norm() * h * (-x.norm_sqr() / 4.0).exp())
        .sum();
    total / (4.0 * PI).sqrt()
}

/// `∫ φ² dμ̃` (unnormalised Gaussian measure).
pub fn dirichlet_energy_phi(curve: &DiscreteCurve) -> Result<f64> {
    let geom = geometry(curve)?;
    let phi = shrinker_from(curve, &geom);
    let w = gaussian_weights(curve, &geom);
    Ok(w.inner(&phi, &phi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    fn circle(r: f64, c: [f64; 2], m: usize) -> DiscreteCurve {
        DiscreteCurve::circle(r, c, m).unwrap()
    }

    #[test]
    fn shrinking_circle_geometry() {
        let c = circle(SQRT_2, [0.0, 0.0], 512);
        let g = geometry(&c).unwrap();
        for (j, p) in c.points().iter().enumerate() {
            assert!((g.curvature[j] - 1.0 / SQRT_2).abs() < 1e-6);
            let n = g.normal[j];
            assert!((p[0] * n[0] + p[1] * n[1] + SQRT_2).abs() < 1e-6);
            let t = g.tangent[j];
            assert!((t[0] * n[0] + t[1] * n[1]).abs() < 1e-12);
            assert!(((n[0] * n[0] + n[1] * n[1]).sqrt() - 1.0).abs() < 1e-12);
            assert_eq!(g.norm_sq_a[j], g.curvature[j] * g.curvature[j]);
        }
        let total: f64 = g.arclength_weights.iter().sum();
        assert!((total - 2.0 * PI * SQRT_2).abs() / total < 1e-10);
    }

    #[test]
    fn unit_circle_curvature() {
        let g = geometry(&circle(1.0, [0.0, 0.0], 512)).unwrap();
        assert!(g.curvature.iter().all(|h| (h - 1.0).abs() < 1e-6));
    }

    #[test]
    fn orientation_does_not_change_curvature() {
        let c =
            DiscreteCurve::polar(1.0, &[(2, 0.1, 0.0), (3, 0.0, 0.05)], [0.2, 0.1], 128).unwrap();
        let r = c.reversed();
        let gc = geometry(&c).unwrap();
        let gr = geometry(&r).unwrap();
        let m = c.len();
        for j in 0..m {
            let jr = (m - j) % m;
            assert!((gc.curvature[j] - gr.curvature[jr]).abs() < 1e-10);
            assert!((gc.normal[j][0] - gr.normal[jr][0]).abs() < 1e-10);
            assert!((gc.normal[j][1] - gr.normal[jr][1]).abs() < 1e-10);
        }
    }

    #[test]
    fn shrinker_quantity_on_circles() {
        let phi = shrinker_quantity(&circle(SQRT_2, [0.0, 0.0], 512)).unwrap();
        assert!(phi.iter().all(|p| p.abs() < 1e-6));
        let phi = shrinker_quantity(&circle(1.0, [0.0, 0.0], 512)).unwrap();
        assert!(phi.iter().all(|p| (p - 0.5).abs() < 1e-6));
    }

    #[test]
    fn shrinker_quantity_off_center_matches_closed_form() {
        // x = c + √2 e(θ), inner normal ν = -e(θ): φ = 1/√2 + ½⟨c + √2 e, -e⟩.
        let cx = 0.3;
        let m = 512;
        let c = circle(SQRT_2, [cx, 0.0], m);
        let phi = shrinker_quantity(&c).unwrap();
        for (j, t) in crate::fourier::grid(m).enumerate() {
            let expected = 1.0 / SQRT_2 - 0.5 * (cx * t.cos() + SQRT_2);
            assert!((phi[j] - expected).abs() < 1e-6);
        }
    }

    #[test]
    fn f_functional_closed_forms() {
        let f = f_functional(&circle(SQRT_2, [0.0, 0.0], 512));
        assert!((f - (2.0 * PI).sqrt() * (-0.5f64).exp()).abs() < 1e-6);
        assert!((f - 1.520347).abs() < 1e-6);
        for r in [1.0, 2.0] {
            let expect = 2.0 * PI * r * (-r * r / 4.0).exp() / (4.0 * PI).sqrt();
            assert!((f_functional(&circle(r, [0.0, 0.0], 256)) - expect).abs() < 1e-10);
        }
        assert!(f_functional(&circle(1.0, [20.0, 0.0], 64)) < 1e-10);
    }

    #[test]
    fn f_quadrature_converges_fast() {
        // Non-circular analytic curve: compare m and 2m against 4m.
        let at = |m| f_functional(&DiscreteCurve::ellipse(1.6, 0.9, 0.0, [0.4, 0.0], m).unwrap());
        let reference = at(256);
        let e16 = (at(16) - reference).abs();
        let e32 = (at(32) - reference).abs();
        assert!(e32 * 10.0 <= e16, "{e16} {e32}");
    }

    #[test]
    fn gaussian_weights_positive() {
        let c = circle(3.0, [1.0, 1.0], 64);
        let g = geometry(&c).unwrap();
        assert!(gaussian_weights(&c, &g).weights.iter().all(|w| *w > 0.0));
    }
}
