//! Discrete geometry of closed plane curves sampled on a uniform periodic
//! parameter grid.

mod geometry;
mod hausdorff;
mod resample;

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fourier::{grid, Periodic, TrigSeries};

pub use geometry::{
    dirichlet_energy_phi, f_functional, gaussian_weights, geometry, shrinker_from,
    shrinker_quantity, GaussianWeights, GeometryFields,
};
pub use hausdorff::{hausdorff_distance, hausdorff_refined, SegmentIndex};
pub(crate) use resample::resample_points;
pub use resample::{resample, upsample};

pub type Point = [f64; 2];

pub const MIN_NODES: usize = 16;
pub const MAX_SPACING_RATIO: f64 = 10.0;

/// A closed plane curve given by `m` samples on the parameter grid
/// `θ_j = 2πj/m`. The curve is implicitly periodic: node `m-1` connects
/// back to node `0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteCurve {
    points: Vec<Point>,
    ccw: bool,
}

impl DiscreteCurve {
    /// Validated construction: `m ≥ 16` even, finite, spacing ratio at most
    /// 10 and a simple polygon.
    pub fn new(points: Vec<Point>) -> Result<Self> {
        let curve = Self::from_points_unchecked(points);
        curve.validate()?;
        Ok(curve)
    }

    /// Skips the `O(m²)` simplicity test; orientation is still computed.
    pub(crate) fn from_points_unchecked(points: Vec<Point>) -> Self {
        let ccw = shoelace(&points) >= 0.0;
        Self { points, ccw }
    }

    pub(crate) fn from_complex_unchecked(z: &[Complex64]) -> Self {
        Self::from_points_unchecked(z.iter().map(|c| [c.re, c.im]).collect())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_cheap()?;
        if let Some((i, j)) = first_self_intersection(&self.points) {
            return Err(Error::InvalidCurve(format!(
                "polyline self-intersects (segments {i} and {j})"
            )));
        }
        Ok(())
    }

    /// All invariants except simplicity.
    pub(crate) fn validate_cheap(&self) -> Result<()> {
        let m = self.points.len();
        if m < MIN_NODES || !m.is_multiple_of(2) {
            return Err(Error::InvalidCurve(format!(
                "node count {m} must be even and at least {MIN_NODES}"
            )));
        }
        if self
            .points
            .iter()
            .any(|p| !p[0].is_finite() || !p[1].is_finite())
        {
            return Err(Error::InvalidCurve("non-finite coordinate".into()));
        }
        let (lo, hi) = self.spacing_extremes();
        if lo <= 0.0 {
            return Err(Error::InvalidCurve("repeated consecutive nodes".into()));
        }
        if hi / lo > MAX_SPACING_RATIO {
            return Err(Error::InvalidCurve(format!(
                "spacing ratio {:.3} exceeds {MAX_SPACING_RATIO}",
                hi / lo
            )));
        }
        Ok(())
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Point> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_ccw(&self) -> bool {
        self.ccw
    }

    /// `+1` for counterclockwise, `-1` for clockwise.
    pub(crate) fn orientation_sign(&self) -> f64 {
        if self.ccw {
            1.0
        } else {
            -1.0
        }
    }

    pub(crate) fn to_complex(&self) -> Vec<Complex64> {
        self.points
            .iter()
            .map(|p| Complex64::new(p[0], p[1]))
            .collect()
    }

    pub(crate) fn series(&self) -> TrigSeries {
        TrigSeries::from_samples(&self.to_complex())
    }

    pub fn circle(radius: f64, center: Point, m: usize) -> Result<Self> {
        Self::new(
            grid(m)
                .map(|t| [center[0] + radius * t.cos(), center[1] + radius * t.sin()])
                .collect(),
        )
    }

    /// Ellipse with semi-axes `a`, `b`, rotated by `angle` radians about
    /// its center.
    pub fn ellipse(a: f64, b: f64, angle: f64, center: Point, m: usize) -> Result<Self> {
        let (s, c) = angle.sin_cos();
        Self::new(
            grid(m)
                .map(|t| {
                    let (x, y) = (a * t.cos(), b * t.sin());
                    [center[0] + c * x - s * y, center[1] + s * x + c * y]
                })
                .collect(),
        )
    }

    /// Star-shaped curve `r(θ) = r0 + Σ_k (a_k cos kθ + b_k sin kθ)` about
    /// `center`; `modes` lists `(k, a_k, b_k)`.
    pub fn polar(r0: f64, modes: &[(u32, f64, f64)], center: Point, m: usize) -> Result<Self> {
        let pts = grid(m)
            .map(|t| {
                let r = r0
                    + modes
                        .iter()
                        .map(|&(k, a, b)| a * (k as f64 * t).cos() + b * (k as f64 * t).sin())
                        .sum::<f64>();
                [center[0] + r * t.cos(), center[1] + r * t.sin()]
            })
            .collect();
        Self::new(pts)
    }

    pub fn translated(&self, d: Point) -> Self {
        Self {
            points: self
                .points
                .iter()
                .map(|p| [p[0] + d[0], p[1] + d[1]])
                .collect(),
            ccw: self.ccw,
        }
    }

    /// Dilation about `center`.
    pub fn scaled_about(&self, factor: f64, center: Point) -> Self {
        Self {
            points: self
                .points
                .iter()
                .map(|p| {
                    [
                        center[0] + factor * (p[0] - center[0]),
                        center[1] + factor * (p[1] - center[1]),
                    ]
                })
                .collect(),
            ccw: if factor > 0.0 { self.ccw } else { !self.ccw },
        }
    }

    /// Same point set traversed in the opposite direction, starting at the
    /// same node.
    pub fn reversed(&self) -> Self {
        let m = self.points.len();
        let points = (0..m).map(|j| self.points[(m - j) % m]).collect();
        Self {
            points,
            ccw: !self.ccw,
        }
    }

    pub fn chord_lengths(&self) -> Vec<f64> {
        let m = self.points.len();
        (0..m)
            .map(|j| dist(self.points[j], self.points[(j + 1) % m]))
            .collect()
    }

    pub fn polyline_length(&self) -> f64 {
        self.chord_lengths().iter().sum()
    }

    fn spacing_extremes(&self) -> (f64, f64) {
        self.chord_lengths()
            .into_iter()
            .fold((f64::INFINITY, 0.0_f64), |(lo, hi), d| {
                (lo.min(d), hi.max(d))
            })
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing_extremes().0
    }

    pub fn spacing_ratio(&self) -> f64 {
        let (lo, hi) = self.spacing_extremes();
        hi / lo
    }

    /// Enclosed area of the trigonometric interpolant (always positive).
    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    /// Signed enclosed area of the trigonometric interpolant; positive for
    /// counterclockwise curves.
    pub fn signed_area(&self) -> f64 {
        let z = self.to_complex();
        let mut dz = vec![Complex64::default(); z.len()];
        Periodic::new(z.len()).derivative(&z, &mut dz);
        signed_area_of(&z, &dz)
    }

    /// Area centroid of the enclosed region.
    pub fn centroid(&self) -> Point {
        let z = self.to_complex();
        let m = z.len();
        let mut dz = vec![Complex64::default(); m];
        Periodic::new(m).derivative(&z, &mut dz);
        centroid_of(&z, &dz)
    }

    /// Length of the trigonometric interpolant.
    pub fn length(&self) -> f64 {
        let z = self.to_complex();
        let m = z.len();
        let mut dz = vec![Complex64::default(); m];
        Periodic::new(m).derivative(&z, &mut dz);
        dz.iter().map(|d| d.norm()).sum::<f64>() * 2.0 * PI / m as f64
    }

    pub fn is_simple(&self) -> bool {
        first_self_intersection(&self.points).is_none()
    }
}

pub(crate) fn signed_area_of(z: &[Complex64], dz: &[Complex64]) -> f64 {
    let m = z.len();
    z.iter()
        .zip(dz)
        .map(|(a, b)| (a.conj() * b).im)
        .sum::<f64>()
        * PI
        / m as f64
}

pub(crate) fn centroid_of(z: &[Complex64], dz: &[Complex64]) -> Point {
    let m = z.len();
    let h = 2.0 * PI / m as f64;
    let area = signed_area_of(z, dz);
    let mut mx = 0.0;
    let mut my = 0.0;
    for (p, d) in z.iter().zip(dz) {
        mx += p.re * p.re * d.im;
        my -= p.im * p.im * d.re;
    }
    [mx * h / (2.0 * area), my * h / (2.0 * area)]
}

fn shoelace(points: &[Point]) -> f64 {
    let m = points.len();
    (0..m)
        .map(|j| {
            let a = points[j];
            let b = points[(j + 1) % m];
            a[0] * b[1] - a[1] * b[0]
        })
        .sum::<f64>()
        * 0.5
}

#[inline]
pub(crate) fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[inline]
fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn on_segment(p: Point, a: Point, b: Point) -> bool {
    p[0] >= a[0].min(b[0])
        && p[0] <= a[0].max(b[0])
        && p[1] >= a[1].min(b[1])
        && p[1] <= a[1].max(b[1])
}

pub(crate) fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(p1, q1, q2))
        || (d2 == 0.0 && on_segment(p2, q1, q2))
        || (d3 == 0.0 && on_segment(q1, p1, p2))
        || (d4 == 0.0 && on_segment(q2, p1, p2))
}

/// Brute-force segment-pair test over non-adjacent edges.
fn first_self_intersection(points: &[Point]) -> Option<(usize, usize)> {
    let m = points.len();
    let boxes: Vec<[f64; 4]> = (0..m)
        .map(|i| {
            let a = points[i];
            let b = points[(i + 1) % m];
            [
                a[0].min(b[0]),
                a[0].max(b[0]),
                a[1].min(b[1]),
                a[1].max(b[1]),
            ]
        })
        .collect();
    for i in 0..m {
        let bi = boxes[i];
        for j in (i + 2)..m {
            if i == 0 && j == m - 1 {
                continue;
            }
            let bj = boxes[j];
            if bi[1] < bj[0] || bj[1] < bi[0] || bi[3] < bj[2] || bj[3] < bi[2] {
                continue;
            }
            if segments_intersect(
                points[i],
                points[(i + 1) % m],
                points[j],
                points[(j + 1) % m],
            ) {
                return Some((i, j));
            }
        }
    }
    None
}

/// Algebraic least-squares circle fit (Kåsa). Returns `(center, radius)`.
pub fn fit_circle(curve: &DiscreteCurve) -> (Point, f64) {
    use nalgebra::{Matrix3, Vector3};
    let mut a = Matrix3::<f64>::zeros();
    let mut rhs = Vector3::<f64>::zeros();
    for p in curve.points() {
        let row = Vector3::new(p[0], p[1], 1.0);
        let w = p[0] * p[0] + p[1] * p[1];
        a += row * row.transpose();
        rhs += row * w;
    }
    let sol = a.lu().solve(&rhs).unwrap_or_else(Vector3::zeros);
    let cx = sol[0] / 2.0;
    let cy = sol[1] / 2.0;
    let r = (sol[2] + cx * cx + cy * cy).max(0.0).sqrt();
    ([cx, cy], r)
}

/// Maximal radial deviation `| |x - c| - r |` over the interpolant sampled
/// `factor` times more densely than the curve: the Hausdorff distance to
/// the circle for star-shaped curves close to it.
pub fn distance_to_circle(curve: &DiscreteCurve, center: Point, radius: f64, factor: usize) -> f64 {
    let fine = curve.series().resample_uniform(curve.len() * factor.max(1));
    fine.iter()
        .map(|z| ((z.re - center[0]).hypot(z.im - center[1]) - radius).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_node_counts() {
        let pts: Vec<Point> = grid(15).map(|t| [t.cos(), t.sin()]).collect();
        assert!(matches!(
            DiscreteCurve::new(pts),
            Err(Error::InvalidCurve(_))
        ));
        assert!(DiscreteCurve::circle(1.0, [0.0, 0.0], 8).is_err());
    }

    #[test]
    fn rejects_self_intersection() {
        // figure eight
        let pts: Vec<Point> = grid(64).map(|t| [t.sin(), (2.0 * t).sin() * 0.5]).collect();
        let err = DiscreteCurve::new(pts).unwrap_err();
        assert!(err.to_string().contains("self-intersects"), "{err}");
    }

    #[test]
    fn rejects_uneven_spacing() {
        let m = 32;
        let pts: Vec<Point> = (0..m)
            .map(|j| {
                let s = j as f64 / m as f64;
                let t = 2.0 * PI * s.powi(4);
                [t.cos(), t.sin()]
            })
            .collect();
        let err = DiscreteCurve::new(pts).unwrap_err();
        assert!(err.to_string().contains("spacing ratio"), "{err}");
    }

    #[test]
    fn area_centroid_length_of_ellipse() {
        let c = DiscreteCurve::ellipse(1.2, 0.8, 0.3, [0.5, -0.25], 256).unwrap();
        assert!((c.area() - PI * 0.96).abs() < 1e-12);
        let g = c.centroid();
        assert!((g[0] - 0.5).abs() < 1e-12 && (g[1] + 0.25).abs() < 1e-12);
        assert!(c.is_ccw());
        assert!(!c.reversed().is_ccw());
        assert!((c.reversed().area() - c.area()).abs() < 1e-12);
    }

    #[test]
    fn circle_fit_recovers_circle() {
        let c = DiscreteCurve::circle(1.7, [0.3, 0.2], 64).unwrap();
        let (center, r) = fit_circle(&c);
        assert!((center[0] - 0.3).abs() < 1e-12 && (center[1] - 0.2).abs() < 1e-12);
        assert!((r - 1.7).abs() < 1e-12);
        assert!(distance_to_circle(&c, center, r, 4) < 1e-12);
    }
}
