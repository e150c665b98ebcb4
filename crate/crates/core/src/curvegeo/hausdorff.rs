use std::collections::HashMap;

use super::{DiscreteCurve, Point};
use crate::fourier::TrigSeries;

#[inline]
fn point_segment_dist(p: Point, a: Point, b: Point) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (ap[0] - t * ab[0]).hypot(ap[1] - t * ab[1])
}

/// Uniform grid over the segments of a closed polyline for nearest-segment
/// queries.
pub struct SegmentIndex<'a> {
    points: &'a [Point],
    cell: f64,
    bbox: [f64; 4],
    buckets: HashMap<(i64, i64), Vec<u32>>,
}

impl<'a> SegmentIndex<'a> {
    pub fn new(points: &'a [Point]) -> Self {
        let m = points.len();
        let longest = (0..m)
            .map(|i| super::dist(points[i], points[(i + 1) % m]))
            .fold(0.0, f64::max);
        let cell = (2.0 * longest).max(1e-300);
        let mut buckets: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
        let mut bbox = [
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        ];
        for p in points {
            bbox = [
                bbox[0].min(p[0]),
                bbox[1].max(p[0]),
                bbox[2].min(p[1]),
                bbox[3].max(p[1]),
            ];
        }
        for i in 0..m {
            let a = points[i];
            let b = points[(i + 1) % m];
            let (x0, x1) = (a[0].min(b[0]), a[0].max(b[0]));
            let (y0, y1) = (a[1].min(b[1]), a[1].max(b[1]));
            for cx in (x0 / cell).floor() as i64..=(x1 / cell).floor() as i64 {
                for cy in (y0 / cell).floor() as i64..=(y1 / cell).floor() as i64 {
                    buckets.entry((cx, cy)).or_default().push(i as u32);
                }
            }
        }
        Self {
            points,
            cell,
            bbox,
            buckets,
        }
    }

    /// Distance from `p` to the polyline.
    pub fn distance(&self, p: Point) -> f64 {
        let m = self.points.len();
        let cx = (p[0] / self.cell).floor() as i64;
        let cy = (p[1] / self.cell).floor() as i64;
        let dx = (self.bbox[0] - p[0]).max(p[0] - self.bbox[1]).max(0.0);
        let dy = (self.bbox[2] - p[1]).max(p[1] - self.bbox[3]).max(0.0);
        if dx.hypot(dy) > 4.0 * self.cell {
            return (0..m)
                .map(|i| point_segment_dist(p, self.points[i], self.points[(i + 1) % m]))
                .fold(f64::INFINITY, f64::min);
        }
        let span = (self.bbox[1] - self.bbox[0]).max(self.bbox[3] - self.bbox[2]);
        let max_ring = 2 + (span / self.cell).ceil() as i64 + 4;
        let mut best = f64::INFINITY;
        let mut ring = 0i64;
        loop {
            for dx in -ring..=ring {
                for dy in -ring..=ring {
                    if dx.abs() != ring && dy.abs() != ring {
                        continue;
                    }
                    if let Some(segs) = self.buckets.get(&(cx + dx, cy + dy)) {
                        for &i in segs {
                            let i = i as usize;
                            best = best.min(point_segment_dist(
                                p,
                                self.points[i],
                                self.points[(i + 1) % m],
                            ));
                        }
                    }
                }
            }
            // every cell outside the searched square is at least `ring·cell` away
            if best <= ring as f64 * self.cell || ring > max_ring {
                return best;
            }
            ring += 1;
        }
    }
}

fn directed(from: &[Point], to: &SegmentIndex<'_>) -> f64 {
    from.iter().map(|&p| to.distance(p)).fold(0.0, f64::max)
}

/// Symmetric Hausdorff distance between two closed polylines, measured from
/// the vertices of each to the segments of the other.
pub fn hausdorff_distance(a: &DiscreteCurve, b: &DiscreteCurve) -> f64 {
    let ia = SegmentIndex::new(a.points());
    let ib = SegmentIndex::new(b.points());
    directed(a.points(), &ib).max(directed(b.points(), &ia))
}

/// Hausdorff distance between the trigonometric interpolants of both
/// curves, each sampled `factor` times more densely. Chord sag shrinks by
/// `factor²`.
pub fn hausdorff_refined(a: &DiscreteCurve, b: &DiscreteCurve, factor: usize) -> f64 {
    let dense = |c: &DiscreteCurve| -> Vec<Point> {
        TrigSeries::from_samples(&c.to_complex())
            .resample_uniform(c.len() * factor.max(1))
            .iter()
            .map(|z| [z.re, z.im])
            .collect()
    };
    let pa = dense(a);
    let pb = dense(b);
    let ia = SegmentIndex::new(&pa);
    let ib = SegmentIndex::new(&pb);
    directed(&pa, &ib).max(directed(&pb, &ia))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn brute(a: &[Point], b: &[Point]) -> f64 {
        let d = |from: &[Point], to: &[Point]| {
            let m = to.len();
            from.iter()
                .map(|&p| {
                    (0..m)
                        .map(|i| point_segment_dist(p, to[i], to[(i + 1) % m]))
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(0.0, f64::max)
        };
        d(a, b).max(d(b, a))
    }

    #[test]
    fn identical_curves() {
        let c = DiscreteCurve::ellipse(1.0, 0.6, 0.2, [0.0, 0.0], 128).unwrap();
        assert_eq!(hausdorff_distance(&c, &c), 0.0);
    }

    #[test]
    fn concentric_circles() {
        let m = 512;
        let a = DiscreteCurve::circle(1.0, [0.0, 0.0], m).unwrap();
        let b = DiscreteCurve::circle(1.3, [0.0, 0.0], m).unwrap();
        let sag = 1.3 * (1.0 - (PI / m as f64).cos());
        let d = hausdorff_distance(&a, &b);
        assert!((d - 0.3).abs() <= 2.0 * sag && 2.0 * sag <= 1e-4, "{d}");
    }

    #[test]
    fn translated_circle_against_dense_brute_force() {
        let d = 1e-2;
        let a = DiscreteCurve::circle(1.0, [0.0, 0.0], 512).unwrap();
        let b = a.translated([d, 0.0]);
        let h = hausdorff_distance(&a, &b);
        assert!((h - d).abs() < 1e-4, "{h}");
        let fa = crate::curvegeo::upsample(&a, 8).unwrap();
        let fb = crate::curvegeo::upsample(&b, 8).unwrap();
        let reference = brute(fa.points(), fb.points());
        assert!((h - reference).abs() < 1e-4);
    }

    #[test]
    fn grid_index_matches_brute_force() {
        let a = DiscreteCurve::polar(1.0, &[(3, 0.2, 0.1)], [0.3, -0.2], 96).unwrap();
        let b = DiscreteCurve::ellipse(1.4, 0.7, 0.5, [0.0, 0.1], 64).unwrap();
        let h = hausdorff_distance(&a, &b);
        assert!((h - brute(a.points(), b.points())).abs() < 1e-14);
    }
}
