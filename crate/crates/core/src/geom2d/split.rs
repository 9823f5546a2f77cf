//! Cutting a polygon into blocks along its centerline.
//!
//! The centerline is resampled at `spacing`; at each interior sample the
//! polygon piece containing it is cut by the chord perpendicular to the local
//! centerline direction, running between the nearest boundary hits on either
//! side. A centerline with `n` resampled segments therefore yields `n` pieces,
//! and a spacing at least as long as the centerline yields the input polygon.

use super::{
    cross, dedup_ring, intersect, ring_area, ring_contains, resample_polyline, GeomError, Polygon2, Polyline2,
};
use crate::types::{Point2, Vector2};

/// One block of a split polygon.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitPiece {
    pub polygon: Polygon2,
    /// Direction of the centerline segment this piece belongs to, against +X.
    pub theta: f64,
    /// Area centroid of the piece.
    pub center: Point2,
}

struct Cut {
    at: Point2,
    tangent: Vector2,
}

fn nearest_hit(ring: &[Point2], o: &Point2, d: &Vector2) -> Option<(usize, Point2, f64)> {
    let n = ring.len();
    let mut best: Option<(usize, Point2, f64)> = None;
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        let e = b - a;
        let den = cross(d, &e);
        if den == 0.0 {
            continue;
        }
        let ao = a - o;
        let t = cross(&ao, &e) / den;
        let s = cross(&ao, d) / den;
        if t > 1e-12 && (0.0..=1.0).contains(&s) && best.map_or(true, |(_, _, bt)| t < bt) {
            best = Some((i, o + t * d, t));
        }
    }
    best
}

/// Splits a simple ring along the chord `p` (on edge `i`) to `q` (on edge `j`).
fn split_ring(ring: &[Point2], i: usize, p: Point2, j: usize, q: Point2) -> Option<(Vec<Point2>, Vec<Point2>)> {
    if i == j {
        return None;
    }
    let n = ring.len();
    let walk = |from: usize, to: usize, start: Point2, end: Point2| {
        let mut r = vec![start];
        let mut k = (from + 1) % n;
        loop {
            r.push(ring[k]);
            if k == to {
                break;
            }
            k = (k + 1) % n;
        }
        r.push(end);
        r
    };
    let mut a = walk(i, j, p, q);
    let mut b = walk(j, i, q, p);
    let scale = ring_area(ring).abs().sqrt().max(1e-300);
    dedup_ring(&mut a, 1e-12 * scale.max(1.0));
    dedup_ring(&mut b, 1e-12 * scale.max(1.0));
    let tiny = 1e-12 * ring_area(ring).abs();
    (a.len() >= 3 && b.len() >= 3 && ring_area(&a).abs() > tiny && ring_area(&b).abs() > tiny).then_some((a, b))
}

/// Splits `polygon` along several centerlines at once. Each piece takes its
/// angle from the resampled centerline segment nearest to its centroid.
pub fn split_polygon_by_centerlines(
    polygon: &Polygon2,
    centerlines: &[Polyline2],
    spacing: f64,
) -> Result<Vec<SplitPiece>, GeomError> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(GeomError::InvalidParam(format!("spacing must be > 0, got {spacing}")));
    }
    let polygon = polygon.clone().normalized();
    let (lo, hi) = polygon.bbox();
    let tol = 1e-6 * (hi - lo).norm().max(1.0);
    let mut segments: Vec<(Point2, Point2)> = Vec::new();
    let mut cuts: Vec<Cut> = Vec::new();
    for line in centerlines {
        let r = resample_polyline(line, spacing)?;
        for p in &r.vertices {
            if !polygon.contains(p) && polygon.boundary_distance(p) > tol {
                return Err(GeomError::InvalidCenterline);
            }
        }
        let v = &r.vertices;
        for k in 0..v.len() - 1 {
            segments.push((v[k], v[k + 1]));
        }
        for k in 1..v.len() - 1 {
            let t = (v[k] - v[k - 1]).normalize() + (v[k + 1] - v[k]).normalize();
            let t = if t.norm() > 1e-12 { t.normalize() } else { (v[k + 1] - v[k]).normalize() };
            cuts.push(Cut { at: v[k], tangent: t });
        }
    }

    let mut pieces: Vec<Vec<Point2>> = vec![polygon.shell.clone()];
    for cut in &cuts {
        let Some(idx) = pieces.iter().position(|r| ring_contains(r, &cut.at)) else {
            continue;
        };
        let ring = &pieces[idx];
        let normal = Vector2::new(-cut.tangent.y, cut.tangent.x);
        let (Some((i, p, _)), Some((j, q, _))) =
            (nearest_hit(ring, &cut.at, &normal), nearest_hit(ring, &cut.at, &(-normal)))
        else {
            continue;
        };
        let Some((a, b)) = split_ring(ring, i, p, j, q) else {
            continue;
        };
        // The piece behind the cut keeps the earlier position in the list.
        let back = cut.at - 1e-3 * spacing * cut.tangent;
        let a_first = if ring_contains(&a, &back) != ring_contains(&b, &back) {
            ring_contains(&a, &back)
        } else {
            (super::ring_centroid(&a) - cut.at).dot(&cut.tangent) < 0.0
        };
        let (first, second) = if a_first { (a, b) } else { (b, a) };
        pieces[idx] = first;
        pieces.insert(idx + 1, second);
    }

    let mut out = Vec::new();
    for shell in pieces {
        let piece = Polygon2::new(shell, vec![]).normalized();
        let parts = if polygon.holes.is_empty() {
            vec![piece]
        } else {
            intersect(&piece, &polygon)
        };
        for part in parts {
            let center = part.centroid();
            let theta = segments
                .iter()
                .map(|(a, b)| (super::segment_distance(&center, a, b), (b - a)))
                .min_by(|x, y| x.0.total_cmp(&y.0))
                .map_or(0.0, |(_, d)| d.y.atan2(d.x));
            out.push(SplitPiece {
                polygon: part,
                theta,
                center,
            });
        }
    }
    Ok(out)
}

pub fn split_polygon_by_centerline(
    polygon: &Polygon2,
    centerline: &Polyline2,
    spacing: f64,
) -> Result<Vec<SplitPiece>, GeomError> {
    split_polygon_by_centerlines(polygon, std::slice::from_ref(centerline), spacing)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom2d::intersect;
    use std::f64::consts::FRAC_PI_2;

    fn total_area(pieces: &[SplitPiece]) -> f64 {
        pieces.iter().map(|p| p.polygon.area()).sum()
    }

    #[test]
    fn rectangle_into_ten_blocks() {
        let rect = Polygon2::rect(Point2::new(0.0, 0.0), Point2::new(10.0, 1.0));
        let line = Polyline2::open(vec![Point2::new(0.0, 0.5), Point2::new(10.0, 0.5)]);
        let pieces = split_polygon_by_centerline(&rect, &line, 1.0).unwrap();
        // Oracle: clip the rectangle to the slabs between consecutive cut
        // positions x = 1..9; the outer slabs run to the polygon ends.
        let edges: Vec<f64> = (0..=10).map(f64::from).collect();
        assert_eq!(pieces.len(), edges.len() - 1);
        for (k, piece) in pieces.iter().enumerate() {
            let slab = Polygon2::rect(Point2::new(edges[k], -1.0), Point2::new(edges[k + 1], 2.0));
            let expected: f64 = intersect(&rect, &slab).iter().map(Polygon2::area).sum();
            assert!((piece.polygon.area() - expected).abs() < 1e-9);
            assert!((piece.center.x - (k as f64 + 0.5)).abs() < 1e-9);
            assert!(piece.theta.abs() < 1e-12);
        }
        assert!((total_area(&pieces) - 10.0).abs() < 1e-6);
    }

    #[test]
    fn long_spacing_returns_input() {
        let rect = Polygon2::rect(Point2::new(0.0, 0.0), Point2::new(10.0, 1.0));
        let line = Polyline2::open(vec![Point2::new(0.5, 0.5), Point2::new(9.5, 0.5)]);
        let pieces = split_polygon_by_centerline(&rect, &line, 20.0).unwrap();
        assert_eq!(pieces.len(), 1);
        assert!((pieces[0].polygon.area() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn centerline_outside_is_rejected() {
        let rect = Polygon2::rect(Point2::new(0.0, 0.0), Point2::new(10.0, 1.0));
        let line = Polyline2::open(vec![Point2::new(0.5, 5.0), Point2::new(9.5, 5.0)]);
        assert_eq!(
            split_polygon_by_centerline(&rect, &line, 1.0).unwrap_err(),
            GeomError::InvalidCenterline
        );
    }

    #[test]
    fn quarter_annulus_angles_are_monotone() {
        let arc = |r: f64, n: usize| -> Vec<Point2> {
            (0..=n)
                .map(|i| {
                    let a = FRAC_PI_2 * i as f64 / n as f64;
                    Point2::new(r * a.cos(), r * a.sin())
                })
                .collect()
        };
        let mut shell = arc(12.0, 90);
        shell.extend(arc(8.0, 60).into_iter().rev());
        let poly = Polygon2::new(shell, vec![]).normalized();
        let centerline = Polyline2::open(arc(10.0, 90));
        let pieces = split_polygon_by_centerline(&poly, &centerline, 1.0).unwrap();
        assert!(pieces.len() >= 15);
        // Angle oracle: the arc direction at each piece is its polar angle + 90°.
        for w in pieces.windows(2) {
            assert!(w[1].theta > w[0].theta);
        }
        for p in &pieces {
            let polar = p.center.y.atan2(p.center.x);
            assert!((p.theta - (polar + FRAC_PI_2)).abs() < 0.06);
        }
        let area: f64 = total_area(&pieces);
        assert!((area - poly.area()).abs() / poly.area() < 1e-6);
    }

    #[test]
    fn holes_are_respected() {
        let outer = Polygon2::rect(Point2::new(0.0, 0.0), Point2::new(10.0, 4.0));
        let hole = Polygon2::rect(Point2::new(4.0, 1.5), Point2::new(6.0, 2.5)).shell;
        let poly = Polygon2::new(outer.shell, vec![hole]).normalized();
        let line = Polyline2::open(vec![Point2::new(0.0, 0.7), Point2::new(10.0, 0.7)]);
        let pieces = split_polygon_by_centerline(&poly, &line, 2.0).unwrap();
        assert!((total_area(&pieces) - poly.area()).abs() < 1e-9);
    }
}
