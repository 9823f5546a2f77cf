//! Planar geometry kernel: polygons, alpha shapes, centerlines, splitting,
//! grids, Boolean clipping, enclosing circles and line fitting.

mod alpha;
mod boolean;
mod centerline;
mod circle;
mod fit;
mod grid;
mod resample;
mod split;

pub use alpha::{alphashape, AlphaComplex};
pub use boolean::{difference, from_geo, intersect, intersect_all, to_geo};
pub use centerline::extract_centerlines;
pub use circle::{min_enclosing_circle, ray_sample, RayShape};
pub use fit::{fit_line_angle, principal_axes};
pub use grid::{grid_partition, grid_partition_all};
pub use resample::{chaikin, resample_polyline};
pub use split::{split_polygon_by_centerline, split_polygon_by_centerlines, SplitPiece};

use crate::types::{Point2, Vector2};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeomError {
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("alpha {alpha} fragments the shape: no triangle with circumradius below {radius}")]
    Fragmented { alpha: f64, radius: f64 },
    #[error("centerline does not lie inside the polygon")]
    InvalidCenterline,
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

/// Open or closed 2D polyline. Closure is implicit (no repeated vertex).
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Polyline2 {
    pub vertices: Vec<Point2>,
    pub closed: bool,
}

impl Polyline2 {
    pub fn open(vertices: Vec<Point2>) -> Self {
        Self {
            vertices,
            closed: false,
        }
    }

    pub fn segment_count(&self) -> usize {
        match (self.vertices.len(), self.closed) {
            (0 | 1, _) => 0,
            (n, true) => n,
            (n, false) => n - 1,
        }
    }

    pub fn segments(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.vertices.len();
        (0..self.segment_count()).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn length(&self) -> f64 {
        self.segments().map(|(a, b)| (b - a).norm()).sum()
    }

    pub fn distance_to(&self, p: &Point2) -> f64 {
        if self.vertices.len() == 1 {
            return (p - self.vertices[0]).norm();
        }
        self.segments()
            .map(|(a, b)| segment_distance(p, &a, &b))
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Circle2 {
    pub center: Point2,
    pub radius: f64,
}

impl Circle2 {
    pub fn contains(&self, p: &Point2, tol: f64) -> bool {
        (p - self.center).norm() <= self.radius + tol
    }
}

/// Shell plus holes. After `normalized()` the shell is counter-clockwise and
/// holes are clockwise.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Polygon2 {
    pub shell: Vec<Point2>,
    pub holes: Vec<Vec<Point2>>,
}

impl Polygon2 {
    pub fn new(shell: Vec<Point2>, holes: Vec<Vec<Point2>>) -> Self {
        Self { shell, holes }
    }

    pub fn rect(min: Point2, max: Point2) -> Self {
        Self::new(
            vec![min, Point2::new(max.x, min.y), max, Point2::new(min.x, max.y)],
            vec![],
        )
    }

    pub fn rings(&self) -> impl Iterator<Item = &Vec<Point2>> {
        std::iter::once(&self.shell).chain(self.holes.iter())
    }

    pub fn vertex_count(&self) -> usize {
        self.rings().map(Vec::len).sum()
    }

    /// Shell area minus hole areas.
    pub fn area(&self) -> f64 {
        ring_area(&self.shell).abs() - self.holes.iter().map(|h| ring_area(h).abs()).sum::<f64>()
    }

    pub fn normalized(mut self) -> Self {
        orient_ring(&mut self.shell, true);
        for h in &mut self.holes {
            orient_ring(h, false);
        }
        self
    }

    /// Area centroid including holes; falls back to the vertex mean for
    /// zero-area input.
    pub fn centroid(&self) -> Point2 {
        let mut a = 0.0;
        let mut c = Vector2::zeros();
        for ring in self.rings() {
            let ra = ring_area(ring);
            let sign = if std::ptr::eq(ring, &self.shell) { 1.0 } else { -1.0 };
            a += sign * ra.abs();
            c += sign * ra.abs() * ring_centroid(ring).coords;
        }
        if a.abs() > 1e-300 {
            Point2::from(c / a)
        } else {
            let n = self.shell.len().max(1) as f64;
            Point2::from(self.shell.iter().fold(Vector2::zeros(), |acc, p| acc + p.coords) / n)
        }
    }

    /// Even-odd containment over all rings. Boundary points may go either way.
    pub fn contains(&self, p: &Point2) -> bool {
        self.rings().filter(|r| ring_contains(r, p)).count() % 2 == 1
    }

    pub fn bbox(&self) -> (Point2, Point2) {
        bbox(&self.shell)
    }

    pub fn map_points(&self, mut f: impl FnMut(&Point2) -> Point2) -> Polygon2 {
        Polygon2 {
            shell: self.shell.iter().map(&mut f).collect(),
            holes: self.holes.iter().map(|h| h.iter().map(&mut f).collect()).collect(),
        }
    }

    pub fn boundary_distance(&self, p: &Point2) -> f64 {
        self.rings()
            .map(|r| {
                Polyline2 {
                    vertices: r.clone(),
                    closed: true,
                }
                .distance_to(p)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// A point strictly inside the polygon: the centroid when it qualifies,
    /// otherwise the midpoint of the widest interior run of a horizontal scan
    /// line through the middle of the bounding box.
    pub fn interior_point(&self) -> Point2 {
        let c = self.centroid();
        if self.contains(&c) && self.boundary_distance(&c) > 1e-9 {
            return c;
        }
        let (lo, hi) = self.bbox();
        let mut best: Option<(f64, Point2)> = None;
        for k in 1..8 {
            let y = lo.y + (hi.y - lo.y) * k as f64 / 8.0;
            let mut xs: Vec<f64> = Vec::new();
            for ring in self.rings() {
                let n = ring.len();
                for i in 0..n {
                    let (a, b) = (ring[i], ring[(i + 1) % n]);
                    if (a.y > y) != (b.y > y) {
                        xs.push(a.x + (y - a.y) / (b.y - a.y) * (b.x - a.x));
                    }
                }
            }
            xs.sort_by(f64::total_cmp);
            for pair in xs.chunks(2) {
                if let [x0, x1] = pair {
                    let w = x1 - x0;
                    if best.map_or(true, |(bw, _)| w > bw) {
                        best = Some((w, Point2::new(0.5 * (x0 + x1), y)));
                    }
                }
            }
        }
        best.map_or(c, |(_, p)| p)
    }
}

/// Signed area, positive for counter-clockwise rings.
pub fn ring_area(ring: &[Point2]) -> f64 {
    let n = ring.len();
    if n < 3 {
        return 0.0;
    }
    let o = ring[0];
    let mut s = 0.0;
    for i in 1..n - 1 {
        s += cross(&(ring[i] - o), &(ring[i + 1] - o));
    }
    0.5 * s
}

pub fn ring_centroid(ring: &[Point2]) -> Point2 {
    let n = ring.len();
    let o = ring[0];
    let mut a = 0.0;
    let mut c = Vector2::zeros();
    for i in 1..n.saturating_sub(1) {
        let (p, q) = (ring[i] - o, ring[i + 1] - o);
        let t = cross(&p, &q);
        a += t;
        c += t * (p + q) / 3.0;
    }
    if a.abs() > 1e-300 {
        o + c / a
    } else {
        Point2::from(ring.iter().fold(Vector2::zeros(), |acc, p| acc + p.coords) / n.max(1) as f64)
    }
}

pub fn orient_ring(ring: &mut [Point2], ccw: bool) {
    if (ring_area(ring) > 0.0) != ccw {
        ring.reverse();
    }
}

/// Crossing-number test against one ring.
pub fn ring_contains(ring: &[Point2], p: &Point2) -> bool {
    let n = ring.len();
    let mut inside = false;
    let mut j = n.wrapping_sub(1);
    for i in 0..n {
        let (a, b) = (ring[i], ring[j]);
        if (a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x {
            inside = !inside;
        }
        j = i;
    }
    inside
}

pub fn bbox(points: &[Point2]) -> (Point2, Point2) {
    points.iter().fold(
        (
            Point2::new(f64::INFINITY, f64::INFINITY),
            Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        ),
        |(lo, hi), p| {
            (
                Point2::new(lo.x.min(p.x), lo.y.min(p.y)),
                Point2::new(hi.x.max(p.x), hi.y.max(p.y)),
            )
        },
    )
}

#[inline]
pub fn cross(a: &Vector2, b: &Vector2) -> f64 {
    a.x * b.y - a.y * b.x
}

pub fn segment_distance(p: &Point2, a: &Point2, b: &Point2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p - (a + t * ab)).norm()
}

/// Drops consecutive duplicates (including the implicit closing pair).
pub(crate) fn dedup_ring(ring: &mut Vec<Point2>, tol: f64) {
    ring.dedup_by(|a, b| (*a - *b).norm() <= tol);
    while ring.len() > 1 && (ring[0] - ring[ring.len() - 1]).norm() <= tol {
        ring.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn area_and_centroid_of_square_with_hole() {
        let outer = Polygon2::rect(Point2::new(0.0, 0.0), Point2::new(1.0, 1.0));
        let hole = Polygon2::rect(Point2::new(0.0, 0.0), Point2::new(0.5, 0.5)).shell;
        let p = Polygon2::new(outer.shell, vec![hole]).normalized();
        assert!((p.area() - 0.75).abs() < 1e-15);
        // Oracle: L-shape made of three quarter squares.
        let expected = (Vector2::new(0.75, 0.25) + Vector2::new(0.25, 0.75) + Vector2::new(0.75, 0.75)) / 3.0;
        assert!((p.centroid().coords - expected).norm() < 1e-12);
        assert!(ring_area(&p.holes[0]) < 0.0);
        assert!(!p.contains(&Point2::new(0.25, 0.25)));
        assert!(p.contains(&Point2::new(0.75, 0.25)));
    }

    #[test]
    fn interior_point_of_c_shape() {
        let shell = vec![
            Point2::new(0.0, 0.0),
            Point2::new(3.0, 0.0),
            Point2::new(3.0, 1.0),
            Point2::new(1.0, 1.0),
            Point2::new(1.0, 2.0),
            Point2::new(3.0, 2.0),
            Point2::new(3.0, 3.0),
            Point2::new(0.0, 3.0),
        ];
        let p = Polygon2::new(shell, vec![]);
        let q = p.interior_point();
        assert!(p.contains(&q));
    }
}
