//! Minimum enclosing circle and ray sampling of star-shaped sections.

use super::{cross, Circle2, GeomError, Polygon2, Polyline2};
use crate::types::{Point2, Vector2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn inside(c: &Circle2, p: &Point2) -> bool {
    (p - c.center).norm() <= c.radius * (1.0 + 1e-12) + 1e-12
}

fn diameter(a: &Point2, b: &Point2) -> Circle2 {
    Circle2 {
        center: Point2::from(0.5 * (a.coords + b.coords)),
        radius: 0.5 * (a - b).norm(),
    }
}

fn circumcircle(a: &Point2, b: &Point2, c: &Point2) -> Circle2 {
    let (ab, ac) = (b - a, c - a);
    let d = 2.0 * cross(&ab, &ac);
    if d.abs() <= 1e-14 * ab.norm_squared().max(ac.norm_squared()) {
        // Collinear: the widest pair spans the others.
        return [diameter(a, b), diameter(a, c), diameter(b, c)]
            .into_iter()
            .max_by(|x, y| x.radius.total_cmp(&y.radius))
            .expect("three candidates");
    }
    let (b2, c2) = (ab.norm_squared(), ac.norm_squared());
    let off = Vector2::new(ac.y * b2 - ab.y * c2, ab.x * c2 - ac.x * b2) / d;
    Circle2 {
        center: a + off,
        radius: off.norm(),
    }
}

/// Smallest circle containing every point (Welzl, iterative form with a
/// fixed-seed shuffle, expected linear time).
pub fn min_enclosing_circle(points: &[Point2]) -> Result<Circle2, GeomError> {
    if points.is_empty() {
        return Err(GeomError::Degenerate("no points".into()));
    }
    // Work relative to the first point for conditioning.
    let o = points[0].coords;
    let mut p: Vec<Point2> = points.iter().map(|q| q - o).collect();
    p.shuffle(&mut ChaCha8Rng::seed_from_u64(0x5eed));
    let mut c = Circle2 {
        center: p[0],
        radius: 0.0,
    };
    for i in 1..p.len() {
        if inside(&c, &p[i]) {
            continue;
        }
        c = Circle2 {
            center: p[i],
            radius: 0.0,
        };
        for j in 0..i {
            if inside(&c, &p[j]) {
                continue;
            }
            c = diameter(&p[i], &p[j]);
            for k in 0..j {
                if !inside(&c, &p[k]) {
                    c = circumcircle(&p[i], &p[j], &p[k]);
                }
            }
        }
    }
    Ok(Circle2 {
        center: c.center + o,
        radius: c.radius,
    })
}

/// What rays are cast against.
#[derive(Clone, Copy, Debug)]
pub enum RayShape<'a> {
    Polygon(&'a Polygon2),
    Circle(Circle2),
}

/// Closed ring of exactly `n_rays` vertices. Vertex `i` is the farthest hit
/// of the ray at angle `2πi/n_rays` from the minimum-circle center; vertex 0
/// lies on the +X ray and order is counter-clockwise. When the center falls
/// outside the polygon an interior point is used as the ray origin instead.
pub fn ray_sample(shape: RayShape<'_>, n_rays: usize) -> Result<Polyline2, GeomError> {
    if n_rays < 3 {
        return Err(GeomError::InvalidParam(format!("n_rays must be >= 3, got {n_rays}")));
    }
    let dirs = (0..n_rays).map(|i| {
        let a = std::f64::consts::TAU * i as f64 / n_rays as f64;
        Vector2::new(a.cos(), a.sin())
    });
    let vertices = match shape {
        RayShape::Circle(c) => dirs.map(|d| c.center + c.radius * d).collect(),
        RayShape::Polygon(poly) => {
            let mut origin = min_enclosing_circle(&poly.shell)?.center;
            if !poly.contains(&origin) {
                origin = poly.interior_point();
            }
            dirs.map(|d| farthest_hit(poly, &origin, &d).unwrap_or(origin))
                .collect()
        }
    };
    Ok(Polyline2 {
        vertices,
        closed: true,
    })
}

fn farthest_hit(poly: &Polygon2, o: &Point2, d: &Vector2) -> Option<Point2> {
    let mut best: Option<f64> = None;
    for ring in poly.rings() {
        let n = ring.len();
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
            if t >= 0.0 && (-1e-12..=1.0 + 1e-12).contains(&s) && best.map_or(true, |bt| t > bt) {
                best = Some(t);
            }
        }
    }
    best.map(|t| o + t * d)
}
