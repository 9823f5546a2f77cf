//! Alpha shapes from a Delaunay triangulation.
//!
//! A triangle survives when its circumradius is below `1/alpha`; the union of
//! survivors is traced into rings. Counter-clockwise rings become shells and
//! clockwise rings become holes.

use super::{ring_area, ring_contains, GeomError, Polygon2};
use crate::types::{Point2, Vector2};
use spade::{DelaunayTriangulation, Triangulation};
use std::collections::HashMap;

/// Delaunay triangulation in a local frame centered on the input bounding box.
#[derive(Clone, Debug)]
pub(crate) struct Delaunay {
    pub origin: Vector2,
    pub verts: Vec<Point2>,
    /// Counter-clockwise vertex triples.
    pub tris: Vec<[usize; 3]>,
    /// `nbr[t][i]` is the triangle across edge `(tris[t][i], tris[t][(i + 1) % 3])`.
    pub nbr: Vec<[Option<usize>; 3]>,
}

impl Delaunay {
    pub fn new(points: &[Point2]) -> Result<Self, GeomError> {
        if points.len() < 3 {
            return Err(GeomError::Degenerate(format!("{} points, need at least 3", points.len())));
        }
        let (lo, hi) = super::bbox(points);
        let origin = 0.5 * (lo.coords + hi.coords);
        let local: Vec<spade::Point2<f64>> = points
            .iter()
            .map(|p| spade::Point2::new(p.x - origin.x, p.y - origin.y))
            .collect();
        let dt: DelaunayTriangulation<spade::Point2<f64>> = DelaunayTriangulation::bulk_load(local)
            .map_err(|e| GeomError::Degenerate(format!("triangulation failed: {e:?}")))?;
        if dt.num_inner_faces() == 0 {
            return Err(GeomError::Degenerate("all points are collinear".into()));
        }
        let verts: Vec<Point2> = dt
            .vertices()
            .map(|v| {
                let p = v.position();
                Point2::new(p.x, p.y)
            })
            .collect();
        let mut face_slot = vec![usize::MAX; dt.num_all_faces()];
        for (k, f) in dt.inner_faces().enumerate() {
            face_slot[f.fix().index()] = k;
        }
        let mut tris = Vec::with_capacity(dt.num_inner_faces());
        let mut nbr = Vec::with_capacity(dt.num_inner_faces());
        for f in dt.inner_faces() {
            let edges = f.adjacent_edges();
            tris.push(edges.map(|e| e.from().fix().index()));
            nbr.push(edges.map(|e| e.rev().face().as_inner().map(|g| face_slot[g.fix().index()])));
        }
        Ok(Self {
            origin,
            verts,
            tris,
            nbr,
        })
    }

    pub fn circumradius(&self, t: usize) -> f64 {
        let [a, b, c] = self.tris[t].map(|i| self.verts[i]);
        let (la, lb, lc) = ((b - c).norm(), (c - a).norm(), (a - b).norm());
        let area2 = super::cross(&(b - a), &(c - a)).abs();
        if area2 == 0.0 {
            f64::INFINITY
        } else {
            la * lb * lc / (2.0 * area2)
        }
    }

    pub fn to_world(&self, p: &Point2) -> Point2 {
        p + self.origin
    }
}

/// A triangulation plus per-triangle circumradii, reusable across alphas.
#[derive(Clone, Debug)]
pub struct AlphaComplex {
    pub(crate) del: Delaunay,
    radius: Vec<f64>,
}

impl AlphaComplex {
    pub fn new(points: &[Point2]) -> Result<Self, GeomError> {
        let del = Delaunay::new(points)?;
        let radius = (0..del.tris.len()).map(|t| del.circumradius(t)).collect();
        Ok(Self { del, radius })
    }

    /// Polygons of the alpha shape, largest area first.
    pub fn shape(&self, alpha: f64) -> Result<Vec<Polygon2>, GeomError> {
        if !(alpha > 0.0) {
            return Err(GeomError::InvalidParam(format!("alpha must be > 0, got {alpha}")));
        }
        let r_max = 1.0 / alpha;
        let kept: Vec<bool> = self.radius.iter().map(|&r| r < r_max).collect();
        if !kept.iter().any(|&k| k) {
            return Err(GeomError::Fragmented { alpha, radius: r_max });
        }
        let rings = trace_boundary(&self.del, &kept);
        let mut shells: Vec<(Vec<Point2>, f64)> = Vec::new();
        let mut holes: Vec<(Vec<Point2>, Point2)> = Vec::new();
        for (ring, probe) in rings {
            let a = ring_area(&ring);
            if a > 0.0 {
                shells.push((ring, a));
            } else if a < 0.0 {
                holes.push((ring, probe));
            }
        }
        let mut polys: Vec<(Polygon2, f64)> = shells
            .into_iter()
            .map(|(s, a)| (Polygon2::new(s, vec![]), a))
            .collect();
        for (hole, probe) in holes {
            let owner = polys
                .iter()
                .enumerate()
                .filter(|(_, (p, _))| ring_contains(&p.shell, &probe))
                .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
                .map(|(i, _)| i);
            if let Some(i) = owner {
                polys[i].0.holes.push(hole);
            }
        }
        let mut out: Vec<Polygon2> = polys
            .into_iter()
            .map(|(p, _)| p.map_points(|q| self.del.to_world(q)))
            .collect();
        out.sort_by(|a, b| b.area().total_cmp(&a.area()));
        Ok(out)
    }
}

/// Alpha shape of `points`, largest polygon first.
pub fn alphashape(points: &[Point2], alpha: f64) -> Result<Vec<Polygon2>, GeomError> {
    AlphaComplex::new(points)?.shape(alpha)
}

/// Traces the boundary of the kept triangles into closed rings. Each ring
/// comes with a probe point inside the kept region next to its first edge.
fn trace_boundary(del: &Delaunay, kept: &[bool]) -> Vec<(Vec<Point2>, Point2)> {
    // Directed boundary edges keep the region on their left.
    let mut edges: Vec<(usize, usize, usize)> = Vec::new();
    for (t, tri) in del.tris.iter().enumerate() {
        if !kept[t] {
            continue;
        }
        for i in 0..3 {
            let outside = del.nbr[t][i].map_or(true, |n| !kept[n]);
            if outside {
                edges.push((tri[i], tri[(i + 1) % 3], t));
            }
        }
    }
    let mut outgoing: HashMap<usize, Vec<usize>> = HashMap::new();
    for (e, &(a, _, _)) in edges.iter().enumerate() {
        outgoing.entry(a).or_default().push(e);
    }
    let v = &del.verts;
    let mut used = vec![false; edges.len()];
    let mut rings = Vec::new();
    for start in 0..edges.len() {
        if used[start] {
            continue;
        }
        let mut ring = Vec::new();
        let mut cur = start;
        loop {
            used[cur] = true;
            let (a, b, _) = edges[cur];
            ring.push(v[a]);
            let cands = &outgoing[&b];
            let next = if cands.len() == 1 {
                cands[0]
            } else {
                // At a pinch vertex stay in the sector we arrived through: the
                // first outgoing edge clockwise from the reversed incoming one.
                let back = v[a] - v[b];
                let base = back.y.atan2(back.x);
                *cands
                    .iter()
                    .min_by(|&&x, &&y| {
                        let cw = |e: usize| {
                            let d = v[edges[e].1] - v[b];
                            (base - d.y.atan2(d.x)).rem_euclid(std::f64::consts::TAU)
                        };
                        cw(x).total_cmp(&cw(y)).then(x.cmp(&y))
                    })
                    .expect("boundary vertex has an outgoing edge")
            };
            if next == start || used[next] {
                break;
            }
            cur = next;
        }
        let t = edges[start].2;
        let [p, q, r] = del.tris[t].map(|i| v[i]);
        let probe = Point2::from((p.coords + q.coords + r.coords) / 3.0);
        rings.push((ring, probe));
    }
    rings
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom2d::ring_area;
    use std::f64::consts::PI;

    fn annulus(spacing: f64, r_in: f64, r_out: f64) -> Vec<Point2> {
        let mut pts = Vec::new();
        let n = (r_out / spacing).ceil() as i64;
        for i in -n..=n {
            for j in -n..=n {
                // Offset rows so the lattice is not perfectly cocircular.
                let x = i as f64 * spacing + if j % 2 == 0 { 0.0 } else { 0.5 * spacing };
                let y = j as f64 * spacing * 0.9;
                let r = (x * x + y * y).sqrt();
                if r >= r_in && r <= r_out {
                    pts.push(Point2::new(x, y));
                }
            }
        }
        pts
    }

    #[test]
    fn square_corners_coarse() {
        let pts = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)].map(|(x, y)| Point2::new(x, y));
        let polys = alphashape(&pts, 0.1).unwrap();
        assert_eq!(polys.len(), 1);
        assert!(polys[0].holes.is_empty());
        assert_eq!(polys[0].shell.len(), 4);
        assert!((polys[0].area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn annulus_fine_has_hole_and_area() {
        let pts = annulus(0.08, 2.0, 5.0);
        let polys = alphashape(&pts, 10.0).unwrap();
        assert_eq!(polys.len(), 1);
        assert!(!polys[0].holes.is_empty());
        // The lattice covers the annulus up to one lattice step at each rim.
        let a = polys[0].area();
        let (step, r_in, r_out) = (0.1, 2.0, 5.0);
        assert!(a <= PI * (r_out * r_out - r_in * r_in), "{a}");
        assert!(a >= PI * ((r_out - step).powi(2) - (r_in + step).powi(2)), "{a}");
        assert!(ring_area(&polys[0].shell) > 0.0);
        assert!(polys[0].holes.iter().all(|h| ring_area(h) < 0.0));
    }

    #[test]
    fn annulus_coarse_has_no_hole() {
        let pts = annulus(0.08, 2.0, 5.0);
        let polys = alphashape(&pts, 0.1).unwrap();
        assert_eq!(polys.len(), 1);
        assert!(polys[0].holes.is_empty());
    }

    #[test]
    fn collinear_and_tiny_inputs_are_degenerate() {
        let line: Vec<Point2> = (0..10).map(|i| Point2::new(i as f64, 2.0 * i as f64)).collect();
        assert!(matches!(alphashape(&line, 1.0), Err(GeomError::Degenerate(_))));
        assert!(matches!(
            alphashape(&[Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)], 1.0),
            Err(GeomError::Degenerate(_))
        ));
    }

    #[test]
    fn huge_alpha_fragments() {
        let pts = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)].map(|(x, y)| Point2::new(x, y));
        assert!(matches!(alphashape(&pts, 100.0), Err(GeomError::Fragmented { .. })));
    }

    #[test]
    fn bowtie_splits_into_two_shells() {
        // Two triangles meeting only at the origin.
        let pts = [(0.0, 0.0), (-1.0, 0.3), (-1.0, -0.3), (1.0, 0.3), (1.0, -0.3)].map(|(x, y)| Point2::new(x, y));
        let polys = alphashape(&pts, 1.5).unwrap();
        assert_eq!(polys.len(), 2);
        for p in &polys {
            assert_eq!(p.shell.len(), 3);
        }
    }

    #[test]
    fn points_inside_result() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Point2> = (0..400)
            .map(|_| Point2::new(rng.gen_range(0.0..10.0), rng.gen_range(0.0..3.0)))
            .collect();
        let polys = alphashape(&pts, 0.5).unwrap();
        for p in &pts {
            let inside = polys.iter().any(|poly| poly.contains(p) || poly.boundary_distance(p) < 1e-9);
            assert!(inside);
        }
    }
}
