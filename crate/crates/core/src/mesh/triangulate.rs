//! Polygon triangulation through a constrained Delaunay triangulation.
//!
//! Ring edges become constraints; triangles are kept when an odd number of
//! constraints separates them from the unbounded face. Rings may touch at
//! vertices, which hole bridging handles poorly.

use std::collections::VecDeque;

use crate::geom2d::{cross, ring_area};
use crate::types::Point2;
use spade::handles::FixedVertexHandle;
use spade::{ConstrainedDelaunayTriangulation, Triangulation};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TriangulationError {
    #[error("ring {ring} has fewer than 3 distinct vertices")]
    TooFewVertices { ring: usize },
    #[error("ring {ring} encloses no area")]
    ZeroArea { ring: usize },
    #[error("polygon is self-intersecting: edge {a:?} crosses edge {b:?}")]
    SelfIntersection { a: (usize, usize), b: (usize, usize) },
    #[error("vertex {index} has non-finite coordinates")]
    NonFinite { index: usize },
    #[error("ring edges overlap near vertex {index}")]
    Overlap { index: usize },
}

#[inline]
fn orient(a: &Point2, b: &Point2, c: &Point2) -> f64 {
    cross(&(b - a), &(c - a))
}

struct Ctx<'a> {
    pts: &'a [Point2],
    eps: f64,
}

impl Ctx<'_> {
    fn p(&self, i: usize) -> &Point2 {
        &self.pts[i]
    }
}

/// Proper crossings between any two ring edges, found with an x sweep.
fn find_crossing(ctx: &Ctx, loops: &[Vec<usize>]) -> Option<((usize, usize), (usize, usize))> {
    let mut edges: Vec<(usize, usize, f64, f64)> = Vec::new();
    for l in loops {
        for k in 0..l.len() {
            let (a, b) = (l[k], l[(k + 1) % l.len()]);
            let (pa, pb) = (ctx.p(a), ctx.p(b));
            edges.push((a, b, pa.x.min(pb.x), pa.x.max(pb.x)));
        }
    }
    edges.sort_by(|x, y| x.2.total_cmp(&y.2));
    for i in 0..edges.len() {
        let (a, b, _, hi) = edges[i];
        let (pa, pb) = (ctx.p(a), ctx.p(b));
        for &(c, d, lo, _) in &edges[i + 1..] {
            if lo > hi {
                break;
            }
            if a == c || a == d || b == c || b == d {
                continue;
            }
            let (pc, pd) = (ctx.p(c), ctx.p(d));
            let (o1, o2) = (orient(pa, pb, pc), orient(pa, pb, pd));
            let (o3, o4) = (orient(pc, pd, pa), orient(pc, pd, pb));
            let e = ctx.eps;
            if ((o1 > e && o2 < -e) || (o1 < -e && o2 > e)) && ((o3 > e && o4 < -e) || (o3 < -e && o4 > e)) {
                return Some(((a, b), (c, d)));
            }
        }
    }
    None
}

/// Triangulates a shell (`rings[0]`) with holes. Triangle indices refer to
/// the concatenation of all rings and are wound counter-clockwise whatever
/// the input ring orientation.
pub fn triangulate(rings: &[Vec<Point2>]) -> Result<Vec<[usize; 3]>, TriangulationError> {
    let pts: Vec<Point2> = rings.iter().flatten().copied().collect();
    if pts.is_empty() {
        return Err(TriangulationError::TooFewVertices { ring: 0 });
    }
    let (mut lo, mut hi) = (pts[0], pts[0]);
    for p in &pts {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let scale = (hi - lo).norm().max(f64::MIN_POSITIVE);
    let ctx = Ctx {
        pts: &pts,
        eps: 1e-14 * scale * scale,
    };

    let mut loops = Vec::with_capacity(rings.len());
    let mut offset = 0;
    for (r, ring) in rings.iter().enumerate() {
        let mut idx: Vec<usize> = (offset..offset + ring.len()).collect();
        offset += ring.len();
        idx.dedup_by(|a, b| pts[*a] == pts[*b]);
        while idx.len() > 1 && pts[idx[0]] == pts[*idx.last().expect("non-empty")] {
            idx.pop();
        }
        if idx.len() < 3 {
            return Err(TriangulationError::TooFewVertices { ring: r });
        }
        let coords: Vec<Point2> = idx.iter().map(|&i| pts[i]).collect();
        let area = ring_area(&coords);
        if area.abs() <= ctx.eps {
            return Err(TriangulationError::ZeroArea { ring: r });
        }
        // Shell counter-clockwise, holes clockwise.
        if (area > 0.0) != (r == 0) {
            idx.reverse();
        }
        loops.push(idx);
    }
    if let Some((a, b)) = find_crossing(&ctx, &loops) {
        return Err(TriangulationError::SelfIntersection { a, b });
    }

    constrained(&pts, lo, &loops)
}

fn constrained(pts: &[Point2], origin: Point2, loops: &[Vec<usize>]) -> Result<Vec<[usize; 3]>, TriangulationError> {
    let mut cdt: ConstrainedDelaunayTriangulation<spade::Point2<f64>> = ConstrainedDelaunayTriangulation::new();
    // Spade handle index -> first input index at that position.
    let mut input_of: Vec<usize> = Vec::new();
    let mut handle: Vec<Option<FixedVertexHandle>> = vec![None; pts.len()];
    for l in loops {
        for &i in l {
            let p = pts[i] - origin;
            let h = cdt
                .insert(spade::Point2::new(p.x, p.y))
                .map_err(|_| TriangulationError::NonFinite { index: i })?;
            if h.index() >= input_of.len() {
                input_of.resize(h.index() + 1, usize::MAX);
            }
            if input_of[h.index()] == usize::MAX {
                input_of[h.index()] = i;
            }
            handle[i] = Some(h);
        }
    }
    for l in loops {
        for k in 0..l.len() {
            let (a, b) = (l[k], l[(k + 1) % l.len()]);
            let (ha, hb) = (handle[a].expect("inserted"), handle[b].expect("inserted"));
            if ha == hb {
                continue;
            }
            if cdt.exists_constraint(ha, hb) {
                return Err(TriangulationError::Overlap { index: a });
            }
            if !cdt.can_add_constraint(ha, hb) {
                return Err(TriangulationError::SelfIntersection { a: (a, b), b: (a, b) });
            }
            cdt.add_constraint(ha, hb);
        }
    }

    // 0-1 breadth-first search: crossing a constraint adds one to the depth.
    let mut depth = vec![usize::MAX; cdt.num_all_faces()];
    let mut queue = VecDeque::new();
    for e in cdt.convex_hull() {
        let step = usize::from(e.as_undirected().data().is_constraint_edge());
        for f in [e.face(), e.rev().face()].into_iter().filter_map(|f| f.as_inner()) {
            if step < depth[f.fix().index()] {
                depth[f.fix().index()] = step;
                queue.push_back(f.fix());
            }
        }
    }
    while let Some(f) = queue.pop_front() {
        let d = depth[f.index()];
        for e in cdt.face(f).adjacent_edges() {
            let Some(g) = e.rev().face().as_inner() else { continue };
            let g = g.fix();
            let step = usize::from(e.as_undirected().data().is_constraint_edge());
            if d + step < depth[g.index()] {
                depth[g.index()] = d + step;
                if step == 0 {
                    queue.push_front(g);
                } else {
                    queue.push_back(g);
                }
            }
        }
    }
    let mut tris: Vec<[usize; 3]> = cdt
        .inner_faces()
        .filter(|f| depth[f.fix().index()] % 2 == 1)
        .map(|f| f.vertices().map(|v| input_of[v.fix().index()]))
        .collect();
    // Spade's face order depends on insertion history only; sort for a
    // canonical output.
    for t in &mut tris {
        let k = (0..3).min_by_key(|&k| t[k]).expect("three vertices");
        t.rotate_left(k);
    }
    tris.sort_unstable();
    Ok(tris)
}
