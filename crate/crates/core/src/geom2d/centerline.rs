//! Centerlines from the interior Voronoi diagram of a densified boundary.
//!
//! Voronoi vertices are the circumcenters of the Delaunay triangles of the
//! boundary samples; two vertices are joined when their triangles share an
//! edge. Spurs are pruned by significance: a leaf chain that only runs from a
//! junction towards the boundary (length roughly equal to the clearance it
//! loses) carries no shape information.

use super::alpha::Delaunay;
use super::{GeomError, Polygon2, Polyline2};
use crate::types::Point2;
use rayon::prelude::*;
use std::collections::BTreeSet;

const MAX_DENSIFY_SPACING: f64 = 0.25;
/// Clearance gained per unit length above which a tip vertex is trimmed. A
/// right-angle corner bisector climbs at about 0.71, a road axis near 0.
const TIP_CLIMB_RATE: f64 = 0.5;

fn densify(polygon: &Polygon2, spacing: f64) -> Vec<Point2> {
    let mut out = Vec::new();
    for ring in polygon.rings() {
        let n = ring.len();
        for i in 0..n {
            let (a, b) = (ring[i], ring[(i + 1) % n]);
            let k = ((b - a).norm() / spacing).ceil().max(1.0) as usize;
            for j in 0..k {
                out.push(a + (j as f64 / k as f64) * (b - a));
            }
        }
    }
    out
}

fn circumcenter(a: &Point2, b: &Point2, c: &Point2) -> Option<Point2> {
    let (ab, ac) = (b - a, c - a);
    let d = 2.0 * super::cross(&ab, &ac);
    if d == 0.0 {
        return None;
    }
    let (b2, c2) = (ab.norm_squared(), ac.norm_squared());
    Some(a + nalgebra::Vector2::new(ac.y * b2 - ab.y * c2, ab.x * c2 - ac.x * b2) / d)
}

struct Graph {
    pos: Vec<Point2>,
    clearance: Vec<f64>,
    adj: Vec<BTreeSet<usize>>,
}

impl Graph {
    fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    /// Walks from leaf `v` to the first junction. Returns the node path and its
    /// length, or `None` when the walk ends at another leaf.
    fn leaf_chain(&self, v: usize) -> Option<(Vec<usize>, f64)> {
        let mut path = vec![v];
        let mut len = 0.0;
        let mut prev = usize::MAX;
        let mut cur = v;
        loop {
            let next = *self.adj[cur].iter().find(|&&w| w != prev)?;
            len += (self.pos[next] - self.pos[cur]).norm();
            path.push(next);
            match self.degree(next) {
                1 => return None,
                2 => {
                    prev = cur;
                    cur = next;
                    if cur == v {
                        return None;
                    }
                }
                _ => return Some((path, len)),
            }
        }
    }

    fn remove_node(&mut self, v: usize) {
        let nbrs: Vec<usize> = self.adj[v].iter().copied().collect();
        for w in nbrs {
            self.adj[w].remove(&v);
        }
        self.adj[v].clear();
    }

    fn prune(&mut self, min_branch_len: f64) {
        loop {
            // Insignificant leaf chains, grouped by the junction they end at.
            let mut removable: Vec<(usize, f64, Vec<usize>)> = Vec::new();
            for v in 0..self.pos.len() {
                if self.degree(v) != 1 {
                    continue;
                }
                if let Some((path, len)) = self.leaf_chain(v) {
                    let junction = *path.last().expect("non-empty chain");
                    let significance = len - self.clearance[junction] + self.clearance[v];
                    if significance < min_branch_len {
                        removable.push((junction, significance, path));
                    }
                }
            }
            if removable.is_empty() {
                return;
            }
            removable.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.total_cmp(&a.1)).then(a.2[0].cmp(&b.2[0])));
            let mut k = 0;
            while k < removable.len() {
                let j = removable[k].0;
                let mut end = k;
                while end < removable.len() && removable[end].0 == j {
                    end += 1;
                }
                // A junction must keep at least one branch; the most significant
                // of its chains (first after sorting) survives in that case.
                let skip_first = self.degree(j) <= end - k;
                for (idx, (_, _, path)) in removable[k..end].iter().enumerate() {
                    if skip_first && idx == 0 {
                        continue;
                    }
                    for &v in &path[..path.len() - 1] {
                        self.remove_node(v);
                    }
                }
                k = end;
            }
        }
    }

    /// Retracts free ends that climb away from the boundary as fast as a
    /// corner bisector does. Such tips are remnants of corner spurs whose
    /// sibling was pruned first, which left the junction with degree two.
    fn trim_tips(&mut self) {
        for start in 0..self.pos.len() {
            let mut v = start;
            while self.degree(v) == 1 {
                let w = *self.adj[v].iter().next().expect("degree one");
                if self.degree(w) != 2 {
                    break;
                }
                let climb = self.clearance[w] - self.clearance[v];
                if climb < TIP_CLIMB_RATE * (self.pos[w] - self.pos[v]).norm() {
                    break;
                }
                self.remove_node(v);
                v = w;
            }
        }
    }

    fn polylines(&self) -> Vec<Vec<usize>> {
        let mut seen: BTreeSet<(usize, usize)> = BTreeSet::new();
        let key = |a: usize, b: usize| (a.min(b), a.max(b));
        let mut out = Vec::new();
        let walk = |start: usize, first: usize, seen: &mut BTreeSet<(usize, usize)>| {
            let mut path = vec![start, first];
            seen.insert(key(start, first));
            let (mut prev, mut cur) = (start, first);
            while self.degree(cur) == 2 && cur != start {
                let next = *self.adj[cur].iter().find(|&&w| w != prev).expect("degree two");
                if !seen.insert(key(cur, next)) {
                    break;
                }
                path.push(next);
                prev = cur;
                cur = next;
            }
            path
        };
        for v in 0..self.pos.len() {
            let d = self.degree(v);
            if d == 0 || d == 2 {
                continue;
            }
            for &w in &self.adj[v] {
                if !seen.contains(&key(v, w)) {
                    out.push(walk(v, w, &mut seen));
                }
            }
        }
        // Pure cycles are cut open at their lowest node.
        for v in 0..self.pos.len() {
            if let Some(&w) = self.adj[v].iter().find(|&&w| !seen.contains(&key(v, w))) {
                let mut path = walk(v, w, &mut seen);
                if path.len() > 2 && path.first() == path.last() {
                    path.pop();
                }
                out.push(path);
            }
        }
        out
    }
}

/// Centerlines of `polygon`, longest first. Polygons too small to contain an
/// interior Voronoi edge give an empty list.
pub fn extract_centerlines(polygon: &Polygon2, min_branch_len: f64) -> Result<Vec<Polyline2>, GeomError> {
    if !(min_branch_len >= 0.0) {
        return Err(GeomError::InvalidParam(format!("min_branch_len must be >= 0, got {min_branch_len}")));
    }
    let area = polygon.area();
    let perimeter: f64 = polygon
        .rings()
        .map(|r| {
            Polyline2 {
                vertices: r.clone(),
                closed: true,
            }
            .length()
        })
        .sum();
    if !(area > 0.0 && perimeter > 0.0) {
        return Ok(Vec::new());
    }
    // Samples must be finer than the local half-width, which area/perimeter
    // approximates for elongated shapes.
    let spacing = MAX_DENSIFY_SPACING.min(0.5 * area / perimeter).max(perimeter / 50_000.0);
    let samples = densify(polygon, spacing);
    let Ok(del) = Delaunay::new(&samples) else {
        return Ok(Vec::new());
    };
    let local = polygon.map_points(|p| p - del.origin);
    let (lo, hi) = local.bbox();
    let tol = 1e-9 * (hi - lo).norm().max(1.0);

    let centers: Vec<Option<(Point2, f64)>> = del
        .tris
        .par_iter()
        .map(|t| {
            let [a, b, c] = t.map(|i| del.verts[i]);
            let cc = circumcenter(&a, &b, &c)?;
            (local.contains(&cc) && local.boundary_distance(&cc) > tol).then(|| (cc, (cc - a).norm()))
        })
        .collect();

    // Contract coincident circumcenters (cocircular samples) into one node.
    let n = del.tris.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut edges = Vec::new();
    for t in 0..n {
        let Some((ct, _)) = centers[t] else { continue };
        for u in del.nbr[t].iter().flatten().copied() {
            if u <= t {
                continue;
            }
            let Some((cu, _)) = centers[u] else { continue };
            if (ct - cu).norm() <= tol {
                let (a, b) = (find(&mut parent, t), find(&mut parent, u));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            } else if local.contains(&Point2::from(0.5 * (ct.coords + cu.coords))) {
                edges.push((t, u));
            }
        }
    }
    let mut node_of = vec![usize::MAX; n];
    let mut pos = Vec::new();
    let mut clearance = Vec::new();
    for t in 0..n {
        if centers[t].is_some() {
            let root = find(&mut parent, t);
            if node_of[root] == usize::MAX {
                node_of[root] = pos.len();
                let (rc, rr) = centers[root].expect("root is a kept node");
                pos.push(rc);
                clearance.push(rr);
            }
            node_of[t] = node_of[root];
        }
    }
    let mut adj = vec![BTreeSet::new(); pos.len()];
    for (t, u) in edges {
        let (a, b) = (node_of[t], node_of[u]);
        if a != b {
            adj[a].insert(b);
            adj[b].insert(a);
        }
    }
    let mut graph = Graph { pos, clearance, adj };
    graph.prune(min_branch_len);
    graph.trim_tips();

    let mut lines: Vec<Polyline2> = graph
        .polylines()
        .into_iter()
        .filter(|p| p.len() >= 2)
        .map(|p| Polyline2::open(p.iter().map(|&v| graph.pos[v] + del.origin).collect()))
        .collect();
    lines.sort_by(|a, b| {
        b.length()
            .total_cmp(&a.length())
            .then(a.vertices[0].x.total_cmp(&b.vertices[0].x))
            .then(a.vertices[0].y.total_cmp(&b.vertices[0].y))
    });
    Ok(lines)
}
