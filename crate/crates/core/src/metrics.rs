//! Unsigned point-to-mesh distance and the accuracy and timing reports.

use crate::mesh::Mesh;
use crate::types::{HyperAsset, Point3, Semantic, Vector3};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("mesh has no faces")]
    EmptyMesh,
}

/// Squared distance from `p` to the closed triangle (a, b, c), via the
/// Voronoi-region walk of the closest-point construction.
pub fn point_triangle_distance_sq(p: &Point3, a: &Point3, b: &Point3, c: &Point3) -> f64 {
    let (ab, ac, ap) = (b - a, c - a, p - a);
    let (d1, d2) = (ab.dot(&ap), ac.dot(&ap));
    if d1 <= 0.0 && d2 <= 0.0 {
        return ap.norm_squared();
    }
    let bp = p - b;
    let (d3, d4) = (ab.dot(&bp), ac.dot(&bp));
    if d3 >= 0.0 && d4 <= d3 {
        return bp.norm_squared();
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (ap - v * ab).norm_squared();
    }
    let cp = p - c;
    let (d5, d6) = (ab.dot(&cp), ac.dot(&cp));
    if d6 >= 0.0 && d5 <= d6 {
        return cp.norm_squared();
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (ap - w * ac).norm_squared();
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (bp - w * (c - b)).norm_squared();
    }
    let denom = va + vb + vc;
    if denom == 0.0 {
        // Degenerate triangle: its closest point lies on an edge.
        return [(a, b), (b, c), (c, a)]
            .iter()
            .map(|(s, t)| segment_distance_sq(p, s, t))
            .fold(f64::INFINITY, f64::min);
    }
    let (v, w) = (vb / denom, vc / denom);
    (ap - v * ab - w * ac).norm_squared()
}

fn segment_distance_sq(p: &Point3, a: &Point3, b: &Point3) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 { ((p - a).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (p - (a + t * ab)).norm_squared()
}

/// Exhaustive minimum over all faces.
pub fn brute_force_distance(p: &Point3, mesh: &Mesh) -> Result<f64, MetricsError> {
    if mesh.faces.is_empty() {
        return Err(MetricsError::EmptyMesh);
    }
    Ok((0..mesh.faces.len())
        .map(|f| {
            let [a, b, c] = mesh.triangle(f);
            point_triangle_distance_sq(p, &a, &b, &c)
        })
        .fold(f64::INFINITY, f64::min)
        .sqrt())
}

#[derive(Clone, Copy, Debug)]
struct Aabb {
    lo: Point3,
    hi: Point3,
}

impl Aabb {
    fn empty() -> Self {
        Aabb {
            lo: Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            hi: Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: &Point3) {
        self.lo = self.lo.inf(p);
        self.hi = self.hi.sup(p);
    }

    fn merge(&mut self, o: &Aabb) {
        self.lo = self.lo.inf(&o.lo);
        self.hi = self.hi.sup(&o.hi);
    }

    /// Lower bound on the squared distance from `p` to anything inside.
    fn distance_sq(&self, p: &Point3) -> f64 {
        let d = Vector3::new(
            (self.lo.x - p.x).max(0.0).max(p.x - self.hi.x),
            (self.lo.y - p.y).max(0.0).max(p.y - self.hi.y),
            (self.lo.z - p.z).max(0.0).max(p.z - self.hi.z),
        );
        d.norm_squared()
    }
}

enum Node {
    Leaf { bounds: Aabb, start: usize, end: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

const LEAF_SIZE: usize = 4;

/// Bounding-volume hierarchy over a mesh's triangles. Queries prune only
/// boxes whose lower bound exceeds the best distance found, so results equal
/// the exhaustive minimum.
pub struct MeshIndex {
    tris: Vec<[Point3; 3]>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl MeshIndex {
    pub fn new(mesh: &Mesh) -> Result<Self, MetricsError> {
        if mesh.faces.is_empty() {
            return Err(MetricsError::EmptyMesh);
        }
        let tris: Vec<[Point3; 3]> = (0..mesh.faces.len()).map(|f| mesh.triangle(f)).collect();
        let centroids: Vec<Point3> = tris
            .iter()
            .map(|t| Point3::from((t[0].coords + t[1].coords + t[2].coords) / 3.0))
            .collect();
        let mut idx = MeshIndex {
            order: (0..tris.len()).collect(),
            tris,
            nodes: Vec::new(),
        };
        let n = idx.order.len();
        idx.build(&centroids, 0, n);
        Ok(idx)
    }

    fn build(&mut self, centroids: &[Point3], start: usize, end: usize) -> usize {
        let mut bounds = Aabb::empty();
        for &t in &self.order[start..end] {
            for p in &self.tris[t] {
                bounds.grow(p);
            }
        }
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { bounds, start, end });
            return id;
        }
        let mut cb = Aabb::empty();
        for &t in &self.order[start..end] {
            cb.grow(&centroids[t]);
        }
        let ext = cb.hi - cb.lo;
        let axis = if ext.x >= ext.y && ext.x >= ext.z { 0 } else if ext.y >= ext.z { 1 } else { 2 };
        let mid = (start + end) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b))
        });
        // Placeholder, replaced once both children exist.
        self.nodes.push(Node::Leaf { bounds, start, end });
        let left = self.build(centroids, start, mid);
        let right = self.build(centroids, mid, end);
        let mut merged = *self.nodes[left].bounds();
        merged.merge(self.nodes[right].bounds());
        self.nodes[id] = Node::Inner {
            bounds: merged,
            left,
            right,
        };
        id
    }

    pub fn triangle_count(&self) -> usize {
        self.tris.len()
    }

    pub fn distance(&self, p: &Point3) -> f64 {
        let mut best = f64::INFINITY;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            match &self.nodes[n] {
                Node::Leaf { bounds, start, end } => {
                    if bounds.distance_sq(p) > best {
                        continue;
                    }
                    for &t in &self.order[*start..*end] {
                        let [a, b, c] = &self.tris[t];
                        best = best.min(point_triangle_distance_sq(p, a, b, c));
                    }
                }
                Node::Inner { bounds, left, right } => {
                    if bounds.distance_sq(p) > best {
                        continue;
                    }
                    let (dl, dr) = (self.nodes[*left].bounds().distance_sq(p), self.nodes[*right].bounds().distance_sq(p));
                    // Visit the nearer child first (pushed last).
                    if dl <= dr {
                        stack.push(*right);
                        stack.push(*left);
                    } else {
                        stack.push(*left);
                        stack.push(*right);
                    }
                }
            }
        }
        best.sqrt()
    }
}

/// f(x) = min over the mesh surface of |x − x'|.
pub fn unsigned_distance(p: &Point3, mesh: &Mesh) -> Result<f64, MetricsError> {
    Ok(MeshIndex::new(mesh)?.distance(p))
}

/// Count, mean and sum of squared deviations, mergeable across groups.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Stats {
    pub count: usize,
    pub mean: f64,
    #[serde(skip)]
    m2: f64,
}

impl Stats {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Stats::default();
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let m2 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        Stats { count: n, mean, m2 }
    }

    pub fn merge(&mut self, o: &Stats) {
        if o.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *o;
            return;
        }
        let n = (self.count + o.count) as f64;
        let delta = o.mean - self.mean;
        self.m2 += o.m2 + delta * delta * self.count as f64 * o.count as f64 / n;
        self.mean += delta * o.count as f64 / n;
        self.count += o.count;
    }

    /// Population standard deviation.
    pub fn std(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.m2 / self.count as f64).max(0.0).sqrt()
        }
    }
}

/// Average and spread in metres.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct DistanceRow {
    pub count: usize,
    pub avg: f64,
    pub std: f64,
}

impl From<&Stats> for DistanceRow {
    fn from(s: &Stats) -> Self {
        DistanceRow {
            count: s.count,
            avg: s.mean,
            std: s.std(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InstanceDistance {
    pub semantic: Semantic,
    pub instance_id: usize,
    #[serde(flatten)]
    pub row: DistanceRow,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct DistanceReport {
    pub per_asset: BTreeMap<Semantic, DistanceRow>,
    /// Points of all assets in a hyper-asset pooled together.
    pub per_hyper_asset: BTreeMap<HyperAsset, DistanceRow>,
    /// Unweighted mean of the asset columns, as in the Mean column of the
    /// accuracy table. `count` is the total number of points.
    pub overall: DistanceRow,
    pub instances: Vec<InstanceDistance>,
    /// Instances without a mesh, left out of every average.
    pub excluded: Vec<(Semantic, usize)>,
}

/// Ground-truth points of one instance and the mesh built for it.
pub struct EvalInput<'a> {
    pub semantic: Semantic,
    pub instance_id: usize,
    pub points: &'a [Point3],
    pub mesh: Option<&'a Mesh>,
}

/// Distance of every ground-truth point to its own instance's mesh.
pub fn evaluate(inputs: &[EvalInput]) -> DistanceReport {
    let per_instance: Vec<Option<Stats>> = inputs
        .par_iter()
        .map(|inp| {
            let index = MeshIndex::new(inp.mesh?).ok()?;
            let d: Vec<f64> = inp.points.par_iter().map(|p| index.distance(p)).collect();
            Some(Stats::from_values(&d))
        })
        .collect();
    let mut report = DistanceReport::default();
    let mut assets: BTreeMap<Semantic, Stats> = BTreeMap::new();
    let mut hyper: BTreeMap<HyperAsset, Stats> = BTreeMap::new();
    for (inp, stats) in inputs.iter().zip(&per_instance) {
        match stats {
            Some(s) => {
                assets.entry(inp.semantic).or_default().merge(s);
                report.instances.push(InstanceDistance {
                    semantic: inp.semantic,
                    instance_id: inp.instance_id,
                    row: s.into(),
                });
            }
            None => {
                log::warn!("{} {} has no mesh; left out of the distance report", inp.semantic, inp.instance_id);
                report.excluded.push((inp.semantic, inp.instance_id));
            }
        }
    }
    for (sem, s) in &assets {
        hyper.entry(sem.hyper_asset()).or_default().merge(s);
        report.per_asset.insert(*sem, s.into());
    }
    report.per_hyper_asset = hyper.iter().map(|(h, s)| (*h, s.into())).collect();
    let k = report.per_asset.len().max(1) as f64;
    report.overall = DistanceRow {
        count: report.per_asset.values().map(|r| r.count).sum(),
        avg: report.per_asset.values().map(|r| r.avg).sum::<f64>() / k,
        std: report.per_asset.values().map(|r| r.std).sum::<f64>() / k,
    };
    report
}

impl DistanceReport {
    /// Asset columns plus Mean, rows Avg and Std, in centimetres.
    pub fn to_table(&self) -> String {
        let mut s = format!("{:<6}", "(cm)");
        for sem in self.per_asset.keys() {
            let _ = write!(s, " {:>12}", sem.name());
        }
        let _ = writeln!(s, " {:>12}", "Mean");
        for (label, pick) in [("Avg", 0), ("Std", 1)] {
            let _ = write!(s, "{label:<6}");
            let val = |r: &DistanceRow| 100.0 * if pick == 0 { r.avg } else { r.std };
            for r in self.per_asset.values() {
                let _ = write!(s, " {:>12.2}", val(r));
            }
            let _ = writeln!(s, " {:>12.2}", val(&self.overall));
        }
        if !self.excluded.is_empty() {
            let _ = writeln!(s, "excluded instances without a mesh: {}", self.excluded.len());
        }
        s
    }

    /// Machine-readable twin of [`DistanceReport::to_table`].
    pub fn to_json(&self) -> serde_json::Value {
        let cm = |r: &DistanceRow| serde_json::json!({"Avg": 100.0 * r.avg, "Std": 100.0 * r.std, "Count": r.count});
        let mut assets = serde_json::Map::new();
        for (sem, r) in &self.per_asset {
            assets.insert(sem.name().into(), cm(r));
        }
        serde_json::json!({
            "Units": "cm",
            "Assets": assets,
            "Mean": cm(&self.overall),
            "Instances": self.instances.iter().map(|i| serde_json::json!({
                "Semantic": i.semantic.name(),
                "InstanceId": i.instance_id,
                "Avg": 100.0 * i.row.avg,
                "Std": 100.0 * i.row.std,
                "Count": i.row.count,
            })).collect::<Vec<_>>(),
            "Excluded": self.excluded.iter().map(|(s, i)| serde_json::json!({"Semantic": s.name(), "InstanceId": i})).collect::<Vec<_>>(),
        })
    }
}

/// Wall-clock seconds for one asset type.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct StageTimes {
    pub extract: f64,
    pub mesh: f64,
}

impl StageTimes {
    pub fn total(&self) -> f64 {
        self.extract + self.mesh
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimingReport {
    pub per_asset: BTreeMap<Semantic, StageTimes>,
    /// Wall-clock time of the whole run, including clustering and I/O.
    pub pipeline: f64,
}

impl Default for TimingReport {
    fn default() -> Self {
        TimingReport {
            per_asset: Semantic::ALL.iter().map(|&s| (s, StageTimes::default())).collect(),
            pipeline: 0.0,
        }
    }
}

impl TimingReport {
    pub fn add(&mut self, semantic: Semantic, extract: f64, mesh: f64) {
        let row = self.per_asset.entry(semantic).or_default();
        row.extract += extract;
        row.mesh += mesh;
    }

    pub fn totals(&self) -> StageTimes {
        self.per_asset.values().fold(StageTimes::default(), |a, r| StageTimes {
            extract: a.extract + r.extract,
            mesh: a.mesh + r.mesh,
        })
    }

    pub fn to_table(&self) -> String {
        let mut s = format!("{:<12} {:>12} {:>12} {:>12}\n", "Asset", "Extract (s)", "Mesh (s)", "Total (s)");
        let mut line = |name: &str, r: &StageTimes| {
            let _ = writeln!(s, "{:<12} {:>12.3} {:>12.3} {:>12.3}", name, r.extract, r.mesh, r.total());
        };
        for (sem, r) in &self.per_asset {
            line(sem.name(), r);
        }
        line("Total", &self.totals());
        let _ = writeln!(s, "{:<12} {:>38.3}", "Pipeline", self.pipeline);
        s
    }

    pub fn to_json(&self) -> serde_json::Value {
        let row = |r: &StageTimes| serde_json::json!({"Extract": r.extract, "Mesh": r.mesh, "Total": r.total()});
        let mut assets = serde_json::Map::new();
        for (sem, r) in &self.per_asset {
            assets.insert(sem.name().into(), row(r));
        }
        serde_json::json!({"Units": "s", "Assets": assets, "Total": row(&self.totals()), "Pipeline": self.pipeline})
    }
}
