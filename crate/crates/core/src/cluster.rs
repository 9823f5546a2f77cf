//! DBSCAN instance segmentation on a uniform grid.
//!
//! Cells have a diagonal just under `eps`, so any two points sharing a cell
//! are neighbors. That lets dense cells mark all their points core at once and
//! merge their cores without distance checks; only cores in different cells
//! need an explicit test.

use crate::ingest::{IngestError, LabeledCloud};
use crate::spatial::dist2;
use crate::types::{Part, Point3, Semantic};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("invalid cluster parameters: {0}")]
    InvalidParams(String),
    #[error("no cluster parameters for semantic {0}")]
    MissingParams(Semantic),
    #[error("pole-like instance has points without a part label")]
    UnlabeledParts,
    #[error("pole-like instance has no Pole part")]
    NoPole,
    #[error("cannot cluster an empty point set")]
    Empty,
    #[error(transparent)]
    Io(#[from] IngestError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterParams {
    pub eps: f64,
    pub min_pts: usize,
}

impl ClusterParams {
    pub fn new(eps: f64, min_pts: usize) -> Self {
        Self { eps, min_pts }
    }

    pub fn validate(&self) -> Result<(), ClusterError> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(ClusterError::InvalidParams(format!("eps must be > 0, got {}", self.eps)));
        }
        if self.min_pts < 1 {
            return Err(ClusterError::InvalidParams("min_pts must be >= 1".into()));
        }
        Ok(())
    }

    pub fn default_for(semantic: Semantic) -> Self {
        match semantic {
            Semantic::RoadSurface | Semantic::RoadSide => Self::new(1.0, 10),
            Semantic::RoadLane => Self::new(0.3, 6),
            Semantic::RoadSign | Semantic::RoadLight | Semantic::Guardrail => Self::new(0.5, 10),
        }
    }

    pub fn default_part() -> Self {
        Self::new(0.15, 5)
    }
}

/// Per-semantic instance parameters plus the part-level parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterConfig {
    pub semantic: BTreeMap<Semantic, ClusterParams>,
    pub part: ClusterParams,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            semantic: Semantic::ALL
                .iter()
                .map(|&s| (s, ClusterParams::default_for(s)))
                .collect(),
            part: ClusterParams::default_part(),
        }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<(), ClusterError> {
        for p in self.semantic.values() {
            p.validate()?;
        }
        self.part.validate()
    }
}

/// DBSCAN output. `assignments[i]` is `None` for noise.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Clustering {
    pub assignments: Vec<Option<usize>>,
    pub core: Vec<bool>,
    pub cluster_count: usize,
}

impl Clustering {
    pub fn noise_count(&self) -> usize {
        self.assignments.iter().filter(|a| a.is_none()).count()
    }

    /// Point indices per cluster, each list ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.cluster_count];
        for (i, a) in self.assignments.iter().enumerate() {
            if let Some(c) = a {
                out[*c].push(i);
            }
        }
        out
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Smaller root wins so roots stay stable across runs.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

struct CellGrid {
    /// Point indices sorted by cell.
    order: Vec<usize>,
    /// Per cell: key and range into `order`.
    cells: Vec<([i64; 3], usize, usize)>,
    lookup: HashMap<[i64; 3], usize>,
    offsets: Vec<[i64; 3]>,
}

impl CellGrid {
    fn new(points: &[Point3], eps: f64) -> Self {
        let cell = eps / 3f64.sqrt() * (1.0 - 1e-6);
        let key = |p: &Point3| {
            [
                (p.x / cell).floor() as i64,
                (p.y / cell).floor() as i64,
                (p.z / cell).floor() as i64,
            ]
        };
        let mut keyed: Vec<([i64; 3], usize)> = points.iter().enumerate().map(|(i, p)| (key(p), i)).collect();
        keyed.sort_unstable();
        let mut cells = Vec::new();
        let mut start = 0;
        while start < keyed.len() {
            let k = keyed[start].0;
            let mut end = start + 1;
            while end < keyed.len() && keyed[end].0 == k {
                end += 1;
            }
            cells.push((k, start, end));
            start = end;
        }
        let lookup = cells.iter().enumerate().map(|(ci, c)| (c.0, ci)).collect();
        let span = (eps / cell).ceil() as i64;
        let mut offsets = Vec::new();
        for dx in -span..=span {
            for dy in -span..=span {
                for dz in -span..=span {
                    let gap = |o: i64| ((o.abs() - 1).max(0) as f64) * cell;
                    let min_d2 = gap(dx).powi(2) + gap(dy).powi(2) + gap(dz).powi(2);
                    if (dx, dy, dz) != (0, 0, 0) && min_d2 <= eps * eps {
                        offsets.push([dx, dy, dz]);
                    }
                }
            }
        }
        Self {
            order: keyed.into_iter().map(|(_, i)| i).collect(),
            cells,
            lookup,
            offsets,
        }
    }

    fn members(&self, ci: usize) -> &[usize] {
        let (_, s, e) = self.cells[ci];
        &self.order[s..e]
    }

    fn neighbors(&self, ci: usize) -> impl Iterator<Item = usize> + '_ {
        let k = self.cells[ci].0;
        self.offsets
            .iter()
            .filter_map(move |o| self.lookup.get(&[k[0] + o[0], k[1] + o[1], k[2] + o[2]]).copied())
    }
}

#[inline]
fn d2(a: &Point3, b: &Point3) -> f64 {
    dist2(&[a.x, a.y, a.z], &[b.x, b.y, b.z])
}

pub fn dbscan(points: &[Point3], params: &ClusterParams) -> Result<Clustering, ClusterError> {
    params.validate()?;
    if points.is_empty() {
        return Err(ClusterError::Empty);
    }
    let n = points.len();
    let eps2 = params.eps * params.eps;
    let grid = CellGrid::new(points, params.eps);
    let ncells = grid.cells.len();

    // Core flags, per cell.
    let core_lists: Vec<Vec<usize>> = (0..ncells)
        .into_par_iter()
        .map(|ci| {
            let own = grid.members(ci);
            if own.len() >= params.min_pts {
                return own.to_vec();
            }
            own.iter()
                .copied()
                .filter(|&i| {
                    let mut count = own.len();
                    for cj in grid.neighbors(ci) {
                        for &j in grid.members(cj) {
                            if d2(&points[i], &points[j]) <= eps2 {
                                count += 1;
                                if count >= params.min_pts {
                                    return true;
                                }
                            }
                        }
                    }
                    count >= params.min_pts
                })
                .collect()
        })
        .collect();
    let mut core = vec![false; n];
    for list in &core_lists {
        for &i in list {
            core[i] = true;
        }
    }

    // Cells with cores are linked when any two of their cores are neighbors.
    let links: Vec<(usize, usize)> = (0..ncells)
        .into_par_iter()
        .flat_map_iter(|ci| {
            let mine = &core_lists[ci];
            let mut out = Vec::new();
            if mine.is_empty() {
                return out;
            }
            for cj in grid.neighbors(ci) {
                if cj <= ci || core_lists[cj].is_empty() {
                    continue;
                }
                let theirs = &core_lists[cj];
                let linked = mine
                    .iter()
                    .any(|&a| theirs.iter().any(|&b| d2(&points[a], &points[b]) <= eps2));
                if linked {
                    out.push((ci, cj));
                }
            }
            out
        })
        .collect();
    let mut uf = UnionFind::new(ncells);
    for (a, b) in links {
        uf.union(a, b);
    }

    // Cluster ids follow the smallest core index of each component.
    let mut root_min: BTreeMap<usize, usize> = BTreeMap::new();
    for (ci, list) in core_lists.iter().enumerate() {
        if let Some(&m) = list.iter().min() {
            let r = uf.find(ci);
            let e = root_min.entry(r).or_insert(m);
            *e = (*e).min(m);
        }
    }
    let mut by_min: Vec<(usize, usize)> = root_min.into_iter().map(|(r, m)| (m, r)).collect();
    by_min.sort_unstable();
    let root_id: HashMap<usize, usize> = by_min.iter().enumerate().map(|(id, &(_, r))| (r, id)).collect();
    let cell_cluster: Vec<Option<usize>> = (0..ncells)
        .map(|ci| {
            if core_lists[ci].is_empty() {
                None
            } else {
                Some(root_id[&uf.find(ci)])
            }
        })
        .collect();

    let mut assignments = vec![None; n];
    for ci in 0..ncells {
        for &i in &core_lists[ci] {
            assignments[i] = cell_cluster[ci];
        }
    }

    // Border points join the cluster of their nearest core.
    let cell_of_point = {
        let mut v = vec![0usize; n];
        for ci in 0..ncells {
            for &i in grid.members(ci) {
                v[i] = ci;
            }
        }
        v
    };
    let border: Vec<(usize, Option<usize>)> = (0..n)
        .into_par_iter()
        .filter(|&i| !core[i])
        .map(|i| {
            let ci = cell_of_point[i];
            let mut best: Option<(f64, usize)> = None;
            for cj in std::iter::once(ci).chain(grid.neighbors(ci)) {
                let Some(cid) = cell_cluster[cj] else { continue };
                for &j in &core_lists[cj] {
                    let d = d2(&points[i], &points[j]);
                    if d <= eps2 {
                        let better = match best {
                            None => true,
                            Some((bd, bc)) => d < bd || (d == bd && cid < bc),
                        };
                        if better {
                            best = Some((d, cid));
                        }
                    }
                }
            }
            (i, best.map(|(_, c)| c))
        })
        .collect();
    for (i, c) in border {
        assignments[i] = c;
    }

    Ok(Clustering {
        assignments,
        core,
        cluster_count: by_min.len(),
    })
}

/// One spatially independent instance of a single semantic class.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub semantic: Semantic,
    pub cloud: LabeledCloud,
    /// Indices of the instance points in the cloud passed to `split_instances`.
    pub source: Vec<usize>,
}

impl Instance {
    fn sort_key(&self) -> (u8, f64, f64) {
        let (lo, _) = self.cloud.bounds().expect("instances are non-empty");
        (self.semantic.code(), lo.x, lo.y)
    }
}

/// Clusters every semantic class separately. Noise is dropped; instances come
/// back ordered by (semantic code, min x, min y).
pub fn split_instances(
    cloud: &LabeledCloud,
    params: &BTreeMap<Semantic, ClusterParams>,
) -> Result<Vec<Instance>, ClusterError> {
    if cloud.is_empty() {
        return Err(ClusterError::Empty);
    }
    let mut by_sem: BTreeMap<Semantic, Vec<usize>> = BTreeMap::new();
    for (i, s) in cloud.semantic.iter().enumerate() {
        by_sem.entry(*s).or_default().push(i);
    }
    for s in by_sem.keys() {
        params.get(s).ok_or(ClusterError::MissingParams(*s))?.validate()?;
    }
    let groups: Vec<(Semantic, Vec<usize>)> = by_sem.into_iter().collect();
    let per_sem: Vec<Vec<Instance>> = groups
        .par_iter()
        .map(|(sem, idx)| {
            let pts: Vec<Point3> = idx.iter().map(|&i| cloud.points[i]).collect();
            let clustering = dbscan(&pts, &params[sem])?;
            Ok(clustering
                .members()
                .into_iter()
                .map(|m| {
                    let source: Vec<usize> = m.iter().map(|&k| idx[k]).collect();
                    Instance {
                        semantic: *sem,
                        cloud: cloud.subset(&source),
                        source,
                    }
                })
                .collect())
        })
        .collect::<Result<_, ClusterError>>()?;
    let mut out: Vec<Instance> = per_sem.into_iter().flatten().collect();
    out.sort_by(|a, b| {
        let (ka, kb) = (a.sort_key(), b.sort_key());
        ka.0.cmp(&kb.0)
            .then(ka.1.total_cmp(&kb.1))
            .then(ka.2.total_cmp(&kb.2))
            .then(a.source[0].cmp(&b.source[0]))
    });
    Ok(out)
}

/// Splits a pole-like instance into individual parts per part label. Parts
/// of one label are ordered by (min x, min y).
pub fn split_parts(
    instance: &LabeledCloud,
    params: &ClusterParams,
) -> Result<BTreeMap<Part, Vec<LabeledCloud>>, ClusterError> {
    if instance.is_empty() {
        return Err(ClusterError::Empty);
    }
    let mut by_part: BTreeMap<Part, Vec<usize>> = BTreeMap::new();
    for (i, p) in instance.part.iter().enumerate() {
        by_part.entry(p.ok_or(ClusterError::UnlabeledParts)?).or_default().push(i);
    }
    let mut out = BTreeMap::new();
    for (part, idx) in by_part {
        let pts: Vec<Point3> = idx.iter().map(|&i| instance.points[i]).collect();
        let clustering = dbscan(&pts, params)?;
        let mut clouds: Vec<LabeledCloud> = clustering
            .members()
            .into_iter()
            .map(|m| instance.subset(&m.iter().map(|&k| idx[k]).collect::<Vec<_>>()))
            .collect();
        clouds.sort_by(|a, b| {
            let (la, _) = a.bounds().expect("non-empty");
            let (lb, _) = b.bounds().expect("non-empty");
            la.x.total_cmp(&lb.x).then(la.y.total_cmp(&lb.y)).then(la.z.total_cmp(&lb.z))
        });
        if !clouds.is_empty() {
            out.insert(part, clouds);
        }
    }
    if out.get(&Part::Pole).map_or(true, Vec::is_empty) {
        return Err(ClusterError::NoPole);
    }
    Ok(out)
}

/// Debug dump: `<semantic>_<index>.csv` per instance, index counted per class.
pub fn dump_instances(dir: &Path, instances: &[Instance]) -> Result<Vec<std::path::PathBuf>, ClusterError> {
    std::fs::create_dir_all(dir).map_err(IngestError::from)?;
    let mut counters: BTreeMap<Semantic, usize> = BTreeMap::new();
    let mut paths = Vec::with_capacity(instances.len());
    for inst in instances {
        let k = counters.entry(inst.semantic).or_insert(0);
        let path = dir.join(format!("{}_{}.csv", inst.semantic.name(), k));
        *k += 1;
        inst.cloud.save_csv(&path)?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// O(n^2) reference: neighbor lists, core set, components over
    /// core-core edges, borders to the nearest core (lowest id on ties).
    fn oracle(points: &[Point3], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
        let n = points.len();
        let eps2 = eps * eps;
        let nbrs: Vec<Vec<usize>> = (0..n)
            .map(|i| (0..n).filter(|&j| d2(&points[i], &points[j]) <= eps2).collect())
            .collect();
        let core: Vec<bool> = nbrs.iter().map(|v| v.len() >= min_pts).collect();
        let mut label = vec![None; n];
        let mut next = 0;
        for s in 0..n {
            if !core[s] || label[s].is_some() {
                continue;
            }
            let mut stack = vec![s];
            label[s] = Some(next);
            while let Some(i) = stack.pop() {
                for &j in &nbrs[i] {
                    if core[j] && label[j].is_none() {
                        label[j] = Some(next);
                        stack.push(j);
                    }
                }
            }
            next += 1;
        }
        let mut out = label.clone();
        for i in 0..n {
            if core[i] {
                continue;
            }
            out[i] = nbrs[i]
                .iter()
                .filter(|&&j| core[j])
                .map(|&j| (d2(&points[i], &points[j]), label[j].unwrap()))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .map(|(_, c)| c);
        }
        out
    }

    fn random_set(rng: &mut ChaCha8Rng) -> (Vec<Point3>, f64, usize) {
        let n = rng.gen_range(1..=200);
        let centers: Vec<Point3> = (0..rng.gen_range(1..5))
            .map(|_| Point3::new(rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0), rng.gen_range(0.0..2.0)))
            .collect();
        let pts = (0..n)
            .map(|_| {
                let c = centers[rng.gen_range(0..centers.len())];
                c + nalgebra::Vector3::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5), rng.gen_range(-0.5..0.5))
            })
            .collect();
        (pts, rng.gen_range(0.1..1.2), rng.gen_range(1..12))
    }

    #[test]
    fn matches_oracle_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..150 {
            let (pts, eps, min_pts) = random_set(&mut rng);
            let got = dbscan(&pts, &ClusterParams::new(eps, min_pts)).unwrap();
            assert_eq!(got.assignments, oracle(&pts, eps, min_pts));
        }
    }

    #[test]
    fn two_blobs_far_apart() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut pts = Vec::new();
        for c in [0.0, 10.0] {
            for _ in 0..10 {
                pts.push(Point3::new(c + rng.gen_range(0.0..0.2), rng.gen_range(0.0..0.2), 0.0));
            }
        }
        let c = dbscan(&pts, &ClusterParams::new(0.5, 4)).unwrap();
        assert_eq!(c.cluster_count, 2);
        assert_eq!(c.noise_count(), 0);
    }

    #[test]
    fn isolated_point_is_noise() {
        let c = dbscan(&[Point3::origin()], &ClusterParams::new(1.0, 2)).unwrap();
        assert_eq!(c.assignments, vec![None]);
        assert_eq!(c.cluster_count, 0);
    }

    #[test]
    fn clique_is_one_cluster() {
        let pts: Vec<Point3> = (0..7).map(|i| Point3::new(i as f64 * 0.01, 0.0, 0.0)).collect();
        let c = dbscan(&pts, &ClusterParams::new(0.1, 7)).unwrap();
        assert_eq!(c.cluster_count, 1);
        assert!(c.assignments.iter().all(|a| *a == Some(0)));
    }

    #[test]
    fn closed_ball_counts_boundary_neighbors() {
        let pts = vec![Point3::origin(), Point3::new(0.5, 0.0, 0.0)];
        let c = dbscan(&pts, &ClusterParams::new(0.5, 2)).unwrap();
        assert_eq!(c.cluster_count, 1);
    }

    fn blob(center: Point3, n: usize, spread: f64, rng: &mut ChaCha8Rng) -> Vec<Point3> {
        (0..n)
            .map(|_| {
                center
                    + nalgebra::Vector3::new(
                        rng.gen_range(-spread..spread),
                        rng.gen_range(-spread..spread),
                        rng.gen_range(-spread..spread),
                    )
            })
            .collect()
    }

    #[test]
    fn instances_per_semantic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut cloud = LabeledCloud::default();
        for x in [0.0, 5.0] {
            for p in blob(Point3::new(x, 0.0, 0.0), 30, 0.1, &mut rng) {
                cloud.push(p, Semantic::RoadLane, None);
            }
        }
        for k in 0..40 {
            cloud.push(Point3::new(2.0, 2.0, k as f64 * 0.05), Semantic::RoadSign, Some(Part::Pole));
        }
        let inst = split_instances(&cloud, &ClusterConfig::default().semantic).unwrap();
        let sems: Vec<Semantic> = inst.iter().map(|i| i.semantic).collect();
        assert_eq!(sems, vec![Semantic::RoadLane, Semantic::RoadLane, Semantic::RoadSign]);
        assert!(inst[0].cloud.bounds().unwrap().0.x < inst[1].cloud.bounds().unwrap().0.x);
        let total: usize = inst.iter().map(|i| i.cloud.len()).sum();
        assert_eq!(total, cloud.len());
    }

    #[test]
    fn tiny_eps_gives_no_instances() {
        let cloud = LabeledCloud::uniform(
            (0..20).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect(),
            Semantic::Guardrail,
        );
        let mut params = BTreeMap::new();
        params.insert(Semantic::Guardrail, ClusterParams::new(0.01, 2));
        assert!(split_instances(&cloud, &params).unwrap().is_empty());
        assert!(matches!(
            split_instances(&cloud, &BTreeMap::new()),
            Err(ClusterError::MissingParams(Semantic::Guardrail))
        ));
    }

    #[test]
    fn sign_parts() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut cloud = LabeledCloud::default();
        for k in 0..60 {
            cloud.push(Point3::new(0.0, 0.0, k as f64 * 0.04), Semantic::RoadSign, Some(Part::Pole));
        }
        for c in [Point3::new(1.0, 0.0, 2.0), Point3::new(-1.0, 0.0, 2.0)] {
            for p in blob(c, 20, 0.1, &mut rng) {
                cloud.push(p, Semantic::RoadSign, Some(Part::Panel));
            }
        }
        let parts = split_parts(&cloud, &ClusterParams::default_part()).unwrap();
        assert_eq!(parts[&Part::Pole].len(), 1);
        assert_eq!(parts[&Part::Panel].len(), 2);
        assert!(parts[&Part::Panel][0].points[0].x < 0.0);
    }

    #[test]
    fn parts_need_labels_and_a_pole() {
        let unlabeled = LabeledCloud::uniform(vec![Point3::origin(); 10], Semantic::RoadLight);
        assert!(matches!(
            split_parts(&unlabeled, &ClusterParams::default_part()),
            Err(ClusterError::UnlabeledParts)
        ));
        let mut no_pole = LabeledCloud::default();
        for _ in 0..10 {
            no_pole.push(Point3::origin(), Semantic::RoadLight, Some(Part::Light));
        }
        assert!(matches!(
            split_parts(&no_pole, &ClusterParams::default_part()),
            Err(ClusterError::NoPole)
        ));
    }

    proptest! {
        #[test]
        fn members_are_core_or_near_core(
            raw in prop::collection::vec((0.0f64..5.0, 0.0f64..5.0, 0.0f64..1.0), 1..120),
            eps in 0.2f64..1.0,
            min_pts in 1usize..8,
        ) {
            let pts: Vec<Point3> = raw.iter().map(|&(x, y, z)| Point3::new(x, y, z)).collect();
            let c = dbscan(&pts, &ClusterParams::new(eps, min_pts)).unwrap();
            for (i, a) in c.assignments.iter().enumerate() {
                if let Some(id) = a {
                    let near_core = (0..pts.len()).any(|j| {
                        c.core[j] && c.assignments[j] == Some(*id) && d2(&pts[i], &pts[j]) <= eps * eps
                    });
                    prop_assert!(c.core[i] || near_core);
                }
            }
        }

        #[test]
        fn permutation_preserves_partition(
            raw in prop::collection::vec((0.0f64..5.0, 0.0f64..5.0), 1..100),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            let pts: Vec<Point3> = raw.iter().map(|&(x, y)| Point3::new(x, y, 0.0)).collect();
            let mut perm: Vec<usize> = (0..pts.len()).collect();
            perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let shuffled: Vec<Point3> = perm.iter().map(|&i| pts[i]).collect();
            let params = ClusterParams::new(0.6, 3);
            let a = dbscan(&pts, &params).unwrap();
            let b = dbscan(&shuffled, &params).unwrap();
            prop_assert_eq!(a.cluster_count, b.cluster_count);
            for x in 0..pts.len() {
                for y in 0..pts.len() {
                    // Core co-membership is order independent.
                    if a.core[perm[x]] && a.core[perm[y]] {
                        prop_assert_eq!(
                            a.assignments[perm[x]] == a.assignments[perm[y]],
                            b.assignments[x] == b.assignments[y]
                        );
                    }
                }
            }
        }
    }
}
