//! Uniform-grid point index with exact closed-ball and k-nearest queries.

use std::collections::HashMap;

/// Bucket grid over `D`-dimensional points. Queries are exact: the grid only
/// prunes candidates, every reported neighbor passes an explicit distance test.
#[derive(Clone, Debug)]
pub struct GridIndex<const D: usize> {
    cell: f64,
    points: Vec<[f64; D]>,
    order: Vec<u32>,
    cells: HashMap<[i64; D], (u32, u32)>,
    key_min: [i64; D],
    key_max: [i64; D],
}

impl<const D: usize> GridIndex<D> {
    pub fn new(points: Vec<[f64; D]>, cell: f64) -> Self {
        assert!(cell > 0.0 && cell.is_finite(), "grid cell size must be positive");
        let mut keyed: Vec<([i64; D], u32)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (key_of(p, cell), i as u32))
            .collect();
        keyed.sort_unstable();
        let mut cells = HashMap::with_capacity(keyed.len() / 4 + 1);
        let mut key_min = [i64::MAX; D];
        let mut key_max = [i64::MIN; D];
        let mut start = 0usize;
        while start < keyed.len() {
            let key = keyed[start].0;
            let mut end = start + 1;
            while end < keyed.len() && keyed[end].0 == key {
                end += 1;
            }
            cells.insert(key, (start as u32, end as u32));
            for d in 0..D {
                key_min[d] = key_min[d].min(key[d]);
                key_max[d] = key_max[d].max(key[d]);
            }
            start = end;
        }
        let order = keyed.into_iter().map(|(_, i)| i).collect();
        Self {
            cell,
            points,
            order,
            cells,
            key_min,
            key_max,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64; D] {
        &self.points[i]
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    /// Calls `f(index, squared_distance)` for every point with
    /// `dist(q, p) <= radius`.
    pub fn for_each_within(&self, q: &[f64; D], radius: f64, mut f: impl FnMut(usize, f64)) {
        if self.points.is_empty() {
            return;
        }
        let r2 = radius * radius;
        let lo = key_of(q, self.cell);
        let span = (radius / self.cell).ceil() as i64;
        let mut lo_k = [0i64; D];
        let mut hi_k = [0i64; D];
        for d in 0..D {
            lo_k[d] = (lo[d] - span).max(self.key_min[d]);
            hi_k[d] = (lo[d] + span).min(self.key_max[d]);
            if lo_k[d] > hi_k[d] {
                return;
            }
        }
        for_each_key(&lo_k, &hi_k, |key| {
            if let Some(&(s, e)) = self.cells.get(key) {
                for &i in &self.order[s as usize..e as usize] {
                    let d2 = dist2(q, &self.points[i as usize]);
                    if d2 <= r2 {
                        f(i as usize, d2);
                    }
                }
            }
        });
    }

    /// Indices of all points within `radius` of `q`, ascending.
    pub fn within(&self, q: &[f64; D], radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_within(q, radius, |i, _| out.push(i));
        out.sort_unstable();
        out
    }

    /// Counts neighbors within `radius`, stopping once `limit` is reached.
    pub fn count_within_capped(&self, q: &[f64; D], radius: f64, limit: usize) -> usize {
        let r2 = radius * radius;
        let center = key_of(q, self.cell);
        let span = (radius / self.cell).ceil() as i64;
        let mut count = 0usize;
        // Own cell first: it is the densest and usually settles the answer.
        if let Some(&(s, e)) = self.cells.get(&center) {
            for &i in &self.order[s as usize..e as usize] {
                if dist2(q, &self.points[i as usize]) <= r2 {
                    count += 1;
                    if count >= limit {
                        return count;
                    }
                }
            }
        }
        let mut lo_k = [0i64; D];
        let mut hi_k = [0i64; D];
        for d in 0..D {
            lo_k[d] = (center[d] - span).max(self.key_min[d]);
            hi_k[d] = (center[d] + span).min(self.key_max[d]);
        }
        let mut done = false;
        for_each_key(&lo_k, &hi_k, |key| {
            if done || *key == center {
                return;
            }
            if let Some(&(s, e)) = self.cells.get(key) {
                for &i in &self.order[s as usize..e as usize] {
                    if dist2(q, &self.points[i as usize]) <= r2 {
                        count += 1;
                        if count >= limit {
                            done = true;
                            return;
                        }
                    }
                }
            }
        });
        count
    }

    /// The `k` nearest points as `(index, squared_distance)`, ordered by
    /// distance then index. Returns fewer than `k` only if the index is smaller.
    pub fn nearest(&self, q: &[f64; D], k: usize) -> Vec<(usize, f64)> {
        if k == 0 || self.points.is_empty() {
            return Vec::new();
        }
        let center = key_of(q, self.cell);
        let mut best: Vec<(usize, f64)> = Vec::with_capacity(k + 1);
        let max_ring = (0..D)
            .map(|d| {
                (center[d] - self.key_min[d])
                    .abs()
                    .max((self.key_max[d] - center[d]).abs())
            })
            .max()
            .unwrap_or(0);
        let mut ring = 0i64;
        loop {
            self.visit_ring(&center, ring, |i| {
                let d2 = dist2(q, &self.points[i]);
                push_best(&mut best, k, i, d2);
            });
            // Unvisited points lie at least `ring * cell` away from q.
            let bound = ring as f64 * self.cell;
            if best.len() == k && best[k - 1].1 <= bound * bound {
                break;
            }
            if ring >= max_ring {
                break;
            }
            ring += 1;
        }
        best
    }

    fn visit_ring(&self, center: &[i64; D], ring: i64, mut f: impl FnMut(usize)) {
        let mut lo = [0i64; D];
        let mut hi = [0i64; D];
        for d in 0..D {
            lo[d] = (center[d] - ring).max(self.key_min[d]);
            hi[d] = (center[d] + ring).min(self.key_max[d]);
            if lo[d] > hi[d] {
                return;
            }
        }
        for_each_key(&lo, &hi, |key| {
            let on_ring = (0..D).any(|d| (key[d] - center[d]).abs() == ring);
            if !on_ring {
                return;
            }
            if let Some(&(s, e)) = self.cells.get(key) {
                for &i in &self.order[s as usize..e as usize] {
                    f(i as usize);
                }
            }
        });
    }
}

fn push_best(best: &mut Vec<(usize, f64)>, k: usize, i: usize, d2: f64) {
    let better = |a: &(usize, f64), b: &(usize, f64)| a.1 < b.1 || (a.1 == b.1 && a.0 < b.0);
    if best.len() == k && !better(&(i, d2), &best[k - 1]) {
        return;
    }
    let pos = best
        .iter()
        .position(|e| better(&(i, d2), e))
        .unwrap_or(best.len());
    best.insert(pos, (i, d2));
    best.truncate(k);
}

#[inline]
fn key_of<const D: usize>(p: &[f64; D], cell: f64) -> [i64; D] {
    p.map(|v| (v / cell).floor() as i64)
}

#[inline]
pub(crate) fn dist2<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    let mut s = 0.0;
    for d in 0..D {
        let t = a[d] - b[d];
        s += t * t;
    }
    s
}

fn for_each_key<const D: usize>(lo: &[i64; D], hi: &[i64; D], mut f: impl FnMut(&[i64; D])) {
    let mut key = *lo;
    loop {
        f(&key);
        let mut d = 0;
        loop {
            if d == D {
                return;
            }
            if key[d] < hi[d] {
                key[d] += 1;
                break;
            }
            key[d] = lo[d];
            d += 1;
        }
    }
}
