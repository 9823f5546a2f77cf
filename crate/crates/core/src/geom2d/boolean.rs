//! Polygon Boolean operations backed by `geo`.

use super::{dedup_ring, Polygon2};
use crate::types::Point2;
use geo::BooleanOps;

/// Vertices closer than this are merged when reading results back.
const SNAP: f64 = 1e-9;

/// Areas below this are treated as slivers and dropped.
const MIN_AREA: f64 = 1e-12;

pub fn to_geo(p: &Polygon2) -> geo::Polygon<f64> {
    let ring = |r: &Vec<Point2>| geo::LineString::from(r.iter().map(|q| (q.x, q.y)).collect::<Vec<_>>());
    geo::Polygon::new(ring(&p.shell), p.holes.iter().map(ring).collect())
}

pub fn from_geo(mp: &geo::MultiPolygon<f64>) -> Vec<Polygon2> {
    let ring = |ls: &geo::LineString<f64>| {
        let mut r: Vec<Point2> = ls.0.iter().map(|c| Point2::new(c.x, c.y)).collect();
        dedup_ring(&mut r, SNAP);
        r
    };
    mp.0.iter()
        .filter_map(|g| {
            let shell = ring(g.exterior());
            if shell.len() < 3 {
                return None;
            }
            let holes = g.interiors().iter().map(ring).filter(|h| h.len() >= 3).collect();
            let p = Polygon2::new(shell, holes).normalized();
            (p.area() > MIN_AREA).then_some(p)
        })
        .collect()
}

/// `a ∩ b` as a list of valid polygons, empty when disjoint.
pub fn intersect(a: &Polygon2, b: &Polygon2) -> Vec<Polygon2> {
    from_geo(&to_geo(a).intersection(&to_geo(b)))
}

/// Intersection of a polygon set with one polygon.
pub fn intersect_all(a: &[Polygon2], b: &Polygon2) -> Vec<Polygon2> {
    if a.is_empty() {
        return Vec::new();
    }
    let ma = geo::MultiPolygon::new(a.iter().map(to_geo).collect());
    from_geo(&ma.intersection(&to_geo(b)))
}

pub fn difference(a: &Polygon2, b: &Polygon2) -> Vec<Polygon2> {
    from_geo(&to_geo(a).difference(&to_geo(b)))
}
