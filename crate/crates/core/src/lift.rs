//! Circle-K-neighbors lifting of 2D contour vertices back into 3D.
//!
//! A 2D vertex in a projection plane takes its missing coordinate from the
//! reference points around it: those within `radius` in the plane, or the
//! `k_nearest` closest when that disc is empty. V1 averages the neighborhood;
//! V2 averages its top and bottom `k` values into a front/back pair.

use crate::geom2d::Polygon2;
use crate::spatial::GridIndex;
use crate::types::{Plane, Point2, Point3, Polygon3, PolygonPair};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LiftError {
    #[error("no reference points to lift against")]
    NoReferences,
    #[error("invalid lift parameter: {0}")]
    InvalidParams(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LiftParams {
    /// Search radius in the projection plane (m).
    pub radius: f64,
    /// Neighbor count used when nothing lies within `radius`.
    pub k_nearest: usize,
    /// Fixed top/bottom count for V2. `None` picks `max(1, n / 5)`.
    pub pair_k: Option<usize>,
}

impl Default for LiftParams {
    fn default() -> Self {
        Self {
            radius: 0.15,
            k_nearest: 8,
            pair_k: None,
        }
    }
}

impl LiftParams {
    pub fn validate(&self) -> Result<(), LiftError> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(LiftError::InvalidParams(format!("radius must be > 0, got {}", self.radius)));
        }
        if self.k_nearest == 0 {
            return Err(LiftError::InvalidParams("k_nearest must be >= 1".into()));
        }
        if self.pair_k == Some(0) {
            return Err(LiftError::InvalidParams("pair_k must be >= 1".into()));
        }
        Ok(())
    }

    /// Top/bottom count for a neighborhood of `n` values, clamped so the two
    /// sets do not overlap whenever `n >= 2`.
    pub fn pair_count(&self, n: usize) -> usize {
        let k = self.pair_k.unwrap_or(n / 5).max(1);
        k.min((n / 2).max(1))
    }
}

/// Reference points indexed in one projection plane. Build once, query from
/// any number of threads.
#[derive(Clone, Debug)]
pub struct Lifter {
    plane: Plane,
    params: LiftParams,
    index: GridIndex<2>,
    values: Vec<f64>,
}

impl Lifter {
    pub fn new(refs: &[Point3], plane: Plane, params: LiftParams) -> Result<Self, LiftError> {
        params.validate()?;
        if refs.is_empty() {
            return Err(LiftError::NoReferences);
        }
        let uv = refs
            .iter()
            .map(|p| {
                let q = plane.project(p);
                [q.x, q.y]
            })
            .collect();
        Ok(Self {
            plane,
            params,
            index: GridIndex::new(uv, params.radius),
            values: refs.iter().map(|p| plane.missing(p)).collect(),
        })
    }

    pub fn plane(&self) -> Plane {
        self.plane
    }

    /// Missing-axis values of the neighborhood of `uv`, sorted ascending with
    /// ties broken by reference index.
    pub fn neighborhood(&self, uv: &Point2) -> Vec<f64> {
        let q = [uv.x, uv.y];
        let mut ids = self.index.within(&q, self.params.radius);
        if ids.is_empty() {
            ids = self.index.nearest(&q, self.params.k_nearest).into_iter().map(|(i, _)| i).collect();
        }
        let mut keyed: Vec<(f64, usize)> = ids.into_iter().map(|i| (self.values[i], i)).collect();
        keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        keyed.into_iter().map(|(v, _)| v).collect()
    }

    pub fn v1(&self, uv: &Point2) -> Point3 {
        let vals = self.neighborhood(uv);
        self.plane.compose(uv, mean(&vals))
    }

    /// Returns `(high, low)`.
    pub fn v2(&self, uv: &Point2) -> (Point3, Point3) {
        let vals = self.neighborhood(uv);
        let k = self.params.pair_count(vals.len());
        let hi = mean(&vals[vals.len() - k..]);
        let lo = mean(&vals[..k]);
        (self.plane.compose(uv, hi), self.plane.compose(uv, lo))
    }

    pub fn polygon_v1(&self, poly: &Polygon2) -> Polygon3 {
        let ring = |r: &Vec<Point2>| r.iter().map(|p| self.v1(p)).collect::<Vec<_>>();
        Polygon3::new(ring(&poly.shell), poly.holes.iter().map(ring).collect())
    }

    /// Front takes the high values, back the low ones.
    pub fn polygon_v2(&self, poly: &Polygon2) -> PolygonPair {
        let ring = |r: &Vec<Point2>| -> (Vec<Point3>, Vec<Point3>) { r.iter().map(|p| self.v2(p)).unzip() };
        let (front_shell, back_shell) = ring(&poly.shell);
        let (front_holes, back_holes) = poly.holes.iter().map(ring).unzip();
        PolygonPair {
            front: Polygon3::new(front_shell, front_holes),
            back: Polygon3::new(back_shell, back_holes),
        }
    }
}

fn mean(vals: &[f64]) -> f64 {
    vals.iter().sum::<f64>() / vals.len() as f64
}

pub fn lift_v1(uv: &Point2, refs: &[Point3], plane: Plane, params: LiftParams) -> Result<Point3, LiftError> {
    Ok(Lifter::new(refs, plane, params)?.v1(uv))
}

pub fn lift_v2(
    uv: &Point2,
    refs: &[Point3],
    plane: Plane,
    params: LiftParams,
) -> Result<(Point3, Point3), LiftError> {
    Ok(Lifter::new(refs, plane, params)?.v2(uv))
}

pub fn lift_polygon_v1(
    poly: &Polygon2,
    refs: &[Point3],
    plane: Plane,
    params: LiftParams,
) -> Result<Polygon3, LiftError> {
    Ok(Lifter::new(refs, plane, params)?.polygon_v1(poly))
}

pub fn lift_polygon_v2(
    poly: &Polygon2,
    refs: &[Point3],
    plane: Plane,
    params: LiftParams,
) -> Result<PolygonPair, LiftError> {
    Ok(Lifter::new(refs, plane, params)?.polygon_v2(poly))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{seq::SliceRandom, Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn params(radius: f64, k_nearest: usize) -> LiftParams {
        LiftParams {
            radius,
            k_nearest,
            pair_k: None,
        }
    }

    /// Linear scan: the closed disc, else the K nearest by (distance, index).
    fn oracle_neighborhood(uv: &Point2, refs: &[Point3], plane: Plane, p: &LiftParams) -> Vec<f64> {
        let d2 = |r: &Point3| (plane.project(r) - uv).norm_squared();
        let mut ids: Vec<usize> = (0..refs.len()).filter(|&i| d2(&refs[i]) <= p.radius * p.radius).collect();
        if ids.is_empty() {
            let mut all: Vec<usize> = (0..refs.len()).collect();
            all.sort_by(|&a, &b| d2(&refs[a]).total_cmp(&d2(&refs[b])).then(a.cmp(&b)));
            ids = all.into_iter().take(p.k_nearest).collect();
        }
        let mut vals: Vec<f64> = ids.iter().map(|&i| plane.missing(&refs[i])).collect();
        vals.sort_by(f64::total_cmp);
        vals
    }

    #[test]
    fn constant_field() {
        let refs: Vec<Point3> = (0..20).map(|i| Point3::new(0.01 * i as f64, 0.0, 5.0)).collect();
        let p = lift_v1(&Point2::new(0.1, 0.0), &refs, Plane::XY, LiftParams::default()).unwrap();
        assert_eq!(p, Point3::new(0.1, 0.0, 5.0));
    }

    #[test]
    fn knn_fallback() {
        let refs = vec![
            Point3::new(1.0, 0.0, 4.0),
            Point3::new(-1.0, 0.0, 6.0),
            Point3::new(10.0, 0.0, 100.0),
        ];
        let p = lift_v1(&Point2::origin(), &refs, Plane::XY, params(0.15, 2)).unwrap();
        assert_eq!(p.z, 5.0);
    }

    #[test]
    fn v2_extremes_and_degenerate_clamp() {
        let refs: Vec<Point3> = [0.0, 0.0, 1.0, 1.0].iter().map(|&z| Point3::new(0.0, 0.0, z)).collect();
        let p = LiftParams {
            pair_k: Some(1),
            ..LiftParams::default()
        };
        let (hi, lo) = lift_v2(&Point2::origin(), &refs, Plane::XY, p).unwrap();
        assert_eq!((hi.z, lo.z), (1.0, 0.0));
        let single = [Point3::new(0.0, 0.0, 3.0)];
        let (hi, lo) = lift_v2(&Point2::origin(), &single, Plane::XY, p).unwrap();
        assert_eq!((hi.z, lo.z), (3.0, 3.0));
    }

    #[test]
    fn pair_count_clamp() {
        let p = LiftParams::default();
        assert_eq!(p.pair_count(1), 1);
        assert_eq!(p.pair_count(4), 1);
        assert_eq!(p.pair_count(10), 2);
        assert_eq!(p.pair_count(100), 20);
        let fixed = LiftParams {
            pair_k: Some(7),
            ..p
        };
        assert_eq!(fixed.pair_count(6), 3);
        assert_eq!(fixed.pair_count(3), 1);
    }

    #[test]
    fn random_field_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for plane in [Plane::XY, Plane::XZ, Plane::YZ] {
            let refs: Vec<Point3> = (0..2000)
                .map(|_| Point3::new(rng.gen_range(0.0..4.0), rng.gen_range(0.0..4.0), rng.gen_range(0.0..4.0)))
                .collect();
            let p = params(0.1, 5);
            let lifter = Lifter::new(&refs, plane, p).unwrap();
            for _ in 0..300 {
                let uv = Point2::new(rng.gen_range(-1.0..5.0), rng.gen_range(-1.0..5.0));
                let vals = oracle_neighborhood(&uv, &refs, plane, &p);
                let expected = vals.iter().sum::<f64>() / vals.len() as f64;
                let got = lifter.v1(&uv);
                assert!((plane.missing(&got) - expected).abs() < 1e-12);
                assert_eq!(plane.project(&got), uv);
            }
        }
    }

    #[test]
    fn slab_thickness() {
        // Two faces 0.1 m apart in Y with surface noise; XZ projection.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 0.005).unwrap();
        let refs: Vec<Point3> = (0..4000)
            .map(|i| {
                let y = if i % 2 == 0 { 0.0 } else { 0.1 };
                Point3::new(rng.gen_range(0.0..2.0), y + noise.sample(&mut rng), rng.gen_range(0.0..1.0))
            })
            .collect();
        let lifter = Lifter::new(&refs, Plane::XZ, LiftParams::default()).unwrap();
        for k in 0..20 {
            let uv = Point2::new(0.2 + 0.08 * k as f64, 0.5);
            let (hi, lo) = lifter.v2(&uv);
            assert!(((hi.y - lo.y) - 0.1).abs() < 0.02, "{}", hi.y - lo.y);
        }
    }

    #[test]
    fn polygon_over_sloped_field() {
        // z = x: averaging over a disc of radius r stays within r of the truth.
        let mut refs = Vec::new();
        for i in 0..=60 {
            for j in 0..=60 {
                let (x, y) = (-0.5 + 0.05 * i as f64, -0.5 + 0.05 * j as f64);
                refs.push(Point3::new(x, y, x));
            }
        }
        let square = Polygon2::rect(Point2::new(0.0, 0.0), Point2::new(2.0, 2.0));
        let p = LiftParams::default();
        let lifted = lift_polygon_v1(&square, &refs, Plane::XY, p).unwrap();
        assert_eq!(lifted.shell.len(), 4);
        for v in &lifted.shell {
            assert!((v.z - v.x).abs() <= p.radius);
        }
        let pair = lift_polygon_v2(&square, &refs, Plane::XY, p).unwrap();
        assert!(pair.is_consistent());
        for (f, b) in pair.front.shell.iter().zip(&pair.back.shell) {
            assert!(f.z >= b.z);
        }
    }

    #[test]
    fn empty_refs_and_bad_params() {
        assert_eq!(
            lift_v1(&Point2::origin(), &[], Plane::XY, LiftParams::default()).unwrap_err(),
            LiftError::NoReferences
        );
        assert!(params(0.0, 3).validate().is_err());
        assert!(params(0.1, 0).validate().is_err());
    }

    proptest! {
        #[test]
        fn order_independent_and_bounded(
            raw in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -3.0f64..3.0), 1..80),
            u in -1.5f64..1.5,
            v in -1.5f64..1.5,
            seed in any::<u64>(),
        ) {
            let refs: Vec<Point3> = raw.iter().map(|&(x, y, z)| Point3::new(x, y, z)).collect();
            let mut shuffled = refs.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let uv = Point2::new(u, v);
            let p = params(0.3, 4);
            let a = Lifter::new(&refs, Plane::XY, p).unwrap();
            let b = Lifter::new(&shuffled, Plane::XY, p).unwrap();
            prop_assert_eq!(a.v1(&uv), b.v1(&uv));
            prop_assert_eq!(a.v2(&uv), b.v2(&uv));
            let vals = a.neighborhood(&uv);
            let (hi, lo) = a.v2(&uv);
            let z = a.v1(&uv).z;
            let eps = 1e-12;
            prop_assert!(vals[0] <= lo.z + eps && lo.z <= z + eps && z <= hi.z + eps);
            prop_assert!(hi.z <= vals[vals.len() - 1] + eps);
        }
    }
}
