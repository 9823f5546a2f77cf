//! Per-instance geometry records: the structured sectional-polygon payload
//! produced by extraction, stored as JSON and turned into meshes.

use crate::types::{HyperAsset, MultiPolygon3, Polygon3, Semantic};
use indexmap::IndexMap;
use thiserror::Error;

/// Validation failure at a record path such as `Data/Guardrail_0`.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{path}: {message}")]
pub struct RecordError {
    pub path: String,
    pub message: String,
}

impl RecordError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

/// Front/back multipolygons in one-to-one correspondence.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct PairSet {
    pub front: MultiPolygon3,
    pub back: MultiPolygon3,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct PoleLikeGeometry {
    /// Each pole is an ordered series of section rings.
    pub poles: Vec<MultiPolygon3>,
    pub panels: Vec<PairSet>,
    /// Each light is an ordered series of section rings.
    pub lights: Vec<MultiPolygon3>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Geometry {
    PlaneLike(MultiPolygon3),
    Guardrail(Vec<PairSet>),
    PoleLike(PoleLikeGeometry),
}

impl Geometry {
    pub fn kind(&self) -> HyperAsset {
        match self {
            Geometry::PlaneLike(_) => HyperAsset::PlaneLike,
            Geometry::Guardrail(_) => HyperAsset::Guardrail,
            Geometry::PoleLike(_) => HyperAsset::PoleLike,
        }
    }

    pub fn polygon_count(&self) -> usize {
        match self {
            Geometry::PlaneLike(m) => m.len(),
            Geometry::Guardrail(s) => s.iter().map(|p| p.front.len()).sum(),
            Geometry::PoleLike(g) => {
                g.poles.iter().map(Vec::len).sum::<usize>()
                    + g.panels.iter().map(|p| p.front.len()).sum::<usize>()
                    + g.lights.iter().map(Vec::len).sum::<usize>()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecordMeta {
    pub semantic: Semantic,
    pub instance_id: usize,
    pub segment: String,
    /// Unrecognized keys carried through a read/write cycle.
    pub extra: IndexMap<String, serde_json::Value>,
}

impl RecordMeta {
    pub fn new(semantic: Semantic, instance_id: usize, segment: impl Into<String>) -> Self {
        Self {
            semantic,
            instance_id,
            segment: segment.into(),
            extra: IndexMap::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeometryRecord {
    pub meta: RecordMeta,
    pub geometry: Geometry,
}

impl GeometryRecord {
    /// Record identifier used for file names: `<segment>_<semantic>_<id>`.
    pub fn file_stem(&self) -> String {
        let seg = if self.meta.segment.is_empty() { "segment" } else { &self.meta.segment };
        format!("{}_{}_{}", seg, self.meta.semantic.name(), self.meta.instance_id)
    }

    pub fn validate(&self) -> Result<(), RecordError> {
        if self.meta.semantic.hyper_asset() != self.geometry.kind() {
            return Err(RecordError::new(
                "Meta/Semantic",
                format!("{} does not describe {:?} geometry", self.meta.semantic, self.geometry.kind()),
            ));
        }
        match &self.geometry {
            Geometry::PlaneLike(m) => check_multipolygon("Data/MultiPolygon", m),
            Geometry::Guardrail(segs) => {
                for (i, s) in segs.iter().enumerate() {
                    check_pair(&format!("Data/Guardrail_{i}"), s)?;
                }
                Ok(())
            }
            Geometry::PoleLike(g) => {
                if g.poles.is_empty() {
                    return Err(RecordError::new("Data/Poles", "pole-like record needs at least one pole"));
                }
                for (i, p) in g.poles.iter().enumerate() {
                    check_multipolygon(&format!("Data/Poles/Pole_{i}/MultiPolygon"), p)?;
                }
                for (i, p) in g.panels.iter().enumerate() {
                    check_pair(&format!("Data/Panels/Panel_{i}"), p)?;
                }
                for (i, l) in g.lights.iter().enumerate() {
                    check_multipolygon(&format!("Data/Lights/Light_{i}/MultiPolygon"), l)?;
                }
                Ok(())
            }
        }
    }
}

fn check_polygon(path: &str, p: &Polygon3) -> Result<(), RecordError> {
    if p.shell.len() < 3 {
        return Err(RecordError::new(
            format!("{path}/Shell"),
            format!("shell needs at least 3 vertices, got {}", p.shell.len()),
        ));
    }
    for (k, h) in p.holes.iter().enumerate() {
        if h.len() < 3 {
            return Err(RecordError::new(
                format!("{path}/Holes/{k}"),
                format!("hole needs at least 3 vertices, got {}", h.len()),
            ));
        }
    }
    for ring in p.rings() {
        if ring.iter().any(|v| !(v.x.is_finite() && v.y.is_finite() && v.z.is_finite())) {
            return Err(RecordError::new(path, "non-finite coordinate"));
        }
    }
    Ok(())
}

fn check_multipolygon(path: &str, m: &MultiPolygon3) -> Result<(), RecordError> {
    for (i, p) in m.iter().enumerate() {
        check_polygon(&format!("{path}/Polygon_{i}"), p)?;
    }
    Ok(())
}

fn check_pair(path: &str, pair: &PairSet) -> Result<(), RecordError> {
    if pair.front.len() != pair.back.len() {
        return Err(RecordError::new(
            path,
            format!("Front has {} polygons but Back has {}", pair.front.len(), pair.back.len()),
        ));
    }
    for (i, (f, b)) in pair.front.iter().zip(&pair.back).enumerate() {
        if !f.corresponds_to(b) {
            return Err(RecordError::new(
                format!("{path}/Front/MultiPolygon/Polygon_{i}"),
                "front and back vertex counts differ",
            ));
        }
    }
    check_multipolygon(&format!("{path}/Front/MultiPolygon"), &pair.front)?;
    check_multipolygon(&format!("{path}/Back/MultiPolygon"), &pair.back)
}
