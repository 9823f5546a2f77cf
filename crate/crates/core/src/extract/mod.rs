//! Geometry extraction per hyper-asset: plane-like grids, straightened
//! guardrail pairs, and pole/panel/light sections.

mod guardrail;
mod parts;
mod plane;

pub use guardrail::{extract_guardrail, GuardrailSegment};
pub use parts::{extract_light, extract_panel, extract_pole};
pub use plane::extract_plane_like;

use crate::cluster::{split_parts, ClusterError, ClusterParams};
use crate::geom2d::{GeomError, Polygon2};
use crate::ingest::LabeledCloud;
use crate::lift::{LiftError, LiftParams};
use crate::record::{Geometry, GeometryRecord, PairSet, PoleLikeGeometry, RecordMeta};
use crate::types::{rotate_about_y, rotate_about_z, HyperAsset, Part, Point2, Point3, Semantic, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Lift(#[from] LiftError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error("{what} needs at least {need} points, got {got}")]
    TooFewPoints { what: &'static str, need: usize, got: usize },
    #[error("no centerline found")]
    NoCenterline,
    #[error("contour extraction produced no polygon")]
    EmptyContour,
    #[error("no pole slab had enough points")]
    EmptyPole,
    #[error("{0} cannot be extracted by this routine")]
    WrongSemantic(Semantic),
    #[error("invalid extraction parameter: {0}")]
    InvalidParams(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractConfig {
    pub alpha_fine: f64,
    pub alpha_coarse: f64,
    pub alpha_guardrail_xy: f64,
    pub alpha_guardrail_xz: f64,
    pub grid_w: f64,
    pub grid_l: f64,
    pub dh: f64,
    pub dl: f64,
    pub n_rays: usize,
    pub lift: LiftParams,
    /// Block length along plane-like centerlines before gridding (m).
    pub plane_block_len: f64,
    /// Block length along guardrail centerlines (m).
    pub guardrail_block_len: f64,
    /// Shortest kept centerline branch for road surfaces and sides (m).
    pub plane_min_branch: f64,
    pub guardrail_min_branch: f64,
    pub light_min_branch: f64,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            alpha_fine: 10.0,
            alpha_coarse: 0.1,
            alpha_guardrail_xy: 1.0,
            alpha_guardrail_xz: 10.0,
            grid_w: 1.0,
            grid_l: 1.0,
            dh: 0.1,
            dl: 0.1,
            n_rays: 30,
            lift: LiftParams::default(),
            plane_block_len: 5.0,
            guardrail_block_len: 1.0,
            plane_min_branch: 2.0,
            guardrail_min_branch: 1.0,
            light_min_branch: 0.2,
        }
    }
}

impl ExtractConfig {
    pub fn validate(&self) -> Result<(), ExtractError> {
        let positive = [
            ("alpha_fine", self.alpha_fine),
            ("alpha_coarse", self.alpha_coarse),
            ("alpha_guardrail_xy", self.alpha_guardrail_xy),
            ("alpha_guardrail_xz", self.alpha_guardrail_xz),
            ("grid_w", self.grid_w),
            ("grid_l", self.grid_l),
            ("dh", self.dh),
            ("dl", self.dl),
            ("plane_block_len", self.plane_block_len),
            ("guardrail_block_len", self.guardrail_block_len),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ExtractError::InvalidParams(format!("{name} must be > 0, got {v}")));
            }
        }
        let non_negative = [
            ("plane_min_branch", self.plane_min_branch),
            ("guardrail_min_branch", self.guardrail_min_branch),
            ("light_min_branch", self.light_min_branch),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ExtractError::InvalidParams(format!("{name} must be >= 0, got {v}")));
            }
        }
        if self.n_rays < 3 {
            return Err(ExtractError::InvalidParams(format!("n_rays must be >= 3, got {}", self.n_rays)));
        }
        self.lift.validate()?;
        Ok(())
    }

    /// Sets both grid dimensions.
    pub fn with_grid(mut self, size: f64) -> Self {
        self.grid_w = size;
        self.grid_l = size;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RotationAxis {
    Z,
    Y,
}

/// Rigid motion taking one block of a curved instance into the straightened
/// frame: rotate by `-theta` about `center`, then translate by `offset`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockTransform {
    pub axis: RotationAxis,
    pub theta: f64,
    /// Rotation center: (x, y) for the Z axis, (x, z) for the Y axis.
    pub center: Point2,
    pub offset: Vector3,
    /// Start of the block along the straightened X axis (m).
    pub arc_start: f64,
}

impl BlockTransform {
    fn rotate(&self, p: &Point3, angle: f64) -> Point3 {
        match self.axis {
            RotationAxis::Z => rotate_about_z(p, &self.center, angle),
            RotationAxis::Y => rotate_about_y(p, &self.center, angle),
        }
    }

    pub fn forward(&self, p: &Point3) -> Point3 {
        self.rotate(p, -self.theta) + self.offset
    }

    pub fn inverse(&self, p: &Point3) -> Point3 {
        self.rotate(&(p - self.offset), self.theta)
    }

    /// The transform whose `forward` is this one's `inverse`.
    pub fn inverted(&self) -> InverseBlockTransform {
        InverseBlockTransform(*self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InverseBlockTransform(pub BlockTransform);

impl InverseBlockTransform {
    pub fn forward(&self, p: &Point3) -> Point3 {
        self.0.inverse(p)
    }

    pub fn inverse(&self, p: &Point3) -> Point3 {
        self.0.forward(p)
    }

    pub fn inverted(&self) -> BlockTransform {
        self.0
    }
}

pub(crate) fn project_xy(cloud: &LabeledCloud) -> Vec<Point2> {
    cloud.points.iter().map(|p| Point2::new(p.x, p.y)).collect()
}

pub(crate) fn require_points(what: &'static str, n: usize, need: usize) -> Result<(), ExtractError> {
    if n < need {
        return Err(ExtractError::TooFewPoints { what, need, got: n });
    }
    Ok(())
}

/// Largest polygon first, as returned by the alpha shape.
pub(crate) fn largest(polys: Vec<Polygon2>) -> Result<Polygon2, ExtractError> {
    polys.into_iter().next().ok_or(ExtractError::EmptyContour)
}

/// Extraction result with the non-fatal part failures that were skipped.
#[derive(Clone, Debug, PartialEq)]
pub struct Extracted {
    pub record: GeometryRecord,
    pub warnings: Vec<String>,
}

/// Runs the extractor matching the instance's semantic class.
pub fn extract_instance(
    instance: &LabeledCloud,
    meta: RecordMeta,
    cfg: &ExtractConfig,
    part_params: &ClusterParams,
) -> Result<Extracted, ExtractError> {
    cfg.validate()?;
    let mut warnings = Vec::new();
    let geometry = match meta.semantic.hyper_asset() {
        HyperAsset::PlaneLike => Geometry::PlaneLike(extract_plane_like(instance, meta.semantic, cfg)?),
        HyperAsset::Guardrail => Geometry::Guardrail(
            extract_guardrail(instance, cfg)?
                .into_iter()
                .map(|s| PairSet {
                    front: s.front,
                    back: s.back,
                })
                .collect(),
        ),
        HyperAsset::PoleLike => {
            let parts = split_parts(instance, part_params)?;
            let mut g = PoleLikeGeometry::default();
            for (part, clouds) in &parts {
                for (k, cloud) in clouds.iter().enumerate() {
                    let result = match part {
                        Part::Pole => extract_pole(cloud, cfg).map(|r| g.poles.push(r)),
                        Part::Panel => extract_panel(cloud, cfg).map(|r| g.panels.push(r)),
                        Part::Light => extract_light(cloud, cfg).map(|r| g.lights.push(r)),
                    };
                    if let Err(e) = result {
                        let msg = format!("{} {}: {part} part {k} skipped: {e}", meta.semantic, meta.instance_id);
                        log::warn!("{msg}");
                        warnings.push(msg);
                    }
                }
            }
            if g.poles.is_empty() {
                return Err(ExtractError::EmptyPole);
            }
            Geometry::PoleLike(g)
        }
    };
    Ok(Extracted {
        record: GeometryRecord { meta, geometry },
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn block_transform_round_trip(
            theta in -3.2f64..3.2,
            cx in -50.0f64..50.0,
            cy in -50.0f64..50.0,
            off in prop::array::uniform3(-100.0f64..100.0),
            p in prop::array::uniform3(-100.0f64..100.0),
            about_y in any::<bool>(),
        ) {
            let t = BlockTransform {
                axis: if about_y { RotationAxis::Y } else { RotationAxis::Z },
                theta,
                center: Point2::new(cx, cy),
                offset: Vector3::new(off[0], off[1], off[2]),
                arc_start: 0.0,
            };
            let p = Point3::new(p[0], p[1], p[2]);
            prop_assert!((t.inverse(&t.forward(&p)) - p).norm() < 1e-9);
            prop_assert!((t.forward(&t.inverse(&p)) - p).norm() < 1e-9);
            prop_assert_eq!(t.inverted().inverted(), t);
        }
    }

    #[test]
    fn default_config_is_valid_and_checked() {
        assert!(ExtractConfig::default().validate().is_ok());
        let bad = ExtractConfig {
            n_rays: 2,
            ..ExtractConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(ExtractConfig::default().with_grid(0.0).validate().is_err());
    }
}
