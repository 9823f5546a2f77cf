//! Labels, point aliases and the 3D polygon containers shared by every stage.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

pub type Point2 = nalgebra::Point2<f64>;
pub type Point3 = nalgebra::Point3<f64>;
pub type Vector2 = nalgebra::Vector2<f64>;
pub type Vector3 = nalgebra::Vector3<f64>;

/// Semantic class of a road point. The discriminant is the on-disk code.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Semantic {
    RoadSurface = 0,
    RoadSide = 1,
    RoadLane = 2,
    RoadSign = 3,
    RoadLight = 4,
    Guardrail = 5,
}

impl Semantic {
    pub const ALL: [Semantic; 6] = [
        Semantic::RoadSurface,
        Semantic::RoadSide,
        Semantic::RoadLane,
        Semantic::RoadSign,
        Semantic::RoadLight,
        Semantic::Guardrail,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Semantic::RoadSurface => "RoadSurface",
            Semantic::RoadSide => "RoadSide",
            Semantic::RoadLane => "RoadLane",
            Semantic::RoadSign => "RoadSign",
            Semantic::RoadLight => "RoadLight",
            Semantic::Guardrail => "Guardrail",
        }
    }

    /// Kebab-case spelling used by command-line flags (`--eps.road-surface`).
    pub fn flag_name(self) -> &'static str {
        match self {
            Semantic::RoadSurface => "road-surface",
            Semantic::RoadSide => "road-side",
            Semantic::RoadLane => "road-lane",
            Semantic::RoadSign => "road-sign",
            Semantic::RoadLight => "road-light",
            Semantic::Guardrail => "guardrail",
        }
    }

    pub fn hyper_asset(self) -> HyperAsset {
        match self {
            Semantic::RoadSurface | Semantic::RoadSide | Semantic::RoadLane => HyperAsset::PlaneLike,
            Semantic::RoadSign | Semantic::RoadLight => HyperAsset::PoleLike,
            Semantic::Guardrail => HyperAsset::Guardrail,
        }
    }

    pub fn is_pole_like(self) -> bool {
        self.hyper_asset() == HyperAsset::PoleLike
    }
}

impl fmt::Display for Semantic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Semantic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Semantic::ALL
            .iter()
            .copied()
            .find(|sem| sem.name() == s || sem.flag_name() == s)
            .ok_or_else(|| format!("unknown semantic label `{s}`"))
    }
}

/// Functional part of a pole-like instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Part {
    Pole = 0,
    Panel = 1,
    Light = 2,
}

impl Part {
    pub const ALL: [Part; 3] = [Part::Pole, Part::Panel, Part::Light];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Part::Pole => "Pole",
            Part::Panel => "Panel",
            Part::Light => "Light",
        }
    }
}

impl fmt::Display for Part {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HyperAsset {
    PlaneLike,
    Guardrail,
    PoleLike,
}

/// Axis-aligned projection plane. The coordinate dropped by the projection is
/// the "missing axis" that lifting reconstructs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Plane {
    XY,
    XZ,
    YZ,
}

impl Plane {
    #[inline]
    pub fn project(self, p: &Point3) -> Point2 {
        match self {
            Plane::XY => Point2::new(p.x, p.y),
            Plane::XZ => Point2::new(p.x, p.z),
            Plane::YZ => Point2::new(p.y, p.z),
        }
    }

    #[inline]
    pub fn missing(self, p: &Point3) -> f64 {
        match self {
            Plane::XY => p.z,
            Plane::XZ => p.y,
            Plane::YZ => p.x,
        }
    }

    #[inline]
    pub fn compose(self, uv: &Point2, w: f64) -> Point3 {
        match self {
            Plane::XY => Point3::new(uv.x, uv.y, w),
            Plane::XZ => Point3::new(uv.x, w, uv.y),
            Plane::YZ => Point3::new(w, uv.x, uv.y),
        }
    }
}

/// A 3D polygon: closed shell ring plus hole rings. Closure is implicit.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Polygon3 {
    pub shell: Vec<Point3>,
    pub holes: Vec<Vec<Point3>>,
}

impl Polygon3 {
    pub fn new(shell: Vec<Point3>, holes: Vec<Vec<Point3>>) -> Self {
        Self { shell, holes }
    }

    pub fn rings(&self) -> impl Iterator<Item = &Vec<Point3>> {
        std::iter::once(&self.shell).chain(self.holes.iter())
    }

    pub fn vertex_count(&self) -> usize {
        self.rings().map(Vec::len).sum()
    }

    /// True when `other` has the same ring structure (hole count and per-ring
    /// vertex counts).
    pub fn corresponds_to(&self, other: &Polygon3) -> bool {
        self.holes.len() == other.holes.len()
            && self.rings().zip(other.rings()).all(|(a, b)| a.len() == b.len())
    }

    pub fn map_points(&self, mut f: impl FnMut(&Point3) -> Point3) -> Polygon3 {
        Polygon3 {
            shell: self.shell.iter().map(&mut f).collect(),
            holes: self
                .holes
                .iter()
                .map(|h| h.iter().map(&mut f).collect())
                .collect(),
        }
    }
}

pub type MultiPolygon3 = Vec<Polygon3>;

/// Front/back polygons with one-to-one vertex correspondence.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct PolygonPair {
    pub front: Polygon3,
    pub back: Polygon3,
}

impl PolygonPair {
    pub fn is_consistent(&self) -> bool {
        self.front.corresponds_to(&self.back)
    }
}

/// Rotation of a 2D point about `center` by `angle` radians (counter-clockwise).
#[inline]
pub fn rotate2(p: &Point2, center: &Point2, angle: f64) -> Point2 {
    let (s, c) = angle.sin_cos();
    let dx = p.x - center.x;
    let dy = p.y - center.y;
    Point2::new(center.x + c * dx - s * dy, center.y + s * dx + c * dy)
}

/// Rotation about the vertical axis through `(center.x, center.y)`.
#[inline]
pub fn rotate_about_z(p: &Point3, center: &Point2, angle: f64) -> Point3 {
    let q = rotate2(&Point2::new(p.x, p.y), center, angle);
    Point3::new(q.x, q.y, p.z)
}

/// Rotation about the axis parallel to Y through `(center.x, ·, center.y)`,
/// where `center` is given in (x, z). Positive angles turn +X towards +Z.
#[inline]
pub fn rotate_about_y(p: &Point3, center_xz: &Point2, angle: f64) -> Point3 {
    let q = rotate2(&Point2::new(p.x, p.z), center_xz, angle);
    Point3::new(q.x, p.y, q.y)
}
