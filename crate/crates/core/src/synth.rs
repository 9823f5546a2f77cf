//! Seeded synthetic road scenes with known ground truth.
//!
//! A scene is laid out in road coordinates: station `s` along a circular
//! (or straight) axis and signed offset `t` to the left of it. Every asset is
//! first built as a ground-truth triangle mesh; points are then drawn
//! uniformly over the mesh area and jittered with isotropic Gaussian noise.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};

use geo::{MinimumRotatedRect, MultiPoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ingest::{CloudFormat, IngestError, LabeledCloud};
use crate::mesh::{self, Mesh, MeshError, MeshFormat, NamedMesh};
use crate::record::{Geometry, GeometryRecord, PairSet, PoleLikeGeometry, RecordMeta};
use crate::types::{HyperAsset, MultiPolygon3, Part, Point2, Point3, Polygon3, Semantic, Vector2, Vector3};

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid scene spec: {0}")]
    Spec(String),
    #[error("overlapping placements: {0}")]
    Overlap(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Sinusoidal elevation along the axis. Zero amplitude means flat.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Elevation {
    pub amplitude: f64,
    pub wavelength: f64,
}

/// A full-length band of surface or side between two offsets. `grade` is the
/// height change per metre moving away from the axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Strip {
    pub semantic: Semantic,
    pub from: f64,
    pub to: f64,
    #[serde(default)]
    pub grade: f64,
}

/// Dashed line: dashes of length `dash` separated by `gap`, the first one
/// starting at station `start`, none passing `end`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DashPattern {
    pub offset: f64,
    pub width: f64,
    pub dash: f64,
    pub gap: f64,
    pub start: f64,
    pub end: f64,
}

impl DashPattern {
    /// Station intervals of the dashes.
    pub fn dashes(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut a = self.start;
        while a + self.dash <= self.end + 1e-9 {
            out.push((a, a + self.dash));
            a += self.dash + self.gap;
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum PanelShape {
    Rect { width: f64, height: f64 },
    Circle { radius: f64 },
}

impl PanelShape {
    fn half_width(&self) -> f64 {
        match *self {
            PanelShape::Rect { width, .. } => width / 2.0,
            PanelShape::Circle { radius } => radius,
        }
    }

    fn height(&self) -> f64 {
        match *self {
            PanelShape::Rect { height, .. } => height,
            PanelShape::Circle { radius } => 2.0 * radius,
        }
    }
}

/// A sign: a vertical pole with a flat panel whose top is level with the
/// pole top. With `yaw` 0 the panel spans across the road.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignSpec {
    pub station: f64,
    pub offset: f64,
    pub pole_radius: f64,
    pub pole_height: f64,
    pub panel: PanelShape,
    pub thickness: f64,
    #[serde(default)]
    pub yaw: f64,
}

/// A light: tapered pole plus a horizontal cylindrical arm near its top.
/// With `yaw` 0 the arm points to the left of the road.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LightSpec {
    pub station: f64,
    pub offset: f64,
    pub height: f64,
    pub base_radius: f64,
    pub top_radius: f64,
    pub arm_length: f64,
    pub arm_radius: f64,
    #[serde(default)]
    pub yaw: f64,
}

/// Guardrail cross-section. `T` is a web under one rail; `#` is a web
/// carrying two rails.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Section {
    #[serde(rename = "T")]
    T,
    #[serde(rename = "#")]
    Hash,
}

impl Section {
    /// Closed counter-clockwise outline in (across, up) metres.
    pub fn outline(self) -> Vec<(f64, f64)> {
        match self {
            Section::T => vec![
                (-0.05, 0.0),
                (0.05, 0.0),
                (0.05, 0.6),
                (0.15, 0.6),
                (0.15, 0.7),
                (-0.15, 0.7),
                (-0.15, 0.6),
                (-0.05, 0.6),
            ],
            Section::Hash => vec![
                (-0.05, 0.0),
                (0.05, 0.0),
                (0.05, 0.35),
                (0.15, 0.35),
                (0.15, 0.45),
                (0.05, 0.45),
                (0.05, 0.6),
                (0.15, 0.6),
                (0.15, 0.7),
                (-0.15, 0.7),
                (-0.15, 0.6),
                (-0.05, 0.6),
                (-0.05, 0.45),
                (-0.15, 0.45),
                (-0.15, 0.35),
                (-0.05, 0.35),
            ],
        }
    }

    fn half_width(self) -> f64 {
        0.15
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuardrailSpec {
    pub start: f64,
    pub end: f64,
    pub offset: f64,
    pub section: Section,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub length: f64,
    /// Signed axis curvature in 1/m; positive bends left.
    #[serde(default)]
    pub curvature: f64,
    #[serde(default)]
    pub elevation: Elevation,
    #[serde(default)]
    pub strips: Vec<Strip>,
    #[serde(default)]
    pub lanes: Vec<DashPattern>,
    #[serde(default)]
    pub signs: Vec<SignSpec>,
    #[serde(default)]
    pub lights: Vec<LightSpec>,
    #[serde(default)]
    pub guardrails: Vec<GuardrailSpec>,
    /// Points per square metre of visible asset surface.
    pub density: f64,
    pub sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SceneSpec {
    /// A bare scene with no assets.
    pub fn empty(length: f64, seed: u64) -> Self {
        Self {
            length,
            curvature: 0.0,
            elevation: Elevation::default(),
            strips: Vec::new(),
            lanes: Vec::new(),
            signs: Vec::new(),
            lights: Vec::new(),
            guardrails: Vec::new(),
            density: 400.0,
            sigma: 0.005,
            seed,
        }
    }

    /// A dual carriageway segment of 200 m: two surfaces, 50 lane dashes,
    /// three sides (two verges and the central reserve), three signs, two
    /// median lights and two guardrails.
    pub fn preset_200m(seed: u64) -> Self {
        let mut spec = Self::empty(200.0, seed);
        spec.curvature = 1.0 / 600.0;
        spec.elevation = Elevation {
            amplitude: 0.5,
            wavelength: 200.0,
        };
        let strip = |semantic, from, to, grade| Strip {
            semantic,
            from,
            to,
            grade,
        };
        spec.strips = vec![
            strip(Semantic::RoadSide, -11.3, -8.3, -0.1),
            strip(Semantic::RoadSurface, -8.3, -1.0, -0.025),
            strip(Semantic::RoadSide, -1.0, 1.0, 0.0),
            strip(Semantic::RoadSurface, 1.0, 8.3, -0.025),
            strip(Semantic::RoadSide, 8.3, 11.3, -0.1),
        ];
        spec.lanes = [-4.65, 4.65]
            .iter()
            .map(|&offset| DashPattern {
                offset,
                width: 0.15,
                dash: 2.0,
                gap: 6.0,
                start: 2.0,
                end: 198.0,
            })
            .collect();
        let sign = |station, offset, panel| SignSpec {
            station,
            offset,
            pole_radius: 0.06,
            pole_height: 2.8,
            panel,
            thickness: 0.02,
            yaw: 0.0,
        };
        spec.signs = vec![
            sign(60.0, -10.5, PanelShape::Rect { width: 0.9, height: 0.6 }),
            sign(100.0, 10.5, PanelShape::Rect { width: 1.2, height: 0.8 }),
            sign(170.0, 10.6, PanelShape::Circle { radius: 0.45 }),
        ];
        let light = |station, yaw| LightSpec {
            station,
            offset: 0.0,
            height: 8.0,
            base_radius: 0.1,
            top_radius: 0.07,
            arm_length: 1.5,
            arm_radius: 0.06,
            yaw,
        };
        spec.lights = vec![light(50.0, 0.0), light(150.0, PI)];
        spec.guardrails = vec![
            GuardrailSpec {
                start: 20.0,
                end: 80.0,
                offset: 9.8,
                section: Section::T,
            },
            GuardrailSpec {
                start: 110.0,
                end: 190.0,
                offset: -9.8,
                section: Section::Hash,
            },
        ];
        spec
    }

    /// One straight surface strip of `width` with sinusoidal elevation.
    pub fn undulating_patch(length: f64, width: f64, amplitude: f64, wavelength: f64, seed: u64) -> Self {
        let mut spec = Self::empty(length, seed);
        spec.elevation = Elevation { amplitude, wavelength };
        spec.strips = vec![Strip {
            semantic: Semantic::RoadSurface,
            from: -width / 2.0,
            to: width / 2.0,
            grade: 0.0,
        }];
        spec
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: String| Err(SynthError::Spec(msg));
        if !(self.length > 0.0 && self.length.is_finite()) {
            return bad(format!("length must be > 0, got {}", self.length));
        }
        if !(self.density > 0.0 && self.density.is_finite()) {
            return bad(format!("density must be > 0, got {}", self.density));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be >= 0, got {}", self.sigma));
        }
        if !self.curvature.is_finite() {
            return bad("curvature must be finite".into());
        }
        let e = self.elevation;
        if !e.amplitude.is_finite() || (e.amplitude != 0.0 && !(e.wavelength > 0.0 && e.wavelength.is_finite())) {
            return bad("elevation needs a finite amplitude and a positive wavelength".into());
        }
        let station = |what: &str, s: f64| {
            if (0.0..=self.length).contains(&s) {
                Ok(())
            } else {
                Err(SynthError::Spec(format!("{what} station {s} outside [0, {}]", self.length)))
            }
        };
        let positive = |what: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(SynthError::Spec(format!("{what} must be > 0, got {v}")))
            }
        };
        let mut reach: f64 = 0.0;
        for (i, st) in self.strips.iter().enumerate() {
            if !matches!(st.semantic, Semantic::RoadSurface | Semantic::RoadSide) {
                return bad(format!("strip {i}: only RoadSurface and RoadSide strips are allowed"));
            }
            if !(st.from < st.to) || !st.from.is_finite() || !st.to.is_finite() || !st.grade.is_finite() {
                return bad(format!("strip {i}: needs finite from < to"));
            }
            reach = reach.max(st.from.abs()).max(st.to.abs());
        }
        let mut strips = self.strips.clone();
        strips.sort_by(|a, b| a.from.total_cmp(&b.from));
        for w in strips.windows(2) {
            if w[1].from < w[0].to - 1e-9 {
                return Err(SynthError::Overlap(format!(
                    "strips [{}, {}] and [{}, {}]",
                    w[0].from, w[0].to, w[1].from, w[1].to
                )));
            }
        }
        for (i, l) in self.lanes.iter().enumerate() {
            positive(&format!("lane pattern {i} width"), l.width)?;
            positive(&format!("lane pattern {i} dash"), l.dash)?;
            if !(l.gap >= 0.0) {
                return bad(format!("lane pattern {i}: gap must be >= 0"));
            }
            station("lane pattern", l.start)?;
            station("lane pattern", l.end)?;
            reach = reach.max(l.offset.abs() + l.width);
        }
        for (i, s) in self.signs.iter().enumerate() {
            station("sign", s.station)?;
            positive(&format!("sign {i} pole radius"), s.pole_radius)?;
            positive(&format!("sign {i} thickness"), s.thickness)?;
            positive(&format!("sign {i} panel size"), s.panel.half_width())?;
            positive(&format!("sign {i} panel size"), s.panel.height())?;
            if !(s.pole_height > s.panel.height()) {
                return bad(format!("sign {i}: pole must be taller than its panel"));
            }
            reach = reach.max(s.offset.abs() + s.panel.half_width() + 1.0);
        }
        for (i, l) in self.lights.iter().enumerate() {
            station("light", l.station)?;
            positive(&format!("light {i} height"), l.height)?;
            positive(&format!("light {i} base radius"), l.base_radius)?;
            positive(&format!("light {i} top radius"), l.top_radius)?;
            positive(&format!("light {i} arm length"), l.arm_length)?;
            positive(&format!("light {i} arm radius"), l.arm_radius)?;
            if !(l.height > 4.0 * l.arm_radius) {
                return bad(format!("light {i}: arm too thick for the pole height"));
            }
            reach = reach.max(l.offset.abs() + l.arm_length + l.top_radius);
        }
        for (i, g) in self.guardrails.iter().enumerate() {
            station("guardrail", g.start)?;
            station("guardrail", g.end)?;
            if !(g.end - g.start >= 1.0) {
                return bad(format!("guardrail {i}: must be at least 1 m long"));
            }
            reach = reach.max(g.offset.abs() + 0.5);
        }
        if self.curvature.abs() * reach >= 0.5 {
            return bad(format!(
                "curvature {} too tight for assets reaching {reach} m off the axis",
                self.curvature
            ));
        }
        self.check_overlaps()
    }

    /// Footprints in road coordinates: pole-like assets as discs, guardrails
    /// and lane dashes as rectangles.
    fn check_overlaps(&self) -> Result<(), SynthError> {
        let mut discs: Vec<(String, f64, f64, f64)> = Vec::new();
        for (i, s) in self.signs.iter().enumerate() {
            let r = s.pole_radius.max(s.panel.half_width()) + s.pole_radius + s.thickness + 0.1;
            discs.push((format!("sign {i}"), s.station, s.offset, r));
        }
        for (i, l) in self.lights.iter().enumerate() {
            discs.push((format!("light {i}"), l.station, l.offset, l.base_radius + 0.1));
        }
        let mut rects: Vec<(String, [f64; 4])> = Vec::new();
        for (i, g) in self.guardrails.iter().enumerate() {
            let h = g.section.half_width() + 0.1;
            rects.push((format!("guardrail {i}"), [g.start, g.end, g.offset - h, g.offset + h]));
        }
        for (i, l) in self.lanes.iter().enumerate() {
            for (k, (a, b)) in l.dashes().into_iter().enumerate() {
                rects.push((format!("lane {i} dash {k}"), [a, b, l.offset - l.width / 2.0, l.offset + l.width / 2.0]));
            }
        }
        let overlap = |a: &str, b: &str| Err(SynthError::Overlap(format!("{a} and {b}")));
        for i in 0..discs.len() {
            for j in i + 1..discs.len() {
                let (a, b) = (&discs[i], &discs[j]);
                if (a.1 - b.1).hypot(a.2 - b.2) < a.3 + b.3 {
                    return overlap(&a.0, &b.0);
                }
            }
            for (name, r) in &rects {
                let (s, t, rad) = (discs[i].1, discs[i].2, discs[i].3);
                let ds = (r[0] - s).max(s - r[1]).max(0.0);
                let dt = (r[2] - t).max(t - r[3]).max(0.0);
                if ds.hypot(dt) < rad {
                    return overlap(&discs[i].0, name);
                }
            }
        }
        for i in 0..rects.len() {
            for j in i + 1..rects.len() {
                let (a, b) = (&rects[i].1, &rects[j].1);
                if a[0] < b[1] && b[0] < a[1] && a[2] < b[3] && b[2] < a[3] {
                    return overlap(&rects[i].0, &rects[j].0);
                }
            }
        }
        Ok(())
    }
}

/// Road coordinate frame: maps (station, offset, height) to world space.
#[derive(Clone, Debug)]
pub struct Frame {
    curvature: f64,
    elevation: Elevation,
    strips: Vec<Strip>,
}

impl Frame {
    pub fn new(spec: &SceneSpec) -> Self {
        Self {
            curvature: spec.curvature,
            elevation: spec.elevation,
            strips: spec.strips.clone(),
        }
    }

    pub fn axis(&self, s: f64) -> Point2 {
        let k = self.curvature;
        if k.abs() < 1e-12 {
            Point2::new(s, 0.0)
        } else {
            Point2::new((k * s).sin() / k, (1.0 - (k * s).cos()) / k)
        }
    }

    pub fn tangent(&self, s: f64) -> Vector2 {
        let a = self.curvature * s;
        Vector2::new(a.cos(), a.sin())
    }

    /// Unit vector pointing to the left of the direction of travel.
    pub fn normal(&self, s: f64) -> Vector2 {
        let a = self.curvature * s;
        Vector2::new(-a.sin(), a.cos())
    }

    /// Ground height. Strips add `grade` per metre of offset they cover
    /// between the axis and `t`.
    pub fn ground(&self, s: f64, t: f64) -> f64 {
        let e = self.elevation;
        let wave = if e.amplitude == 0.0 {
            0.0
        } else {
            e.amplitude * (TAU * s / e.wavelength).sin()
        };
        let (lo, hi) = if t < 0.0 { (t, 0.0) } else { (0.0, t) };
        let lateral: f64 = self
            .strips
            .iter()
            .map(|st| st.grade * (st.to.min(hi) - st.from.max(lo)).max(0.0))
            .sum();
        wave + lateral
    }

    /// World point `up` metres above the ground at (s, t).
    pub fn point(&self, s: f64, t: f64, up: f64) -> Point3 {
        let xy = self.axis(s) + self.normal(s) * t;
        Point3::new(xy.x, xy.y, self.ground(s, t) + up)
    }

    /// Inverse of the planar part of [`Frame::point`].
    pub fn locate(&self, xy: &Point2) -> (f64, f64) {
        let k = self.curvature;
        if k.abs() < 1e-12 {
            return (xy.x, xy.y);
        }
        let q = (xy - Point2::new(0.0, 1.0 / k)) * k;
        let t = (1.0 - q.norm()) / k;
        let s = q.x.atan2(-q.y) / k;
        (s, t)
    }

    /// Height of `p` above the ground directly below it.
    pub fn clearance(&self, p: &Point3) -> f64 {
        let (s, t) = self.locate(&Point2::new(p.x, p.y));
        p.z - self.ground(s, t)
    }
}

/// One sampled component of an asset.
struct Piece {
    mesh: Mesh,
    part: Option<Part>,
    /// Faces that receive points.
    visible: Vec<bool>,
    /// Road coordinates per vertex, when points must avoid `holes`.
    params: Option<Vec<Point2>>,
    /// (s0, s1, t0, t1) rectangles left unsampled.
    holes: Vec<[f64; 4]>,
}

impl Piece {
    fn solid(mesh: Mesh, part: Option<Part>, hide: impl Fn(&Point3, &Vector3) -> bool) -> Self {
        let visible = (0..mesh.faces.len())
            .map(|f| {
                let [a, b, c] = mesh.triangle(f);
                let centroid = Point3::from((a.coords + b.coords + c.coords) / 3.0);
                !hide(&centroid, &mesh.face_normal(f))
            })
            .collect();
        Self {
            mesh,
            part,
            visible,
            params: None,
            holes: Vec::new(),
        }
    }
}

struct Plan {
    semantic: Semantic,
    pieces: Vec<Piece>,
}

/// Subdivision of [a, b] into steps no longer than `step`, with `extra`
/// knots inserted where they fall strictly inside.
fn knots(a: f64, b: f64, step: f64, extra: &[f64]) -> Vec<f64> {
    let n = ((b - a) / step).ceil().max(1.0) as usize;
    let mut v: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
    v.extend(extra.iter().copied().filter(|&x| x > a + 1e-9 && x < b - 1e-9));
    v.sort_by(f64::total_cmp);
    v.dedup_by(|x, y| (*x - *y).abs() < 1e-9);
    v
}

/// Upward-facing grid sheet on the ground over [s0, s1] x [t0, t1].
fn sheet(frame: &Frame, s0: f64, s1: f64, t0: f64, t1: f64, ds: f64) -> Piece {
    let ss = knots(s0, s1, ds, &[]);
    let tt = knots(t0, t1, 1.0, &[0.0]);
    let mut mesh = Mesh::default();
    let mut params = Vec::with_capacity(ss.len() * tt.len());
    for &s in &ss {
        for &t in &tt {
            mesh.vertices.push(frame.point(s, t, 0.0));
            params.push(Point2::new(s, t));
        }
    }
    let m = tt.len();
    for i in 0..ss.len() - 1 {
        for j in 0..m - 1 {
            let (a, b, c, d) = (i * m + j, (i + 1) * m + j, (i + 1) * m + j + 1, i * m + j + 1);
            mesh.faces.push([a, b, c]);
            mesh.faces.push([a, c, d]);
        }
    }
    // Station then offset is counter-clockwise seen from above.
    let visible = vec![true; mesh.faces.len()];
    Piece {
        mesh,
        part: None,
        visible,
        params: Some(params),
        holes: Vec::new(),
    }
}

fn circle_ring(center: Point3, e1: Vector3, e2: Vector3, r: f64, n: usize) -> Vec<Point3> {
    (0..n)
        .map(|k| {
            let a = TAU * k as f64 / n as f64;
            center + e1 * (r * a.cos()) + e2 * (r * a.sin())
        })
        .collect()
}

const ROUND: usize = 48;

/// Vertical frustum standing on the ground; its buried base receives no
/// points.
fn pole(frame: &Frame, base: Point3, height: f64, r0: f64, r1: f64) -> Result<Piece, SynthError> {
    let top = base + Vector3::z() * height;
    let rings = [
        Polygon3::new(circle_ring(base, Vector3::x(), Vector3::y(), r0, ROUND), vec![]),
        Polygon3::new(circle_ring(top, Vector3::x(), Vector3::y(), r1, ROUND), vec![]),
    ];
    let mesh = mesh::mesh_ring_series(&rings)?;
    Ok(Piece::solid(mesh, Some(Part::Pole), |c, n| n.z < -0.9 && frame.clearance(c) < 0.05))
}

fn heading(frame: &Frame, s: f64, yaw: f64) -> Vector3 {
    let n = frame.normal(s);
    let (sin, cos) = yaw.sin_cos();
    Vector3::new(n.x * cos - n.y * sin, n.x * sin + n.y * cos, 0.0)
}

fn plan_sign(frame: &Frame, spec: &SignSpec) -> Result<Plan, SynthError> {
    let base = frame.point(spec.station, spec.offset, 0.0);
    let mut pieces = vec![pole(frame, base, spec.pole_height, spec.pole_radius, spec.pole_radius)?];
    let across = heading(frame, spec.station, spec.yaw);
    let facing = Vector3::z().cross(&across);
    let h = spec.panel.height();
    let center = base + facing * (spec.pole_radius + spec.thickness / 2.0 + 0.01)
        + Vector3::z() * (spec.pole_height - h / 2.0);
    let outline = |c: Point3| match spec.panel {
        PanelShape::Rect { width, height } => [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
            .iter()
            .map(|(u, v)| c + across * (u * width / 2.0) + Vector3::z() * (v * height / 2.0))
            .collect(),
        PanelShape::Circle { radius } => circle_ring(c, across, Vector3::z(), radius, ROUND),
    };
    let half = facing * (spec.thickness / 2.0);
    let rings = [
        Polygon3::new(outline(center - half), vec![]),
        Polygon3::new(outline(center + half), vec![]),
    ];
    pieces.push(Piece::solid(mesh::mesh_ring_series(&rings)?, Some(Part::Panel), |_, _| false));
    Ok(Plan {
        semantic: Semantic::RoadSign,
        pieces,
    })
}

fn plan_light(frame: &Frame, spec: &LightSpec) -> Result<Plan, SynthError> {
    let base = frame.point(spec.station, spec.offset, 0.0);
    let mut pieces = vec![pole(frame, base, spec.height, spec.base_radius, spec.top_radius)?];
    let dir = heading(frame, spec.station, spec.yaw);
    let side = dir.cross(&Vector3::z());
    let start = base + Vector3::z() * (spec.height - 2.0 * spec.arm_radius) + dir * spec.top_radius;
    let end = start + dir * spec.arm_length;
    let rings = [
        Polygon3::new(circle_ring(start, Vector3::z(), side, spec.arm_radius, ROUND), vec![]),
        Polygon3::new(circle_ring(end, Vector3::z(), side, spec.arm_radius, ROUND), vec![]),
    ];
    // The cap against the pole is hidden.
    pieces.push(Piece::solid(mesh::mesh_ring_series(&rings)?, Some(Part::Light), move |_, n| {
        n.dot(&dir) < -0.9
    }));
    Ok(Plan {
        semantic: Semantic::RoadLight,
        pieces,
    })
}

fn plan_guardrail(frame: &Frame, spec: &GuardrailSpec) -> Result<Plan, SynthError> {
    let outline = spec.section.outline();
    let rings: Vec<Polygon3> = knots(spec.start, spec.end, 0.5, &[])
        .into_iter()
        .map(|s| {
            let n = frame.normal(s);
            let axis = frame.axis(s);
            let z0 = frame.ground(s, spec.offset);
            let shell = outline
                .iter()
                .map(|&(a, u)| {
                    let xy = axis + n * (spec.offset + a);
                    Point3::new(xy.x, xy.y, z0 + u)
                })
                .collect();
            Polygon3::new(shell, vec![])
        })
        .collect();
    let mesh = mesh::mesh_ring_series(&rings)?;
    let offset = spec.offset;
    let grounded = move |c: &Point3, n: &Vector3| {
        let (s, _) = frame.locate(&Point2::new(c.x, c.y));
        n.z < -0.9 && c.z - frame.ground(s, offset) < 0.05
    };
    let piece = Piece::solid(mesh, None, grounded);
    Ok(Plan {
        semantic: Semantic::Guardrail,
        pieces: vec![piece],
    })
}

/// Builds every asset's ground-truth geometry in a fixed order: strips by
/// increasing offset, lane dashes, signs, lights, guardrails.
fn plan(spec: &SceneSpec, frame: &Frame) -> Result<Vec<Plan>, SynthError> {
    let ds = if spec.elevation.amplitude == 0.0 {
        1.0
    } else {
        (spec.elevation.wavelength / 80.0).clamp(0.05, 1.0)
    };
    let dashes: Vec<(DashPattern, f64, f64)> = spec
        .lanes
        .iter()
        .flat_map(|l| l.dashes().into_iter().map(move |(a, b)| (*l, a, b)))
        .collect();
    let mut plans = Vec::new();
    let mut strips = spec.strips.clone();
    strips.sort_by(|a, b| a.from.total_cmp(&b.from));
    for st in &strips {
        let mut piece = sheet(frame, 0.0, spec.length, st.from, st.to, ds);
        if st.semantic == Semantic::RoadSurface {
            piece.holes = dashes
                .iter()
                .map(|(l, a, b)| [*a, *b, l.offset - l.width / 2.0, l.offset + l.width / 2.0])
                .collect();
        }
        plans.push(Plan {
            semantic: st.semantic,
            pieces: vec![piece],
        });
    }
    for (l, a, b) in &dashes {
        let piece = sheet(frame, *a, *b, l.offset - l.width / 2.0, l.offset + l.width / 2.0, ds.min(0.5));
        plans.push(Plan {
            semantic: Semantic::RoadLane,
            pieces: vec![piece],
        });
    }
    for s in &spec.signs {
        plans.push(plan_sign(frame, s)?);
    }
    for l in &spec.lights {
        plans.push(plan_light(frame, l)?);
    }
    for g in &spec.guardrails {
        plans.push(plan_guardrail(frame, g)?);
    }
    Ok(plans)
}

/// Points drawn uniformly by area over the visible faces of `piece`.
fn sample_piece<R: Rng>(piece: &Piece, density: f64, rng: &mut R) -> Vec<Point3> {
    let mesh = &piece.mesh;
    let faces: Vec<usize> = (0..mesh.faces.len()).filter(|&f| piece.visible[f]).collect();
    let mut cum = Vec::with_capacity(faces.len());
    let mut total = 0.0;
    for &f in &faces {
        let [a, b, c] = mesh.triangle(f);
        total += 0.5 * (b - a).cross(&(c - a)).norm();
        cum.push(total);
    }
    if faces.is_empty() || total <= 0.0 {
        return Vec::new();
    }
    let n = (density * total).round() as usize;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let r = rng.gen::<f64>() * total;
        let k = cum.partition_point(|&c| c <= r).min(faces.len() - 1);
        let f = faces[k];
        let (r1, r2): (f64, f64) = (rng.gen(), rng.gen());
        let sq = r1.sqrt();
        let w = [1.0 - sq, sq * (1.0 - r2), sq * r2];
        if let Some(params) = &piece.params {
            let [i, j, l] = mesh.faces[f];
            let uv = params[i].coords * w[0] + params[j].coords * w[1] + params[l].coords * w[2];
            if piece.holes.iter().any(|h| uv.x >= h[0] && uv.x <= h[1] && uv.y >= h[2] && uv.y <= h[3]) {
                continue;
            }
        }
        let [a, b, c] = mesh.triangle(f);
        out.push(Point3::from(a.coords * w[0] + b.coords * w[1] + c.coords * w[2]));
    }
    out
}

/// Length of an asset: the longest side of its oriented bounding box, taken
/// as the minimum-area rectangle in plan plus the vertical extent.
pub fn obb_length(points: &[Point3]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let (zlo, zhi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.z), hi.max(p.z)));
    let mp: MultiPoint<f64> = points.iter().map(|p| geo::Point::new(p.x, p.y)).collect();
    let plan = mp
        .minimum_rotated_rect()
        .map(|rect| {
            let c: Vec<_> = rect.exterior().coords().copied().collect();
            let side = |i: usize| (c[i + 1].x - c[i].x).hypot(c[i + 1].y - c[i].y);
            if c.len() >= 3 {
                side(0).max(side(1))
            } else {
                0.0
            }
        })
        .unwrap_or(0.0);
    // Collinear input can collapse the rectangle; fall back to the diameter
    // of the axis-aligned box.
    let plan = if plan > 0.0 {
        plan
    } else {
        let (lo, hi) = points.iter().fold(
            (Point2::new(f64::INFINITY, f64::INFINITY), Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY)),
            |(lo, hi), p| (Point2::new(lo.x.min(p.x), lo.y.min(p.y)), Point2::new(hi.x.max(p.x), hi.y.max(p.y))),
        );
        (hi - lo).norm()
    };
    plan.max(zhi - zlo)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "PascalCase")]
pub struct CensusEntry {
    pub semantic: Semantic,
    /// Position among instances of the same semantic.
    pub index: usize,
    pub length: f64,
    pub points: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "PascalCase")]
pub struct CensusRow {
    pub count: usize,
    pub total_length: f64,
}

/// Instance counts and lengths per asset type.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "PascalCase")]
pub struct Census {
    pub instances: Vec<CensusEntry>,
}

impl Census {
    /// Census of already separated instances, in the given order.
    pub fn from_instances<'a>(instances: impl IntoIterator<Item = (Semantic, &'a [Point3])>) -> Self {
        let mut counters: BTreeMap<Semantic, usize> = BTreeMap::new();
        let instances = instances
            .into_iter()
            .map(|(semantic, pts)| {
                let k = counters.entry(semantic).or_insert(0);
                *k += 1;
                CensusEntry {
                    semantic,
                    index: *k - 1,
                    length: obb_length(pts),
                    points: pts.len(),
                }
            })
            .collect();
        Self { instances }
    }

    pub fn rows(&self) -> BTreeMap<Semantic, CensusRow> {
        let mut rows: BTreeMap<Semantic, CensusRow> = BTreeMap::new();
        for e in &self.instances {
            let row = rows.entry(e.semantic).or_default();
            row.count += 1;
            row.total_length += e.length;
        }
        rows
    }

    pub fn counts(&self) -> BTreeMap<Semantic, usize> {
        self.rows().into_iter().map(|(s, r)| (s, r.count)).collect()
    }

    /// One line per asset type, formatted as `count (total length)`.
    pub fn to_table(&self) -> String {
        let rows = self.rows();
        let mut out = String::from("Asset        Instances (total length m)\n");
        for s in Semantic::ALL {
            let r = rows.get(&s).copied().unwrap_or_default();
            out.push_str(&format!("{:<12} {} ({:.0})\n", s.name(), r.count, r.total_length));
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows: serde_json::Map<String, serde_json::Value> = self
            .rows()
            .into_iter()
            .map(|(s, r)| (s.name().to_string(), serde_json::to_value(r).expect("plain struct")))
            .collect();
        serde_json::json!({
            "Instances": self.instances,
            "Summary": rows,
        })
    }
}

/// Ground-truth geometry of one generated instance.
#[derive(Clone, Debug, PartialEq)]
pub struct TruthInstance {
    pub semantic: Semantic,
    pub index: usize,
    pub mesh: Mesh,
}

impl TruthInstance {
    pub fn name(&self) -> String {
        format!("{}_{}", self.semantic.name(), self.index)
    }
}

#[derive(Clone, Debug)]
pub struct Scene {
    pub cloud: LabeledCloud,
    /// Index into `truth` of the instance each point was drawn from.
    pub owner: Vec<usize>,
    pub truth: Vec<TruthInstance>,
    pub census: Census,
}

/// Generates the scene. Each asset draws from its own ChaCha stream keyed
/// by its position in the plan, so output does not depend on thread count.
pub fn generate(spec: &SceneSpec) -> Result<Scene, SynthError> {
    spec.validate()?;
    let frame = Frame::new(spec);
    let plans = plan(spec, &frame)?;
    let noise = (spec.sigma > 0.0).then(|| Normal::new(0.0, spec.sigma).expect("validated sigma"));
    let sampled: Vec<Vec<(Point3, Option<Part>)>> = plans
        .par_iter()
        .enumerate()
        .map(|(k, plan)| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(k as u64);
            let mut pts = Vec::new();
            for piece in &plan.pieces {
                for p in sample_piece(piece, spec.density, &mut rng) {
                    let p = match &noise {
                        Some(d) => p + Vector3::new(d.sample(&mut rng), d.sample(&mut rng), d.sample(&mut rng)),
                        None => p,
                    };
                    pts.push((p, piece.part));
                }
            }
            pts
        })
        .collect();

    let mut cloud = LabeledCloud::default();
    let mut owner = Vec::new();
    let mut truth = Vec::with_capacity(plans.len());
    let mut counters: BTreeMap<Semantic, usize> = BTreeMap::new();
    let mut census = Census::default();
    for (k, (plan, pts)) in plans.into_iter().zip(sampled).enumerate() {
        let mut mesh = Mesh::default();
        for piece in &plan.pieces {
            mesh.append(&piece.mesh);
        }
        let index = counters.entry(plan.semantic).or_insert(0);
        census.instances.push(CensusEntry {
            semantic: plan.semantic,
            index: *index,
            length: obb_length(&mesh.vertices),
            points: pts.len(),
        });
        truth.push(TruthInstance {
            semantic: plan.semantic,
            index: *index,
            mesh,
        });
        *index += 1;
        for (p, part) in pts {
            cloud.push(p, plan.semantic, part);
            owner.push(k);
        }
    }
    Ok(Scene {
        cloud,
        owner,
        truth,
        census,
    })
}

/// Files written by [`write_scene`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScenePaths {
    pub cloud: PathBuf,
    pub truth: PathBuf,
    pub census: PathBuf,
}

/// Writes `cloud.<csv|ply>`, `truth.obj` (one object per instance) and
/// `census.json` into `dir`.
pub fn write_scene(scene: &Scene, dir: &Path, format: CloudFormat) -> Result<ScenePaths, SynthError> {
    std::fs::create_dir_all(dir).map_err(|source| SynthError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let ext = match format {
        CloudFormat::Csv => "csv",
        CloudFormat::Ply => "ply",
    };
    let paths = ScenePaths {
        cloud: dir.join(format!("cloud.{ext}")),
        truth: dir.join("truth.obj"),
        census: dir.join("census.json"),
    };
    scene.cloud.save(&paths.cloud, format)?;
    let named: Vec<NamedMesh> = scene
        .truth
        .iter()
        .map(|t| NamedMesh {
            name: t.name(),
            mesh: t.mesh.clone(),
        })
        .collect();
    mesh::export(&named, &paths.truth, MeshFormat::Obj)?;
    let mut text = serde_json::to_string_pretty(&scene.census.to_json()).expect("census serializes");
    text.push('\n');
    std::fs::write(&paths.census, text).map_err(|source| SynthError::Io {
        path: paths.census.clone(),
        source,
    })?;
    Ok(paths)
}

fn random_ring<R: Rng>(rng: &mut R, n: usize) -> Vec<Point3> {
    (0..n)
        .map(|_| {
            Point3::new(
                rng.gen_range(-1e4..1e4),
                rng.gen_range(-1e4..1e4),
                rng.gen_range(-100.0..100.0),
            )
        })
        .collect()
}

fn random_polygon<R: Rng>(rng: &mut R) -> Polygon3 {
    let n = rng.gen_range(3..9);
    let shell = random_ring(rng, n);
    let holes = (0..rng.gen_range(0..3))
        .map(|_| {
            let k = rng.gen_range(3..6);
            random_ring(rng, k)
        })
        .collect();
    Polygon3::new(shell, holes)
}

fn random_multipolygon<R: Rng>(rng: &mut R, max: usize) -> MultiPolygon3 {
    (0..rng.gen_range(0..=max)).map(|_| random_polygon(rng)).collect()
}

fn random_pair<R: Rng>(rng: &mut R) -> PairSet {
    let front = random_multipolygon(rng, 3);
    let back = front
        .iter()
        .map(|p| p.map_points(|_| Point3::new(rng.gen_range(-1e4..1e4), rng.gen(), rng.gen())))
        .collect();
    PairSet { front, back }
}

/// A structurally valid record with random content, for round-trip testing.
/// Geometry is not meaningful; only the invariants of the schema hold.
pub fn random_record<R: Rng>(rng: &mut R) -> GeometryRecord {
    let semantic = Semantic::ALL[rng.gen_range(0..Semantic::ALL.len())];
    let geometry = match semantic.hyper_asset() {
        HyperAsset::PlaneLike => Geometry::PlaneLike(random_multipolygon(rng, 5)),
        HyperAsset::Guardrail => Geometry::Guardrail((0..rng.gen_range(0..4)).map(|_| random_pair(rng)).collect()),
        HyperAsset::PoleLike => Geometry::PoleLike(PoleLikeGeometry {
            poles: (0..rng.gen_range(1..3)).map(|_| random_multipolygon(rng, 4)).collect(),
            panels: (0..rng.gen_range(0..3)).map(|_| random_pair(rng)).collect(),
            lights: (0..rng.gen_range(0..3)).map(|_| random_multipolygon(rng, 4)).collect(),
        }),
    };
    let segment = ["", "s1", "seg_a", "A11-3"][rng.gen_range(0..4)];
    GeometryRecord {
        meta: RecordMeta::new(semantic, rng.gen_range(0..10_000), segment),
        geometry,
    }
}
