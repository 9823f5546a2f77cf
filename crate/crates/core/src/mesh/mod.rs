//! Triangle meshes built from geometry records, plus OBJ/PLY files.
//!
//! A polygon becomes its triangulated face. A front/back pair or a series of
//! rings becomes a closed solid: the end polygons are the explicit faces and
//! every pair of corresponding edges A-B (front) and C-D (back) adds the two
//! implicit triangles ACD and ADB.

mod io;
mod triangulate;

pub use io::{export, import, read_obj, read_ply, write_obj, write_ply, MeshFormat};
pub use triangulate::{triangulate, TriangulationError};

use crate::record::{Geometry, GeometryRecord, PairSet};
use crate::types::{MultiPolygon3, Point2, Point3, Polygon3, Vector3};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error(transparent)]
    Triangulation(#[from] TriangulationError),
    #[error("polygon has no well-defined plane")]
    Degenerate,
    #[error("front and back polygons are not in one-to-one correspondence")]
    Correspondence,
    #[error("a ring series needs at least 2 rings, got {0}")]
    TooFewRings(usize),
    #[error("ring {index} does not match the vertex layout of ring 0")]
    UnequalRings { index: usize },
    #[error("{path}: {source}")]
    At {
        path: String,
        #[source]
        source: Box<MeshError>,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed mesh file: {0}")]
    Parse(String),
}

impl MeshError {
    fn at(self, path: impl Into<String>) -> Self {
        MeshError::At {
            path: path.into(),
            source: Box::new(self),
        }
    }

    /// Innermost record key path, if the error carries one.
    pub fn key_path(&self) -> Option<String> {
        match self {
            MeshError::At { path, source } => match source.key_path() {
                Some(inner) => Some(format!("{path}/{inner}")),
                None => Some(path.clone()),
            },
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Point3>,
    pub faces: Vec<[usize; 3]>,
}

impl Mesh {
    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn append(&mut self, other: &Mesh) {
        let off = self.vertices.len();
        self.vertices.extend_from_slice(&other.vertices);
        self.faces
            .extend(other.faces.iter().map(|f| [f[0] + off, f[1] + off, f[2] + off]));
    }

    pub fn triangle(&self, f: usize) -> [Point3; 3] {
        self.faces[f].map(|i| self.vertices[i])
    }

    /// Unnormalized face normal; its length is twice the face area.
    pub fn face_normal(&self, f: usize) -> Vector3 {
        let [a, b, c] = self.triangle(f);
        (b - a).cross(&(c - a))
    }

    pub fn area(&self) -> f64 {
        (0..self.faces.len()).map(|f| 0.5 * self.face_normal(f).norm()).sum()
    }

    /// Volume enclosed by a closed, consistently wound mesh; positive when
    /// faces wind counter-clockwise seen from outside.
    pub fn signed_volume(&self) -> f64 {
        // Relative to the first vertex for precision far from the origin.
        let Some(o) = self.vertices.first() else { return 0.0 };
        self.faces
            .iter()
            .map(|f| {
                let [a, b, c] = f.map(|i| self.vertices[i] - o);
                a.dot(&b.cross(&c))
            })
            .sum::<f64>()
            / 6.0
    }

    pub fn flip(&mut self) {
        for f in &mut self.faces {
            f.swap(1, 2);
        }
    }

    fn directed_edges(&self) -> HashMap<(usize, usize), usize> {
        let mut m = HashMap::new();
        for f in &self.faces {
            for k in 0..3 {
                *m.entry((f[k], f[(k + 1) % 3])).or_insert(0) += 1;
            }
        }
        m
    }

    /// Every edge is shared by exactly two faces.
    pub fn is_closed(&self) -> bool {
        let mut undirected: HashMap<(usize, usize), usize> = HashMap::new();
        for ((a, b), n) in self.directed_edges() {
            *undirected.entry((a.min(b), a.max(b))).or_insert(0) += n;
        }
        !undirected.is_empty() && undirected.values().all(|&n| n == 2)
    }

    /// Closed, and each edge is traversed once in each direction.
    pub fn is_closed_and_oriented(&self) -> bool {
        let d = self.directed_edges();
        !d.is_empty() && d.iter().all(|(&(a, b), &n)| n == 1 && d.get(&(b, a)) == Some(&1))
    }

    /// V − E + F over the vertices referenced by faces.
    pub fn euler_characteristic(&self) -> i64 {
        let mut used = vec![false; self.vertices.len()];
        let mut edges = std::collections::HashSet::new();
        for f in &self.faces {
            for k in 0..3 {
                used[f[k]] = true;
                let (a, b) = (f[k], f[(k + 1) % 3]);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        used.iter().filter(|&&u| u).count() as i64 - edges.len() as i64 + self.faces.len() as i64
    }

    /// Merges bit-identical vertices and drops faces that collapse.
    pub fn weld(&mut self) {
        let mut first: HashMap<[u64; 3], usize> = HashMap::new();
        let mut remap = Vec::with_capacity(self.vertices.len());
        let mut verts = Vec::new();
        for p in &self.vertices {
            // +0.0 and -0.0 are the same point.
            let key = [p.x + 0.0, p.y + 0.0, p.z + 0.0].map(f64::to_bits);
            let id = *first.entry(key).or_insert_with(|| {
                verts.push(*p);
                verts.len() - 1
            });
            remap.push(id);
        }
        self.vertices = verts;
        self.faces = self
            .faces
            .iter()
            .map(|f| f.map(|i| remap[i]))
            .filter(|f| f[0] != f[1] && f[1] != f[2] && f[0] != f[2])
            .collect();
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        let n = self.vertices.len();
        if let Some(f) = self.faces.iter().find(|f| f.iter().any(|&i| i >= n)) {
            return Err(MeshError::Parse(format!("face {f:?} indexes past {n} vertices")));
        }
        if self.vertices.iter().any(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite())) {
            return Err(MeshError::Parse("non-finite vertex".into()));
        }
        Ok(())
    }
}

/// A mesh labelled with the record key path it was built from.
#[derive(Clone, Debug, PartialEq)]
pub struct NamedMesh {
    pub name: String,
    pub mesh: Mesh,
}

fn newell(ring: &[Point3]) -> Vector3 {
    let o = ring[0];
    let mut n = Vector3::zeros();
    for i in 0..ring.len() {
        let (a, b) = (ring[i] - o, ring[(i + 1) % ring.len()] - o);
        n += a.cross(&b);
    }
    n
}

/// Orthonormal (u, v) with u × v along `n`.
fn plane_basis(n: &Vector3) -> (Vector3, Vector3) {
    let n = n.normalize();
    let helper = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let u = helper.cross(&n).normalize();
    (u, n.cross(&u))
}

/// Triangulates a 3D polygon projected onto the plane with normal `n`.
/// Triangles wind counter-clockwise around `n`; indices run over the shell
/// followed by the holes.
fn triangulate3(p: &Polygon3, n: &Vector3) -> Result<Vec<[usize; 3]>, MeshError> {
    let (u, v) = plane_basis(n);
    let o = p.shell[0];
    let rings: Vec<Vec<Point2>> = p
        .rings()
        .map(|r| r.iter().map(|q| Point2::new((q - o).dot(&u), (q - o).dot(&v))).collect())
        .collect();
    Ok(triangulate(&rings)?)
}

/// Upward faces of plane-like polygons, optionally extruded downwards by
/// `thickness` into closed prisms.
pub fn mesh_plane_like(polygons: &MultiPolygon3, thickness: Option<f64>) -> Result<Mesh, MeshError> {
    let mut mesh = Mesh::default();
    for (i, p) in polygons.iter().enumerate() {
        let part = match thickness {
            Some(t) => {
                let back = p.map_points(|q| Point3::new(q.x, q.y, q.z - t));
                loft(&[p.clone(), back], Some(Vector3::z()))
            }
            None => triangulate3(p, &Vector3::z()).map(|faces| Mesh {
                vertices: p.rings().flatten().copied().collect(),
                faces,
            }),
        };
        mesh.append(&part.map_err(|e| e.at(format!("MultiPolygon/Polygon_{i}")))?);
    }
    Ok(mesh)
}

/// Closed solid between corresponding front and back polygons.
pub fn mesh_pair(front: &Polygon3, back: &Polygon3) -> Result<Mesh, MeshError> {
    if !front.corresponds_to(back) {
        return Err(MeshError::Correspondence);
    }
    loft(&[front.clone(), back.clone()], None)
}

/// Closed solid lofted through an ordered series of corresponding rings.
pub fn mesh_ring_series(rings: &[Polygon3]) -> Result<Mesh, MeshError> {
    if rings.len() < 2 {
        return Err(MeshError::TooFewRings(rings.len()));
    }
    if let Some(index) = rings.iter().position(|r| !r.corresponds_to(&rings[0])) {
        return Err(MeshError::UnequalRings { index });
    }
    loft(rings, None)
}

fn loft(rings: &[Polygon3], normal: Option<Vector3>) -> Result<Mesh, MeshError> {
    let first = &rings[0];
    if first.shell.len() < 3 {
        return Err(MeshError::Degenerate);
    }
    let n = normal.unwrap_or_else(|| newell(&first.shell));
    if !(n.norm() > 0.0) || !n.iter().all(|c| c.is_finite()) {
        return Err(MeshError::Degenerate);
    }
    // Shell counter-clockwise and holes clockwise around n, with the same
    // reversal applied to every ring so correspondence is kept.
    let reverse: Vec<bool> = first
        .rings()
        .enumerate()
        .map(|(k, r)| (newell(r).dot(&n) > 0.0) != (k == 0))
        .collect();
    let oriented: Vec<Polygon3> = rings
        .iter()
        .map(|p| {
            let mut q = p.clone();
            for (k, ring) in std::iter::once(&mut q.shell).chain(q.holes.iter_mut()).enumerate() {
                if reverse[k] {
                    ring.reverse();
                }
            }
            q
        })
        .collect();

    let per = first.vertex_count();
    let mut mesh = Mesh {
        vertices: oriented.iter().flat_map(|p| p.rings().flatten().copied()).collect(),
        faces: Vec::new(),
    };
    mesh.faces.extend(triangulate3(&oriented[0], &n)?);
    let last = oriented.len() - 1;
    let back_off = last * per;
    // A curved series can end square to where it started, so the far cap is
    // projected along its own normal. Rings share one winding, so that normal
    // points the same way along the series as `n` does.
    let n_last = match normal {
        Some(n) => n,
        None => newell(&oriented[last].shell),
    };
    if !(n_last.norm() > 0.0) || !n_last.iter().all(|c| c.is_finite()) {
        return Err(MeshError::Degenerate);
    }
    mesh.faces.extend(
        triangulate3(&oriented[last], &n_last)?
            .into_iter()
            .map(|[a, b, c]| [a + back_off, c + back_off, b + back_off]),
    );
    let ring_lens: Vec<usize> = first.rings().map(Vec::len).collect();
    for s in 0..last {
        let (f0, b0) = (s * per, (s + 1) * per);
        let mut start = 0;
        for &len in &ring_lens {
            for i in 0..len {
                let j = (i + 1) % len;
                let (a, b) = (f0 + start + i, f0 + start + j);
                let (c, d) = (b0 + start + i, b0 + start + j);
                mesh.faces.push([a, c, d]);
                mesh.faces.push([a, d, b]);
            }
            start += len;
        }
    }
    mesh.weld();
    if mesh.signed_volume() < 0.0 {
        mesh.flip();
    }
    Ok(mesh)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MeshOptions {
    /// Extrude plane-like faces downwards by this many metres.
    pub thickness: Option<f64>,
}

fn pair_set_mesh(pair: &PairSet) -> Result<Mesh, MeshError> {
    let mut mesh = Mesh::default();
    for (i, (f, b)) in pair.front.iter().zip(&pair.back).enumerate() {
        mesh.append(&mesh_pair(f, b).map_err(|e| e.at(format!("Front/MultiPolygon/Polygon_{i}")))?);
    }
    Ok(mesh)
}

/// One mesh per leaf group of the record, named by its key path.
pub fn build_record_mesh(record: &GeometryRecord, options: &MeshOptions) -> Result<Vec<NamedMesh>, MeshError> {
    let named = |name: String, r: Result<Mesh, MeshError>| {
        r.map(|mesh| NamedMesh { name: name.clone(), mesh }).map_err(|e| e.at(name))
    };
    match &record.geometry {
        Geometry::PlaneLike(m) => Ok(vec![NamedMesh {
            name: "MultiPolygon".into(),
            mesh: mesh_plane_like(m, options.thickness)?,
        }]),
        Geometry::Guardrail(segs) => segs
            .iter()
            .enumerate()
            .map(|(i, s)| named(format!("Guardrail_{i}"), pair_set_mesh(s)))
            .collect(),
        Geometry::PoleLike(g) => {
            let mut out = Vec::new();
            for (i, p) in g.poles.iter().enumerate() {
                out.push(named(format!("Poles/Pole_{i}"), mesh_ring_series(p))?);
            }
            for (i, p) in g.panels.iter().enumerate() {
                out.push(named(format!("Panels/Panel_{i}"), pair_set_mesh(p))?);
            }
            for (i, l) in g.lights.iter().enumerate() {
                out.push(named(format!("Lights/Light_{i}"), mesh_ring_series(l))?);
            }
            Ok(out)
        }
    }
}

/// All meshes of a record merged into one.
pub fn merged(meshes: &[NamedMesh]) -> Mesh {
    let mut m = Mesh::default();
    for n in meshes {
        m.append(&n.mesh);
    }
    m
}
