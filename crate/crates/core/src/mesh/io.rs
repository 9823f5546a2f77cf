//! OBJ (text, 17 significant digits) and binary little-endian PLY files.

use super::{Mesh, MeshError, NamedMesh};
use crate::types::Point3;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshFormat {
    #[default]
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn extension(self) -> &'static str {
        match self {
            MeshFormat::Obj => "obj",
            MeshFormat::Ply => "ply",
        }
    }
}

impl fmt::Display for MeshFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

impl FromStr for MeshFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "obj" => Ok(MeshFormat::Obj),
            "ply" => Ok(MeshFormat::Ply),
            _ => Err(format!("unknown mesh format `{s}` (expected obj or ply)")),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> MeshError + '_ {
    move |source| MeshError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn clean_name(name: &str) -> String {
    let s: String = name.chars().map(|c| if c.is_whitespace() { '_' } else { c }).collect();
    if s.is_empty() {
        "mesh".into()
    } else {
        s
    }
}

pub fn write_obj<W: Write>(meshes: &[NamedMesh], mut w: W) -> std::io::Result<()> {
    writeln!(w, "# roadtwin mesh")?;
    let mut base = 1;
    for m in meshes {
        writeln!(w, "o {}", clean_name(&m.name))?;
        for p in &m.mesh.vertices {
            writeln!(w, "v {:.16e} {:.16e} {:.16e}", p.x, p.y, p.z)?;
        }
        for f in &m.mesh.faces {
            writeln!(w, "f {} {} {}", f[0] + base, f[1] + base, f[2] + base)?;
        }
        base += m.mesh.vertices.len();
    }
    w.flush()
}

fn parse_err(line: usize, msg: impl fmt::Display) -> MeshError {
    MeshError::Parse(format!("line {line}: {msg}"))
}

/// Reads `o` groups; faces with more than three corners are fanned.
pub fn read_obj<R: BufRead>(r: R) -> Result<Vec<NamedMesh>, MeshError> {
    struct Group {
        name: String,
        first_vertex: usize,
        faces: Vec<Vec<usize>>,
    }
    let mut verts: Vec<Point3> = Vec::new();
    let mut groups: Vec<Group> = Vec::new();
    for (ln, line) in r.lines().enumerate() {
        let line = line.map_err(|e| MeshError::Parse(e.to_string()))?;
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("o") | Some("g") => groups.push(Group {
                name: tok.collect::<Vec<_>>().join(" "),
                first_vertex: verts.len(),
                faces: Vec::new(),
            }),
            Some("v") => {
                let c: Vec<f64> = tok
                    .take(3)
                    .map(|t| t.parse::<f64>().map_err(|e| parse_err(ln + 1, e)))
                    .collect::<Result<_, _>>()?;
                if c.len() != 3 {
                    return Err(parse_err(ln + 1, "vertex needs 3 coordinates"));
                }
                verts.push(Point3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let mut idx = Vec::new();
                for t in tok {
                    let head = t.split('/').next().unwrap_or("");
                    let i: i64 = head.parse().map_err(|_| parse_err(ln + 1, format!("bad index `{t}`")))?;
                    let abs = if i > 0 { i - 1 } else { verts.len() as i64 + i };
                    if abs < 0 || abs as usize >= verts.len() {
                        return Err(parse_err(ln + 1, format!("index {i} out of range")));
                    }
                    idx.push(abs as usize);
                }
                if idx.len() < 3 {
                    return Err(parse_err(ln + 1, "face needs at least 3 vertices"));
                }
                if groups.is_empty() {
                    groups.push(Group {
                        name: "mesh".into(),
                        first_vertex: 0,
                        faces: Vec::new(),
                    });
                }
                groups.last_mut().expect("group exists").faces.push(idx);
            }
            _ => {}
        }
    }
    let n_groups = groups.len();
    let mut out = Vec::with_capacity(n_groups);
    for (g, group) in groups.iter().enumerate() {
        let end = groups.get(g + 1).map_or(verts.len(), |n| n.first_vertex);
        let mut local: Vec<Point3> = verts[group.first_vertex..end].to_vec();
        let mut foreign = std::collections::HashMap::new();
        let mut map = |i: usize, local: &mut Vec<Point3>| {
            if (group.first_vertex..end).contains(&i) {
                i - group.first_vertex
            } else {
                *foreign.entry(i).or_insert_with(|| {
                    local.push(verts[i]);
                    local.len() - 1
                })
            }
        };
        let mut faces = Vec::new();
        for f in &group.faces {
            let ids: Vec<usize> = f.iter().map(|&i| map(i, &mut local)).collect();
            for k in 1..ids.len() - 1 {
                faces.push([ids[0], ids[k], ids[k + 1]]);
            }
        }
        out.push(NamedMesh {
            name: group.name.clone(),
            mesh: Mesh { vertices: local, faces },
        });
    }
    Ok(out)
}

pub fn write_ply<W: Write>(meshes: &[NamedMesh], mut w: W) -> std::io::Result<()> {
    let nv: usize = meshes.iter().map(|m| m.mesh.vertices.len()).sum();
    let nf: usize = meshes.iter().map(|m| m.mesh.faces.len()).sum();
    writeln!(w, "ply")?;
    writeln!(w, "format binary_little_endian 1.0")?;
    writeln!(w, "comment roadtwin mesh")?;
    for m in meshes {
        writeln!(
            w,
            "comment object {} {} {}",
            clean_name(&m.name),
            m.mesh.vertices.len(),
            m.mesh.faces.len()
        )?;
    }
    writeln!(w, "element vertex {nv}")?;
    for c in ["x", "y", "z"] {
        writeln!(w, "property double {c}")?;
    }
    writeln!(w, "element face {nf}")?;
    writeln!(w, "property list uchar uint vertex_indices")?;
    writeln!(w, "end_header")?;
    for m in meshes {
        for p in &m.mesh.vertices {
            for c in [p.x, p.y, p.z] {
                w.write_all(&c.to_le_bytes())?;
            }
        }
    }
    let mut base = 0u32;
    for m in meshes {
        for f in &m.mesh.faces {
            w.write_all(&[3u8])?;
            for i in f {
                w.write_all(&(*i as u32 + base).to_le_bytes())?;
            }
        }
        base += m.mesh.vertices.len() as u32;
    }
    w.flush()
}

#[derive(Clone, Copy)]
enum Scalar {
    U8,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "uchar" | "uint8" | "char" | "int8" => Scalar::U8,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn read<R: Read>(self, r: &mut R) -> Result<f64, MeshError> {
        let mut b = [0u8; 8];
        let n = match self {
            Scalar::U8 => 1,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        };
        r.read_exact(&mut b[..n]).map_err(|e| MeshError::Parse(format!("truncated body: {e}")))?;
        Ok(match self {
            Scalar::U8 => b[0] as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().expect("4 bytes")) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().expect("4 bytes")) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().expect("4 bytes")) as f64,
            Scalar::F64 => f64::from_le_bytes(b),
        })
    }
}

/// Reads binary little-endian PLY with x/y/z vertices and list faces.
/// Object boundaries written by [`write_ply`] are restored.
pub fn read_ply<R: BufRead>(mut r: R) -> Result<Vec<NamedMesh>, MeshError> {
    let mut line = String::new();
    let next_line = |r: &mut R, line: &mut String| -> Result<(), MeshError> {
        line.clear();
        if r.read_line(line).map_err(|e| MeshError::Parse(e.to_string()))? == 0 {
            return Err(MeshError::Parse("header ended early".into()));
        }
        Ok(())
    };
    next_line(&mut r, &mut line)?;
    if line.trim() != "ply" {
        return Err(MeshError::Parse("missing `ply` magic".into()));
    }
    let mut objects: Vec<(String, usize, usize)> = Vec::new();
    let (mut nv, mut nf) = (0usize, 0usize);
    let mut vprops: Vec<(String, Scalar)> = Vec::new();
    let mut flist: Option<(Scalar, Scalar)> = None;
    let mut current = "";
    loop {
        next_line(&mut r, &mut line)?;
        let t: Vec<&str> = line.split_whitespace().collect();
        match t.as_slice() {
            ["end_header"] => break,
            ["format", f, _] if *f != "binary_little_endian" => {
                return Err(MeshError::Parse(format!("unsupported PLY format `{f}`")))
            }
            ["comment", "object", name, v, f] => {
                let p = |s: &str| s.parse::<usize>().map_err(|e| MeshError::Parse(e.to_string()));
                objects.push((name.to_string(), p(v)?, p(f)?));
            }
            ["element", "vertex", n] => {
                nv = n.parse().map_err(|_| MeshError::Parse("bad vertex count".into()))?;
                current = "vertex";
            }
            ["element", "face", n] => {
                nf = n.parse().map_err(|_| MeshError::Parse("bad face count".into()))?;
                current = "face";
            }
            ["element", ..] => return Err(MeshError::Parse("unsupported element".into())),
            ["property", "list", c, i, _] if current == "face" => {
                let s = |x: &str| Scalar::parse(x).ok_or_else(|| MeshError::Parse(format!("unknown type `{x}`")));
                flist = Some((s(c)?, s(i)?));
            }
            ["property", ty, name] if current == "vertex" => {
                let s = Scalar::parse(ty).ok_or_else(|| MeshError::Parse(format!("unknown type `{ty}`")))?;
                vprops.push((name.to_string(), s));
            }
            _ => {}
        }
    }
    let pos = |n: &str| vprops.iter().position(|(p, _)| p == n);
    let (Some(ix), Some(iy), Some(iz)) = (pos("x"), pos("y"), pos("z")) else {
        return Err(MeshError::Parse("vertex element lacks x/y/z".into()));
    };
    let mut verts = Vec::with_capacity(nv);
    let mut vals = vec![0.0; vprops.len()];
    for _ in 0..nv {
        for (k, (_, s)) in vprops.iter().enumerate() {
            vals[k] = s.read(&mut r)?;
        }
        verts.push(Point3::new(vals[ix], vals[iy], vals[iz]));
    }
    let (cnt, idx) = flist.unwrap_or((Scalar::U8, Scalar::U32));
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let n = cnt.read(&mut r)? as usize;
        let ids: Vec<usize> = (0..n).map(|_| idx.read(&mut r).map(|v| v as usize)).collect::<Result<_, _>>()?;
        if ids.iter().any(|&i| i >= nv) || n < 3 {
            return Err(MeshError::Parse("face index out of range".into()));
        }
        for k in 1..n - 1 {
            faces.push([ids[0], ids[k], ids[k + 1]]);
        }
    }
    if objects.is_empty() {
        objects.push(("mesh".into(), nv, faces.len()));
    }
    let (mut v0, mut f0) = (0, 0);
    let mut out = Vec::new();
    for (name, cv, cf) in objects {
        if v0 + cv > verts.len() || f0 + cf > faces.len() {
            return Err(MeshError::Parse("object table exceeds element counts".into()));
        }
        let faces = faces[f0..f0 + cf]
            .iter()
            .map(|f| {
                if f.iter().all(|&i| (v0..v0 + cv).contains(&i)) {
                    Ok(f.map(|i| i - v0))
                } else {
                    Err(MeshError::Parse(format!("object `{name}` references another object's vertices")))
                }
            })
            .collect::<Result<_, _>>()?;
        out.push(NamedMesh {
            name,
            mesh: Mesh {
                vertices: verts[v0..v0 + cv].to_vec(),
                faces,
            },
        });
        v0 += cv;
        f0 += cf;
    }
    Ok(out)
}

/// Writes `meshes` to `path`; returns the byte count.
pub fn export(meshes: &[NamedMesh], path: &Path, format: MeshFormat) -> Result<u64, MeshError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    match format {
        MeshFormat::Obj => write_obj(meshes, &mut w),
        MeshFormat::Ply => write_ply(meshes, &mut w),
    }
    .map_err(io_err(path))?;
    drop(w);
    Ok(std::fs::metadata(path).map_err(io_err(path))?.len())
}

pub fn import(path: &Path) -> Result<Vec<NamedMesh>, MeshError> {
    let r = BufReader::new(File::open(path).map_err(io_err(path))?);
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("ply") => read_ply(r),
        _ => read_obj(r),
    }
}
