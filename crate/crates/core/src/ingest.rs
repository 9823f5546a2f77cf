//! Labeled point clouds: loading, saving, preprocessing and label partitioning.
//!
//! Two on-disk formats are understood. CSV files carry a `x,y,z,semantic[,part]`
//! header with one point per row; part is empty for points without a part
//! label. PLY files (ASCII or binary little-endian) carry a `vertex` element with
//! `x`, `y`, `z`, `semantic` and an optional `part` property where 255 means
//! "no part".

use crate::spatial::GridIndex;
use crate::types::{Part, Point3, Semantic};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: unknown semantic code {code}")]
    UnknownSemantic { line: usize, code: i64 },
    #[error("line {line}: unknown part code {code}")]
    UnknownPart { line: usize, code: i64 },
    #[error("line {line}: part label on a {semantic} point")]
    PartOnNonPoleLike { line: usize, semantic: Semantic },
    #[error("point {index} has a non-finite coordinate")]
    NonFinite { index: usize },
    #[error("cloud contains no points")]
    Empty,
    #[error("preprocessing removed every point")]
    AllRemoved,
    #[error("invalid preprocessing parameters: {0}")]
    InvalidParams(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CloudFormat {
    Csv,
    Ply,
}

impl CloudFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(CloudFormat::Csv),
            "ply" => Some(CloudFormat::Ply),
            _ => None,
        }
    }
}

/// Points with one semantic label each and an optional part label.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct LabeledCloud {
    pub points: Vec<Point3>,
    pub semantic: Vec<Semantic>,
    pub part: Vec<Option<Part>>,
}

impl LabeledCloud {
    /// Builds a cloud, checking the label invariants. An empty cloud is
    /// allowed here; loaders reject it separately.
    pub fn new(
        points: Vec<Point3>,
        semantic: Vec<Semantic>,
        part: Vec<Option<Part>>,
    ) -> Result<Self, IngestError> {
        assert_eq!(points.len(), semantic.len(), "label count mismatch");
        assert_eq!(points.len(), part.len(), "part label count mismatch");
        for (i, p) in points.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(IngestError::NonFinite { index: i });
            }
            if part[i].is_some() && !semantic[i].is_pole_like() {
                return Err(IngestError::PartOnNonPoleLike {
                    line: i + 1,
                    semantic: semantic[i],
                });
            }
        }
        Ok(Self {
            points,
            semantic,
            part,
        })
    }

    /// All points share one semantic label and carry no part label.
    pub fn uniform(points: Vec<Point3>, semantic: Semantic) -> Self {
        let n = points.len();
        Self {
            points,
            semantic: vec![semantic; n],
            part: vec![None; n],
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn push(&mut self, p: Point3, semantic: Semantic, part: Option<Part>) {
        self.points.push(p);
        self.semantic.push(semantic);
        self.part.push(part);
    }

    pub fn extend(&mut self, other: &LabeledCloud) {
        self.points.extend_from_slice(&other.points);
        self.semantic.extend_from_slice(&other.semantic);
        self.part.extend_from_slice(&other.part);
    }

    pub fn subset(&self, indices: &[usize]) -> LabeledCloud {
        LabeledCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            semantic: indices.iter().map(|&i| self.semantic[i]).collect(),
            part: indices.iter().map(|&i| self.part[i]).collect(),
        }
    }

    /// The dominant semantic label (most frequent, lowest code on ties).
    pub fn majority_semantic(&self) -> Option<Semantic> {
        let mut counts = [0usize; 6];
        for s in &self.semantic {
            counts[s.code() as usize] += 1;
        }
        let (code, &count) = counts
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))?;
        (count > 0).then(|| Semantic::from_code(code as u8)).flatten()
    }

    /// Splits the cloud by semantic label, preserving point order inside
    /// each class.
    pub fn partition_by_semantic(&self) -> BTreeMap<Semantic, LabeledCloud> {
        let mut out: BTreeMap<Semantic, LabeledCloud> = BTreeMap::new();
        for i in 0..self.len() {
            out.entry(self.semantic[i])
                .or_default()
                .push(self.points[i], self.semantic[i], self.part[i]);
        }
        out
    }

    pub fn bounds(&self) -> Option<(Point3, Point3)> {
        let first = *self.points.first()?;
        Some(self.points.iter().fold((first, first), |(lo, hi), p| {
            (
                Point3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z)),
                Point3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z)),
            )
        }))
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::with_capacity(self.len() * 48 + 32);
        let with_part = self.part.iter().any(Option::is_some);
        s.push_str(if with_part { "x,y,z,semantic,part\n" } else { "x,y,z,semantic\n" });
        for i in 0..self.len() {
            let p = &self.points[i];
            let _ = write!(s, "{},{},{},{}", p.x, p.y, p.z, self.semantic[i].code());
            if with_part {
                s.push(',');
                if let Some(part) = self.part[i] {
                    let _ = write!(s, "{}", part.code());
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), IngestError> {
        fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn write_ply<W: Write>(&self, mut w: W, binary: bool) -> Result<(), IngestError> {
        let format = if binary { "binary_little_endian" } else { "ascii" };
        write!(
            w,
            "ply\nformat {format} 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nproperty uchar semantic\nproperty uchar part\nend_header\n",
            self.len()
        )?;
        for i in 0..self.len() {
            let p = &self.points[i];
            let part = self.part[i].map_or(255u8, Part::code);
            if binary {
                w.write_all(&p.x.to_le_bytes())?;
                w.write_all(&p.y.to_le_bytes())?;
                w.write_all(&p.z.to_le_bytes())?;
                w.write_all(&[self.semantic[i].code(), part])?;
            } else {
                writeln!(w, "{} {} {} {} {}", p.x, p.y, p.z, self.semantic[i].code(), part)?;
            }
        }
        Ok(())
    }

    pub fn save_ply(&self, path: &Path, binary: bool) -> Result<(), IngestError> {
        let file = fs::File::create(path)?;
        let mut w = io::BufWriter::new(file);
        self.write_ply(&mut w, binary)?;
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path, format: CloudFormat) -> Result<(), IngestError> {
        match format {
            CloudFormat::Csv => self.save_csv(path),
            CloudFormat::Ply => self.save_ply(path, true),
        }
    }
}

pub fn load_cloud(path: &Path, format: CloudFormat) -> Result<LabeledCloud, IngestError> {
    let file = fs::File::open(path)?;
    let reader = BufReader::new(file);
    let cloud = match format {
        CloudFormat::Csv => parse_csv(reader)?,
        CloudFormat::Ply => parse_ply(reader)?,
    };
    if cloud.is_empty() {
        return Err(IngestError::Empty);
    }
    Ok(cloud)
}

fn semantic_from(line: usize, code: i64) -> Result<Semantic, IngestError> {
    u8::try_from(code)
        .ok()
        .and_then(Semantic::from_code)
        .ok_or(IngestError::UnknownSemantic { line, code })
}

fn part_from(line: usize, code: i64) -> Result<Part, IngestError> {
    u8::try_from(code)
        .ok()
        .and_then(Part::from_code)
        .ok_or(IngestError::UnknownPart { line, code })
}

fn push_checked(
    cloud: &mut LabeledCloud,
    line: usize,
    p: Point3,
    semantic: Semantic,
    part: Option<Part>,
) -> Result<(), IngestError> {
    if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
        return Err(IngestError::Parse {
            line,
            msg: "non-finite coordinate".into(),
        });
    }
    if part.is_some() && !semantic.is_pole_like() {
        return Err(IngestError::PartOnNonPoleLike { line, semantic });
    }
    cloud.push(p, semantic, part);
    Ok(())
}

pub fn parse_csv<R: BufRead>(reader: R) -> Result<LabeledCloud, IngestError> {
    let mut lines = reader.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, line)) => {
                let line = line?;
                if !line.trim().is_empty() {
                    break line;
                }
            }
            None => return Err(IngestError::Empty),
        }
    };
    let columns: Vec<String> = header.split(',').map(|c| c.trim().to_ascii_lowercase()).collect();
    let with_part = match columns.as_slice() {
        [x, y, z, s] if x == "x" && y == "y" && z == "z" && s == "semantic" => false,
        [x, y, z, s, p] if x == "x" && y == "y" && z == "z" && s == "semantic" && p == "part" => true,
        _ => {
            return Err(IngestError::Parse {
                line: 1,
                msg: format!("expected header `x,y,z,semantic[,part]`, found `{header}`"),
            })
        }
    };
    let mut cloud = LabeledCloud::default();
    for (idx, line) in lines {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        let expected = if with_part { 5 } else { 4 };
        // A trailing empty part column may be omitted.
        if fields.len() != expected && !(with_part && fields.len() == 4) {
            return Err(IngestError::Parse {
                line: lineno,
                msg: format!("expected {expected} fields, found {}", fields.len()),
            });
        }
        let num = |s: &str| -> Result<f64, IngestError> {
            s.parse::<f64>().map_err(|e| IngestError::Parse {
                line: lineno,
                msg: format!("bad number `{s}`: {e}"),
            })
        };
        let int = |s: &str| -> Result<i64, IngestError> {
            s.parse::<i64>().map_err(|e| IngestError::Parse {
                line: lineno,
                msg: format!("bad label `{s}`: {e}"),
            })
        };
        let p = Point3::new(num(fields[0])?, num(fields[1])?, num(fields[2])?);
        let semantic = semantic_from(lineno, int(fields[3])?)?;
        let part = match fields.get(4) {
            Some(s) if !s.is_empty() => Some(part_from(lineno, int(s)?)?),
            _ => None,
        };
        push_checked(&mut cloud, lineno, p, semantic, part)?;
    }
    Ok(cloud)
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum PlyType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl PlyType {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => PlyType::I8,
            "uchar" | "uint8" => PlyType::U8,
            "short" | "int16" => PlyType::I16,
            "ushort" | "uint16" => PlyType::U16,
            "int" | "int32" => PlyType::I32,
            "uint" | "uint32" => PlyType::U32,
            "float" | "float32" => PlyType::F32,
            "double" | "float64" => PlyType::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            PlyType::I8 | PlyType::U8 => 1,
            PlyType::I16 | PlyType::U16 => 2,
            PlyType::I32 | PlyType::U32 | PlyType::F32 => 4,
            PlyType::F64 => 8,
        }
    }

    fn decode(self, b: &[u8]) -> f64 {
        match self {
            PlyType::I8 => b[0] as i8 as f64,
            PlyType::U8 => b[0] as f64,
            PlyType::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            PlyType::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            PlyType::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            PlyType::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            PlyType::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            PlyType::F64 => f64::from_le_bytes(b[..8].try_into().expect("8 bytes")),
        }
    }
}

pub fn parse_ply<R: BufRead>(mut reader: R) -> Result<LabeledCloud, IngestError> {
    let perr = |line: usize, msg: &str| IngestError::Parse {
        line,
        msg: msg.to_string(),
    };
    let mut line = String::new();
    let mut lineno = 0usize;
    let mut next_line = |reader: &mut R, line: &mut String| -> Result<usize, IngestError> {
        line.clear();
        let n = reader.read_line(line)?;
        lineno += 1;
        if n == 0 {
            return Err(IngestError::Parse {
                line: lineno,
                msg: "unexpected end of header".into(),
            });
        }
        Ok(lineno)
    };
    let l = next_line(&mut reader, &mut line)?;
    if line.trim() != "ply" {
        return Err(perr(l, "missing `ply` magic"));
    }
    let mut binary = None;
    let mut vertex_count = None;
    let mut props: Vec<(String, PlyType)> = Vec::new();
    let mut in_vertex = false;
    let mut seen_other_element_first = false;
    loop {
        let l = next_line(&mut reader, &mut line)?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["format", "ascii", _] => binary = Some(false),
            ["format", "binary_little_endian", _] => binary = Some(true),
            ["format", other, _] => return Err(perr(l, &format!("unsupported format `{other}`"))),
            ["comment", ..] | ["obj_info", ..] => {}
            ["element", "vertex", n] => {
                if vertex_count.is_none() && seen_other_element_first {
                    return Err(perr(l, "vertex element must come first"));
                }
                vertex_count = Some(n.parse::<usize>().map_err(|_| perr(l, "bad vertex count"))?);
                in_vertex = true;
            }
            ["element", ..] => {
                if vertex_count.is_none() {
                    seen_other_element_first = true;
                }
                in_vertex = false;
            }
            ["property", "list", ..] => {
                if in_vertex {
                    return Err(perr(l, "list properties on vertices are not supported"));
                }
            }
            ["property", ty, name] => {
                if in_vertex {
                    let ty = PlyType::parse(ty).ok_or_else(|| perr(l, &format!("unknown type `{ty}`")))?;
                    props.push((name.to_string(), ty));
                }
            }
            ["end_header"] => break,
            [] => {}
            _ => return Err(perr(l, &format!("unexpected header line `{}`", line.trim()))),
        }
    }
    let header_lines = lineno;
    let binary = binary.ok_or_else(|| perr(header_lines, "missing format line"))?;
    let n = vertex_count.ok_or_else(|| perr(header_lines, "missing vertex element"))?;
    let find = |name: &str| props.iter().position(|(p, _)| p == name);
    let (ix, iy, iz) = match (find("x"), find("y"), find("z")) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err(perr(header_lines, "vertex element needs x, y, z")),
    };
    let isem = find("semantic").ok_or_else(|| perr(header_lines, "vertex element needs `semantic`"))?;
    let ipart = find("part");
    let mut cloud = LabeledCloud::default();
    let mut values = vec![0.0f64; props.len()];
    if binary {
        let stride: usize = props.iter().map(|(_, t)| t.size()).sum();
        let mut buf = vec![0u8; stride];
        for k in 0..n {
            reader.read_exact(&mut buf).map_err(|e| IngestError::Parse {
                line: header_lines + k + 1,
                msg: format!("truncated vertex data: {e}"),
            })?;
            let mut off = 0;
            for (j, (_, t)) in props.iter().enumerate() {
                values[j] = t.decode(&buf[off..off + t.size()]);
                off += t.size();
            }
            push_ply_vertex(&mut cloud, header_lines + k + 1, &values, (ix, iy, iz, isem, ipart))?;
        }
    } else {
        let mut k = 0;
        while k < n {
            line.clear();
            if reader.read_line(&mut line)? == 0 {
                return Err(perr(header_lines + k + 1, "truncated vertex data"));
            }
            let l = header_lines + k + 1;
            if line.trim().is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() < props.len() {
                return Err(perr(l, "too few vertex values"));
            }
            for j in 0..props.len() {
                values[j] = toks[j]
                    .parse::<f64>()
                    .map_err(|_| perr(l, &format!("bad value `{}`", toks[j])))?;
            }
            push_ply_vertex(&mut cloud, l, &values, (ix, iy, iz, isem, ipart))?;
            k += 1;
        }
    }
    Ok(cloud)
}

fn push_ply_vertex(
    cloud: &mut LabeledCloud,
    line: usize,
    values: &[f64],
    (ix, iy, iz, isem, ipart): (usize, usize, usize, usize, Option<usize>),
) -> Result<(), IngestError> {
    let p = Point3::new(values[ix], values[iy], values[iz]);
    let semantic = semantic_from(line, values[isem] as i64)?;
    let part = match ipart.map(|i| values[i] as i64) {
        None | Some(255) => None,
        Some(code) => Some(part_from(line, code)?),
    };
    push_checked(cloud, line, p, semantic, part)
}

/// Optional downsampling and statistical outlier removal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessParams {
    /// Voxel edge in meters; 0 disables downsampling.
    pub voxel_size: f64,
    pub outlier_neighbors: usize,
    /// 0 disables outlier removal.
    pub outlier_std_ratio: f64,
}

impl Default for PreprocessParams {
    fn default() -> Self {
        Self {
            voxel_size: 0.02,
            outlier_neighbors: 16,
            outlier_std_ratio: 2.0,
        }
    }
}

impl PreprocessParams {
    pub fn disabled() -> Self {
        Self {
            voxel_size: 0.0,
            outlier_neighbors: 16,
            outlier_std_ratio: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if !(self.voxel_size >= 0.0 && self.voxel_size.is_finite()) {
            return Err(IngestError::InvalidParams("voxel_size must be >= 0".into()));
        }
        if self.outlier_neighbors < 1 {
            return Err(IngestError::InvalidParams("outlier_neighbors must be >= 1".into()));
        }
        if !(self.outlier_std_ratio >= 0.0 && self.outlier_std_ratio.is_finite()) {
            return Err(IngestError::InvalidParams("outlier_std_ratio must be >= 0".into()));
        }
        Ok(())
    }
}

pub fn preprocess(cloud: &LabeledCloud, params: &PreprocessParams) -> Result<LabeledCloud, IngestError> {
    params.validate()?;
    if cloud.is_empty() {
        return Err(IngestError::Empty);
    }
    let mut current = cloud.clone();
    if params.voxel_size > 0.0 {
        let keep = voxel_representatives(&current.points, params.voxel_size);
        current = current.subset(&keep);
    }
    if params.outlier_std_ratio > 0.0 && current.len() > 1 {
        let keep = statistical_inliers(&current.points, params.outlier_neighbors, params.outlier_std_ratio);
        current = current.subset(&keep);
    }
    if current.is_empty() {
        return Err(IngestError::AllRemoved);
    }
    Ok(current)
}

/// One point per occupied voxel: the sample nearest the voxel centroid (lowest
/// index on ties). Returned indices are ascending.
pub fn voxel_representatives(points: &[Point3], voxel: f64) -> Vec<usize> {
    let key = |p: &Point3| {
        (
            (p.x / voxel).floor() as i64,
            (p.y / voxel).floor() as i64,
            (p.z / voxel).floor() as i64,
        )
    };
    let mut groups: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        groups.entry(key(p)).or_default().push(i);
    }
    let mut keep: Vec<usize> = groups
        .into_values()
        .map(|members| {
            let n = members.len() as f64;
            let c = members
                .iter()
                .fold(nalgebra::Vector3::zeros(), |acc, &i| acc + points[i].coords)
                / n;
            *members
                .iter()
                .min_by(|&&a, &&b| {
                    let da = (points[a].coords - c).norm_squared();
                    let db = (points[b].coords - c).norm_squared();
                    da.total_cmp(&db).then(a.cmp(&b))
                })
                .expect("non-empty voxel")
        })
        .collect();
    keep.sort_unstable();
    keep
}

/// Mean distance from every point to its `k` nearest neighbors (self excluded).
pub fn mean_knn_distances(points: &[Point3], k: usize) -> Vec<f64> {
    let n = points.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let k = k.min(n - 1);
    let coords: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
    let cell = knn_cell_size(points, k);
    let index = GridIndex::new(coords.clone(), cell);
    coords
        .par_iter()
        .enumerate()
        .map(|(i, q)| {
            let nn = index.nearest(q, k + 1);
            let dists: Vec<f64> = nn
                .iter()
                .filter(|(j, _)| *j != i)
                .take(k)
                .map(|(_, d2)| d2.sqrt())
                .collect();
            dists.iter().sum::<f64>() / dists.len().max(1) as f64
        })
        .collect()
}

fn knn_cell_size(points: &[Point3], k: usize) -> f64 {
    let (lo, hi) = points.iter().fold(
        (points[0], points[0]),
        |(lo, hi), p| {
            (
                Point3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z)),
                Point3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z)),
            )
        },
    );
    let mut ext = [hi.x - lo.x, hi.y - lo.y, hi.z - lo.z];
    ext.sort_by(|a, b| b.total_cmp(a));
    // Clouds here are mostly surfaces, so size cells from the two largest
    // extents to land roughly k points per cell.
    let area = (ext[0].max(1e-6)) * (ext[1].max(1e-6));
    let cell = (area * (k.max(1) as f64) / points.len() as f64).sqrt();
    cell.clamp(1e-4, ext[0].max(1e-3))
}

/// Indices (ascending) of points whose mean kNN distance does not exceed
/// `mean + std_ratio * std` of all mean kNN distances.
pub fn statistical_inliers(points: &[Point3], k: usize, std_ratio: f64) -> Vec<usize> {
    let d = mean_knn_distances(points, k);
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let threshold = mean + std_ratio * var.sqrt();
    (0..d.len()).filter(|&i| d[i] <= threshold).collect()
}

/// Reads the whole file into memory; convenient for small fixtures.
pub fn parse_cloud_bytes(bytes: &[u8], format: CloudFormat) -> Result<LabeledCloud, IngestError> {
    let mut reader = io::Cursor::new(bytes);
    let cloud = match format {
        CloudFormat::Csv => parse_csv(&mut reader)?,
        CloudFormat::Ply => parse_ply(&mut reader)?,
    };
    let mut rest = Vec::new();
    let _ = reader.read_to_end(&mut rest);
    Ok(cloud)
}
