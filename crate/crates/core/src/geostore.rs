//! JSON persistence of geometry records.
//!
//! Each file is `{"Meta": {...}, "Data": {...}}` where `Data` carries the
//! nested `MultiPolygon` / `Guardrail_i` / `Poles` structure and `Meta` the
//! instance identity. Output is compact, key order follows extraction order
//! and numbers use the shortest decimal that parses back to the same `f64`.

use crate::record::{Geometry, GeometryRecord, PairSet, PoleLikeGeometry, RecordError, RecordMeta};
use crate::types::{HyperAsset, MultiPolygon3, Point3, Polygon3, Semantic};
use indexmap::IndexMap;
use rayon::prelude::*;
use serde_json::{Map, Value};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const SCHEMA_VERSION: u64 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

const META_KEYS: [&str; 5] = ["Semantic", "InstanceId", "Segment", "Units", "SchemaVersion"];

#[derive(Debug, Error)]
pub enum GeoStoreError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("schema violation at {0}")]
    Schema(#[from] RecordError),
}

impl GeoStoreError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        GeoStoreError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// JSON path of a schema violation, if that is what this is.
    pub fn json_path(&self) -> Option<&str> {
        match self {
            GeoStoreError::Schema(e) => Some(&e.path),
            _ => None,
        }
    }
}

// ---------------------------------------------------------------- writing

fn number(v: f64) -> Value {
    // Integral values print without a trailing ".0"; both spellings parse
    // back to the same f64.
    if v.fract() == 0.0 && v.abs() < 9.0e15 {
        Value::from(v as i64)
    } else {
        Value::from(v)
    }
}

fn ring_value(ring: &[Point3]) -> Value {
    Value::Array(
        ring.iter()
            .map(|p| Value::Array(vec![number(p.x), number(p.y), number(p.z)]))
            .collect(),
    )
}

fn vertices(v: Value) -> Value {
    let mut m = Map::new();
    m.insert("Vertices".into(), v);
    Value::Object(m)
}

fn multipolygon_value(polys: &MultiPolygon3) -> Value {
    let mut inner = Map::new();
    for (i, p) in polys.iter().enumerate() {
        let mut poly = Map::new();
        poly.insert("Shell".into(), vertices(ring_value(&p.shell)));
        poly.insert(
            "Holes".into(),
            vertices(Value::Array(p.holes.iter().map(|h| ring_value(h)).collect())),
        );
        inner.insert(format!("Polygon_{i}"), Value::Object(poly));
    }
    let mut m = Map::new();
    m.insert("MultiPolygon".into(), Value::Object(inner));
    Value::Object(m)
}

fn pair_value(pair: &PairSet) -> Value {
    let mut m = Map::new();
    m.insert("Front".into(), multipolygon_value(&pair.front));
    m.insert("Back".into(), multipolygon_value(&pair.back));
    Value::Object(m)
}

fn indexed<T>(prefix: &str, items: &[T], f: impl Fn(&T) -> Value) -> Value {
    Value::Object(
        items
            .iter()
            .enumerate()
            .map(|(i, x)| (format!("{prefix}_{i}"), f(x)))
            .collect(),
    )
}

/// The `Data` object of a record.
pub fn data_value(geometry: &Geometry) -> Value {
    match geometry {
        Geometry::PlaneLike(m) => multipolygon_value(m),
        Geometry::Guardrail(segs) => indexed("Guardrail", segs, pair_value),
        Geometry::PoleLike(g) => {
            let mut m = Map::new();
            m.insert("Poles".into(), indexed("Pole", &g.poles, multipolygon_value));
            m.insert("Panels".into(), indexed("Panel", &g.panels, pair_value));
            m.insert("Lights".into(), indexed("Light", &g.lights, multipolygon_value));
            Value::Object(m)
        }
    }
}

fn meta_value(meta: &RecordMeta) -> Value {
    let mut m = Map::new();
    m.insert("Semantic".into(), Value::from(meta.semantic.name()));
    m.insert("InstanceId".into(), Value::from(meta.instance_id));
    m.insert("Segment".into(), Value::from(meta.segment.as_str()));
    m.insert("Units".into(), Value::from("m"));
    m.insert("SchemaVersion".into(), Value::from(SCHEMA_VERSION));
    for (k, v) in &meta.extra {
        m.insert(k.clone(), v.clone());
    }
    Value::Object(m)
}

/// Serializes a validated record. Identical records give identical bytes.
pub fn to_json(record: &GeometryRecord) -> Result<Vec<u8>, GeoStoreError> {
    record.validate()?;
    let mut top = Map::new();
    top.insert("Meta".into(), meta_value(&record.meta));
    top.insert("Data".into(), data_value(&record.geometry));
    let mut bytes = serde_json::to_vec(&Value::Object(top))?;
    bytes.push(b'\n');
    Ok(bytes)
}

// ---------------------------------------------------------------- reading

fn err(path: &str, msg: impl Into<String>) -> RecordError {
    RecordError::new(path, msg)
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}/{key}")
    }
}

fn object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, RecordError> {
    v.as_object().ok_or_else(|| err(path, "expected an object"))
}

fn field<'a>(m: &'a Map<String, Value>, path: &str, key: &str) -> Result<&'a Value, RecordError> {
    m.get(key).ok_or_else(|| err(path, format!("missing key `{key}`")))
}

fn only_keys(m: &Map<String, Value>, path: &str, allowed: &[&str]) -> Result<(), RecordError> {
    match m.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(err(&join(path, k), "unexpected key")),
        None => Ok(()),
    }
}

/// Children named `<prefix>_0`, `<prefix>_1`, ... in that order.
fn indexed_children<'a>(
    m: &'a Map<String, Value>,
    path: &str,
    prefix: &str,
) -> Result<Vec<(String, &'a Value)>, RecordError> {
    m.iter()
        .enumerate()
        .map(|(i, (k, v))| {
            let want = format!("{prefix}_{i}");
            if *k != want {
                return Err(err(&join(path, k), format!("expected key `{want}`")));
            }
            Ok((join(path, k), v))
        })
        .collect()
}

fn parse_point(v: &Value, path: &str) -> Result<Point3, RecordError> {
    let a = v.as_array().ok_or_else(|| err(path, "vertex must be an [x, y, z] array"))?;
    if a.len() != 3 {
        return Err(err(path, format!("vertex needs 3 coordinates, got {}", a.len())));
    }
    let c = |i: usize| a[i].as_f64().ok_or_else(|| err(path, "coordinate is not a number"));
    Ok(Point3::new(c(0)?, c(1)?, c(2)?))
}

fn parse_ring(v: &Value, path: &str) -> Result<Vec<Point3>, RecordError> {
    let a = v.as_array().ok_or_else(|| err(path, "expected a vertex list"))?;
    a.iter()
        .enumerate()
        .map(|(i, p)| parse_point(p, &format!("{path}/{i}")))
        .collect()
}

fn parse_vertices<'a>(v: &'a Value, path: &str) -> Result<&'a Value, RecordError> {
    let m = object(v, path)?;
    only_keys(m, path, &["Vertices"])?;
    field(m, path, "Vertices")
}

fn parse_polygon(v: &Value, path: &str) -> Result<Polygon3, RecordError> {
    let m = object(v, path)?;
    only_keys(m, path, &["Shell", "Holes"])?;
    let shell_path = join(path, "Shell");
    let shell = parse_ring(parse_vertices(field(m, path, "Shell")?, &shell_path)?, &join(&shell_path, "Vertices"))?;
    if shell.len() < 3 {
        return Err(err(&shell_path, format!("shell needs at least 3 vertices, got {}", shell.len())));
    }
    let holes = match m.get("Holes") {
        None => Vec::new(),
        Some(h) => {
            let holes_path = join(path, "Holes");
            let list = parse_vertices(h, &holes_path)?
                .as_array()
                .ok_or_else(|| err(&join(&holes_path, "Vertices"), "expected a list of hole rings"))?;
            let mut holes = Vec::with_capacity(list.len());
            for (k, ring) in list.iter().enumerate() {
                let ring_path = format!("{holes_path}/Vertices/{k}");
                let ring = parse_ring(ring, &ring_path)?;
                if ring.len() < 3 {
                    return Err(err(&ring_path, format!("hole needs at least 3 vertices, got {}", ring.len())));
                }
                holes.push(ring);
            }
            holes
        }
    };
    Ok(Polygon3::new(shell, holes))
}

fn parse_multipolygon(v: &Value, path: &str) -> Result<MultiPolygon3, RecordError> {
    let m = object(v, path)?;
    only_keys(m, path, &["MultiPolygon"])?;
    let mp_path = join(path, "MultiPolygon");
    let inner = object(field(m, path, "MultiPolygon")?, &mp_path)?;
    indexed_children(inner, &mp_path, "Polygon")?
        .into_iter()
        .map(|(p, v)| parse_polygon(v, &p))
        .collect()
}

fn parse_pair(v: &Value, path: &str) -> Result<PairSet, RecordError> {
    let m = object(v, path)?;
    only_keys(m, path, &["Front", "Back"])?;
    let front = parse_multipolygon(field(m, path, "Front")?, &join(path, "Front"))?;
    let back = parse_multipolygon(field(m, path, "Back")?, &join(path, "Back"))?;
    Ok(PairSet { front, back })
}

fn parse_group<T>(
    m: &Map<String, Value>,
    path: &str,
    key: &str,
    prefix: &str,
    f: impl Fn(&Value, &str) -> Result<T, RecordError>,
) -> Result<Vec<T>, RecordError> {
    let Some(v) = m.get(key) else { return Ok(Vec::new()) };
    let group_path = join(path, key);
    indexed_children(object(v, &group_path)?, &group_path, prefix)?
        .into_iter()
        .map(|(p, v)| f(v, &p))
        .collect()
}

fn parse_data(v: &Value, kind: HyperAsset) -> Result<Geometry, RecordError> {
    let path = "Data";
    let m = object(v, path)?;
    Ok(match kind {
        HyperAsset::PlaneLike => Geometry::PlaneLike(parse_multipolygon(v, path)?),
        HyperAsset::Guardrail => Geometry::Guardrail(
            indexed_children(m, path, "Guardrail")?
                .into_iter()
                .map(|(p, v)| parse_pair(v, &p))
                .collect::<Result<_, _>>()?,
        ),
        HyperAsset::PoleLike => {
            only_keys(m, path, &["Poles", "Panels", "Lights"])?;
            Geometry::PoleLike(PoleLikeGeometry {
                poles: parse_group(m, path, "Poles", "Pole", parse_multipolygon)?,
                panels: parse_group(m, path, "Panels", "Panel", parse_pair)?,
                lights: parse_group(m, path, "Lights", "Light", parse_multipolygon)?,
            })
        }
    })
}

fn parse_meta(top: &Map<String, Value>) -> Result<RecordMeta, RecordError> {
    let path = "Meta";
    let m = object(field(top, "", "Meta")?, path)?;
    let semantic: Semantic = field(m, path, "Semantic")?
        .as_str()
        .ok_or_else(|| err("Meta/Semantic", "expected a string"))?
        .parse()
        .map_err(|e: String| err("Meta/Semantic", e))?;
    let instance_id = field(m, path, "InstanceId")?
        .as_u64()
        .ok_or_else(|| err("Meta/InstanceId", "expected a non-negative integer"))? as usize;
    let segment = match m.get("Segment") {
        None => String::new(),
        Some(s) => s.as_str().ok_or_else(|| err("Meta/Segment", "expected a string"))?.to_string(),
    };
    if let Some(u) = m.get("Units") {
        if u.as_str() != Some("m") {
            return Err(err("Meta/Units", format!("only metres are supported, got {u}")));
        }
    }
    if let Some(s) = m.get("SchemaVersion") {
        if s.as_u64() != Some(SCHEMA_VERSION) {
            return Err(err("Meta/SchemaVersion", format!("unsupported schema version {s}")));
        }
    }
    let mut extra = IndexMap::new();
    for (k, v) in m {
        if !META_KEYS.contains(&k.as_str()) {
            extra.insert(k.clone(), v.clone());
        }
    }
    // Unknown top-level keys are kept too; they are written back inside Meta.
    for (k, v) in top {
        if k != "Meta" && k != "Data" {
            extra.insert(k.clone(), v.clone());
        }
    }
    Ok(RecordMeta {
        semantic,
        instance_id,
        segment,
        extra,
    })
}

/// Parses and validates one record.
pub fn from_json(bytes: &[u8]) -> Result<GeometryRecord, GeoStoreError> {
    let v: Value = serde_json::from_slice(bytes)?;
    let top = object(&v, "").map_err(|_| err("", "top level must be an object"))?;
    let meta = parse_meta(top)?;
    let geometry = parse_data(field(top, "", "Data")?, meta.semantic.hyper_asset())?;
    let record = GeometryRecord { meta, geometry };
    record.validate().map_err(|mut e| {
        // Validation paths are relative to the `Data` payload already.
        if !e.path.starts_with("Data") && !e.path.starts_with("Meta") {
            e.path = join("Data", &e.path);
        }
        e
    })?;
    Ok(record)
}

// ---------------------------------------------------------------- files

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "PascalCase")]
pub struct ManifestEntry {
    pub file: String,
    pub semantic: Semantic,
    pub instance_id: usize,
    pub segment: String,
    pub bytes: u64,
}

pub fn write_record(path: &Path, record: &GeometryRecord) -> Result<u64, GeoStoreError> {
    let bytes = to_json(record)?;
    fs::write(path, &bytes).map_err(|e| GeoStoreError::io(path, e))?;
    Ok(bytes.len() as u64)
}

pub fn read_record(path: &Path) -> Result<GeometryRecord, GeoStoreError> {
    let bytes = fs::read(path).map_err(|e| GeoStoreError::io(path, e))?;
    from_json(&bytes)
}

/// Writes one `<stem>.json` per record in parallel, then the manifest.
pub fn write_records(dir: &Path, records: &[GeometryRecord]) -> Result<Vec<ManifestEntry>, GeoStoreError> {
    fs::create_dir_all(dir).map_err(|e| GeoStoreError::io(dir, e))?;
    let entries = records
        .par_iter()
        .map(|r| {
            let file = format!("{}.json", r.file_stem());
            let bytes = write_record(&dir.join(&file), r)?;
            Ok(ManifestEntry {
                file,
                semantic: r.meta.semantic,
                instance_id: r.meta.instance_id,
                segment: r.meta.segment.clone(),
                bytes,
            })
        })
        .collect::<Result<Vec<_>, GeoStoreError>>()?;
    write_manifest(dir, &entries)?;
    Ok(entries)
}

pub fn write_manifest(dir: &Path, entries: &[ManifestEntry]) -> Result<(), GeoStoreError> {
    let path = dir.join(MANIFEST_FILE);
    let mut bytes = serde_json::to_vec_pretty(entries)?;
    bytes.push(b'\n');
    fs::write(&path, bytes).map_err(|e| GeoStoreError::io(&path, e))
}

pub fn read_manifest(dir: &Path) -> Result<Vec<ManifestEntry>, GeoStoreError> {
    let path = dir.join(MANIFEST_FILE);
    let bytes = fs::read(&path).map_err(|e| GeoStoreError::io(&path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

/// Loads every record listed in the manifest, in manifest order.
pub fn read_records(dir: &Path) -> Result<Vec<GeometryRecord>, GeoStoreError> {
    read_manifest(dir)?
        .par_iter()
        .map(|e| {
            let path = dir.join(&e.file);
            read_record(&path).map_err(|err| match err {
                GeoStoreError::Schema(mut s) => {
                    s.path = format!("{}#{}", path.display(), s.path);
                    GeoStoreError::Schema(s)
                }
                other => other,
            })
        })
        .collect()
}

// ---------------------------------------------------------------- sizes

#[derive(Clone, Debug, Default, PartialEq, serde::Serialize)]
pub struct SizeRow {
    pub json_bytes: u64,
    pub mesh_bytes: u64,
    pub json_files: usize,
    pub mesh_files: usize,
}

impl SizeRow {
    /// Mesh bytes per JSON byte; `None` without JSON bytes.
    pub fn ratio(&self) -> Option<f64> {
        (self.json_bytes > 0).then(|| self.mesh_bytes as f64 / self.json_bytes as f64)
    }

    fn add(&mut self, o: &SizeRow) {
        self.json_bytes += o.json_bytes;
        self.mesh_bytes += o.mesh_bytes;
        self.json_files += o.json_files;
        self.mesh_files += o.mesh_files;
    }
}

#[derive(Clone, Debug, Default, PartialEq, serde::Serialize)]
pub struct SizeReport {
    pub rows: BTreeMap<Semantic, SizeRow>,
    pub total: SizeRow,
}

impl SizeReport {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_table(&self) -> String {
        let mut s = format!("{:<12} {:>12} {:>12} {:>8}\n", "Asset", "JSON bytes", "Mesh bytes", "Ratio");
        let ratio = |r: &SizeRow| r.ratio().map_or("-".to_string(), |x| format!("{x:.2}"));
        for (sem, r) in &self.rows {
            s += &format!("{:<12} {:>12} {:>12} {:>8}\n", sem.name(), r.json_bytes, r.mesh_bytes, ratio(r));
        }
        s += &format!(
            "{:<12} {:>12} {:>12} {:>8}\n",
            "Total",
            self.total.json_bytes,
            self.total.mesh_bytes,
            ratio(&self.total)
        );
        s
    }
}

/// Asset type of a `<segment>_<Semantic>_<id>.<ext>` file name.
pub fn semantic_from_file_name(path: &Path) -> Option<Semantic> {
    let stem = path.file_stem()?.to_str()?;
    let mut parts = stem.rsplitn(3, '_');
    let _id = parts.next()?;
    parts.next()?.parse().ok()
}

fn file_size(path: &Path) -> Result<u64, GeoStoreError> {
    fs::metadata(path).map(|m| m.len()).map_err(|e| GeoStoreError::io(path, e))
}

/// Byte sizes of record files against mesh files, per asset type. The asset
/// type of a file is read from its name.
pub fn size_report(json_paths: &[PathBuf], mesh_paths: &[PathBuf]) -> Result<SizeReport, GeoStoreError> {
    let mut report = SizeReport::default();
    let classify = |p: &Path| {
        semantic_from_file_name(p).ok_or_else(|| {
            GeoStoreError::Schema(err(&p.display().to_string(), "file name does not name an asset type"))
        })
    };
    for p in json_paths {
        let row = report.rows.entry(classify(p)?).or_default();
        row.json_bytes += file_size(p)?;
        row.json_files += 1;
    }
    for p in mesh_paths {
        let row = report.rows.entry(classify(p)?).or_default();
        row.mesh_bytes += file_size(p)?;
        row.mesh_files += 1;
    }
    let mut total = SizeRow::default();
    for r in report.rows.values() {
        total.add(r);
    }
    report.total = total;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::random_record;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tri() -> Polygon3 {
        Polygon3::new(
            vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)],
            vec![],
        )
    }

    fn data_of(bytes: &[u8]) -> String {
        let v: Value = serde_json::from_slice(bytes).unwrap();
        serde_json::to_string(&v["Data"]).unwrap()
    }

    #[test]
    fn smallest_plane_like_record() {
        let r = GeometryRecord {
            meta: RecordMeta::new(Semantic::RoadSurface, 0, "s1"),
            geometry: Geometry::PlaneLike(vec![tri()]),
        };
        let bytes = to_json(&r).unwrap();
        assert_eq!(
            data_of(&bytes),
            r#"{"MultiPolygon":{"Polygon_0":{"Shell":{"Vertices":[[0,0,0],[1,0,0],[0,1,0]]},"Holes":{"Vertices":[]}}}}"#
        );
        assert!(String::from_utf8(bytes.clone()).unwrap().starts_with(
            r#"{"Meta":{"Semantic":"RoadSurface","InstanceId":0,"Segment":"s1","Units":"m","SchemaVersion":1}"#
        ));
        assert_eq!(from_json(&bytes).unwrap(), r);
    }

    #[test]
    fn mismatched_guardrail_rejected_on_write() {
        let r = GeometryRecord {
            meta: RecordMeta::new(Semantic::Guardrail, 0, ""),
            geometry: Geometry::Guardrail(vec![PairSet {
                front: vec![tri(), tri()],
                back: vec![tri()],
            }]),
        };
        let e = to_json(&r).unwrap_err();
        assert_eq!(e.json_path(), Some("Data/Guardrail_0"));
    }

    #[test]
    fn two_vertex_shell_reports_its_path() {
        let text = r#"{"Meta":{"Semantic":"RoadLane","InstanceId":4},"Data":{"MultiPolygon":{
            "Polygon_0":{"Shell":{"Vertices":[[0,0,0],[1,0,0],[0,1,0]]},"Holes":{"Vertices":[]}},
            "Polygon_1":{"Shell":{"Vertices":[[0,0,0],[1,0,0]]},"Holes":{"Vertices":[]}}}}}"#;
        let e = from_json(text.as_bytes()).unwrap_err();
        assert_eq!(e.json_path(), Some("Data/MultiPolygon/Polygon_1/Shell"));
    }

    #[test]
    fn schema_errors_carry_paths() {
        let cases = [
            (r#"{"Meta":{"Semantic":"Tree","InstanceId":0},"Data":{}}"#, "Meta/Semantic"),
            (r#"{"Meta":{"Semantic":"RoadSign","InstanceId":0},"Data":{"Poles":{}}}"#, "Data/Poles"),
            (
                r#"{"Meta":{"Semantic":"RoadSign","InstanceId":0},"Data":{"Poles":{"Pole_1":{"MultiPolygon":{}}}}}"#,
                "Data/Poles/Pole_1",
            ),
            (
                r#"{"Meta":{"Semantic":"RoadSurface","InstanceId":0},"Data":{"MultiPolygon":{"Polygon_0":{"Shell":{"Vertices":[[0,0],[1,0,0],[0,1,0]]}}}}}"#,
                "Data/MultiPolygon/Polygon_0/Shell/Vertices/0",
            ),
            (
                r#"{"Meta":{"Semantic":"RoadSurface","InstanceId":0},"Data":{"MultiPolygon":{},"Edges":[]}}"#,
                "Data/Edges",
            ),
        ];
        for (text, path) in cases {
            let e = from_json(text.as_bytes()).unwrap_err();
            assert_eq!(e.json_path(), Some(path), "{text}");
        }
        assert!(matches!(from_json(b"{not json"), Err(GeoStoreError::Syntax(_))));
    }

    #[test]
    fn custom_keys_survive() {
        let text = r#"{"Meta":{"Semantic":"RoadSurface","InstanceId":2,"Material":"asphalt"},"Data":{"MultiPolygon":{}},"Survey":{"Year":2023}}"#;
        let r = from_json(text.as_bytes()).unwrap();
        assert_eq!(r.meta.extra["Material"], Value::from("asphalt"));
        assert_eq!(r.meta.extra["Survey"]["Year"], Value::from(2023));
        let again = from_json(&to_json(&r).unwrap()).unwrap();
        assert_eq!(again, r);
    }

    #[test]
    fn output_has_no_edges_and_exact_key_names() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let text = String::from_utf8(to_json(&random_record(&mut rng)).unwrap()).unwrap();
            assert!(!text.contains("Edges"));
            let v: Value = serde_json::from_str(&text).unwrap();
            for k in v["Data"].as_object().unwrap().keys() {
                assert!(
                    k == "MultiPolygon"
                        || k == "Poles"
                        || k == "Panels"
                        || k == "Lights"
                        || k.strip_prefix("Guardrail_").is_some_and(|i| i.parse::<usize>().is_ok()),
                    "{k}"
                );
            }
        }
    }

    #[test]
    fn awkward_floats_round_trip() {
        let vals = [0.1, -0.0, 1e-300, 5e-324, 1.7976931348623157e308, 123456789.123456789, -2.5, 9.0e15, 1e16];
        let shell: Vec<Point3> = vals.iter().map(|&v| Point3::new(v, -v, v * 0.5)).collect();
        let r = GeometryRecord {
            meta: RecordMeta::new(Semantic::RoadSide, 9, "x"),
            geometry: Geometry::PlaneLike(vec![Polygon3::new(shell, vec![])]),
        };
        let back = from_json(&to_json(&r).unwrap()).unwrap();
        let Geometry::PlaneLike(m) = &back.geometry else { panic!() };
        let Geometry::PlaneLike(orig) = &r.geometry else { panic!() };
        for (a, b) in m[0].shell.iter().zip(&orig[0].shell) {
            for i in 0..3 {
                assert_eq!(a[i], b[i]);
            }
        }
    }

    #[test]
    fn files_manifest_and_sizes() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let records: Vec<_> = (0..6).map(|_| random_record(&mut rng)).collect();
        let entries = write_records(dir.path(), &records).unwrap();
        assert_eq!(entries.len(), records.len());
        assert_eq!(read_records(dir.path()).unwrap(), records);

        let json: Vec<PathBuf> = entries.iter().map(|e| dir.path().join(&e.file)).collect();
        let mesh = dir.path().join(format!("{}.obj", records[0].file_stem()));
        fs::write(&mesh, vec![b'v'; 1000]).unwrap();
        let report = size_report(&json, &[mesh]).unwrap();
        let expected: u64 = entries.iter().map(|e| e.bytes).sum();
        assert_eq!(report.total.json_bytes, expected);
        assert_eq!(report.total.mesh_bytes, 1000);
        assert_eq!(report.rows[&records[0].meta.semantic].mesh_files, 1);

        assert!(size_report(&[], &[]).unwrap().is_empty());
        assert!(matches!(
            size_report(&[dir.path().join("s_RoadLane_0.json")], &[]),
            Err(GeoStoreError::Io { .. })
        ));
    }

    #[test]
    fn file_names_name_the_asset() {
        assert_eq!(
            semantic_from_file_name(Path::new("a_b_RoadLight_12.obj")),
            Some(Semantic::RoadLight)
        );
        assert_eq!(semantic_from_file_name(Path::new("manifest.json")), None);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn round_trip_is_identity_and_deterministic(seed in any::<u64>()) {
            let r = random_record(&mut ChaCha8Rng::seed_from_u64(seed));
            let bytes = to_json(&r).unwrap();
            let back = from_json(&bytes).unwrap();
            prop_assert_eq!(&back, &r);
            prop_assert_eq!(to_json(&back).unwrap(), bytes);
        }
    }
}
