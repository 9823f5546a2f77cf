//! Pipeline stages. Each stage reads only the directory written by the
//! stage before it and owns exactly one directory under the output root.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use roadtwin_core::cluster::split_instances;
use roadtwin_core::geostore::{self, GeoStoreError, ManifestEntry, SizeReport};
use roadtwin_core::ingest::{load_cloud, preprocess};
use roadtwin_core::mesh::{build_record_mesh, export, import, merged, Mesh, MeshOptions};
use roadtwin_core::metrics::{evaluate as evaluate_distances, DistanceReport, EvalInput, TimingReport};
use roadtwin_core::synth::{self, obb_length, Census, CensusEntry, SceneSpec, SynthError};
use roadtwin_core::spatial::GridIndex;
use roadtwin_core::{extract_instance, Point3, CloudFormat, GeometryRecord, LabeledCloud, RecordMeta, Semantic};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{GroundTruth, PipelineConfig};
use crate::error::{CliError, Stage};

pub const MANIFEST: &str = "manifest.json";
pub const TIMING: &str = "timing.json";
pub const WARNINGS: &str = "warnings.json";

/// Where every stage keeps its files.
#[derive(Clone, Debug)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn stage(&self, stage: Stage) -> PathBuf {
        self.root.join(stage.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "PascalCase", deny_unknown_fields)]
pub struct InstanceEntry {
    pub file: String,
    pub semantic: Semantic,
    pub instance_id: usize,
    pub points: usize,
    /// Oriented bounding box length in metres.
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "PascalCase", deny_unknown_fields)]
pub struct SegmentManifest {
    pub input: String,
    pub segment: String,
    pub points_in: usize,
    pub points_kept: usize,
    pub instances: Vec<InstanceEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "PascalCase", deny_unknown_fields)]
pub struct MeshEntry {
    pub file: String,
    pub semantic: Semantic,
    pub instance_id: usize,
    pub objects: usize,
    pub triangles: usize,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "PascalCase")]
pub struct InstanceTiming {
    pub semantic: Semantic,
    pub instance_id: usize,
    pub seconds: f64,
}

/// Wall-clock times of one stage. Kept apart from the manifests so that
/// every other file stays byte-reproducible.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "PascalCase")]
pub struct StageTiming {
    pub seconds: f64,
    pub instances: Vec<InstanceTiming>,
}

fn io_err(stage: Stage, path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::data(stage, format!("{}: {e}", path.display()))
}

/// Empties a stage directory. Only directories that are empty or carry a
/// stage manifest are ever removed.
fn fresh_dir(dir: &Path, stage: Stage) -> Result<(), CliError> {
    if dir.exists() {
        let mut entries = fs::read_dir(dir).map_err(|e| io_err(stage, dir, e))?;
        let empty = entries.next().is_none();
        if !empty && !dir.join(MANIFEST).is_file() {
            return Err(CliError::data(
                stage,
                format!("refusing to overwrite {}: not a stage directory", dir.display()),
            ));
        }
        fs::remove_dir_all(dir).map_err(|e| io_err(stage, dir, e))?;
    }
    fs::create_dir_all(dir).map_err(|e| io_err(stage, dir, e))
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T, stage: Stage) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::internal(stage, e))?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|e| io_err(stage, path, e))
}

fn write_text(path: &Path, text: &str, stage: Stage) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_err(stage, path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path, stage: Stage) -> Result<T, CliError> {
    let bytes = fs::read(path).map_err(|e| io_err(stage, path, e))?;
    let de = &mut serde_json::Deserializer::from_slice(&bytes);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let at = e.path().to_string();
        io_err(stage, path, format!("at `{at}`: {}", e.into_inner()))
    })
}

fn geostore_err(stage: Stage, e: GeoStoreError) -> CliError {
    CliError::data(stage, e)
}

// ---------------------------------------------------------------- segment

#[derive(Clone, Debug)]
pub struct SegmentSummary {
    pub manifest: SegmentManifest,
}

/// Cloud file → one PLY per instance.
pub fn segment(cfg: &PipelineConfig, input: &Path, layout: &Layout) -> Result<SegmentSummary, CliError> {
    let st = Stage::Segment;
    let t0 = Instant::now();
    let format = CloudFormat::from_path(input)
        .ok_or_else(|| CliError::Config(format!("{}: unknown cloud format, expected .ply or .csv", input.display())))?;
    let cloud = load_cloud(input, format).map_err(|e| io_err(st, input, e))?;
    let kept = preprocess(&cloud, &cfg.preprocess).map_err(|e| io_err(st, input, e))?;
    log::info!("segment: {} points, {} after preprocessing", cloud.len(), kept.len());
    let instances = split_instances(&kept, &cfg.cluster.semantic).map_err(|e| CliError::data(st, e))?;
    let dir = layout.stage(st);
    fresh_dir(&dir, st)?;
    let entries = instances
        .par_iter()
        .enumerate()
        .map(|(id, inst)| {
            let file = format!("{}_{}_{id}.ply", cfg.segment, inst.semantic.name());
            let path = dir.join(&file);
            inst.cloud.save(&path, CloudFormat::Ply).map_err(|e| io_err(st, &path, e))?;
            Ok(InstanceEntry {
                file,
                semantic: inst.semantic,
                instance_id: id,
                points: inst.cloud.len(),
                length: obb_length(&inst.cloud.points),
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let manifest = SegmentManifest {
        input: input.display().to_string(),
        segment: cfg.segment.clone(),
        points_in: cloud.len(),
        points_kept: kept.len(),
        instances: entries,
    };
    write_json(&dir.join(MANIFEST), &manifest, st)?;
    let timing = StageTiming {
        seconds: t0.elapsed().as_secs_f64(),
        instances: Vec::new(),
    };
    write_json(&dir.join(TIMING), &timing, st)?;
    Ok(SegmentSummary { manifest })
}

pub fn read_segment_manifest(layout: &Layout, stage: Stage) -> Result<SegmentManifest, CliError> {
    let path = layout.stage(Stage::Segment).join(MANIFEST);
    read_json(&path, stage)
}

fn load_instance(layout: &Layout, e: &InstanceEntry, stage: Stage) -> Result<LabeledCloud, CliError> {
    let path = layout.stage(Stage::Segment).join(&e.file);
    load_cloud(&path, CloudFormat::Ply).map_err(|err| io_err(stage, &path, err))
}

// ---------------------------------------------------------------- extract

#[derive(Clone, Debug)]
pub struct ExtractSummary {
    pub records: Vec<ManifestEntry>,
    pub warnings: Vec<String>,
}

/// Instance clouds → one JSON record per instance.
pub fn extract(cfg: &PipelineConfig, layout: &Layout) -> Result<ExtractSummary, CliError> {
    let st = Stage::Extract;
    let t0 = Instant::now();
    let seg = read_segment_manifest(layout, st)?;
    let dir = layout.stage(st);
    fresh_dir(&dir, st)?;
    let part = cfg.cluster.part;
    let results = seg
        .instances
        .par_iter()
        .map(|e| {
            let cloud = load_instance(layout, e, st)?;
            let t = Instant::now();
            let meta = RecordMeta::new(e.semantic, e.instance_id, seg.segment.clone());
            let out = extract_instance(&cloud, meta, &cfg.extract, &part);
            Ok((e, out, t.elapsed().as_secs_f64()))
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let mut records: Vec<GeometryRecord> = Vec::new();
    let mut warnings = Vec::new();
    let mut timing = StageTiming::default();
    for (e, out, secs) in results {
        timing.instances.push(InstanceTiming {
            semantic: e.semantic,
            instance_id: e.instance_id,
            seconds: secs,
        });
        match out {
            Ok(x) => {
                warnings.extend(x.warnings.into_iter().map(|w| format!("{}: {w}", e.file)));
                records.push(x.record);
            }
            Err(err) => warnings.push(format!("{}: skipped: {err}", e.file)),
        }
    }
    for w in &warnings {
        log::warn!("extract: {w}");
    }
    if records.is_empty() && !seg.instances.is_empty() {
        return Err(CliError::data(st, "no instance could be extracted"));
    }
    let entries = geostore::write_records(&dir, &records).map_err(|e| geostore_err(st, e))?;
    // The thread count never affects results, so the snapshot leaves it
    // out and stays identical across machines.
    let snapshot = PipelineConfig {
        threads: None,
        ..cfg.clone()
    };
    write_text(&dir.join("config.json"), &snapshot.to_json(), st)?;
    write_json(&dir.join(WARNINGS), &warnings, st)?;
    timing.seconds = t0.elapsed().as_secs_f64();
    write_json(&dir.join(TIMING), &timing, st)?;
    Ok(ExtractSummary {
        records: entries,
        warnings,
    })
}

// ---------------------------------------------------------------- build

#[derive(Clone, Debug)]
pub struct BuildSummary {
    pub meshes: Vec<MeshEntry>,
    pub warnings: Vec<String>,
}

/// JSON records → one mesh file per record.
pub fn build(cfg: &PipelineConfig, layout: &Layout) -> Result<BuildSummary, CliError> {
    let st = Stage::Build;
    let t0 = Instant::now();
    let src = layout.stage(Stage::Extract);
    let entries = geostore::read_manifest(&src).map_err(|e| geostore_err(st, e))?;
    // Every record is read before anything is written, so a corrupted file
    // fails the stage without leaving partial output.
    let records = entries
        .par_iter()
        .map(|e| {
            let path = src.join(&e.file);
            geostore::read_record(&path).map_err(|err| match err.json_path() {
                Some(at) => CliError::data(st, format!("{}: schema violation at {at}", path.display())),
                None => io_err(st, &path, err),
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let dir = layout.stage(st);
    fresh_dir(&dir, st)?;
    let options = MeshOptions {
        thickness: cfg.mesh.thickness,
    };
    let format = cfg.mesh.format;
    let results = records
        .par_iter()
        .map(|r| {
            let t = Instant::now();
            let out = match build_record_mesh(r, &options) {
                Ok(meshes) => {
                    for m in &meshes {
                        m.mesh.validate().map_err(|e| {
                            CliError::internal(st, format!("{}/{}: {e}", r.file_stem(), m.name))
                        })?;
                    }
                    let file = format!("{}.{}", r.file_stem(), format.extension());
                    let path = dir.join(&file);
                    let bytes = export(&meshes, &path, format).map_err(|e| io_err(st, &path, e))?;
                    Ok(MeshEntry {
                        file,
                        semantic: r.meta.semantic,
                        instance_id: r.meta.instance_id,
                        objects: meshes.len(),
                        triangles: meshes.iter().map(|m| m.mesh.faces.len()).sum(),
                        bytes,
                    })
                }
                Err(e) => Err(e),
            };
            Ok((r, out, t.elapsed().as_secs_f64()))
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let mut meshes = Vec::new();
    let mut warnings = Vec::new();
    let mut timing = StageTiming::default();
    for (r, out, secs) in results {
        timing.instances.push(InstanceTiming {
            semantic: r.meta.semantic,
            instance_id: r.meta.instance_id,
            seconds: secs,
        });
        match out {
            Ok(m) => meshes.push(m),
            Err(e) => warnings.push(format!("{}.json: skipped: {e}", r.file_stem())),
        }
    }
    for w in &warnings {
        log::warn!("build: {w}");
    }
    write_json(&dir.join(MANIFEST), &meshes, st)?;
    write_json(&dir.join(WARNINGS), &warnings, st)?;
    timing.seconds = t0.elapsed().as_secs_f64();
    write_json(&dir.join(TIMING), &timing, st)?;
    Ok(BuildSummary { meshes, warnings })
}

pub fn read_build_manifest(layout: &Layout, stage: Stage) -> Result<Vec<MeshEntry>, CliError> {
    read_json(&layout.stage(Stage::Build).join(MANIFEST), stage)
}

// ---------------------------------------------------------------- evaluate

/// Instance points → distance to the mesh built for that instance.
pub fn evaluate(cfg: &PipelineConfig, layout: &Layout) -> Result<DistanceReport, CliError> {
    let st = Stage::Evaluate;
    let seg = read_segment_manifest(layout, st)?;
    let built = read_build_manifest(layout, st)?;
    let by_id: BTreeMap<usize, &MeshEntry> = built.iter().map(|m| (m.instance_id, m)).collect();
    let loaded = seg
        .instances
        .par_iter()
        .map(|e| {
            let cloud = load_instance(layout, e, st)?;
            let mesh = match by_id.get(&e.instance_id) {
                Some(m) => {
                    let path = layout.stage(Stage::Build).join(&m.file);
                    Some(merged(&import(&path).map_err(|err| io_err(st, &path, err))?))
                }
                None => None,
            };
            Ok((e, cloud.points, mesh))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let truth = match cfg.evaluate.ground_truth {
        GroundTruth::Preprocessed => loaded.iter().map(|(_, pts, _)| pts.clone()).collect(),
        GroundTruth::Raw => raw_truth(&seg, &loaded, st)?,
    };
    let inputs: Vec<EvalInput> = loaded
        .iter()
        .zip(&truth)
        .map(|((e, _, mesh), points)| EvalInput {
            semantic: e.semantic,
            instance_id: e.instance_id,
            points,
            mesh: mesh.as_ref(),
        })
        .collect();
    let report = evaluate_distances(&inputs);
    let dir = layout.stage(st);
    fresh_dir(&dir, st)?;
    write_json(&dir.join("distance.json"), &report.to_json(), st)?;
    write_text(&dir.join("distance.txt"), &report.to_table(), st)?;
    write_json(&dir.join(MANIFEST), &["distance.json", "distance.txt"], st)?;
    Ok(report)
}

/// Reloads the segment input and hands every point to the instance of its
/// class owning the nearest kept point. Classes with no instance are dropped.
fn raw_truth(
    seg: &SegmentManifest,
    loaded: &[(&InstanceEntry, Vec<Point3>, Option<Mesh>)],
    st: Stage,
) -> Result<Vec<Vec<Point3>>, CliError> {
    let input = Path::new(&seg.input);
    let format = CloudFormat::from_path(input)
        .ok_or_else(|| CliError::data(st, format!("{}: unknown cloud format", input.display())))?;
    let raw = load_cloud(input, format).map_err(|e| io_err(st, input, e))?;
    let mut by_sem: BTreeMap<Semantic, (Vec<[f64; 3]>, Vec<usize>)> = BTreeMap::new();
    for (k, (e, pts, _)) in loaded.iter().enumerate() {
        let (coords, owner) = by_sem.entry(e.semantic).or_default();
        coords.extend(pts.iter().map(|p| [p.x, p.y, p.z]));
        owner.extend(std::iter::repeat(k).take(pts.len()));
    }
    let index: BTreeMap<Semantic, (GridIndex<3>, Vec<usize>)> = by_sem
        .into_iter()
        .map(|(s, (coords, owner))| (s, (GridIndex::new(coords, RAW_CELL), owner)))
        .collect();
    let owners: Vec<Option<usize>> = raw
        .points
        .par_iter()
        .zip(&raw.semantic)
        .map(|(p, s)| {
            let (grid, owner) = index.get(s)?;
            grid.nearest(&[p.x, p.y, p.z], 1).first().map(|&(i, _)| owner[i])
        })
        .collect();
    let mut truth = vec![Vec::new(); loaded.len()];
    for (p, k) in raw.points.iter().zip(owners) {
        if let Some(k) = k {
            truth[k].push(*p);
        }
    }
    Ok(truth)
}

/// Bucket size for the raw-point owner lookup, metres.
const RAW_CELL: f64 = 0.5;

// ---------------------------------------------------------------- synth

/// Scene spec → labeled cloud, ground-truth meshes and census.
pub fn synth(spec: &SceneSpec, layout: &Layout, format: CloudFormat) -> Result<synth::ScenePaths, CliError> {
    let st = Stage::Synth;
    let scene = synth::generate(spec).map_err(|e| match e {
        SynthError::Spec(_) | SynthError::Overlap(_) => CliError::Config(format!("scene spec: {e}")),
        other => CliError::internal(st, other),
    })?;
    let dir = layout.stage(st);
    fresh_dir(&dir, st)?;
    let paths = synth::write_scene(&scene, &dir, format).map_err(|e| CliError::data(st, e))?;
    write_json(&dir.join("spec.json"), spec, st)?;
    let files = [&paths.cloud, &paths.truth, &paths.census]
        .iter()
        .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
        .chain(["spec.json".to_string()])
        .collect::<Vec<_>>();
    write_json(&dir.join(MANIFEST), &files, st)?;
    log::info!("synth: {} points, {} instances", scene.cloud.len(), scene.truth.len());
    Ok(paths)
}

// ---------------------------------------------------------------- report

#[derive(Clone, Debug)]
pub struct Report {
    pub timing: TimingReport,
    pub size: SizeReport,
    pub census: Census,
    pub distance: Option<String>,
}

impl Report {
    pub fn to_text(&self) -> String {
        let mut s = String::from("Instances\n");
        s += &self.census.to_table();
        s += "\nProcessing time (s)\n";
        s += &self.timing.to_table();
        s += "\nStorage\n";
        s += &self.size.to_table();
        if let Some(d) = &self.distance {
            s += "\nDistance to mesh\n";
            s += d;
        }
        s
    }
}

fn stage_timing(layout: &Layout, stage: Stage, st: Stage) -> Result<StageTiming, CliError> {
    read_json(&layout.stage(stage).join(TIMING), st)
}

/// Timing, storage and instance tables over the finished stages.
pub fn report(layout: &Layout) -> Result<Report, CliError> {
    let st = Stage::Report;
    let seg = read_segment_manifest(layout, st)?;
    let built = read_build_manifest(layout, st)?;
    let extract_dir = layout.stage(Stage::Extract);
    let records = geostore::read_manifest(&extract_dir).map_err(|e| geostore_err(st, e))?;

    let mut timing = TimingReport::default();
    let ext = stage_timing(layout, Stage::Extract, st)?;
    let bld = stage_timing(layout, Stage::Build, st)?;
    for t in &ext.instances {
        timing.add(t.semantic, t.seconds, 0.0);
    }
    for t in &bld.instances {
        timing.add(t.semantic, 0.0, t.seconds);
    }
    timing.pipeline = stage_timing(layout, Stage::Segment, st)?.seconds + ext.seconds + bld.seconds;

    let json_paths: Vec<PathBuf> = records.iter().map(|e| extract_dir.join(&e.file)).collect();
    let mesh_paths: Vec<PathBuf> = built.iter().map(|m| layout.stage(Stage::Build).join(&m.file)).collect();
    let size = geostore::size_report(&json_paths, &mesh_paths).map_err(|e| geostore_err(st, e))?;

    let mut counters = BTreeMap::new();
    let census = Census {
        instances: seg
            .instances
            .iter()
            .map(|e| {
                let k = counters.entry(e.semantic).or_insert(0usize);
                *k += 1;
                CensusEntry {
                    semantic: e.semantic,
                    index: *k - 1,
                    length: e.length,
                    points: e.points,
                }
            })
            .collect(),
    };

    let distance_txt = layout.stage(Stage::Evaluate).join("distance.txt");
    let distance = match fs::read_to_string(&distance_txt) {
        Ok(s) => Some(s),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(io_err(st, &distance_txt, e)),
    };

    let out = Report {
        timing,
        size,
        census,
        distance,
    };
    let dir = layout.stage(st);
    fresh_dir(&dir, st)?;
    write_json(&dir.join(TIMING), &out.timing.to_json(), st)?;
    write_json(&dir.join("size.json"), &out.size, st)?;
    write_json(&dir.join("census.json"), &out.census.to_json(), st)?;
    write_text(&dir.join("report.txt"), &out.to_text(), st)?;
    write_json(&dir.join(MANIFEST), &["timing.json", "size.json", "census.json", "report.txt"], st)?;
    Ok(out)
}

// ---------------------------------------------------------------- run

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub segment: SegmentSummary,
    pub extract: ExtractSummary,
    pub build: BuildSummary,
    pub distance: DistanceReport,
    pub report: Report,
}

/// Every stage in order, each reading the previous stage's files.
pub fn run(cfg: &PipelineConfig, input: &Path, layout: &Layout) -> Result<RunSummary, CliError> {
    let segment = segment(cfg, input, layout)?;
    let extract = extract(cfg, layout)?;
    let build = build(cfg, layout)?;
    let distance = evaluate(cfg, layout)?;
    let report = report(layout)?;
    Ok(RunSummary {
        segment,
        extract,
        build,
        distance,
        report,
    })
}

