//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary so every line is printed even when all pass.
//! `ACCEPTANCE_ONLY=3,4` restricts the run to the listed criteria.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use clap::Parser;
use roadtwin_cli::args::Cli;
use roadtwin_cli::config::PipelineConfig;
use roadtwin_cli::pipeline::{self, Layout, RunSummary};
use roadtwin_core::cluster::{dbscan, ClusterParams};
use roadtwin_core::extract::{extract_guardrail, extract_pole};
use roadtwin_core::geom2d::min_enclosing_circle;
use roadtwin_core::geostore::{from_json, to_json};
use roadtwin_core::mesh::{build_record_mesh, merged, mesh_pair, mesh_ring_series, Mesh, MeshOptions};
use roadtwin_core::metrics::{evaluate, EvalInput, MeshIndex};
use roadtwin_core::synth::{self, GuardrailSpec, SceneSpec, Section};
use roadtwin_core::{
    extract_instance, CloudFormat, ExtractConfig, Geometry, HyperAsset, LabeledCloud, Point2, Point3, Polygon3,
    RecordMeta, Semantic,
};
use serde_json::Value;

/// Criteria expected to fail; they print FAIL without failing the run.
const KNOWN_RED: &[u32] = &[];

// Pinned thresholds.
const OVERALL_AVG_CM: f64 = 2.0;
const PLANE_LIKE_AVG_CM: f64 = 0.5;
const RUNTIME_LIMIT_S: f64 = 600.0;
const GRIDS: [f64; 4] = [2.0, 1.5, 1.0, 0.5];
/// Relative slack on the extraction-time trend; wall clocks jitter.
const TIME_SLACK: f64 = 0.05;
const DBSCAN_CASES: usize = 100;
const MEC_CASES: usize = 1000;
const MEC_TOL: f64 = 1e-9;
const DISTANCE_POINTS: usize = 1000;
const DISTANCE_TOL: f64 = 1e-12;
const POLE_RADIUS: f64 = 0.10;
const POLE_RADIUS_TOL: f64 = 0.01;
/// Scanner noise for the pole check; see the decisions ledger.
const POLE_SIGMA: f64 = 0.003;
const TRANSFORM_TOL: f64 = 1e-9;
const GEOSTORE_CASES: usize = 500;
const VOLUME_REL_TOL: f64 = 1e-6;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 11] = [
        (1, "end-to-end synthetic accuracy", c1_accuracy),
        (2, "grid-size trend", c2_grid_trend),
        (3, "DBSCAN oracle equivalence", c3_dbscan),
        (4, "min-enclosing-circle oracle", c4_mec),
        (5, "unsigned-distance exactness", c5_distance),
        (6, "pole fidelity", c6_pole),
        (7, "guardrail transform round trip", c7_guardrail),
        (8, "geostore round trip", c8_geostore),
        (9, "mesh topology and volume", c9_mesh),
        (10, "storage trend", c10_storage),
        (11, "determinism across thread counts", c11_determinism),
    ];
    let only: Option<BTreeSet<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    // A panicking check is reported on its own FAIL line.
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = Vec::new();
    for (id, name, check) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let t = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::new(false, format!("panicked: {msg}"))
        });
        let tag = match (out.pass, KNOWN_RED.contains(&id)) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("{tag} [{id:>2}] {name}: {} ({:.1} s)", out.detail, t.elapsed().as_secs_f64());
        if !out.pass && !KNOWN_RED.contains(&id) {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
    println!("acceptance: ok");
}

// ---------------------------------------------------------------- helpers

struct PresetRun {
    summary: RunSummary,
    seconds: f64,
    _dir: tempfile::TempDir,
}

/// The 200 m preset through synth and the full pipeline, shared by the
/// accuracy and storage criteria.
fn preset_run() -> &'static PresetRun {
    static RUN: OnceLock<PresetRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let layout = Layout::new(dir.path());
        let t = Instant::now();
        let paths = pipeline::synth(&SceneSpec::preset_200m(7), &layout, CloudFormat::Ply).unwrap();
        let summary = pipeline::run(&PipelineConfig::default(), &paths.cloud, &layout).unwrap();
        PresetRun {
            summary,
            seconds: t.elapsed().as_secs_f64(),
            _dir: dir,
        }
    })
}

fn cm(m: f64) -> f64 {
    m * 100.0
}

fn mesh_of(cloud: &LabeledCloud, cfg: &ExtractConfig, semantic: Semantic) -> (Mesh, usize) {
    let ex = extract_instance(cloud, RecordMeta::new(semantic, 0, "t"), cfg, &ClusterParams::default_part()).unwrap();
    let polygons = match &ex.record.geometry {
        Geometry::PlaneLike(m) => m.len(),
        _ => 0,
    };
    (merged(&build_record_mesh(&ex.record, &MeshOptions::default()).unwrap()), polygons)
}

// ---------------------------------------------------------------- 1

fn c1_accuracy() -> Outcome {
    let run = preset_run();
    let d = &run.summary.distance;
    let overall = cm(d.overall.avg);
    let hyper: BTreeMap<HyperAsset, f64> = d.per_hyper_asset.iter().map(|(h, r)| (*h, cm(r.avg))).collect();
    let plane = hyper[&HyperAsset::PlaneLike];
    let best = hyper.iter().min_by(|a, b| a.1.total_cmp(b.1)).map(|x| *x.0);
    let worst = hyper.iter().max_by(|a, b| a.1.total_cmp(b.1)).map(|x| *x.0);
    let all_assets = Semantic::ALL.iter().all(|s| d.per_asset.contains_key(s));
    let pass = overall <= OVERALL_AVG_CM
        && plane <= PLANE_LIKE_AVG_CM
        && best == Some(HyperAsset::PlaneLike)
        && worst == Some(HyperAsset::Guardrail)
        && all_assets
        && d.excluded.is_empty()
        && run.seconds <= RUNTIME_LIMIT_S;
    Outcome::new(
        pass,
        format!(
            "overall {overall:.2} cm (<= {OVERALL_AVG_CM}), plane-like {plane:.2} cm (<= {PLANE_LIKE_AVG_CM}), \
             pole-like {:.2} cm, guardrail {:.2} cm, {} instances unmeshed, {:.0} s (<= {RUNTIME_LIMIT_S})",
            hyper.get(&HyperAsset::PoleLike).copied().unwrap_or(f64::NAN),
            hyper.get(&HyperAsset::Guardrail).copied().unwrap_or(f64::NAN),
            d.excluded.len(),
            run.seconds
        ),
    )
}

// ---------------------------------------------------------------- 2

fn c2_grid_trend() -> Outcome {
    let scene = synth::generate(&SceneSpec::undulating_patch(40.0, 10.0, 0.2, 20.0, 11)).unwrap();
    let cloud = &scene.cloud;
    let mut avgs = Vec::new();
    let mut times = Vec::new();
    let mut counts = Vec::new();
    for g in GRIDS {
        let cfg = ExtractConfig::default().with_grid(g);
        // Best of five damps scheduler noise.
        let mut best = f64::INFINITY;
        let mut mesh = None;
        for _ in 0..5 {
            let t = Instant::now();
            let m = mesh_of(cloud, &cfg, Semantic::RoadSurface);
            best = best.min(t.elapsed().as_secs_f64());
            mesh = Some(m);
        }
        let (mesh, n) = mesh.unwrap();
        let report = evaluate(&[EvalInput {
            semantic: Semantic::RoadSurface,
            instance_id: 0,
            points: &cloud.points,
            mesh: Some(&mesh),
        }]);
        avgs.push(cm(report.overall.avg));
        times.push(best);
        counts.push(n);
    }
    let acc = avgs.windows(2).all(|w| w[1] <= w[0]);
    let time = times.windows(2).all(|w| w[1] >= w[0] * (1.0 - TIME_SLACK));
    let more = counts.windows(2).all(|w| w[1] > w[0]);
    let fmt = |v: &[f64], p: usize| v.iter().map(|x| format!("{x:.p$}")).collect::<Vec<_>>().join(" > ");
    Outcome::new(
        acc && time && more,
        format!(
            "grids {GRIDS:?} m: avg {} cm, time {} s (slack {TIME_SLACK}), polygons {counts:?}",
            fmt(&avgs, 3),
            times.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(" < "),
        ),
    )
}

// ---------------------------------------------------------------- 3

/// Density-reachability closure by brute force. Returns the core clusters
/// (as sets) and, for every point, the clusters it is density-reachable from.
fn dbscan_oracle(pts: &[Point3], eps: f64, min_pts: usize) -> (Vec<BTreeSet<usize>>, Vec<BTreeSet<usize>>) {
    let n = pts.len();
    let near = |i: usize, j: usize| (pts[i] - pts[j]).norm_squared() <= eps * eps;
    let core: Vec<bool> = (0..n).map(|i| (0..n).filter(|&j| near(i, j)).count() >= min_pts).collect();
    let mut comp = vec![usize::MAX; n];
    let mut clusters = Vec::new();
    for s in 0..n {
        if !core[s] || comp[s] != usize::MAX {
            continue;
        }
        let id = clusters.len();
        let mut set = BTreeSet::new();
        let mut stack = vec![s];
        comp[s] = id;
        while let Some(i) = stack.pop() {
            set.insert(i);
            for j in 0..n {
                if core[j] && comp[j] == usize::MAX && near(i, j) {
                    comp[j] = id;
                    stack.push(j);
                }
            }
        }
        clusters.push(set);
    }
    let reach = (0..n)
        .map(|i| {
            if core[i] {
                BTreeSet::from([comp[i]])
            } else {
                (0..n).filter(|&j| core[j] && near(i, j)).map(|j| comp[j]).collect()
            }
        })
        .collect();
    (clusters, reach)
}

fn c3_dbscan() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut ok = 0;
    let mut first_bad = None;
    for case in 0..DBSCAN_CASES {
        let n = rng.gen_range(1..=200);
        let blobs: Vec<Point3> = (0..rng.gen_range(1..6))
            .map(|_| Point3::new(rng.gen_range(0.0..8.0), rng.gen_range(0.0..8.0), rng.gen_range(0.0..1.0)))
            .collect();
        let pts: Vec<Point3> = (0..n)
            .map(|_| {
                let c = blobs[rng.gen_range(0..blobs.len())];
                Point3::new(
                    c.x + rng.gen_range(-1.0..1.0),
                    c.y + rng.gen_range(-1.0..1.0),
                    c.z + rng.gen_range(-0.3..0.3),
                )
            })
            .collect();
        let (eps, min_pts) = (rng.gen_range(0.1..1.0), rng.gen_range(1..10));
        let got = dbscan(&pts, &ClusterParams::new(eps, min_pts)).unwrap();
        let (clusters, reach) = dbscan_oracle(&pts, eps, min_pts);
        // Map each produced label to the oracle cluster of its core points.
        let mut label_to: BTreeMap<usize, usize> = BTreeMap::new();
        let mut good = got.cluster_count == clusters.len();
        for (oc, set) in clusters.iter().enumerate() {
            for &i in set {
                match got.assignments[i] {
                    Some(l) => good &= *label_to.entry(l).or_insert(oc) == oc,
                    None => good = false,
                }
            }
        }
        let injective = label_to.values().collect::<BTreeSet<_>>().len() == label_to.len();
        for (i, r) in reach.iter().enumerate() {
            good &= match got.assignments[i] {
                None => r.is_empty(),
                Some(l) => label_to.get(&l).is_some_and(|oc| r.contains(oc)),
            };
        }
        if good && injective {
            ok += 1;
        } else if first_bad.is_none() {
            first_bad = Some(case);
        }
    }
    Outcome::new(
        ok == DBSCAN_CASES,
        format!("{ok}/{DBSCAN_CASES} cases match up to relabeling (first mismatch {first_bad:?})"),
    )
}

// ---------------------------------------------------------------- 4

fn circle_from(a: Point2, b: Point2, c: Option<Point2>) -> Option<(Point2, f64)> {
    match c {
        None => {
            let m = Point2::from((a.coords + b.coords) / 2.0);
            Some((m, (a - m).norm()))
        }
        Some(c) => {
            let d = 2.0 * (a.x * (b.y - c.y) + b.x * (c.y - a.y) + c.x * (a.y - b.y));
            if d.abs() < 1e-15 {
                return None;
            }
            let (a2, b2, c2) = (a.coords.norm_squared(), b.coords.norm_squared(), c.coords.norm_squared());
            let ux = (a2 * (b.y - c.y) + b2 * (c.y - a.y) + c2 * (a.y - b.y)) / d;
            let uy = (a2 * (c.x - b.x) + b2 * (a.x - c.x) + c2 * (b.x - a.x)) / d;
            let o = Point2::new(ux, uy);
            Some((o, (a - o).norm()))
        }
    }
}

/// Smallest circle through a pair or triple that holds every point.
fn mec_brute(pts: &[Point2]) -> f64 {
    if pts.len() == 1 {
        return 0.0;
    }
    let holds = |o: Point2, r: f64| pts.iter().all(|p| (p - o).norm() <= r + 1e-12 * (1.0 + r));
    let mut best = f64::INFINITY;
    let n = pts.len();
    for i in 0..n {
        for j in i + 1..n {
            if let Some((o, r)) = circle_from(pts[i], pts[j], None) {
                if r < best && holds(o, r) {
                    best = r;
                }
            }
            for k in j + 1..n {
                if let Some((o, r)) = circle_from(pts[i], pts[j], Some(pts[k])) {
                    if r < best && holds(o, r) {
                        best = r;
                    }
                }
            }
        }
    }
    best
}

fn c4_mec() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut ok = 0;
    let mut worst: f64 = 0.0;
    for case in 0..MEC_CASES {
        let n = rng.gen_range(1..=50);
        let mut pts: Vec<Point2> = match case % 4 {
            // Points on a circle put many candidates on the boundary at once.
            0 => (0..n)
                .map(|_| {
                    let a: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                    Point2::new(3.0 * a.cos(), 3.0 * a.sin())
                })
                .collect(),
            1 => (0..n)
                .map(|_| {
                    let t: f64 = rng.gen_range(-5.0..5.0);
                    Point2::new(t, 0.5 * t + 1.0)
                })
                .collect(),
            _ => (0..n).map(|_| Point2::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0))).collect(),
        };
        if case % 7 == 0 && n > 1 {
            pts[n - 1] = pts[0];
        }
        let c = min_enclosing_circle(&pts).unwrap();
        let want = mec_brute(&pts);
        let err = (c.radius - want).abs();
        let contains = pts.iter().all(|p| c.contains(p, MEC_TOL));
        worst = worst.max(err);
        if err <= MEC_TOL && contains {
            ok += 1;
        }
    }
    Outcome::new(
        ok == MEC_CASES,
        format!("{ok}/{MEC_CASES} radii within {MEC_TOL:e} and containing all points (worst {worst:.1e})"),
    )
}

// ---------------------------------------------------------------- 5

/// Closest-point distance to one triangle via its barycentric regions.
fn triangle_distance(p: &Point3, a: &Point3, b: &Point3, c: &Point3) -> f64 {
    let seg = |u: &Point3, v: &Point3| {
        let d = v - u;
        let t = ((p - u).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
        (p - (u + t * d)).norm()
    };
    let n = (b - a).cross(&(c - a));
    let h = (p - a).dot(&n) / n.norm_squared();
    let q = p - h * n;
    let inside = [(a, b), (b, c), (c, a)].iter().all(|(u, v)| (*v - *u).cross(&(q - *u)).dot(&n) >= 0.0);
    if inside {
        (p - q).norm()
    } else {
        seg(a, b).min(seg(b, c)).min(seg(c, a))
    }
}

fn c5_distance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    // A 25 x 10 quad grid over a bumpy height field: 500 triangles.
    let (nx, ny) = (25, 10);
    let mut mesh = Mesh::default();
    for j in 0..=ny {
        for i in 0..=nx {
            let (x, y) = (i as f64 * 0.4, j as f64 * 0.4);
            mesh.vertices.push(Point3::new(x, y, 0.3 * (x * 1.3).sin() * (y * 0.9).cos() + rng.gen_range(-0.05..0.05)));
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    for j in 0..ny {
        for i in 0..nx {
            mesh.faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            mesh.faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    assert_eq!(mesh.faces.len(), 500);
    let index = MeshIndex::new(&mesh).unwrap();
    let mut ok = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..DISTANCE_POINTS {
        let p = Point3::new(rng.gen_range(-2.0..12.0), rng.gen_range(-2.0..6.0), rng.gen_range(-2.0..2.0));
        let want = (0..mesh.faces.len())
            .map(|f| {
                let [a, b, c] = mesh.triangle(f);
                triangle_distance(&p, &a, &b, &c)
            })
            .fold(f64::INFINITY, f64::min);
        let err = (index.distance(&p) - want).abs();
        worst = worst.max(err);
        if err <= DISTANCE_TOL {
            ok += 1;
        }
    }
    Outcome::new(
        ok == DISTANCE_POINTS,
        format!("{ok}/{DISTANCE_POINTS} queries within {DISTANCE_TOL:e} of exhaustive search (worst {worst:.1e})"),
    )
}

// ---------------------------------------------------------------- 6

fn pole_cloud(radius: impl Fn(f64) -> f64, sigma: f64, seed: u64) -> LabeledCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    // About 400 points per square metre of pole skin.
    let n = (std::f64::consts::TAU * radius(1.5) * 3.0 * 400.0) as usize;
    let pts = (0..n)
        .map(|_| {
            let (a, z) = (rng.gen_range(0.0..std::f64::consts::TAU), rng.gen_range(0.0..3.0));
            let r = radius(z);
            Point3::new(
                r * a.cos() + noise.sample(&mut rng),
                r * a.sin() + noise.sample(&mut rng),
                z + noise.sample(&mut rng),
            )
        })
        .collect();
    LabeledCloud::uniform(pts, Semantic::RoadSign)
}

/// Mean distance of the ring vertices from their centroid.
fn ring_radius(ring: &Polygon3) -> f64 {
    let n = ring.shell.len() as f64;
    let (cx, cy) = ring.shell.iter().fold((0.0, 0.0), |a, p| (a.0 + p.x / n, a.1 + p.y / n));
    ring.shell.iter().map(|p| (p.x - cx).hypot(p.y - cy)).sum::<f64>() / n
}

fn c6_pole() -> Outcome {
    let cfg = ExtractConfig::default();
    let rings = extract_pole(&pole_cloud(|_| POLE_RADIUS, POLE_SIGMA, 6), &cfg).unwrap();
    let radii: Vec<f64> = rings.iter().map(ring_radius).collect();
    let worst = radii.iter().map(|r| (r - POLE_RADIUS).abs()).fold(0.0, f64::max);
    let straight = rings.len() == 30 && rings.iter().all(|r| r.shell.len() == cfg.n_rays) && worst <= POLE_RADIUS_TOL;

    // Taper 0.12 m to 0.08 m; the rings must follow it to within the same
    // tolerance and five-ring means must strictly decrease.
    let taper = |z: f64| 0.12 - 0.04 * z / 3.0;
    let trings = extract_pole(&pole_cloud(taper, POLE_SIGMA, 16), &cfg).unwrap();
    let tr: Vec<f64> = trings.iter().map(ring_radius).collect();
    let follows = trings
        .iter()
        .zip(&tr)
        .all(|(ring, r)| (r - taper(ring.shell[0].z)).abs() <= POLE_RADIUS_TOL);
    let smooth: Vec<f64> = tr.chunks(5).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
    let monotone = smooth.windows(2).all(|w| w[1] < w[0]);

    // Informational: the same pole at 5 mm noise.
    let noisy = extract_pole(&pole_cloud(|_| POLE_RADIUS, 0.005, 6), &cfg).unwrap();
    let noisy_worst = noisy.iter().map(|r| (ring_radius(r) - POLE_RADIUS).abs()).fold(0.0, f64::max);
    Outcome::new(
        straight && follows && monotone,
        format!(
            "sigma {:.0} mm: {} rings of {} rays, worst radius error {:.1} mm (<= {:.0}); taper follows {follows}, \
             5-ring means decreasing {monotone}; info: worst error at 5 mm noise {:.1} mm",
            POLE_SIGMA * 1e3,
            rings.len(),
            cfg.n_rays,
            worst * 1e3,
            POLE_RADIUS_TOL * 1e3,
            noisy_worst * 1e3
        ),
    )
}

// ---------------------------------------------------------------- 7

fn rail_cloud(curvature: f64, start: f64, end: f64, seed: u64) -> LabeledCloud {
    let mut spec = SceneSpec::empty(end + 5.0, seed);
    spec.curvature = curvature;
    spec.guardrails = vec![GuardrailSpec {
        start,
        end,
        offset: 0.0,
        section: Section::T,
    }];
    synth::generate(&spec).unwrap().cloud
}

fn c7_guardrail() -> Outcome {
    let radius = 20.0;
    let quarter = std::f64::consts::FRAC_PI_2 * radius;
    let cases = [
        ("straight", rail_cloud(0.0, 5.0, 25.0, 71)),
        ("90-degree arc", rail_cloud(1.0 / radius, 5.0, 5.0 + quarter, 72)),
    ];
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, cloud) in &cases {
        let segs = extract_guardrail(cloud, &ExtractConfig::default()).unwrap();
        let mut worst: f64 = 0.0;
        let mut pairs = 0;
        for seg in &segs {
            for (i, straight) in seg.straight.iter().enumerate() {
                let t = &seg.transforms[seg.block_of[i]];
                let pair = seg.pair(i);
                let sides = [(&pair.front, &straight.front), (&pair.back, &straight.back)];
                for (out, want) in sides {
                    let a: Vec<&Point3> = out.rings().flatten().collect();
                    let b: Vec<&Point3> = want.rings().flatten().collect();
                    if a.len() != b.len() {
                        worst = f64::INFINITY;
                    }
                    for (p, q) in a.iter().zip(&b) {
                        worst = worst.max((t.forward(p) - *q).norm());
                    }
                }
                pairs += 1;
            }
        }
        let turned = segs
            .iter()
            .flat_map(|s| s.transforms.iter().map(|t| t.theta))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| (lo.min(t), hi.max(t)));
        let ok = pairs > 0 && worst <= TRANSFORM_TOL;
        pass &= ok;
        parts.push(format!(
            "{name}: {pairs} pairs, worst {worst:.1e}, block angles span {:.0} deg",
            (turned.1 - turned.0).to_degrees()
        ));
    }
    Outcome::new(pass, format!("{} (tol {TRANSFORM_TOL:e})", parts.join("; ")))
}

// ---------------------------------------------------------------- 8

fn key_allowed(key: &str, parent: Option<&str>) -> bool {
    const FIXED: [&str; 14] = [
        "Meta",
        "Data",
        "Semantic",
        "InstanceId",
        "Segment",
        "Units",
        "SchemaVersion",
        "MultiPolygon",
        "Shell",
        "Holes",
        "Vertices",
        "Front",
        "Back",
        "Poles",
    ];
    let indexed = |prefix: &str| {
        key.strip_prefix(prefix)
            .is_some_and(|n| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()))
    };
    FIXED.contains(&key)
        || key == "Panels"
        || key == "Lights"
        || (parent == Some("MultiPolygon") && indexed("Polygon_"))
        || (parent == Some("Data") && indexed("Guardrail_"))
        || (parent == Some("Poles") && indexed("Pole_"))
        || (parent == Some("Panels") && indexed("Panel_"))
        || (parent == Some("Lights") && indexed("Light_"))
}

fn check_keys(v: &Value, parent: Option<&str>, bad: &mut Vec<String>) {
    if let Value::Object(m) = v {
        if m.contains_key("Shell") && !m.contains_key("Holes") {
            bad.push("Shell without Holes".into());
        }
        if m.contains_key("Front") != m.contains_key("Back") {
            bad.push("unpaired Front/Back".into());
        }
        for (k, child) in m {
            if !key_allowed(k, parent) {
                bad.push(k.clone());
            }
            check_keys(child, Some(k), bad);
        }
    }
}

fn c8_geostore() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut equal, mut stable, mut keys) = (0, 0, 0);
    let mut bad_keys = Vec::new();
    for _ in 0..GEOSTORE_CASES {
        let r = synth::random_record(&mut rng);
        let bytes = to_json(&r).unwrap();
        let back = from_json(&bytes).unwrap();
        equal += usize::from(back == r);
        stable += usize::from(to_json(&r).unwrap() == bytes && to_json(&back).unwrap() == bytes);
        let v: Value = serde_json::from_slice(&bytes).unwrap();
        let top: Vec<&String> = v.as_object().unwrap().keys().collect();
        let mut bad = Vec::new();
        if top != ["Meta", "Data"] {
            bad.push(format!("top-level keys {top:?}"));
        }
        check_keys(&v, None, &mut bad);
        if bad.is_empty() {
            keys += 1;
        } else if bad_keys.len() < 3 {
            bad_keys.extend(bad);
        }
    }
    let n = GEOSTORE_CASES;
    Outcome::new(
        equal == n && stable == n && keys == n,
        format!("{equal}/{n} structurally equal, {stable}/{n} byte-stable, {keys}/{n} with exact key names {bad_keys:?}"),
    )
}

// ---------------------------------------------------------------- 9

/// Every undirected edge used by exactly two faces, once in each direction.
fn two_manifold(mesh: &Mesh) -> bool {
    let mut directed: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for f in &mesh.faces {
        for k in 0..3 {
            *directed.entry((f[k], f[(k + 1) % 3])).or_default() += 1;
        }
    }
    directed.iter().all(|(&(a, b), &n)| n == 1 && directed.get(&(b, a)) == Some(&1))
}

fn regular(n: usize, r: f64, z: f64, phase: f64, c: (f64, f64)) -> Vec<Point3> {
    (0..n)
        .map(|i| {
            let a = phase + std::f64::consts::TAU * i as f64 / n as f64;
            Point3::new(c.0 + r * a.cos(), c.1 + r * a.sin(), z)
        })
        .collect()
}

fn regular_area(n: usize, r: f64) -> f64 {
    0.5 * n as f64 * r * r * (std::f64::consts::TAU / n as f64).sin()
}

fn shoelace(ring: &[Point3]) -> f64 {
    (0..ring.len())
        .map(|i| {
            let (p, q) = (ring[i], ring[(i + 1) % ring.len()]);
            p.x * q.y - q.x * p.y
        })
        .sum::<f64>()
        / 2.0
}

fn c9_mesh() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut closed, mut volume, mut total) = (0, 0, 0);
    let mut worst: f64 = 0.0;
    let mut check = |mesh: &Mesh, want: f64, worst: &mut f64| {
        total += 1;
        if mesh.is_closed() && two_manifold(mesh) {
            closed += 1;
        }
        let rel = (mesh.signed_volume().abs() - want).abs() / want;
        *worst = worst.max(rel);
        if rel <= VOLUME_REL_TOL {
            volume += 1;
        }
    };
    for _ in 0..200 {
        // Ring series: a frustum stack of similar regular polygons.
        let n = rng.gen_range(3..40);
        let phase = rng.gen_range(0.0..1.0);
        let c = (rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0));
        let k = rng.gen_range(2..8);
        let mut z = rng.gen_range(-5.0..5.0);
        let mut rings = Vec::new();
        let mut radii = Vec::new();
        let mut want = 0.0;
        for i in 0..k {
            let r = rng.gen_range(0.05..1.0);
            if i > 0 {
                let h = rng.gen_range(0.05..0.5);
                let (a1, a2) = (regular_area(n, radii[i - 1]), regular_area(n, r));
                want += h / 3.0 * (a1 + a2 + (a1 * a2).sqrt());
                z += h;
            }
            radii.push(r);
            rings.push(Polygon3::new(regular(n, r, z, phase, c), vec![]));
        }
        check(&mesh_ring_series(&rings).unwrap(), want, &mut worst);

        // Pair: a random star-shaped prism, sometimes with a square hole.
        let m = rng.gen_range(3..20);
        let mut shell: Vec<Point3> = (0..m)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / m as f64;
                let r = rng.gen_range(1.0..3.0);
                Point3::new(c.0 + r * a.cos(), c.1 + r * a.sin(), z)
            })
            .collect();
        if rng.gen_bool(0.5) {
            shell.reverse();
        }
        let holes = if rng.gen_bool(0.5) {
            let s = 0.4;
            vec![vec![
                Point3::new(c.0 - s, c.1 - s, z),
                Point3::new(c.0 - s, c.1 + s, z),
                Point3::new(c.0 + s, c.1 + s, z),
                Point3::new(c.0 + s, c.1 - s, z),
            ]]
        } else {
            vec![]
        };
        let area = shoelace(&shell).abs() - holes.iter().map(|h| shoelace(h).abs()).sum::<f64>();
        let t = rng.gen_range(0.01..0.5);
        let front = Polygon3::new(shell, holes);
        let back = front.map_points(|p| Point3::new(p.x, p.y, p.z - t));
        check(&mesh_pair(&front, &back).unwrap(), area * t, &mut worst);
    }
    Outcome::new(
        closed == total && volume == total,
        format!("{closed}/{total} closed 2-manifold, {volume}/{total} volumes within {VOLUME_REL_TOL:e} (worst {worst:.1e})"),
    )
}

// ---------------------------------------------------------------- 10

fn c10_storage() -> Outcome {
    let size = &preset_run().summary.report.size;
    let ratio = size.total.ratio().unwrap_or(0.0);
    Outcome::new(
        ratio > 1.0,
        format!(
            "mesh {} B / JSON {} B = {ratio:.2} (> 1)",
            size.total.mesh_bytes, size.total.json_bytes
        ),
    )
}

// ---------------------------------------------------------------- 11

/// A 60 m stretch of the preset with every asset type in it.
fn short_scene(seed: u64) -> SceneSpec {
    let mut s = SceneSpec::preset_200m(seed);
    s.length = 60.0;
    for l in &mut s.lanes {
        l.end = 58.0;
    }
    s.signs.truncate(1);
    s.signs[0].station = 55.0;
    s.lights.retain(|x| x.station < 60.0);
    s.guardrails = vec![
        GuardrailSpec {
            start: 10.0,
            end: 50.0,
            offset: 9.8,
            section: Section::T,
        },
        GuardrailSpec {
            start: 15.0,
            end: 45.0,
            offset: -9.8,
            section: Section::Hash,
        },
    ];
    s
}

/// Every stage output except wall-clock timings and the report built on them.
fn stage_files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    for stage in ["segment", "extract", "build", "evaluate"] {
        for e in std::fs::read_dir(root.join(stage)).unwrap() {
            let p = e.unwrap().path();
            if p.file_name().is_some_and(|n| n != "timing.json") {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn c11_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let scene = Layout::new(dir.path().join("scene"));
    let paths = pipeline::synth(&short_scene(21), &scene, CloudFormat::Ply).unwrap();
    let input = paths.cloud.to_str().unwrap().to_string();
    let mut trees = Vec::new();
    let threads = [1, 3, 4];
    for n in threads {
        let out = dir.path().join(format!("t{n}"));
        let args = [
            "roadtwin",
            "run",
            "--threads",
            &n.to_string(),
            "--input",
            &input,
            "--out-dir",
            out.to_str().unwrap(),
        ]
        .map(String::from);
        let cli = Cli::try_parse_from(args).unwrap();
        if let Err(e) = roadtwin_cli::execute(&cli) {
            return Outcome::new(false, format!("run with {n} threads failed: {e}"));
        }
        trees.push(stage_files(&out));
    }
    let files = trees[0].len();
    let meshes = trees[0].keys().filter(|p| p.extension().is_some_and(|e| e == "obj")).count();
    let records = trees[0].keys().filter(|p| p.starts_with("extract") && p.extension().is_some_and(|e| e == "json")).count();
    let same = trees.windows(2).all(|w| w[0] == w[1]);
    Outcome::new(
        same && meshes > 0 && records > 0,
        format!("threads {threads:?}: {files} files ({records} JSON in extract, {meshes} meshes) byte-identical: {same}"),
    )
}
