use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roadtwin_core::cluster::dbscan;
use roadtwin_core::geom2d::{alphashape, min_enclosing_circle};
use roadtwin_core::mesh::{triangulate, Mesh};
use roadtwin_core::metrics::{brute_force_distance, MeshIndex};
use roadtwin_core::{ClusterParams, Point2, Point3};

fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(42)
}

/// Blobs of points along a line, a few metres apart.
fn blobs(n: usize) -> Vec<Point3> {
    let mut r = rng();
    (0..n)
        .map(|i| {
            let c = (i % 20) as f64 * 3.0;
            Point3::new(c + r.gen_range(-0.5..0.5), r.gen_range(-0.5..0.5), r.gen_range(0.0..0.2))
        })
        .collect()
}

fn patch(n: usize) -> Vec<Point2> {
    let mut r = rng();
    (0..n).map(|_| Point2::new(r.gen_range(0.0..20.0), r.gen_range(0.0..5.0))).collect()
}

fn bench_dbscan(c: &mut Criterion) {
    let mut g = c.benchmark_group("dbscan");
    for n in [10_000, 50_000] {
        let pts = blobs(n);
        let params = ClusterParams::new(0.2, 5);
        g.bench_with_input(BenchmarkId::from_parameter(n), &pts, |b, pts| {
            b.iter(|| dbscan(black_box(pts), &params).unwrap())
        });
    }
    g.finish();
}

fn bench_mec(c: &mut Criterion) {
    let mut r = rng();
    let ring: Vec<Point2> = (0..2000)
        .map(|_| {
            let t = r.gen_range(0.0..std::f64::consts::TAU);
            let rad = 0.1 + r.gen_range(-0.003..0.003);
            Point2::new(rad * t.cos(), rad * t.sin())
        })
        .collect();
    c.bench_function("min_enclosing_circle/2000", |b| {
        b.iter(|| min_enclosing_circle(black_box(&ring)).unwrap())
    });
}

fn bench_alpha(c: &mut Criterion) {
    let pts = patch(20_000);
    c.bench_function("alphashape/20000", |b| b.iter(|| alphashape(black_box(&pts), 1.0).unwrap()));
}

fn bench_triangulate(c: &mut Criterion) {
    // Star shell with a ring of square holes.
    let n = 400;
    let shell: Vec<Point2> = (0..n)
        .map(|i| {
            let t = i as f64 / n as f64 * std::f64::consts::TAU;
            let rad = if i % 2 == 0 { 10.0 } else { 9.0 };
            Point2::new(rad * t.cos(), rad * t.sin())
        })
        .collect();
    let mut rings = vec![shell];
    for k in 0..12 {
        let t = k as f64 / 12.0 * std::f64::consts::TAU;
        let (cx, cy) = (5.0 * t.cos(), 5.0 * t.sin());
        rings.push(vec![
            Point2::new(cx - 0.5, cy - 0.5),
            Point2::new(cx - 0.5, cy + 0.5),
            Point2::new(cx + 0.5, cy + 0.5),
            Point2::new(cx + 0.5, cy - 0.5),
        ]);
    }
    c.bench_function("triangulate/star_with_holes", |b| {
        b.iter(|| triangulate(black_box(&rings)).unwrap())
    });
}

/// A bumpy height field, `nx` by `ny` cells of two triangles each.
fn terrain(nx: usize, ny: usize) -> Mesh {
    let mut vertices = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            let (x, y) = (i as f64 * 0.5, j as f64 * 0.5);
            vertices.push(Point3::new(x, y, 0.1 * (x * 0.7).sin() * (y * 1.3).cos()));
        }
    }
    let mut faces = Vec::new();
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    for j in 0..ny {
        for i in 0..nx {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    Mesh { vertices, faces }
}

fn bench_distance(c: &mut Criterion) {
    let mesh = terrain(100, 40);
    let mut r = rng();
    let queries: Vec<Point3> = (0..1000)
        .map(|_| Point3::new(r.gen_range(0.0..50.0), r.gen_range(0.0..20.0), r.gen_range(-0.3..0.3)))
        .collect();
    let index = MeshIndex::new(&mesh).unwrap();
    c.bench_function("distance/indexed_1000", |b| {
        b.iter(|| queries.iter().map(|q| index.distance(q)).sum::<f64>())
    });
    c.bench_function("distance/brute_force_100", |b| {
        b.iter(|| queries[..100].iter().map(|q| brute_force_distance(q, &mesh).unwrap()).sum::<f64>())
    });
}

criterion_group!(benches, bench_dbscan, bench_mec, bench_alpha, bench_triangulate, bench_distance);
criterion_main!(benches);
