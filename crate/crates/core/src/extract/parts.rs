use super::{largest, project_xy, require_points, ExtractConfig, ExtractError};
use crate::geom2d::{
    alphashape, extract_centerlines, fit_line_angle, min_enclosing_circle, ray_sample, split_polygon_by_centerline,
    Polygon2, RayShape,
};
use crate::ingest::LabeledCloud;
use crate::lift::Lifter;
use crate::record::PairSet;
use crate::types::{rotate_about_y, rotate_about_z, MultiPolygon3, Plane, Point2, Point3, Polygon3};

fn mean_xy(pts: &[Point2]) -> Point2 {
    let n = pts.len() as f64;
    Point2::from(pts.iter().fold(nalgebra::Vector2::zeros(), |a, p| a + p.coords) / n)
}

/// Slab index for each height. Slabs are `dh` tall from the lowest point; a
/// top remainder shorter than half a slab joins the slab below it.
pub(crate) fn slab_indices(z: &[f64], dh: f64) -> (Vec<usize>, usize) {
    let lo = z.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let extent = hi - lo;
    let full = (extent / dh + 1e-9).floor() as usize;
    let rest = extent - full as f64 * dh;
    let count = if full == 0 || rest >= 0.5 * dh { full + 1 } else { full };
    let idx = z
        .iter()
        .map(|v| (((v - lo) / dh).floor() as usize).min(count - 1))
        .collect();
    (idx, count)
}

/// Horizontal section rings of a pole, bottom to top. Each ring samples the
/// slab's minimum enclosing circle with `n_rays` rays and sits at the slab's
/// mean height.
pub fn extract_pole(cloud: &LabeledCloud, cfg: &ExtractConfig) -> Result<MultiPolygon3, ExtractError> {
    require_points("pole part", cloud.len(), 3)?;
    let z: Vec<f64> = cloud.points.iter().map(|p| p.z).collect();
    let (idx, count) = slab_indices(&z, cfg.dh);
    let mut slabs: Vec<Vec<&Point3>> = vec![Vec::new(); count];
    for (p, &k) in cloud.points.iter().zip(&idx) {
        slabs[k].push(p);
    }
    let mut rings = Vec::new();
    for slab in slabs.iter().filter(|s| s.len() >= 3) {
        let xy: Vec<Point2> = slab.iter().map(|p| Point2::new(p.x, p.y)).collect();
        let circle = min_enclosing_circle(&xy)?;
        let ring = ray_sample(RayShape::Circle(circle), cfg.n_rays)?;
        let zm = slab.iter().map(|p| p.z).sum::<f64>() / slab.len() as f64;
        rings.push(Polygon3::new(ring.vertices.iter().map(|v| Point3::new(v.x, v.y, zm)).collect(), vec![]));
    }
    if rings.is_empty() {
        return Err(ExtractError::EmptyPole);
    }
    Ok(rings)
}

/// Front/back face pairs of a thin panel. The panel is turned parallel to X,
/// contoured in XZ, lifted with the pair rule, and turned back.
pub fn extract_panel(cloud: &LabeledCloud, cfg: &ExtractConfig) -> Result<PairSet, ExtractError> {
    require_points("panel part", cloud.len(), 3)?;
    let xy = project_xy(cloud);
    let theta = fit_line_angle(&xy)?;
    let c = mean_xy(&xy);
    let turned: Vec<Point3> = cloud.points.iter().map(|p| rotate_about_z(p, &c, -theta)).collect();
    let xz: Vec<Point2> = turned.iter().map(|p| Plane::XZ.project(p)).collect();
    let faces = alphashape(&xz, cfg.alpha_fine)?;
    let lifter = Lifter::new(&turned, Plane::XZ, cfg.lift)?;
    let mut out = PairSet::default();
    for face in &faces {
        let pair = lifter.polygon_v2(face);
        out.front.push(pair.front.map_points(|p| rotate_about_z(p, &c, theta)));
        out.back.push(pair.back.map_points(|p| rotate_about_z(p, &c, theta)));
    }
    Ok(out)
}

/// Cross-section rings of a lamp head or arm, ordered along its XZ
/// centerline.
pub fn extract_light(cloud: &LabeledCloud, cfg: &ExtractConfig) -> Result<MultiPolygon3, ExtractError> {
    require_points("light part", cloud.len(), 3)?;
    let xy = project_xy(cloud);
    let theta = fit_line_angle(&xy)?;
    let c = mean_xy(&xy);
    let turned: Vec<Point3> = cloud.points.iter().map(|p| rotate_about_z(p, &c, -theta)).collect();
    let xz: Vec<Point2> = turned.iter().map(|p| Plane::XZ.project(p)).collect();
    let outline = largest(alphashape(&xz, cfg.alpha_fine)?)?;
    let line = extract_centerlines(&outline, cfg.light_min_branch)?
        .into_iter()
        .find(|l| l.length() >= cfg.light_min_branch)
        .ok_or(ExtractError::NoCenterline)?;
    let chunks = split_polygon_by_centerline(&outline, &line, cfg.dl)?;
    let (lo, hi) = outline.bbox();
    let tol = 1e-6 * (hi - lo).norm().max(1.0);
    let mut taken = vec![false; turned.len()];
    let mut rings = Vec::new();
    for chunk in &chunks {
        let members: Vec<usize> = (0..turned.len())
            .filter(|&i| !taken[i] && in_or_on(&chunk.polygon, &xz[i], tol))
            .collect();
        for &i in &members {
            taken[i] = true;
        }
        if members.len() < 3 {
            continue;
        }
        let gamma = chunk.theta;
        let local: Vec<Point3> = members
            .iter()
            .map(|&i| rotate_about_y(&turned[i], &chunk.center, -gamma))
            .collect();
        let yz: Vec<Point2> = local.iter().map(|p| Plane::YZ.project(p)).collect();
        let section = match alphashape(&yz, cfg.alpha_fine).map_err(ExtractError::from).and_then(largest) {
            Ok(s) => s,
            Err(e) => {
                log::debug!("light chunk skipped: {e}");
                continue;
            }
        };
        let ring = ray_sample(RayShape::Polygon(&section), cfg.n_rays)?;
        let x = local.iter().map(|p| p.x).sum::<f64>() / local.len() as f64;
        let shell = ring
            .vertices
            .iter()
            .map(|uv| {
                let p = rotate_about_y(&Plane::YZ.compose(uv, x), &chunk.center, gamma);
                rotate_about_z(&p, &c, theta)
            })
            .collect();
        rings.push(Polygon3::new(shell, vec![]));
    }
    if rings.is_empty() {
        return Err(ExtractError::EmptyContour);
    }
    Ok(rings)
}

fn in_or_on(poly: &Polygon2, p: &Point2, tol: f64) -> bool {
    let (lo, hi) = poly.bbox();
    if p.x < lo.x - tol || p.x > hi.x + tol || p.y < lo.y - tol || p.y > hi.y + tol {
        return false;
    }
    poly.contains(p) || poly.boundary_distance(p) <= tol
}
