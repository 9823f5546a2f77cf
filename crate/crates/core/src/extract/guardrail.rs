use super::{project_xy, require_points, BlockTransform, ExtractConfig, ExtractError, RotationAxis};
use crate::geom2d::{
    alphashape, extract_centerlines, intersect, split_polygon_by_centerlines, Polygon2, Polyline2, SplitPiece,
};
use crate::ingest::LabeledCloud;
use crate::lift::Lifter;
use std::f64::consts::{PI, TAU};
use crate::types::{rotate2, MultiPolygon3, Plane, Point2, Point3, PolygonPair, Vector3};

/// Guardrail geometry along one centerline.
#[derive(Clone, Debug, PartialEq)]
pub struct GuardrailSegment {
    pub front: MultiPolygon3,
    pub back: MultiPolygon3,
    /// One transform per block, in centerline order.
    pub transforms: Vec<BlockTransform>,
    /// Block index of each output polygon pair.
    pub block_of: Vec<usize>,
    /// Each output pair as it was in the straightened frame.
    pub straight: Vec<PolygonPair>,
}

impl GuardrailSegment {
    pub fn pair(&self, i: usize) -> PolygonPair {
        PolygonPair {
            front: self.front[i].clone(),
            back: self.back[i].clone(),
        }
    }
}

/// Distance along `line` of the point nearest to `p`.
fn arc_position(line: &Polyline2, p: &Point2) -> f64 {
    let mut best = (f64::INFINITY, 0.0);
    let mut walked = 0.0;
    for (a, b) in line.segments() {
        let ab = b - a;
        let len = ab.norm();
        let t = if len > 0.0 { ((p - a).dot(&ab) / (len * len)).clamp(0.0, 1.0) } else { 0.0 };
        let d = (p - (a + t * ab)).norm();
        if d < best.0 {
            best = (d, walked + t * len);
        }
        walked += len;
    }
    best.1
}

/// Index of the piece owning each point: the first piece containing it, or
/// the piece whose boundary is within `tol` for points on a shared edge.
fn assign_points(pts: &[Point2], pieces: &[&Polygon2], tol: f64) -> Vec<Option<usize>> {
    let boxes: Vec<(Point2, Point2)> = pieces.iter().map(|p| p.bbox()).collect();
    let near_box = |b: &(Point2, Point2), p: &Point2, pad: f64| {
        p.x >= b.0.x - pad && p.x <= b.1.x + pad && p.y >= b.0.y - pad && p.y <= b.1.y + pad
    };
    pts.iter()
        .map(|p| {
            let hit = (0..pieces.len()).find(|&i| near_box(&boxes[i], p, 0.0) && pieces[i].contains(p));
            hit.or_else(|| {
                (0..pieces.len())
                    .filter(|&i| near_box(&boxes[i], p, tol))
                    .map(|i| (i, pieces[i].boundary_distance(p)))
                    .filter(|&(_, d)| d <= tol)
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .map(|(i, _)| i)
            })
        })
        .collect()
}

/// Straightens each centerline's blocks end to end, contours the straight
/// rail in XZ, lifts it into front/back pairs and moves every block's share
/// of the pairs back into place.
pub fn extract_guardrail(cloud: &LabeledCloud, cfg: &ExtractConfig) -> Result<Vec<GuardrailSegment>, ExtractError> {
    require_points("guardrail instance", cloud.len(), 3)?;
    let pts = project_xy(cloud);
    let mut segments = Vec::new();
    for shape in alphashape(&pts, cfg.alpha_guardrail_xy)? {
        let lines: Vec<Polyline2> = extract_centerlines(&shape, cfg.guardrail_min_branch)?
            .into_iter()
            .filter(|l| l.length() >= cfg.guardrail_min_branch)
            .collect();
        if lines.is_empty() {
            continue;
        }
        let pieces = split_polygon_by_centerlines(&shape, &lines, cfg.guardrail_block_len)?;
        let (lo, hi) = shape.bbox();
        let tol = 1e-6 * (hi - lo).norm().max(1.0);
        let owner = assign_points(&pts, &pieces.iter().map(|p| &p.polygon).collect::<Vec<_>>(), tol);
        let line_of: Vec<usize> = pieces
            .iter()
            .map(|p| {
                (0..lines.len())
                    .min_by(|&a, &b| lines[a].distance_to(&p.center).total_cmp(&lines[b].distance_to(&p.center)))
                    .expect("at least one centerline")
            })
            .collect();
        for (j, line) in lines.iter().enumerate() {
            let mut blocks: Vec<usize> = (0..pieces.len()).filter(|&i| line_of[i] == j).collect();
            blocks.sort_by(|&a, &b| {
                arc_position(line, &pieces[a].center).total_cmp(&arc_position(line, &pieces[b].center))
            });
            if let Some(seg) = straighten_and_lift(cloud, &pieces, &blocks, &owner, cfg)? {
                segments.push(seg);
            }
        }
    }
    if segments.is_empty() {
        return Err(ExtractError::NoCenterline);
    }
    Ok(segments)
}

fn straighten_and_lift(
    cloud: &LabeledCloud,
    pieces: &[SplitPiece],
    blocks: &[usize],
    owner: &[Option<usize>],
    cfg: &ExtractConfig,
) -> Result<Option<GuardrailSegment>, ExtractError> {
    let mut transforms: Vec<BlockTransform> = Vec::with_capacity(blocks.len());
    let mut arc = 0.0;
    for &b in blocks {
        let piece = &pieces[b];
        // Keep consecutive angles within half a turn so they vary smoothly.
        let theta = match transforms.last() {
            Some(prev) => prev.theta + (piece.theta - prev.theta + PI).rem_euclid(TAU) - PI,
            None => piece.theta,
        };
        let xs = piece.polygon.shell.iter().map(|v| rotate2(v, &piece.center, -piece.theta).x);
        let (min_x, max_x) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, z), x| (a.min(x), z.max(x)));
        transforms.push(BlockTransform {
            axis: RotationAxis::Z,
            theta,
            center: piece.center,
            offset: Vector3::new(arc - min_x, -piece.center.y, 0.0),
            arc_start: arc,
        });
        arc += max_x - min_x;
    }
    let slot: std::collections::HashMap<usize, usize> = blocks.iter().enumerate().map(|(k, &b)| (b, k)).collect();
    let straight: Vec<Point3> = cloud
        .points
        .iter()
        .zip(owner)
        .filter_map(|(p, o)| o.and_then(|b| slot.get(&b)).map(|&k| transforms[k].forward(p)))
        .collect();
    if straight.len() < 3 {
        return Ok(None);
    }
    let xz: Vec<Point2> = straight.iter().map(|p| Plane::XZ.project(p)).collect();
    let contours = alphashape(&xz, cfg.alpha_guardrail_xz)?;
    let lifter = Lifter::new(&straight, Plane::XZ, cfg.lift)?;
    let (lo, hi) = crate::geom2d::bbox(&xz);
    let pad = 1.0 + (hi - lo).norm();

    let mut seg = GuardrailSegment {
        front: Vec::new(),
        back: Vec::new(),
        transforms,
        block_of: Vec::new(),
        straight: Vec::new(),
    };
    for (k, t) in seg.transforms.iter().enumerate() {
        let x0 = if k == 0 { lo.x - pad } else { t.arc_start };
        let x1 = seg.transforms.get(k + 1).map_or(hi.x + pad, |n| n.arc_start);
        let slab = Polygon2::rect(Point2::new(x0, lo.y - pad), Point2::new(x1, hi.y + pad));
        for contour in &contours {
            for piece in intersect(contour, &slab) {
                let pair = lifter.polygon_v2(&piece);
                seg.front.push(pair.front.map_points(|p| t.inverse(p)));
                seg.back.push(pair.back.map_points(|p| t.inverse(p)));
                seg.block_of.push(k);
                seg.straight.push(pair);
            }
        }
    }
    Ok(Some(seg))
}
