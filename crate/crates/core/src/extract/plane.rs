use super::{project_xy, require_points, ExtractConfig, ExtractError};
use crate::geom2d::{
    alphashape, extract_centerlines, fit_line_angle, grid_partition, intersect_all, split_polygon_by_centerlines,
    Polygon2, SplitPiece,
};
use crate::ingest::LabeledCloud;
use crate::lift::Lifter;
use crate::types::{MultiPolygon3, Plane, Semantic};

const SLIVER_AREA: f64 = 1e-9;

/// Road surface, side or lane instance to lifted polygons. Surfaces and
/// sides are gridded along their centerlines; lanes keep their fine contour.
pub fn extract_plane_like(
    cloud: &LabeledCloud,
    semantic: Semantic,
    cfg: &ExtractConfig,
) -> Result<MultiPolygon3, ExtractError> {
    if !matches!(semantic, Semantic::RoadSurface | Semantic::RoadSide | Semantic::RoadLane) {
        return Err(ExtractError::WrongSemantic(semantic));
    }
    require_points("plane-like instance", cloud.len(), 3)?;
    let pts = project_xy(cloud);
    let fine = alphashape(&pts, cfg.alpha_fine)?;
    let lifter = Lifter::new(&cloud.points, Plane::XY, cfg.lift)?;
    if semantic == Semantic::RoadLane {
        return Ok(fine.iter().map(|p| lifter.polygon_v1(p)).collect());
    }
    let cells = plane_cells(&pts, &fine, cfg)?;
    Ok(cells.iter().map(|c| lifter.polygon_v1(c)).collect())
}

/// 2D cells: coarse contour split along its centerlines, each block gridded
/// in its own frame and clipped to the fine contour.
pub(crate) fn plane_cells(
    pts: &[crate::types::Point2],
    fine: &[Polygon2],
    cfg: &ExtractConfig,
) -> Result<Vec<Polygon2>, ExtractError> {
    let coarse: Vec<Polygon2> = alphashape(pts, cfg.alpha_coarse)?
        .into_iter()
        .map(|p| Polygon2::new(p.shell, vec![]))
        .collect();
    let mut out = Vec::new();
    for shape in &coarse {
        let lines = extract_centerlines(shape, cfg.plane_min_branch)?;
        let pieces = if lines.is_empty() {
            log::debug!("no centerline in a coarse contour of area {:.3}; using its principal axis", shape.area());
            vec![SplitPiece {
                polygon: shape.clone(),
                theta: fit_line_angle(&shape.shell)?,
                center: shape.centroid(),
            }]
        } else {
            split_polygon_by_centerlines(shape, &lines, cfg.plane_block_len)?
        };
        for piece in &pieces {
            let fine_piece = intersect_all(fine, &piece.polygon);
            if fine_piece.is_empty() {
                continue;
            }
            for cell in grid_partition(&piece.polygon, piece.theta, &piece.center, cfg.grid_w, cfg.grid_l)? {
                out.extend(intersect_all(&fine_piece, &cell).into_iter().filter(|c| c.area() > SLIVER_AREA));
            }
        }
    }
    Ok(out)
}
