use super::{intersect_all, GeomError, Polygon2};
use crate::types::{rotate2, Point2};

/// Cells below this area (m²) are clipping slivers and are dropped.
const SLIVER_AREA: f64 = 1e-9;

/// Oriented grid over a polygon set. The polygons are rotated by `-theta`
/// about `center`, tiled with `grid_l` (along X) by `grid_w` (across) cells
/// anchored at the bounding-box minimum, clipped, and rotated back. Cells are
/// ordered along the rotated X axis first, then across.
pub fn grid_partition_all(
    polygons: &[Polygon2],
    theta: f64,
    center: &Point2,
    grid_w: f64,
    grid_l: f64,
) -> Result<Vec<Polygon2>, GeomError> {
    if !(grid_w > 0.0 && grid_l > 0.0 && grid_w.is_finite() && grid_l.is_finite()) {
        return Err(GeomError::InvalidParam(format!("grid size must be positive, got {grid_w} x {grid_l}")));
    }
    let area: f64 = polygons.iter().map(Polygon2::area).sum();
    if !(area > 0.0) {
        return Err(GeomError::Degenerate("zero-area polygon cannot be gridded".into()));
    }
    let rotated: Vec<Polygon2> = polygons
        .iter()
        .map(|p| p.map_points(|q| rotate2(q, center, -theta)))
        .collect();
    let all: Vec<Point2> = rotated.iter().flat_map(|p| p.shell.iter().copied()).collect();
    let (lo, hi) = super::bbox(&all);
    let count = |extent: f64, step: f64| ((extent / step - 1e-9).ceil() as usize).max(1);
    let (nx, ny) = (count(hi.x - lo.x, grid_l), count(hi.y - lo.y, grid_w));
    let mut cells = Vec::new();
    for i in 0..nx {
        for j in 0..ny {
            let min = Point2::new(lo.x + i as f64 * grid_l, lo.y + j as f64 * grid_w);
            let max = Point2::new(
                if i + 1 == nx { hi.x.max(min.x + grid_l) } else { min.x + grid_l },
                if j + 1 == ny { hi.y.max(min.y + grid_w) } else { min.y + grid_w },
            );
            let rect = Polygon2::rect(min, max);
            for piece in intersect_all(&rotated, &rect) {
                if piece.area() > SLIVER_AREA {
                    cells.push(piece.map_points(|q| rotate2(q, center, theta)));
                }
            }
        }
    }
    Ok(cells)
}

pub fn grid_partition(
    polygon: &Polygon2,
    theta: f64,
    center: &Point2,
    grid_w: f64,
    grid_l: f64,
) -> Result<Vec<Polygon2>, GeomError> {
    grid_partition_all(std::slice::from_ref(polygon), theta, center, grid_w, grid_l)
}
