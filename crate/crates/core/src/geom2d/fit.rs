use super::GeomError;
use crate::types::Point2;
use std::f64::consts::{FRAC_PI_2, PI};

/// Principal direction of a 2D point set as `(angle, major, minor)` where the
/// angle lies in (−π/2, π/2] and `major >= minor` are the covariance
/// eigenvalues.
pub fn principal_axes(points: &[Point2]) -> Result<(f64, f64, f64), GeomError> {
    if points.len() < 2 {
        return Err(GeomError::Degenerate("line fit needs at least 2 points".into()));
    }
    let n = points.len() as f64;
    let (mx, my) = points.iter().fold((0.0, 0.0), |(x, y), p| (x + p.x, y + p.y));
    let (mx, my) = (mx / n, my / n);
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dy) = (p.x - mx, p.y - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx + syy == 0.0 {
        return Err(GeomError::Degenerate("all points coincide".into()));
    }
    let mut theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    if theta <= -FRAC_PI_2 {
        theta += PI;
    }
    let half = 0.5 * (sxx + syy);
    let disc = (0.25 * (sxx - syy).powi(2) + sxy * sxy).sqrt();
    Ok((theta, (half + disc) / n, (half - disc).max(0.0) / n))
}

/// Total-least-squares line angle against +X, in (−π/2, π/2].
pub fn fit_line_angle(points: &[Point2]) -> Result<f64, GeomError> {
    principal_axes(points).map(|(t, _, _)| t)
}
