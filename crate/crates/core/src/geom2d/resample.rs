use super::{GeomError, Polyline2};
use crate::types::Point2;

/// Equidistant resampling by arc length. Endpoints are kept exactly; only the
/// final gap may be shorter than `spacing`.
pub fn resample_polyline(line: &Polyline2, spacing: f64) -> Result<Polyline2, GeomError> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(GeomError::InvalidParam(format!("spacing must be > 0, got {spacing}")));
    }
    if line.closed || line.vertices.len() < 2 {
        return Err(GeomError::Degenerate("resampling needs an open polyline with >= 2 vertices".into()));
    }
    let v = &line.vertices;
    let total = line.length();
    let first = v[0];
    let last = *v.last().expect("non-empty");
    if spacing >= total {
        return Ok(Polyline2::open(vec![first, last]));
    }
    let tol = 1e-9 * total.max(1.0);
    let mut out = vec![first];
    let mut seg = 0usize;
    let mut seg_start = 0.0;
    let mut k = 1usize;
    loop {
        let s = k as f64 * spacing;
        if s >= total - tol {
            break;
        }
        while seg + 1 < v.len() - 1 && seg_start + (v[seg + 1] - v[seg]).norm() < s {
            seg_start += (v[seg + 1] - v[seg]).norm();
            seg += 1;
        }
        let len = (v[seg + 1] - v[seg]).norm();
        let t = if len > 0.0 { ((s - seg_start) / len).clamp(0.0, 1.0) } else { 0.0 };
        out.push(v[seg] + t * (v[seg + 1] - v[seg]));
        k += 1;
    }
    out.push(last);
    Ok(Polyline2::open(out))
}

/// Chaikin corner cutting. Open polylines keep their endpoints.
pub fn chaikin(line: &Polyline2, iterations: usize) -> Polyline2 {
    let mut cur = line.clone();
    for _ in 0..iterations {
        let v = &cur.vertices;
        let n = v.len();
        if n < 3 {
            break;
        }
        let mut out: Vec<Point2> = Vec::with_capacity(2 * n);
        if !cur.closed {
            out.push(v[0]);
        }
        for (a, b) in cur.segments() {
            out.push(a + 0.25 * (b - a));
            out.push(a + 0.75 * (b - a));
        }
        if !cur.closed {
            // Replace the cut ends with the true endpoints.
            out.remove(1);
            out.pop();
            out.push(v[n - 1]);
        }
        cur = Polyline2 {
            vertices: out,
            closed: cur.closed,
        };
    }
    cur
}
