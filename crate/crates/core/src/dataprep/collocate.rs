use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::trajopt::{Point2, WaypointPath};

/// Relative spacing below which two collocated points count as the same.
const DUPLICATE_TOL: f64 = 1e-9;

pub fn arc_length(curve: &[Point2]) -> f64 {
    curve.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// `n` points at equal arc-length spacing along the polyline. The first and
/// last points are copied exactly.
pub fn collocate(curve: &[Point2], n: usize) -> Result<WaypointPath> {
    if n < 2 {
        return Err(Error::InvalidConfig(format!("collocation needs at least 2 points, got {n}")));
    }
    let mut pts: Vec<Point2> = Vec::with_capacity(curve.len());
    for &p in curve {
        if !(p.x.is_finite() && p.y.is_finite()) {
            return Err(Error::InvalidConfig("non-finite curve point".to_string()));
        }
        if pts.last() != Some(&p) {
            pts.push(p);
        }
    }
    if pts.len() < 2 {
        return Err(Error::Empty("curve has fewer than two distinct points".to_string()));
    }
    let mut cum = Vec::with_capacity(pts.len());
    cum.push(0.0);
    for w in pts.windows(2) {
        cum.push(cum.last().unwrap() + (w[1] - w[0]).norm());
    }
    let total = *cum.last().unwrap();

    let mut out = Vec::with_capacity(n);
    out.push(pts[0]);
    let mut seg = 0;
    for k in 1..n - 1 {
        let s = total * k as f64 / (n - 1) as f64;
        while seg + 2 < cum.len() && cum[seg + 1] < s {
            seg += 1;
        }
        let len = cum[seg + 1] - cum[seg];
        let u = ((s - cum[seg]) / len).clamp(0.0, 1.0);
        out.push(pts[seg] + (pts[seg + 1] - pts[seg]) * u);
    }
    out.push(*pts.last().unwrap());

    for (i, w) in out.windows(2).enumerate() {
        if (w[1] - w[0]).norm() <= DUPLICATE_TOL * total {
            return Err(Error::DuplicateOutput { index: i + 1 });
        }
    }
    WaypointPath::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn straight_segment_is_split_evenly() {
        let c = [Point2::new(0.0, 0.0), Point2::new(3.0, 0.0)];
        let p = collocate(&c, 4).unwrap();
        let xs: Vec<f64> = p.points().iter().map(|p| p.x).collect();
        assert_eq!(xs, [0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn two_points_are_the_endpoints() {
        let c = [Point2::new(0.3, 1.0), Point2::new(1.0, 1.0), Point2::new(2.0, 5.0)];
        let p = collocate(&c, 2).unwrap();
        assert_eq!(p.points(), &[c[0], c[2]]);
    }

    #[test]
    fn consecutive_duplicates_are_merged() {
        let c = vec![Point2::new(0.0, 0.0), Point2::new(0.0, 0.0), Point2::new(2.0, 0.0), Point2::new(2.0, 0.0)];
        let p = collocate(&c, 3).unwrap();
        assert_eq!(p.points()[1], Point2::new(1.0, 0.0));
    }

    #[test]
    fn single_point_curve_errors() {
        let c = [Point2::new(1.0, 1.0), Point2::new(1.0, 1.0)];
        assert!(matches!(collocate(&c, 3), Err(Error::Empty(_))));
    }

    #[test]
    fn retraced_curve_reports_duplicate() {
        // out and back: with two samples both land on the origin
        let c = [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 0.0)];
        assert!(matches!(collocate(&c, 2), Err(Error::DuplicateOutput { index: 1 })));
        assert!(collocate(&c, 3).is_ok());
    }
}
