use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::Result;
use crate::trajopt::{Point2, WaypointPath};

/// Waypoints as consecutive segment lengths and turn angles. Rotation,
/// translation and uniform scaling of the waypoints leave it unchanged, except
/// for `scale`, which records the removed size.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeAngleSequence {
    /// Segment lengths divided by `scale`; the largest is exactly 1.
    pub ranges: Vec<f64>,
    /// Signed turn from the previous segment, in `(-π, π]`. The first is 0.
    pub angles: Vec<f64>,
    /// Longest segment length.
    pub scale: f64,
}

impl RangeAngleSequence {
    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    /// Rebuild waypoints from a start point and the heading of the first
    /// segment.
    pub fn reconstruct(&self, start: Point2, heading: f64) -> Result<WaypointPath> {
        let mut pts = Vec::with_capacity(self.ranges.len() + 1);
        pts.push(start);
        let mut phi = heading;
        let mut p = start;
        for (d, th) in self.ranges.iter().zip(&self.angles) {
            phi += th;
            p = p + Point2::new(libm::cos(phi), libm::sin(phi)) * (d * self.scale);
            pts.push(p);
        }
        WaypointPath::new(pts)
    }
}

/// `θ_i = atan2(V_{i-1} × V_i, V_{i-1} · V_i)` with `V_i = w_{i+1} - w_i`.
pub fn to_range_angle(path: &WaypointPath) -> Result<RangeAngleSequence> {
    let d = path.checked_segment_lengths()?;
    let scale = d.iter().copied().fold(0.0, f64::max);
    let pts = path.points();
    let mut angles = Vec::with_capacity(d.len());
    angles.push(0.0);
    for w in pts.windows(3) {
        let (a, b) = (w[1] - w[0], w[2] - w[1]);
        let mut th = libm::atan2(a.cross(b), a.dot(b));
        if th <= -PI {
            th = PI;
        }
        angles.push(th);
    }
    let ranges = d.iter().map(|l| l / scale).collect();
    Ok(RangeAngleSequence { ranges, angles, scale })
}
