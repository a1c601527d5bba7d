use crate::error::{Error, Result};
use crate::trajopt::{TimeAllocation, WaypointPath};

/// Speed and acceleration caps for the trapezoidal profile.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct TvpLimits {
    pub v_max: f64,
    pub a_max: f64,
}

impl Default for TvpLimits {
    fn default() -> Self {
        Self { v_max: 5.0, a_max: 2.5 }
    }
}

impl TvpLimits {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_max > 0.0 && self.a_max > 0.0) {
            return Err(Error::InvalidConfig(alloc::format!(
                "limits must be positive (v_max {}, a_max {})",
                self.v_max,
                self.a_max
            )));
        }
        Ok(())
    }
}

/// Rest-to-rest travel time over distance `d`: trapezoid when the cruise
/// speed is reached, triangle otherwise.
pub fn tvp_segment_time(d: f64, limits: &TvpLimits) -> f64 {
    let (v, a) = (limits.v_max, limits.a_max);
    if d >= v * v / a {
        d / v + v / a
    } else {
        2.0 * libm::sqrt(d / a)
    }
}

pub fn tvp_allocate(path: &WaypointPath, limits: &TvpLimits) -> Result<TimeAllocation> {
    limits.validate()?;
    let lengths = path.checked_segment_lengths()?;
    TimeAllocation::new(lengths.iter().map(|&d| tvp_segment_time(d, limits)).collect())
}
