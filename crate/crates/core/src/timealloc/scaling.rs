use crate::error::{Error, Result};
use crate::trajopt::{evaluate, solve_min_snap, BoundaryConfig, PiecewiseTrajectory, TimeAllocation, WaypointPath};

pub const SAMPLES_PER_SEGMENT: usize = 50;
const ETA_UPPER: f64 = 10.0;
const ETA_LOWER: f64 = 1e-6;
const ETA_REL_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityLimits {
    pub v_max: f64,
    pub a_max: f64,
}

impl Default for FeasibilityLimits {
    fn default() -> Self {
        Self { v_max: 5.0, a_max: 2.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleOutcome {
    pub eta: f64,
    pub allocation: TimeAllocation,
    pub max_speed: f64,
    pub max_accel: f64,
}

/// Largest sampled speed and acceleration norms, `samples` points per
/// segment including both ends.
pub fn max_speed_accel(traj: &PiecewiseTrajectory, samples: usize) -> (f64, f64) {
    let mut start = 0.0;
    let mut vmax: f64 = 0.0;
    let mut amax: f64 = 0.0;
    let total = traj.total_time();
    let n = samples.max(2);
    for &tau in traj.durations() {
        for i in 0..n {
            let t = (start + tau * i as f64 / (n - 1) as f64).min(total);
            if let (Ok(v), Ok(a)) = (evaluate(traj, t, 1), evaluate(traj, t, 2)) {
                vmax = vmax.max(v.norm());
                amax = amax.max(a.norm());
            }
        }
        start += tau;
    }
    (vmax, amax)
}

/// Smallest `η` (to 1e-3 relative) such that the trajectory on `η·t̲` stays
/// within the limits at the sampled points.
pub fn scale_total_time(
    path: &WaypointPath,
    alloc: &TimeAllocation,
    limits: &FeasibilityLimits,
    bc: &BoundaryConfig,
) -> Result<ScaleOutcome> {
    if !(limits.v_max > 0.0 && limits.a_max > 0.0) {
        return Err(Error::InvalidConfig("feasibility limits must be positive".into()));
    }
    let check = |eta: f64| -> Result<(bool, f64, f64)> {
        let (traj, _) = solve_min_snap(path, &alloc.scaled(eta)?, bc)?;
        let (v, a) = max_speed_accel(&traj, SAMPLES_PER_SEGMENT);
        Ok((v <= limits.v_max && a <= limits.a_max, v, a))
    };

    let (mut lo, mut hi);
    let mut hi_stats;
    let at_one = check(1.0)?;
    if at_one.0 {
        hi = 1.0;
        hi_stats = (at_one.1, at_one.2);
        lo = 0.5;
        loop {
            let c = check(lo)?;
            if !c.0 {
                break;
            }
            hi = lo;
            hi_stats = (c.1, c.2);
            lo *= 0.5;
            if lo < ETA_LOWER {
                return Err(Error::InvalidConfig("trajectory feasible at every time scale".into()));
            }
        }
    } else {
        lo = 1.0;
        hi = 2.0;
        loop {
            let c = check(hi)?;
            if c.0 {
                hi_stats = (c.1, c.2);
                break;
            }
            if hi >= ETA_UPPER {
                return Err(Error::BracketFailure { upper: ETA_UPPER });
            }
            lo = hi;
            hi = (hi * 2.0).min(ETA_UPPER);
        }
    }

    while (hi - lo) / hi > ETA_REL_TOL {
        let mid = 0.5 * (lo + hi);
        let c = check(mid)?;
        if c.0 {
            hi = mid;
            hi_stats = (c.1, c.2);
        } else {
            lo = mid;
        }
    }
    Ok(ScaleOutcome { eta: hi, allocation: alloc.scaled(hi)?, max_speed: hi_stats.0, max_accel: hi_stats.1 })
}
