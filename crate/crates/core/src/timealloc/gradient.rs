use alloc::vec;
use alloc::vec::Vec;

use crate::error::Result;
use crate::trajopt::{solve_min_snap, BoundaryConfig, TimeAllocation, WaypointPath};

use super::BgdConfig;

/// `g_i = e_i − (1/(m−1)) Σ_{j≠i} e_j`; every component sums to zero, so
/// moving along `g_i` keeps the total time.
pub fn direction(m: usize, i: usize) -> Vec<f64> {
    if m == 1 {
        return vec![0.0];
    }
    let off = -1.0 / (m as f64 - 1.0);
    let mut g = vec![off; m];
    g[i] = 1.0;
    g
}

/// Directional derivatives of the cost along each `g_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub directional: Vec<f64>,
    /// Directions whose perturbation fell below the duration floor or whose
    /// QP failed; their entry in `directional` is zero.
    pub skipped: Vec<usize>,
}

impl GradientEstimate {
    pub fn norm(&self) -> f64 {
        libm::sqrt(self.directional.iter().map(|g| g * g).sum())
    }
}

/// Central differences of `cost` along each constraint-preserving direction.
pub fn constrained_gradient_with<F>(alloc: &TimeAllocation, h: f64, t_min: f64, mut cost: F) -> GradientEstimate
where
    F: FnMut(&TimeAllocation) -> Result<f64>,
{
    let m = alloc.len();
    let mut directional = vec![0.0; m];
    let mut skipped = Vec::new();
    if m < 2 {
        return GradientEstimate { directional, skipped };
    }
    let t = alloc.durations();
    for i in 0..m {
        let g = direction(m, i);
        let shifted = |sign: f64| -> Option<TimeAllocation> {
            let d: Vec<f64> = t.iter().zip(&g).map(|(ti, gi)| ti + sign * h * gi).collect();
            if d.iter().any(|&v| v < t_min) {
                return None;
            }
            TimeAllocation::new(d).ok()
        };
        let value = match (shifted(1.0), shifted(-1.0)) {
            (Some(p), Some(n)) => match (cost(&p), cost(&n)) {
                (Ok(jp), Ok(jn)) => Some((jp - jn) / (2.0 * h)),
                _ => None,
            },
            _ => None,
        };
        match value {
            Some(v) => directional[i] = v,
            None => skipped.push(i),
        }
    }
    GradientEstimate { directional, skipped }
}

/// Gradient of the minimum-snap cost over the allocation simplex.
pub fn constrained_gradient(
    path: &WaypointPath,
    alloc: &TimeAllocation,
    bc: &BoundaryConfig,
    cfg: &BgdConfig,
) -> GradientEstimate {
    let total = alloc.total();
    constrained_gradient_with(alloc, cfg.h_rel * total, cfg.t_min_rel * total, |a| {
        solve_min_snap(path, a, bc).map(|(_, c)| c.value())
    })
}
