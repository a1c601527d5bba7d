use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::trajopt::{solve_min_snap, BoundaryConfig, SnapCost, TimeAllocation, WaypointPath};

use super::gradient::{constrained_gradient_with, direction};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct BgdConfig {
    /// Finite-difference step as a fraction of the total time.
    pub h_rel: f64,
    /// Armijo sufficient-decrease constant.
    pub armijo_c: f64,
    /// Step shrink factor.
    pub shrink: f64,
    pub max_shrinks: usize,
    pub max_iters: usize,
    /// Stop once an accepted step lowers the cost by less than this fraction.
    pub rel_tol: f64,
    /// Duration floor as a fraction of the total time.
    pub t_min_rel: f64,
    /// Largest trial move of a single duration, as a fraction of `T/m`.
    pub max_step_rel: f64,
}

impl Default for BgdConfig {
    fn default() -> Self {
        Self {
            h_rel: 1e-4,
            armijo_c: 1e-4,
            shrink: 0.5,
            max_shrinks: 20,
            max_iters: 100,
            rel_tol: 1e-6,
            t_min_rel: 1e-3,
            max_step_rel: 0.5,
        }
    }
}

impl BgdConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.h_rel > 0.0
            && self.armijo_c > 0.0
            && self.armijo_c < 1.0
            && self.shrink > 0.0
            && self.shrink < 1.0
            && self.t_min_rel > 0.0
            && self.rel_tol >= 0.0
            && self.max_step_rel > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(alloc::format!("bad descent config {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IterationRecord {
    pub iter: usize,
    pub cost: f64,
    /// Largest change of a single fraction `t_i / T` in the accepted step.
    pub step_size: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BgdOutcome {
    pub allocation: TimeAllocation,
    pub cost: SnapCost,
    /// Iteration 0 is the starting point; every later row is an accepted step.
    pub log: Vec<IterationRecord>,
    pub converged: bool,
}

/// Clamp durations to `t_min` and rescale the unclamped ones so the total is
/// exactly `total`.
pub fn project_to_simplex(t: &[f64], total: f64, t_min: f64) -> Vec<f64> {
    let m = t.len();
    let mut out: Vec<f64> = t.to_vec();
    let mut pinned = alloc::vec![false; m];
    for _ in 0..=m {
        let mut changed = false;
        for i in 0..m {
            if !pinned[i] && out[i] < t_min {
                pinned[i] = true;
                changed = true;
            }
        }
        let fixed: f64 = (0..m).filter(|&i| pinned[i]).count() as f64 * t_min;
        let free_sum: f64 = (0..m).filter(|&i| !pinned[i]).map(|i| out[i]).sum();
        let scale = (total - fixed) / free_sum;
        for i in 0..m {
            out[i] = if pinned[i] { t_min } else { out[i] * scale };
        }
        if !changed && out.iter().all(|&v| v >= t_min) {
            break;
        }
    }
    out
}

/// Backtracking descent on the allocation with `Σ t_i` held at `init.total()`.
pub fn refine_bgd(
    path: &WaypointPath,
    init: &TimeAllocation,
    cfg: &BgdConfig,
    bc: &BoundaryConfig,
) -> Result<BgdOutcome> {
    refine_bgd_with(init, cfg, |a| solve_min_snap(path, a, bc).map(|(_, c)| c.value()))
}

/// [`refine_bgd`] against an arbitrary cost of the allocation.
pub fn refine_bgd_with<F>(init: &TimeAllocation, cfg: &BgdConfig, mut cost: F) -> Result<BgdOutcome>
where
    F: FnMut(&TimeAllocation) -> Result<f64>,
{
    cfg.validate()?;
    let total = init.total();
    let m = init.len();
    let t_min = cfg.t_min_rel * total;
    let h = cfg.h_rel * total;
    let with_total = |d: Vec<f64>| -> Result<TimeAllocation> {
        let a = TimeAllocation::new(d)?;
        a.scaled(total / a.total())
    };

    let mut current = if init.durations().iter().any(|&t| t < t_min) {
        with_total(project_to_simplex(init.durations(), total, t_min))?
    } else {
        init.clone()
    };
    let mut j = cost(&current)?;
    let mut log = Vec::new();
    log.push(IterationRecord { iter: 0, cost: j, step_size: 0.0, grad_norm: 0.0 });
    if m < 2 {
        return Ok(BgdOutcome { allocation: current, cost: SnapCost(j), log, converged: true });
    }

    let max_move = cfg.max_step_rel * total / m as f64;
    let mut last_alpha: Option<f64> = None;
    let mut converged = false;

    for iter in 1..=cfg.max_iters {
        let grad = constrained_gradient_with(&current, h, t_min, &mut cost);
        let gnorm = grad.norm();
        if log.len() == 1 {
            log[0].grad_norm = gnorm;
        }
        if gnorm == 0.0 {
            converged = true;
            break;
        }
        // Δ = −Σ grad_i g_i, whose slope is −Σ grad_i²
        let mut delta = alloc::vec![0.0; m];
        for (i, gi) in grad.directional.iter().enumerate() {
            if *gi != 0.0 {
                for (d, e) in delta.iter_mut().zip(direction(m, i)) {
                    *d -= gi * e;
                }
            }
        }
        let slope = -gnorm * gnorm;
        let dmax = delta.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let alpha_cap = max_move / dmax;
        let mut alpha = last_alpha.map_or(alpha_cap, |a| (2.0 * a).min(alpha_cap));

        let mut accepted = None;
        for _ in 0..=cfg.max_shrinks {
            let trial: Vec<f64> = current.durations().iter().zip(&delta).map(|(t, d)| t + alpha * d).collect();
            let trial = project_to_simplex(&trial, total, t_min);
            if let Ok(cand) = with_total(trial) {
                if let Ok(jc) = cost(&cand) {
                    if jc <= j + cfg.armijo_c * alpha * slope {
                        accepted = Some((cand, jc));
                        break;
                    }
                }
            }
            alpha *= cfg.shrink;
        }

        let Some((cand, jc)) = accepted else {
            break;
        };
        let step = cand
            .durations()
            .iter()
            .zip(current.durations())
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()))
            / total;
        let rel_decrease = (j - jc) / j.abs().max(f64::MIN_POSITIVE);
        current = cand;
        j = jc;
        last_alpha = Some(alpha);
        log.push(IterationRecord { iter, cost: j, step_size: step, grad_norm: gnorm });
        if rel_decrease < cfg.rel_tol {
            converged = true;
            break;
        }
    }

    Ok(BgdOutcome { allocation: current, cost: SnapCost(j), log, converged })
}
