use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{lstsq_pivoted, DenseMatrix, LdlFactor};

use super::constraints::constraint_entries;
use super::endpoint::solve_endpoint_form;
use super::hessian::hessian_entries;
use super::{
    build_equality_constraints, build_snap_hessian, BoundaryConfig, EqualityConstraints, PiecewiseTrajectory,
    SnapCost, TimeAllocation, WaypointPath, DEFAULT_ORDER,
};

/// Pivot threshold relative to the (equilibrated) KKT entries.
const PIVOT_TOL: f64 = 1e-13;
const FEASIBILITY_TOL: f64 = 1e-6;
const REFINE_STEPS: usize = 4;
const ROUNDING_SLACK: f64 = 64.0;

#[derive(Debug, Clone, PartialEq)]
pub struct QpSystem {
    pub hessian: DenseMatrix,
    pub constraints: EqualityConstraints,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveDiagnostics {
    pub pivot_ratio: f64,
    pub used_least_squares: bool,
    /// The KKT result failed its feasibility check and the endpoint-derivative
    /// form was used instead.
    pub used_endpoint_form: bool,
    pub constraint_residual: f64,
}

pub fn build_qp(path: &WaypointPath, alloc: &TimeAllocation, bc: &BoundaryConfig, order: usize) -> Result<QpSystem> {
    let constraints = build_equality_constraints(path, alloc, bc, order)?;
    let hessian = build_snap_hessian(alloc, order)?;
    Ok(QpSystem { hessian, constraints })
}

/// Minimum-snap trajectory with the default polynomial order.
pub fn solve_min_snap(
    path: &WaypointPath,
    alloc: &TimeAllocation,
    bc: &BoundaryConfig,
) -> Result<(PiecewiseTrajectory, SnapCost)> {
    solve_min_snap_with(path, alloc, bc, DEFAULT_ORDER).map(|(t, c, _)| (t, c))
}

/// Solves `min aᵀQa s.t. A_eq a = b_eq` for both axes with one factorization
/// of the KKT matrix `[[Q, Aᵀ], [A, 0]]`.
pub fn solve_min_snap_with(
    path: &WaypointPath,
    alloc: &TimeAllocation,
    bc: &BoundaryConfig,
    order: usize,
) -> Result<(PiecewiseTrajectory, SnapCost, SolveDiagnostics)> {
    let q_entries = hessian_entries(alloc, order)?;
    let (r, entries_a, b_eq) = constraint_entries(path, alloc, bc, order)?;
    let n = alloc.len() * (order + 1);
    let dim = n + r;

    // Each constraint row goes right after the last segment it touches, which
    // keeps the KKT matrix banded; the factorization skips the zero tail of
    // every pivot column.
    let w = order + 1;
    let mut keys: Vec<(usize, usize, usize)> = (0..n).map(|j| (j / w, 0, j)).collect();
    let mut last = vec![0; r];
    for &(i, j, _) in &entries_a {
        last[i] = last[i].max(j / w);
    }
    keys.extend(last.iter().enumerate().map(|(i, &f)| (f, 1, n + i)));
    let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(q_entries.len() + entries_a.len());
    entries.extend_from_slice(&q_entries);
    entries.extend(entries_a.iter().map(|&(i, j, v)| (n + i, j, v)));
    keys.sort_unstable();
    let mut slot = vec![0; dim];
    for (new_idx, &(_, _, old)) in keys.iter().enumerate() {
        slot[old] = new_idx;
    }
    let s = equilibrate_entries(&mut entries, dim, 12);
    for e in entries.iter_mut() {
        let (a, b) = (slot[e.0], slot[e.1]);
        (e.0, e.1) = (a.max(b), a.min(b));
    }
    let assemble = || {
        let mut kkt = DenseMatrix::zeros(dim, dim);
        for &(i, j, v) in &entries {
            kkt[(i, j)] = v;
            kkt[(j, i)] = v;
        }
        kkt
    };

    let rhs: [Vec<f64>; 2] = core::array::from_fn(|axis| {
        let mut v = vec![0.0; dim];
        for (i, &b) in b_eq[axis].iter().enumerate() {
            v[slot[n + i]] = b * s[n + i];
        }
        v
    });

    // A pivot below the threshold is retried without one: very uneven
    // durations give tiny but genuine pivots, and the residual check below
    // catches a factorization that was really singular.
    let factored = LdlFactor::factor_entries(dim, &entries, PIVOT_TOL).or_else(|sing| {
        log::debug!("KKT pivot ratio {:e} at step {} below threshold; refactoring without one", sing.ratio, sing.step);
        LdlFactor::factor_entries(dim, &entries, 0.0)
    });
    let (sol, pivot_ratio, used_least_squares) = match factored {
        Ok(f) => {
            let sol = rhs.clone().map(|b| refine(&entries, &f, &b));
            (sol, f.pivot_ratio(), false)
        }
        Err(sing) => {
            log::warn!(
                "KKT factorization hit a zero pivot at step {} (ratio {:e}); falling back to least squares",
                sing.step,
                sing.ratio
            );
            let kkt = assemble();
            let sol = rhs.clone().map(|b| lstsq_pivoted(&kkt, &b, 1e-12).0);
            (sol, 1.0 / sing.ratio.max(f64::MIN_POSITIVE), true)
        }
    };

    let unscale = |sol: [Vec<f64>; 2]| sol.map(|y| (0..n).map(|i| y[slot[i]] * s[i]).collect::<Vec<f64>>());
    let residual_of = |coeffs: &[Vec<f64>; 2]| {
        // Residual beyond the rounding floor of each row's own terms.
        let mut residual: f64 = 0.0;
        let mut excess: f64 = 0.0;
        for (axis, c) in coeffs.iter().enumerate() {
            let mut ax = b_eq[axis].iter().map(|b| -b).collect::<Vec<f64>>();
            let mut mag = b_eq[axis].iter().map(|b| b.abs()).collect::<Vec<f64>>();
            for &(i, j, v) in &entries_a {
                ax[i] += v * c[j];
                mag[i] += (v * c[j]).abs();
            }
            for (r, m) in ax.iter().zip(&mag) {
                residual = residual.max(r.abs());
                excess = excess.max(r.abs() - ROUNDING_SLACK * f64::EPSILON * m);
            }
        }
        if residual.is_nan() || excess.is_nan() { (f64::INFINITY, f64::INFINITY) } else { (residual, excess) }
    };
    let b_scale = b_eq.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut coeffs = unscale(sol);
    let (mut residual, mut excess) = residual_of(&coeffs);
    let mut used_least_squares = used_least_squares;
    if excess > FEASIBILITY_TOL * b_scale && !used_least_squares {
        log::debug!("LDL residual {residual:e} too large; retrying with least squares");
        let kkt = assemble();
        let alt = unscale(rhs.clone().map(|b| lstsq_pivoted(&kkt, &b, 1e-14).0));
        let (r_alt, e_alt) = residual_of(&alt);
        if e_alt < excess {
            (coeffs, residual, excess, used_least_squares) = (alt, r_alt, e_alt, true);
        }
    }
    let mut used_endpoint_form = false;
    if !(residual <= FEASIBILITY_TOL * b_scale) && order == DEFAULT_ORDER {
        // Rows of very short segments carry 1/τ^d factors and the KKT solve
        // loses the waypoint rows to rounding; the endpoint form holds them
        // by construction.
        log::debug!("KKT residual {residual:e} too large; solving in endpoint-derivative form");
        if let Ok((alt, err)) = solve_endpoint_form(path, alloc, bc) {
            if err <= FEASIBILITY_TOL * b_scale {
                residual = residual_of(&alt).0;
                (coeffs, excess, used_endpoint_form) = (alt, 0.0, true);
            }
        }
    }
    if !residual.is_finite() || coeffs.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::SolverSingular { condition: pivot_ratio, residual: f64::INFINITY });
    }
    let mut cost = 0.0;
    for c in &coeffs {
        for &(i, j, v) in &q_entries {
            cost += if i == j { v * c[i] * c[i] } else { 2.0 * v * c[i] * c[j] };
        }
    }
    let [cx, cy] = coeffs;
    let traj = PiecewiseTrajectory::new(order, alloc.durations().to_vec(), cx, cy)?;
    if excess > FEASIBILITY_TOL * b_scale {
        return Err(Error::SolverSingular { condition: pivot_ratio, residual });
    }
    Ok((
        traj,
        SnapCost(cost.max(0.0)),
        SolveDiagnostics { pivot_ratio, used_least_squares, used_endpoint_form, constraint_residual: residual },
    ))
}

/// Symmetric Ruiz scaling on the lower-triangle entries of a symmetric
/// matrix. Returns the scaling vector; entries are scaled in place.
fn equilibrate_entries(entries: &mut [(usize, usize, f64)], dim: usize, passes: usize) -> Vec<f64> {
    let mut s = vec![1.0; dim];
    let mut m = vec![0.0f64; dim];
    for _ in 0..passes {
        m.iter_mut().for_each(|v| *v = 0.0);
        for &(i, j, v) in entries.iter() {
            m[i] = m[i].max(v.abs());
            m[j] = m[j].max(v.abs());
        }
        if m.iter().all(|&v| (1.0 - v).abs() < 1e-2) {
            break;
        }
        for v in m.iter_mut() {
            *v = if *v > 0.0 { 1.0 / libm::sqrt(*v) } else { 1.0 };
        }
        for (i, j, v) in entries.iter_mut() {
            *v *= m[*i] * m[*j];
        }
        for (si, ri) in s.iter_mut().zip(&m) {
            *si *= ri;
        }
    }
    s
}

/// Solve plus iterative refinement, stopped once the residual no longer
/// shrinks. `k` holds the lower-triangle entries of the symmetric matrix.
fn refine(k: &[(usize, usize, f64)], f: &LdlFactor, b: &[f64]) -> Vec<f64> {
    let residual = |x: &[f64]| {
        let mut r = b.to_vec();
        for &(i, j, v) in k {
            r[i] -= v * x[j];
            if i != j {
                r[j] -= v * x[i];
            }
        }
        r
    };
    let norm = |r: &[f64]| r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut x = f.solve(b);
    let mut r = residual(&x);
    let mut rn = norm(&r);
    for _ in 0..REFINE_STEPS {
        let dx = f.solve(&r);
        let cand: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + d).collect();
        let rc = residual(&cand);
        let rcn = norm(&rc);
        if !(rcn < rn) {
            break;
        }
        let done = rcn > 0.5 * rn;
        (x, r, rn) = (cand, rc, rcn);
        if done {
            break;
        }
    }
    x
}
