//! Minimum-snap trajectories for a fixed time allocation.
//!
//! Each axis is an independent equality-constrained QP over the polynomial
//! coefficients of `m` segments. Segments use local time `t ∈ [0, τ_k]`.

mod constraints;
mod endpoint;
mod eval;
mod hessian;
mod quadrature;
mod solve;
mod types;

pub use constraints::{build_equality_constraints, eliminate_redundant_rows, EqualityConstraints};
pub use eval::{evaluate, sample_trajectory, TrajectorySample};
pub use hessian::build_snap_hessian;
pub use quadrature::{gauss_legendre, snap_cost_quadrature};
pub use solve::{build_qp, solve_min_snap, solve_min_snap_with, QpSystem, SolveDiagnostics};
pub use types::{
    BoundaryConfig, EndpointAccel, PiecewiseTrajectory, Point2, SnapCost, TimeAllocation,
    WaypointPath, DEFAULT_ORDER,
};

/// Snap is the fourth derivative.
pub const SNAP_DERIVATIVE: usize = 4;

/// `j! / (j - d)!`, the coefficient picked up by `t^j` after `d` derivatives.
pub(crate) fn falling_factorial(j: usize, d: usize) -> f64 {
    if d > j {
        return 0.0;
    }
    ((j - d + 1)..=j).fold(1.0, |acc, v| acc * v as f64)
}

pub(crate) fn powi(x: f64, e: usize) -> f64 {
    let mut r = 1.0;
    for _ in 0..e {
        r *= x;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn falling_factorial_values() {
        assert_eq!(falling_factorial(4, 4), 24.0);
        assert_eq!(falling_factorial(7, 4), 840.0);
        assert_eq!(falling_factorial(3, 4), 0.0);
        assert_eq!(falling_factorial(5, 0), 1.0);
    }
}
