//! Gauss-Legendre evaluation of the snap integral, independent of the Hessian.

use alloc::vec;
use alloc::vec::Vec;

use super::eval::poly_deriv;
use super::{PiecewiseTrajectory, SnapCost, SNAP_DERIVATIVE};

/// Nodes and weights on `[-1, 1]`, by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = libm::cos(core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))`
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `∫₀ᵀ ‖r⁗(t)‖² dt` with `order + 1` Gauss-Legendre nodes per segment,
/// which is exact for the squared snap of an order-`n` polynomial.
pub fn snap_cost_quadrature(traj: &PiecewiseTrajectory) -> SnapCost {
    let (nodes, weights) = gauss_legendre((traj.order() + 1).max(2));
    let mut total = 0.0;
    for (k, &tau) in traj.durations().iter().enumerate() {
        let half = 0.5 * tau;
        let mut seg = 0.0;
        for (x, w) in nodes.iter().zip(&weights) {
            let t = half * (x + 1.0);
            for axis in 0..2 {
                let s = poly_deriv(traj.segment_coeffs(axis, k), t, SNAP_DERIVATIVE);
                seg += w * s * s;
            }
        }
        total += half * seg;
    }
    SnapCost(total)
}
