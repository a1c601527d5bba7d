use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{independent_rows, norm_inf, DenseMatrix};

use super::{falling_factorial, powi, BoundaryConfig, EndpointAccel, PiecewiseTrajectory, TimeAllocation, WaypointPath};

/// `A_eq a = b_eq`, one shared matrix and a right-hand side per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct EqualityConstraints {
    pub a: DenseMatrix,
    pub b: [Vec<f64>; 2],
}

impl EqualityConstraints {
    pub fn num_rows(&self) -> usize {
        self.a.rows()
    }

    /// `max_axis ‖A a_axis − b_axis‖∞`
    pub fn residual(&self, traj: &PiecewiseTrajectory) -> f64 {
        (0..2)
            .map(|axis| {
                let r = self.a.mul_vec(traj.axis_coeffs(axis));
                r.iter().zip(&self.b[axis]).fold(0.0, |m: f64, (x, y)| m.max((x - y).abs()))
            })
            .fold(0.0, f64::max)
    }
}

/// Number of rows produced for `m` segments under `bc`.
pub(super) fn row_count(m: usize, bc: &BoundaryConfig) -> usize {
    let ends = match bc.endpoint_accel {
        EndpointAccel::Zero => 4,
        EndpointAccel::Free => 2,
    };
    2 * m + bc.continuity * (m - 1) + ends
}

/// Rows: waypoint positions at both ends of every segment, continuity of
/// derivatives `1..=C` at interior waypoints, zero velocity at both ends and
/// (by default) zero acceleration at both ends.
pub fn build_equality_constraints(
    path: &WaypointPath,
    alloc: &TimeAllocation,
    bc: &BoundaryConfig,
    order: usize,
) -> Result<EqualityConstraints> {
    let (rows, entries, b) = constraint_entries(path, alloc, bc, order)?;
    let mut a = DenseMatrix::zeros(rows, path.num_segments() * (order + 1));
    for (i, j, v) in entries {
        a[(i, j)] = v;
    }
    Ok(EqualityConstraints { a, b })
}

/// Row count, nonzero `(row, column, value)` entries and right-hand sides
/// of the constraint system.
pub(super) fn constraint_entries(
    path: &WaypointPath,
    alloc: &TimeAllocation,
    bc: &BoundaryConfig,
    order: usize,
) -> Result<(usize, Vec<(usize, usize, f64)>, [Vec<f64>; 2])> {
    let m = path.num_segments();
    if alloc.len() != m {
        return Err(Error::Dimension(format!(
            "{} waypoints need {m} durations, got {}",
            path.len(),
            alloc.len()
        )));
    }
    bc.validate(order)?;
    let w = order + 1;
    let rows = row_count(m, bc);
    let mut a = Vec::with_capacity(rows * w);
    let mut bx = Vec::with_capacity(rows);
    let mut by = Vec::with_capacity(rows);
    let pts = path.points();
    let taus = alloc.durations();

    let mut r = 0;
    let put = |a: &mut Vec<(usize, usize, f64)>, r: usize, seg: usize, t: f64, d: usize, sign: f64| {
        for j in d..w {
            let v = sign * falling_factorial(j, d) * powi(t, j - d);
            if v != 0.0 {
                a.push((r, seg * w + j, v));
            }
        }
    };

    for k in 0..m {
        put(&mut a, r, k, 0.0, 0, 1.0);
        bx.push(pts[k].x);
        by.push(pts[k].y);
        r += 1;
        put(&mut a, r, k, taus[k], 0, 1.0);
        bx.push(pts[k + 1].x);
        by.push(pts[k + 1].y);
        r += 1;
    }
    for k in 0..m.saturating_sub(1) {
        for d in 1..=bc.continuity {
            put(&mut a, r, k, taus[k], d, 1.0);
            put(&mut a, r, k + 1, 0.0, d, -1.0);
            bx.push(0.0);
            by.push(0.0);
            r += 1;
        }
    }
    let max_end_deriv = match bc.endpoint_accel {
        EndpointAccel::Zero => 2,
        EndpointAccel::Free => 1,
    };
    for d in 1..=max_end_deriv {
        put(&mut a, r, 0, 0.0, d, 1.0);
        r += 1;
        put(&mut a, r, m - 1, taus[m - 1], d, 1.0);
        r += 1;
        bx.extend([0.0, 0.0]);
        by.extend([0.0, 0.0]);
    }
    debug_assert_eq!(r, rows);
    Ok((rows, a, [bx, by]))
}

/// Drop rows that are linear combinations of earlier ones. Rows are compared
/// after scaling each to unit infinity norm.
pub fn eliminate_redundant_rows(c: &EqualityConstraints, rel_tol: f64) -> EqualityConstraints {
    let mut scaled = c.a.clone();
    for i in 0..scaled.rows() {
        let s = norm_inf(scaled.row(i));
        if s > 0.0 {
            scaled.row_mut(i).iter_mut().for_each(|v| *v /= s);
        }
    }
    let keep = independent_rows(&scaled, rel_tol);
    EqualityConstraints {
        a: c.a.select_rows(&keep),
        b: [
            keep.iter().map(|&i| c.b[0][i]).collect(),
            keep.iter().map(|&i| c.b[1][i]).collect(),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajopt::DEFAULT_ORDER;
    use alloc::vec;

    #[test]
    fn single_segment_row_count() {
        let path = WaypointPath::from_xy(&[[0.0, 0.0], [1.0, 2.0]]).unwrap();
        let alloc = TimeAllocation::new(vec![1.0]).unwrap();
        let c = build_equality_constraints(&path, &alloc, &BoundaryConfig::default(), DEFAULT_ORDER).unwrap();
        // 2 positions + v(0), v(T) + a(0), a(T)
        assert_eq!(c.num_rows(), 6);
        let free = BoundaryConfig { endpoint_accel: EndpointAccel::Free, ..Default::default() };
        let c = build_equality_constraints(&path, &alloc, &free, DEFAULT_ORDER).unwrap();
        assert_eq!(c.num_rows(), 4);
    }

    #[test]
    fn position_targets_are_waypoints() {
        let path = WaypointPath::from_xy(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]).unwrap();
        let alloc = TimeAllocation::new(vec![1.0, 1.0]).unwrap();
        let c = build_equality_constraints(&path, &alloc, &BoundaryConfig::default(), DEFAULT_ORDER).unwrap();
        assert_eq!(&c.b[0][..4], &[0.0, 1.0, 1.0, 2.0]);
        assert!(c.b[1].iter().all(|&v| v == 0.0));
        assert_eq!(c.num_rows(), 4 + 3 + 4);
    }

    #[test]
    fn mismatched_lengths_error() {
        let path = WaypointPath::from_xy(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]).unwrap();
        let alloc = TimeAllocation::new(vec![1.0]).unwrap();
        let err = build_equality_constraints(&path, &alloc, &BoundaryConfig::default(), DEFAULT_ORDER);
        assert!(matches!(err, Err(Error::Dimension(_))));
    }

    #[test]
    fn redundancy_elimination_keeps_independent_rows() {
        let path = WaypointPath::from_xy(&[[0.0, 0.0], [1.0, 0.5], [2.0, 3.0]]).unwrap();
        let alloc = TimeAllocation::new(vec![1.0, 2.0]).unwrap();
        let mut c = build_equality_constraints(&path, &alloc, &BoundaryConfig::default(), DEFAULT_ORDER).unwrap();
        let n = c.num_rows();
        assert_eq!(eliminate_redundant_rows(&c, 1e-10).num_rows(), n);
        // append a duplicate of row 1
        let cols = c.a.cols();
        let mut data = c.a.as_slice().to_vec();
        data.extend_from_slice(&c.a.row(1).to_vec());
        c.a = DenseMatrix::from_row_major(n + 1, cols, data);
        c.b[0].push(c.b[0][1]);
        c.b[1].push(c.b[1][1]);
        assert_eq!(eliminate_redundant_rows(&c, 1e-10).num_rows(), n);
    }
}
