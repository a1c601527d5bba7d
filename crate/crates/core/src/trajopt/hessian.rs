use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

use super::{falling_factorial, powi, TimeAllocation, SNAP_DERIVATIVE};

/// Block-diagonal snap Hessian for one axis: block `k` is the Gram matrix of
/// the fourth derivatives of `1, t, …, t^order` over `[0, τ_k]`.
pub fn build_snap_hessian(alloc: &TimeAllocation, order: usize) -> Result<DenseMatrix> {
    let n = alloc.len() * (order + 1);
    let mut q = DenseMatrix::zeros(n, n);
    for (i, j, v) in hessian_entries(alloc, order)? {
        q[(i, j)] = v;
        q[(j, i)] = v;
    }
    Ok(q)
}

/// Lower-triangle nonzeros `(i, j, v)`, `i ≥ j`, of [`build_snap_hessian`].
pub(super) fn hessian_entries(alloc: &TimeAllocation, order: usize) -> Result<Vec<(usize, usize, f64)>> {
    if order < SNAP_DERIVATIVE {
        return Err(Error::InvalidConfig(alloc::format!("polynomial order {order} has no snap")));
    }
    let w = order + 1;
    let r = SNAP_DERIVATIVE;
    let mut out = Vec::with_capacity(alloc.len() * (w - r) * (w - r + 1) / 2);
    for (k, &tau) in alloc.durations().iter().enumerate() {
        if !(tau > 0.0) {
            return Err(Error::InvalidAllocation(alloc::format!("duration {k} is {tau}")));
        }
        for j in r..=order {
            for l in r..=j {
                let p = j + l - 2 * r + 1;
                let v = falling_factorial(j, r) * falling_factorial(l, r) * powi(tau, p) / p as f64;
                out.push((k * w + j, k * w + l, v));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn low_order_entries_vanish() {
        let a = TimeAllocation::new(vec![1.3]).unwrap();
        let q = build_snap_hessian(&a, 7).unwrap();
        for j in 0..8 {
            for l in 0..8 {
                if j < 4 || l < 4 {
                    assert_eq!(q[(j, l)], 0.0);
                }
            }
        }
    }

    #[test]
    fn blocks_do_not_couple() {
        let a = TimeAllocation::new(vec![1.0, 2.0]).unwrap();
        let q = build_snap_hessian(&a, 7).unwrap();
        for j in 0..8 {
            for l in 8..16 {
                assert_eq!(q[(j, l)], 0.0);
                assert_eq!(q[(l, j)], 0.0);
            }
        }
        assert_eq!(q[(12, 12)], 1152.0);
    }

    #[test]
    fn rejects_low_order() {
        let a = TimeAllocation::new(vec![1.0]).unwrap();
        assert!(build_snap_hessian(&a, 3).is_err());
    }
}
