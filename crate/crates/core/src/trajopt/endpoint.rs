//! Endpoint-derivative form of the minimum-snap problem for order-7
//! segments. Each segment is fixed by position, velocity, acceleration and
//! jerk at both ends, expressed in normalized time `s = t / τ`, so waypoint
//! and continuity rows hold by construction and only the free derivatives
//! are solved for. Used when the KKT solve of a badly scaled allocation
//! fails its feasibility check.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{lstsq_pivoted, DenseMatrix, LdlFactor};

use super::hessian::hessian_entries;
use super::{falling_factorial, powi, BoundaryConfig, EndpointAccel, TimeAllocation, WaypointPath};

const W: usize = 8;
const HALF: usize = W / 2;
const ROUNDING_SLACK: f64 = 64.0;

#[derive(Debug, Clone, Copy)]
enum Slot {
    Fixed([f64; 2]),
    Free(usize),
}

/// `G = M⁻ᵀ Q₁ M⁻¹` and `M⁻¹`, where `M` maps unit-duration coefficients to
/// endpoint derivatives and `Q₁` is the unit-duration snap Hessian.
fn unit_maps() -> Result<(DenseMatrix, DenseMatrix)> {
    let mut m = DenseMatrix::zeros(W, W);
    for d in 0..HALF {
        m[(d, d)] = falling_factorial(d, d);
        for k in d..W {
            m[(HALF + d, k)] = falling_factorial(k, d);
        }
    }
    // M = [[D, 0], [A, B]], so the start rows of M⁻¹ are exact and only the
    // 4x4 block B needs a numeric inverse.
    let mut b = DenseMatrix::zeros(HALF, HALF);
    for r in 0..HALF {
        for c in 0..HALF {
            b[(r, c)] = m[(HALF + r, HALF + c)];
        }
    }
    let mut b_inv = DenseMatrix::zeros(HALF, HALF);
    for j in 0..HALF {
        let mut e = vec![0.0; HALF];
        e[j] = 1.0;
        let (col, rank) = lstsq_pivoted(&b, &e, 1e-14);
        if rank < HALF {
            return Err(Error::SolverSingular { condition: f64::INFINITY, residual: f64::INFINITY });
        }
        for i in 0..HALF {
            b_inv[(i, j)] = col[i];
        }
    }
    let mut inv = DenseMatrix::zeros(W, W);
    for d in 0..HALF {
        inv[(d, d)] = 1.0 / m[(d, d)];
        for i in 0..HALF {
            inv[(HALF + i, HALF + d)] = b_inv[(i, d)];
            let mut v = 0.0;
            for r in 0..HALF {
                v -= b_inv[(i, r)] * m[(HALF + r, d)];
            }
            inv[(HALF + i, d)] = v / m[(d, d)];
        }
    }
    let mut q = DenseMatrix::zeros(W, W);
    for (i, j, v) in hessian_entries(&TimeAllocation::new(vec![1.0])?, W - 1)? {
        q[(i, j)] = v;
        q[(j, i)] = v;
    }
    let mut g = DenseMatrix::zeros(W, W);
    for a in 0..W {
        for b in 0..W {
            let mut s = 0.0;
            for i in 0..W {
                for j in 0..W {
                    s += inv[(i, a)] * q[(i, j)] * inv[(j, b)];
                }
            }
            g[(a, b)] = s;
        }
    }
    Ok((g, inv))
}

/// Dot product with a compensated sum and exact products.
fn dot2(a: &[f64; W], b: &[f64; W]) -> f64 {
    let (mut sum, mut err) = (0.0f64, 0.0f64);
    for (x, y) in a.iter().zip(b) {
        let p = x * y;
        let pe = libm::fma(*x, *y, -p);
        let t = sum + p;
        let z = t - sum;
        err += (sum - (t - z)) + (p - z) + pe;
        sum = t;
    }
    sum + err
}

/// Slots of every segment: `[p, v, a, j]` at the start, then at the end.
fn slots(path: &WaypointPath, bc: &BoundaryConfig) -> (Vec<[Slot; W]>, usize) {
    let pts = path.points();
    let m = path.num_segments();
    let mut free = 0;
    let mut fresh = || {
        free += 1;
        Slot::Free(free - 1)
    };
    let shared: Vec<Vec<Slot>> = (0..=m).map(|_| (0..=bc.continuity).map(|_| fresh()).collect()).collect();
    let mut out = Vec::with_capacity(m);
    for k in 0..m {
        let mut seg = [Slot::Fixed([0.0; 2]); W];
        for end in 0..2 {
            let wp = k + end;
            let boundary = wp == 0 || wp == m;
            for d in 0..HALF {
                seg[end * HALF + d] = match d {
                    0 => Slot::Fixed([pts[wp].x, pts[wp].y]),
                    1 if boundary => Slot::Fixed([0.0; 2]),
                    2 if boundary && bc.endpoint_accel == EndpointAccel::Zero => Slot::Fixed([0.0; 2]),
                    _ if !boundary && d <= bc.continuity => shared[wp][d],
                    _ => fresh(),
                };
            }
        }
        out.push(seg);
    }
    // Drop the shared ids nobody used (boundary waypoints, d = 0).
    let mut used = vec![usize::MAX; free];
    let mut next = 0;
    for seg in out.iter_mut() {
        for s in seg.iter_mut() {
            if let Slot::Free(i) = s {
                if used[*i] == usize::MAX {
                    used[*i] = next;
                    next += 1;
                }
                *i = used[*i];
            }
        }
    }
    (out, next)
}

/// Coefficients `seg * 8 + k` for both axes, in local (unnormalized) time,
/// and the largest endpoint error of those coefficients in length units,
/// beyond the rounding floor of evaluating them: a derivative-`d` mismatch
/// `δ` on a segment of duration `τ` counts as `δ·τ^d / d!`, the position
/// drift it causes over the segment.
pub(super) fn solve_endpoint_form(
    path: &WaypointPath,
    alloc: &TimeAllocation,
    bc: &BoundaryConfig,
) -> Result<([Vec<f64>; 2], f64)> {
    // Order 7 admits continuity 2 or 3, both below the four slots per end.
    bc.validate(W - 1)?;
    let (g, inv) = unit_maps()?;
    // In Taylor units (derivative / d!) the inverse map has integer entries,
    // so it is stored exactly.
    let taylor_inv: [[f64; W]; W] =
        core::array::from_fn(|j| core::array::from_fn(|i| libm::round(inv[(j, i)] * falling_factorial(i % HALF, i % HALF))));
    let (segs, nf) = slots(path, bc);
    let taus = alloc.durations();
    let scales: Vec<[f64; W]> =
        taus.iter().map(|&t| core::array::from_fn(|i| powi(t, i % HALF))).collect();

    let mut k = DenseMatrix::zeros(nf, nf);
    let mut rhs = [vec![0.0; nf], vec![0.0; nf]];
    for (seg, (slots, s)) in segs.iter().zip(&scales).enumerate() {
        let w = 1.0 / powi(taus[seg], 7);
        for a in 0..W {
            let Slot::Free(fa) = slots[a] else { continue };
            for b in 0..W {
                let h = w * s[a] * s[b] * g[(a, b)];
                match slots[b] {
                    Slot::Free(fb) => k[(fa, fb)] += h,
                    Slot::Fixed(v) => {
                        rhs[0][fa] -= h * v[0];
                        rhs[1][fa] -= h * v[1];
                    }
                }
            }
        }
    }
    let d: Vec<f64> = (0..nf).map(|i| if k[(i, i)] > 0.0 { 1.0 / libm::sqrt(k[(i, i)]) } else { 1.0 }).collect();
    let mut ks = k.clone();
    for i in 0..nf {
        for j in 0..nf {
            ks[(i, j)] *= d[i] * d[j];
        }
    }
    let f = LdlFactor::factor_owned(ks, 0.0)
        .map_err(|p| Error::SolverSingular { condition: 1.0 / p.ratio.max(f64::MIN_POSITIVE), residual: f64::INFINITY })?;
    let solve = |b: &[f64]| -> Vec<f64> {
        let y = f.solve(&b.iter().zip(&d).map(|(v, s)| v * s).collect::<Vec<_>>());
        y.iter().zip(&d).map(|(v, s)| v * s).collect()
    };
    let values = rhs.map(|b| {
        let mut x = solve(&b);
        let r: Vec<f64> = k.mul_vec(&x).iter().zip(&b).map(|(kx, bi)| bi - kx).collect();
        for (xi, dx) in x.iter_mut().zip(solve(&r)) {
            *xi += dx;
        }
        x
    });

    let mut coeffs = [vec![0.0; segs.len() * W], vec![0.0; segs.len() * W]];
    let mut worst: f64 = 0.0;
    for (seg, (slots, s)) in segs.iter().zip(&scales).enumerate() {
        let tau = taus[seg];
        for axis in 0..2 {
            let target: [f64; W] = core::array::from_fn(|i| match slots[i] {
                Slot::Fixed(v) => v[axis],
                Slot::Free(fi) => values[axis][fi],
            });
            let e: [f64; W] = core::array::from_fn(|i| s[i] * target[i] / falling_factorial(i % HALF, i % HALF));
            let c = &mut coeffs[axis][seg * W..(seg + 1) * W];
            for (j, cj) in c.iter_mut().enumerate() {
                *cj = dot2(&taylor_inv[j], &e) / powi(tau, j);
            }
            for (i, want) in target.iter().enumerate() {
                let (d, at) = (i % HALF, if i < HALF { 0.0 } else { tau });
                let (mut got, mut mag) = (0.0, want.abs());
                for k in d..W {
                    let t = falling_factorial(k, d) * c[k] * powi(at, k - d);
                    got += t;
                    mag += t.abs();
                }
                let unit = s[i] / falling_factorial(d, d);
                worst = worst.max(((got - want).abs() - ROUNDING_SLACK * f64::EPSILON * mag) * unit);
            }
        }
    }
    if !worst.is_finite() {
        return Err(Error::SolverSingular { condition: f64::INFINITY, residual: worst });
    }
    Ok((coeffs, worst))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajopt::solve::solve_min_snap_with;

    fn path() -> WaypointPath {
        WaypointPath::from_xy(&[[0.0, 0.0], [2.0, 1.0], [3.0, 4.0], [1.0, 6.0], [-2.0, 5.0]]).unwrap()
    }

    #[test]
    fn matches_the_kkt_solution_when_both_work() {
        let alloc = TimeAllocation::new(vec![1.2, 0.8, 2.0, 1.5]).unwrap();
        for continuity in 2..=3 {
            for endpoint_accel in [EndpointAccel::Zero, EndpointAccel::Free] {
                let bc = BoundaryConfig { continuity, endpoint_accel };
                let (traj, cost, diag) = solve_min_snap_with(&path(), &alloc, &bc, 7).unwrap();
                assert!(!diag.used_endpoint_form);
                let (c, err) = solve_endpoint_form(&path(), &alloc, &bc).unwrap();
                assert!(err < 1e-9, "{err}");
                for axis in 0..2 {
                    for (a, b) in c[axis].iter().zip(traj.axis_coeffs(axis)) {
                        assert!((a - b).abs() <= 1e-7 * (1.0 + b.abs()), "C={continuity} {a} vs {b}");
                    }
                }
                let q = crate::trajopt::build_snap_hessian(&alloc, 7).unwrap();
                let j = q.quad_form(&c[0]) + q.quad_form(&c[1]);
                assert!((j - cost.value()).abs() <= 1e-9 * (1.0 + cost.value()), "C={continuity} {endpoint_accel:?}: {j} vs {}", cost.value());
            }
        }
    }
}
