mod common;

use common::{random_alloc, random_path, rel, rng};
use rand::Rng;
use waytime_core::trajopt::{
    build_equality_constraints, build_qp, build_snap_hessian, eliminate_redundant_rows, evaluate,
    snap_cost_quadrature, solve_min_snap, BoundaryConfig, Point2, TimeAllocation, WaypointPath, DEFAULT_ORDER,
};

/// Composite Simpson on `[0, tau]` of the product of fourth derivatives of
/// `t^j` and `t^l`, evaluated by direct power formulas.
fn simpson_gram_entry(j: usize, l: usize, tau: f64, panels: usize) -> f64 {
    let d4 = |p: usize, t: f64| -> f64 {
        if p < 4 {
            0.0
        } else {
            (p * (p - 1) * (p - 2) * (p - 3)) as f64 * t.powi(p as i32 - 4)
        }
    };
    let f = |t: f64| d4(j, t) * d4(l, t);
    let h = tau / panels as f64;
    let mut s = f(0.0) + f(tau);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(i as f64 * h);
    }
    s * h / 3.0
}

#[test]
fn hessian_entries_match_simpson_oracle() {
    for &tau in &[1.0, 2.0, 0.37] {
        let q = build_snap_hessian(&TimeAllocation::new(vec![tau]).unwrap(), 7).unwrap();
        for j in 0..8 {
            for l in 0..8 {
                let oracle = simpson_gram_entry(j, l, tau, 4000);
                let got = q[(j, l)];
                if oracle == 0.0 {
                    assert_eq!(got, 0.0);
                } else {
                    assert!(rel(got, oracle) < 1e-10, "tau={tau} ({j},{l}): {got} vs {oracle}");
                }
            }
        }
    }
    let q1 = build_snap_hessian(&TimeAllocation::new(vec![1.0]).unwrap(), 7).unwrap();
    assert_eq!(q1[(4, 4)], 576.0);
    assert_eq!(simpson_gram_entry(4, 4, 1.0, 10), 576.0);
    let q2 = build_snap_hessian(&TimeAllocation::new(vec![2.0]).unwrap(), 7).unwrap();
    assert_eq!(q2[(4, 4)], 1152.0);
}

#[test]
fn hessian_is_symmetric_psd() {
    let mut r = rng(11);
    let alloc = random_alloc(&mut r, 4);
    let q = build_snap_hessian(&alloc, 7).unwrap();
    let nq = nalgebra::DMatrix::from_row_slice(q.rows(), q.cols(), q.as_slice());
    assert_eq!(nq, nq.transpose());
    let eig = nalgebra::SymmetricEigen::new(nq.clone());
    let scale = nq.amax();
    assert!(eig.eigenvalues.iter().all(|&e| e > -1e-12 * scale));
}

#[test]
fn non_positive_duration_is_rejected() {
    assert!(TimeAllocation::new(vec![1.0, 0.0]).is_err());
    assert!(TimeAllocation::new(vec![1.0, -2.0]).is_err());
}

#[test]
fn constraint_matrix_has_full_row_rank() {
    let mut r = rng(3);
    for _ in 0..50 {
        let pts = r.random_range(2..=12);
        let path = random_path(&mut r, pts);
        let alloc = random_alloc(&mut r, pts - 1);
        let c = build_equality_constraints(&path, &alloc, &BoundaryConfig::default(), DEFAULT_ORDER).unwrap();
        let c = eliminate_redundant_rows(&c, 1e-10);
        let a = nalgebra::DMatrix::from_row_slice(c.a.rows(), c.a.cols(), c.a.as_slice());
        let svd = a.svd(false, false);
        let smax = svd.singular_values.max();
        let rank = svd.singular_values.iter().filter(|&&s| s > 1e-10 * smax).count();
        assert_eq!(rank, c.a.rows());
    }
}

#[test]
fn constraint_rhs_is_consistent_with_a_feasible_polynomial() {
    // a single quintic-free rest-to-rest polynomial through both endpoints
    let path = WaypointPath::from_xy(&[[0.0, 0.0], [1.0, -2.0]]).unwrap();
    let alloc = TimeAllocation::new(vec![1.0]).unwrap();
    let c = build_equality_constraints(&path, &alloc, &BoundaryConfig::default(), DEFAULT_ORDER).unwrap();
    // s(t) = 10t³ − 15t⁴ + 6t⁵ is 0→1 with zero vel/acc at both ends
    let s = [0.0, 0.0, 0.0, 10.0, -15.0, 6.0, 0.0, 0.0];
    let x: Vec<f64> = s.iter().map(|v| v * 1.0).collect();
    let y: Vec<f64> = s.iter().map(|v| v * -2.0).collect();
    for (axis, coeffs) in [x, y].iter().enumerate() {
        let lhs = c.a.mul_vec(coeffs);
        for (l, b) in lhs.iter().zip(&c.b[axis]) {
            assert!((l - b).abs() < 1e-12);
        }
    }
}

#[test]
fn solver_cost_matches_quadrature_and_constraints_hold() {
    let mut r = rng(1);
    for _ in 0..100 {
        let pts = r.random_range(3..=12);
        let path = random_path(&mut r, pts);
        let alloc = random_alloc(&mut r, pts - 1);
        let (traj, cost) = solve_min_snap(&path, &alloc, &BoundaryConfig::default()).unwrap();
        let quad = snap_cost_quadrature(&traj);
        assert!(cost.value() >= 0.0);
        assert!(rel(cost.value(), quad.value()) < 1e-9, "{} vs {}", cost.value(), quad.value());
        let qp = build_qp(&path, &alloc, &BoundaryConfig::default(), DEFAULT_ORDER).unwrap();
        assert!(qp.constraints.residual(&traj) < 1e-6);
        for (i, w) in path.points().iter().enumerate() {
            let t: f64 = alloc.durations()[..i].iter().sum();
            let p = evaluate(&traj, t.min(traj.total_time()), 0).unwrap();
            assert!((p - *w).norm() < 1e-6);
        }
    }
}

#[test]
fn rest_to_rest_boundary_values() {
    let mut r = rng(5);
    let path = random_path(&mut r, 6);
    let alloc = random_alloc(&mut r, 5);
    let (traj, _) = solve_min_snap(&path, &alloc, &BoundaryConfig::default()).unwrap();
    let total = traj.total_time();
    assert!((evaluate(&traj, 0.0, 0).unwrap() - path.points()[0]).norm() < 1e-6);
    assert!((evaluate(&traj, total, 0).unwrap() - path.points()[5]).norm() < 1e-6);
    assert!(evaluate(&traj, 0.0, 1).unwrap().norm() < 1e-9);
    assert!(evaluate(&traj, total, 1).unwrap().norm() < 1e-8);
    assert!(evaluate(&traj, -0.1, 0).is_err());
}

#[test]
fn velocity_matches_finite_differences() {
    let mut r = rng(7);
    let path = random_path(&mut r, 5);
    let alloc = random_alloc(&mut r, 4);
    let (traj, _) = solve_min_snap(&path, &alloc, &BoundaryConfig::default()).unwrap();
    let h = 1e-6;
    for i in 1..40 {
        let t = traj.total_time() * i as f64 / 40.0;
        let v = evaluate(&traj, t, 1).unwrap();
        let fd = (evaluate(&traj, t + h, 0).unwrap() - evaluate(&traj, t - h, 0).unwrap()) * (0.5 / h);
        let scale = v.norm().max(1e-3);
        assert!((v - fd).norm() / scale < 1e-4, "t={t}: {v:?} vs {fd:?}");
    }
}

#[test]
fn cost_scales_quadratically_with_waypoint_scale() {
    let mut r = rng(9);
    for _ in 0..10 {
        let path = random_path(&mut r, 6);
        let alloc = random_alloc(&mut r, 5);
        let (_, j1) = solve_min_snap(&path, &alloc, &BoundaryConfig::default()).unwrap();
        let s = r.random_range(0.2..5.0);
        let scaled = path.transformed(0.0, s, Point2::default());
        let (_, js) = solve_min_snap(&scaled, &alloc, &BoundaryConfig::default()).unwrap();
        assert!(rel(js.value(), s * s * j1.value()) < 1e-9);
    }
}

#[test]
fn cost_follows_inverse_seventh_power_of_time_scale() {
    // Stretching all durations by alpha lowers snap: J(αt)·α⁷ = J(t).
    let mut r = rng(13);
    for _ in 0..20 {
        let pts = r.random_range(3..=10);
        let path = random_path(&mut r, pts);
        let alloc = random_alloc(&mut r, pts - 1);
        let (_, base) = solve_min_snap(&path, &alloc, &BoundaryConfig::default()).unwrap();
        for alpha in [0.5, 2.0, 3.0] {
            let (traj, js) = solve_min_snap(&path, &alloc.scaled(alpha).unwrap(), &BoundaryConfig::default()).unwrap();
            assert!(rel(js.value() * alpha.powi(7), base.value()) < 1e-6);
            assert!(rel(snap_cost_quadrature(&traj).value() * alpha.powi(7), base.value()) < 1e-6);
        }
    }
}

#[test]
fn null_space_perturbations_never_lower_cost() {
    let mut r = rng(21);
    for _ in 0..10 {
        let pts = r.random_range(3..=8);
        let path = random_path(&mut r, pts);
        let alloc = random_alloc(&mut r, pts - 1);
        let bc = BoundaryConfig::default();
        let (traj, _) = solve_min_snap(&path, &alloc, &bc).unwrap();
        let qp = build_qp(&path, &alloc, &bc, DEFAULT_ORDER).unwrap();
        let a = nalgebra::DMatrix::from_row_slice(qp.constraints.a.rows(), qp.constraints.a.cols(), qp.constraints.a.as_slice());
        let q = nalgebra::DMatrix::from_row_slice(qp.hessian.rows(), qp.hessian.cols(), qp.hessian.as_slice());
        // null-space basis from the full SVD of A
        let svd = a.clone().svd(false, true);
        let vt = svd.v_t.unwrap();
        let full = nalgebra::DMatrix::<f64>::identity(a.ncols(), a.ncols());
        let row_space = vt.transpose() * &vt;
        let projector = full - row_space;
        for axis in 0..2 {
            let x = nalgebra::DVector::from_column_slice(traj.axis_coeffs(axis));
            let base = (x.transpose() * &q * &x)[0];
            for _ in 0..10 {
                let raw = nalgebra::DVector::from_fn(a.ncols(), |_, _| r.random_range(-1.0..1.0));
                let dir = &projector * raw;
                let eps = 1e-3;
                let y = &x + dir * eps;
                let c = (y.transpose() * &q * &y)[0];
                assert!(c >= base * (1.0 - 1e-12), "axis {axis}: {c} < {base}");
            }
        }
    }
}

#[test]
fn cost_ordering_is_invariant_under_similarity_transforms() {
    let mut r = rng(17);
    let mut violations = 0;
    for _ in 0..20 {
        let pts = r.random_range(3..=8);
        let path = random_path(&mut r, pts);
        let angle = r.random_range(-3.1..3.1);
        let scale = r.random_range(0.1..10.0);
        let offset = Point2::new(r.random_range(-50.0..50.0), r.random_range(-50.0..50.0));
        let moved = path.transformed(angle, scale, offset);
        for _ in 0..10 {
            let f1 = random_alloc(&mut r, pts - 1);
            let f2 = random_alloc(&mut r, pts - 1);
            let f2 = f2.scaled(f1.total() / f2.total()).unwrap();
            let j = |p: &WaypointPath, a: &TimeAllocation| solve_min_snap(p, a, &BoundaryConfig::default()).unwrap().1.value();
            let before = (j(&path, &f1) - j(&path, &f2)).signum();
            let after = (j(&moved, &f1) - j(&moved, &f2)).signum();
            if before != after {
                violations += 1;
            }
        }
    }
    assert_eq!(violations, 0);
}

#[test]
fn tiny_durations_on_duplicate_waypoints_still_report_cleanly() {
    let path = WaypointPath::from_xy(&[[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]).unwrap();
    let alloc = TimeAllocation::new(vec![1e-9, 1.0]).unwrap();
    match solve_min_snap(&path, &alloc, &BoundaryConfig::default()) {
        Ok((traj, _)) => {
            let qp = build_qp(&path, &alloc, &BoundaryConfig::default(), DEFAULT_ORDER).unwrap();
            assert!(qp.constraints.residual(&traj) < 1e-6);
        }
        Err(e) => assert!(matches!(e, waytime_core::Error::SolverSingular { .. })),
    }
}

#[test]
fn segments_at_the_output_floor_still_solve() {
    // Learned allocations may put several consecutive segments at the 1e-4
    // fraction floor; the QP stays feasible and must be solved.
    let mut r = rng(31);
    let bc = BoundaryConfig::default();
    for trial in 0..40 {
        let pts = r.random_range(4..=16);
        let path = random_path(&mut r, pts);
        let mut f: Vec<f64> = (0..pts - 1).map(|_| if r.random_bool(0.4) { 1e-4 } else { r.random_range(0.2..1.0) }).collect();
        f[trial % (pts - 1)] = 1.0;
        let s: f64 = f.iter().sum();
        let alloc = TimeAllocation::from_fractions(&f.iter().map(|v| v / s).collect::<Vec<_>>(), 30.0).unwrap();
        let (traj, cost, diag) = waytime_core::trajopt::solve_min_snap_with(&path, &alloc, &bc, DEFAULT_ORDER)
            .unwrap_or_else(|e| panic!("trial {trial}: {e}"));
        assert!(cost.value().is_finite() && cost.value() >= 0.0);
        // Same scale as the solver's feasibility check, plus the rounding
        // floor of evaluating the monomials at the end of the segment: the
        // optimum next to floor-level segments can reach enormous magnitudes.
        let scale = path.points().iter().fold(1.0f64, |m, w| m.max(w.x.abs()).max(w.y.abs()));
        let floor = |i: usize| -> f64 {
            let Some(seg) = i.checked_sub(1) else { return 0.0 };
            let tau = alloc.durations()[seg];
            (0..2)
                .map(|axis| {
                    let c = &traj.axis_coeffs(axis)[seg * 8..seg * 8 + 8];
                    c.iter().enumerate().map(|(k, v)| (v * tau.powi(k as i32)).abs()).sum::<f64>()
                })
                .sum::<f64>()
                * 64.0
                * f64::EPSILON
        };
        let mut t = 0.0;
        for (i, w) in path.points().iter().enumerate() {
            let p = evaluate(&traj, f64::min(t, traj.total_time()), 0).unwrap();
            assert!((p - *w).norm() < 1e-6 * scale + floor(i), "trial {trial} waypoint {i}: {p:?} vs {w:?} ({diag:?})");
            t += alloc.durations().get(i).copied().unwrap_or(0.0);
        }
    }
}

#[test]
fn solve_throughput_probe() {
    let mut r = rng(99);
    let path = random_path(&mut r, 12);
    let alloc = random_alloc(&mut r, 11);
    let start = std::time::Instant::now();
    for _ in 0..200 {
        solve_min_snap(&path, &alloc, &BoundaryConfig::default()).unwrap();
    }
    let per = start.elapsed().as_secs_f64() / 200.0;
    eprintln!("12-waypoint solve: {:.3} ms", per * 1e3);
}
