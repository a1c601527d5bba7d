mod common;

use common::{random_path, rel, rng};
use rand::Rng;
use waytime_core::timealloc::{
    constrained_gradient, direction, max_speed_accel, refine_bgd, scale_total_time, tvp_allocate, BgdConfig,
    FeasibilityLimits, TvpLimits, SAMPLES_PER_SEGMENT,
};
use waytime_core::trajopt::{solve_min_snap, BoundaryConfig, Point2, TimeAllocation, WaypointPath};

fn cost(path: &WaypointPath, a: &TimeAllocation) -> f64 {
    solve_min_snap(path, a, &BoundaryConfig::default()).unwrap().1.value()
}

fn symmetric3() -> WaypointPath {
    WaypointPath::from_xy(&[[0.0, 0.0], [5.0, 0.0], [10.0, 0.0]]).unwrap()
}

#[test]
fn symmetric_instance_is_stationary() {
    let path = symmetric3();
    let alloc = TimeAllocation::new(vec![2.0, 2.0]).unwrap();
    let g = constrained_gradient(&path, &alloc, &BoundaryConfig::default(), &BgdConfig::default());
    let j = cost(&path, &alloc);
    for gi in &g.directional {
        assert!(gi.abs() <= 1e-4 * j / alloc.total(), "{gi} vs J/T {}", j / alloc.total());
    }
}

#[test]
fn single_segment_gradient_is_zero() {
    let path = WaypointPath::from_xy(&[[0.0, 0.0], [3.0, 4.0]]).unwrap();
    let alloc = TimeAllocation::new(vec![2.0]).unwrap();
    let g = constrained_gradient(&path, &alloc, &BoundaryConfig::default(), &BgdConfig::default());
    assert!(g.directional.iter().all(|&v| v == 0.0));
}

#[test]
fn gradient_sign_matches_direct_recomputation() {
    let mut r = rng(4);
    let cfg = BgdConfig::default();
    let mut checked = 0;
    for _ in 0..20 {
        let pts = r.random_range(3..=7);
        let path = random_path(&mut r, pts);
        let alloc = tvp_allocate(&path, &TvpLimits::default()).unwrap();
        let g = constrained_gradient(&path, &alloc, &BoundaryConfig::default(), &cfg);
        let base = cost(&path, &alloc);
        let h = 1e-3 * alloc.total();
        for (i, gi) in g.directional.iter().enumerate() {
            let d = direction(alloc.len(), i);
            let moved: Vec<f64> = alloc.durations().iter().zip(&d).map(|(t, di)| t + h * di).collect();
            let jd = cost(&path, &TimeAllocation::new(moved).unwrap()) - base;
            if jd.abs() > 1e-6 * base {
                assert_eq!(gi.signum(), jd.signum(), "direction {i}: {gi} vs {jd}");
                checked += 1;
            }
        }
    }
    assert!(checked > 50);
}

#[test]
fn bgd_recovers_symmetric_split() {
    let path = symmetric3();
    let init = TimeAllocation::new(vec![2.4, 1.6]).unwrap();
    let out = refine_bgd(&path, &init, &BgdConfig::default(), &BoundaryConfig::default()).unwrap();
    let f = out.allocation.fractions();
    assert!((f[0] - 0.5).abs() < 1e-3 && (f[1] - 0.5).abs() < 1e-3, "{f:?}");
    assert!(out.converged);
}

#[test]
fn bgd_descends_from_tvp_and_keeps_invariants() {
    let mut r = rng(8);
    let cfg = BgdConfig::default();
    for _ in 0..30 {
        let pts = r.random_range(3..=10);
        let path = random_path(&mut r, pts);
        let init = tvp_allocate(&path, &TvpLimits::default()).unwrap();
        let out = refine_bgd(&path, &init, &cfg, &BoundaryConfig::default()).unwrap();
        let j_init = cost(&path, &init);
        assert!(out.cost.value() <= j_init);
        assert!(rel(out.allocation.total(), init.total()) < 1e-9);
        let sum: f64 = out.allocation.durations().iter().sum();
        assert!(rel(sum, init.total()) < 1e-9);
        let t_min = cfg.t_min_rel * init.total();
        assert!(out.allocation.durations().iter().all(|&t| t >= t_min * (1.0 - 1e-12)));
        assert!(out.log.windows(2).all(|w| w[1].cost <= w[0].cost));
        for w in out.log.windows(2) {
            // Armijo acceptance implies strict decrease
            assert!(w[1].cost < w[0].cost);
        }
    }
}

#[test]
fn bgd_matches_simplex_grid_search_on_four_waypoints() {
    let mut r = rng(15);
    let bc = BoundaryConfig::default();
    for _ in 0..5 {
        let path = random_path(&mut r, 4);
        let init = tvp_allocate(&path, &TvpLimits::default()).unwrap();
        let total = init.total();
        let out = refine_bgd(&path, &init, &BgdConfig::default(), &bc).unwrap();
        let mut best = f64::INFINITY;
        for i in 1..100 {
            for j in 1..(100 - i) {
                let k = 100 - i - j;
                let f = [i as f64 / 100.0, j as f64 / 100.0, k as f64 / 100.0];
                let a = TimeAllocation::from_fractions(&f, total).unwrap();
                best = best.min(solve_min_snap(&path, &a, &bc).unwrap().1.value());
            }
        }
        assert!(out.cost.value() <= best * 1.01, "bgd {} grid {}", out.cost.value(), best);
    }
}

#[test]
fn bgd_argmin_is_transform_invariant() {
    let mut r = rng(23);
    for _ in 0..5 {
        let pts = r.random_range(3..=8);
        let path = random_path(&mut r, pts);
        let init = tvp_allocate(&path, &TvpLimits::default()).unwrap();
        let moved = path.transformed(r.random_range(-3.0..3.0), r.random_range(0.3..3.0), Point2::new(7.0, -2.0));
        let a = refine_bgd(&path, &init, &BgdConfig::default(), &BoundaryConfig::default()).unwrap();
        let b = refine_bgd(&moved, &init, &BgdConfig::default(), &BoundaryConfig::default()).unwrap();
        for (x, y) in a.allocation.fractions().iter().zip(b.allocation.fractions()) {
            assert!((x - y).abs() < 1e-4, "{:?} vs {:?}", a.allocation.fractions(), b.allocation.fractions());
        }
    }
}

#[test]
fn time_scaling_binds_a_limit() {
    let mut r = rng(31);
    let limits = FeasibilityLimits::default();
    let bc = BoundaryConfig::default();
    for _ in 0..10 {
        let pts = r.random_range(3..=8);
        let path = random_path(&mut r, pts);
        let init = tvp_allocate(&path, &TvpLimits::default()).unwrap();
        let out = scale_total_time(&path, &init, &limits, &bc).unwrap();
        let (traj, _) = solve_min_snap(&path, &out.allocation, &bc).unwrap();
        let (v, a) = max_speed_accel(&traj, SAMPLES_PER_SEGMENT);
        assert!(v <= limits.v_max && a <= limits.a_max);
        assert!(v >= limits.v_max / 1.005 || a >= limits.a_max / 1.005, "v {v} a {a}");
    }
}

#[test]
fn speed_is_inverse_in_time_scale() {
    let mut r = rng(2);
    let path = random_path(&mut r, 5);
    let init = tvp_allocate(&path, &TvpLimits::default()).unwrap();
    let bc = BoundaryConfig::default();
    let (t1, _) = solve_min_snap(&path, &init, &bc).unwrap();
    let (t2, _) = solve_min_snap(&path, &init.scaled(2.0).unwrap(), &bc).unwrap();
    let (v1, a1) = max_speed_accel(&t1, SAMPLES_PER_SEGMENT);
    let (v2, a2) = max_speed_accel(&t2, SAMPLES_PER_SEGMENT);
    assert!(rel(v2, v1 / 2.0) < 1e-9);
    assert!(rel(a2, a1 / 4.0) < 1e-9);
}

#[test]
fn allocation_already_at_the_limit_keeps_scale_one() {
    let mut r = rng(12);
    let path = random_path(&mut r, 6);
    let init = tvp_allocate(&path, &TvpLimits::default()).unwrap();
    let bc = BoundaryConfig::default();
    let limits = FeasibilityLimits::default();
    let first = scale_total_time(&path, &init, &limits, &bc).unwrap();
    let again = scale_total_time(&path, &first.allocation, &limits, &bc).unwrap();
    assert!((again.eta - 1.0).abs() < 2e-3, "eta {}", again.eta);
}

#[test]
fn time_scale_matches_dense_sweep() {
    let mut r = rng(44);
    let limits = FeasibilityLimits::default();
    let bc = BoundaryConfig::default();
    for _ in 0..3 {
        let path = random_path(&mut r, 5);
        let init = tvp_allocate(&path, &TvpLimits::default()).unwrap();
        let got = scale_total_time(&path, &init, &limits, &bc).unwrap().eta;
        // geometric sweep, 0.05% spacing, from well below to well above
        let mut eta = 0.2;
        let mut first_feasible = None;
        while eta < 10.0 {
            let (traj, _) = solve_min_snap(&path, &init.scaled(eta).unwrap(), &bc).unwrap();
            let (v, a) = max_speed_accel(&traj, SAMPLES_PER_SEGMENT);
            if v <= limits.v_max && a <= limits.a_max {
                first_feasible = Some(eta);
                break;
            }
            eta *= 1.0005;
        }
        let sweep = first_feasible.unwrap();
        assert!(rel(got, sweep) < 2e-3, "bisection {got} vs sweep {sweep}");
    }
}

#[test]
fn infeasible_bracket_is_reported() {
    let path = WaypointPath::from_xy(&[[0.0, 0.0], [1000.0, 0.0]]).unwrap();
    let alloc = TimeAllocation::new(vec![1.0]).unwrap();
    let err = scale_total_time(&path, &alloc, &FeasibilityLimits::default(), &BoundaryConfig::default());
    assert!(matches!(err, Err(waytime_core::Error::BracketFailure { .. })));
}

#[test]
fn bgd_throughput_probe() {
    let mut r = rng(77);
    let start = std::time::Instant::now();
    let mut iters = 0;
    let mut conv = 0;
    let n = 20;
    for _ in 0..n {
        let pts = r.random_range(3..=12);
        let path = random_path(&mut r, pts);
        let init = tvp_allocate(&path, &TvpLimits::default()).unwrap();
        let out = refine_bgd(&path, &init, &BgdConfig::default(), &BoundaryConfig::default()).unwrap();
        iters += out.log.len() - 1;
        conv += out.converged as usize;
    }
    eprintln!(
        "bgd: {:.1} ms/sample, {:.1} accepted steps/sample, {conv}/{n} converged",
        start.elapsed().as_secs_f64() * 1e3 / n as f64,
        iters as f64 / n as f64
    );
}
