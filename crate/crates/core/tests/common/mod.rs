#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use waytime_core::{Point2, TimeAllocation, WaypointPath};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random walk with segment lengths in [1, 10] and turns up to ±120°.
pub fn random_path(rng: &mut impl Rng, points: usize) -> WaypointPath {
    let mut p = Point2::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
    let mut heading: f64 = rng.random_range(-3.0..3.0);
    let mut pts = vec![p];
    for _ in 1..points {
        let len = rng.random_range(1.0..10.0);
        heading += rng.random_range(-2.1..2.1);
        p = p + Point2::new(heading.cos(), heading.sin()) * len;
        pts.push(p);
    }
    WaypointPath::new(pts).unwrap()
}

pub fn random_alloc(rng: &mut impl Rng, segments: usize) -> TimeAllocation {
    TimeAllocation::new((0..segments).map(|_| rng.random_range(0.5..3.0)).collect()).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
