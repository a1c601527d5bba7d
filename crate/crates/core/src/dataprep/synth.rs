use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::collocate::{arc_length, collocate};
use crate::error::{Error, Result};
use crate::trajopt::Point2;

#[derive(Debug, Clone, PartialEq)]
pub struct RawCurve {
    pub id: String,
    pub points: Vec<Point2>,
}

/// Seeded generator for two families: centripetal Catmull-Rom splines through
/// random knots, and open Lissajous arcs.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SynthConfig {
    pub seed: u64,
    /// Range of the longer bounding-box side, meters.
    pub extent: (f64, f64),
    /// Knot count range for the spline family (inclusive).
    pub knots: (usize, usize),
    /// Probability of drawing a Lissajous arc instead of a spline.
    pub lissajous_share: f64,
    /// Raw polyline points per curve.
    pub resolution: usize,
    /// Curves are kept only if collocation to every count in `3..=check_n`
    /// gives chords of at least `min_chord` times the arc spacing.
    pub check_n: usize,
    pub min_chord: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            extent: (10.0, 40.0),
            knots: (4, 7),
            lissajous_share: 0.3,
            resolution: 240,
            check_n: 16,
            min_chord: 0.25,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(format!("synth: {what}")));
        if !(self.extent.0 > 0.0 && self.extent.0 <= self.extent.1 && self.extent.1.is_finite()) {
            return bad("extent range must be positive and ordered");
        }
        if self.knots.0 < 2 || self.knots.0 > self.knots.1 {
            return bad("need at least 2 knots and an ordered range");
        }
        if !(0.0..=1.0).contains(&self.lissajous_share) {
            return bad("lissajous_share must be in [0, 1]");
        }
        if self.resolution < 2 || self.check_n < 3 {
            return bad("resolution >= 2 and check_n >= 3 required");
        }
        if !(self.min_chord > 0.0 && self.min_chord <= 1.0) {
            return bad("min_chord must be in (0, 1]");
        }
        Ok(())
    }
}

/// `count` curves, identical for identical configs.
pub fn synth_curves(cfg: &SynthConfig, count: usize) -> Result<Vec<RawCurve>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let shape = if rng.random::<f64>() < cfg.lissajous_share {
            lissajous(&mut rng, cfg.resolution)
        } else {
            let k = rng.random_range(cfg.knots.0..=cfg.knots.1);
            spline(&mut rng, k, cfg.resolution)
        };
        let extent = rng.random_range(cfg.extent.0..=cfg.extent.1);
        let angle = rng.random_range(-PI..PI);
        let offset = Point2::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
        let points = place(&shape, extent, angle, offset);
        if acceptable(&points, cfg) {
            out.push(RawCurve { id: format!("s{}-{:05}", cfg.seed, out.len()), points });
        }
    }
    Ok(out)
}

fn acceptable(points: &[Point2], cfg: &SynthConfig) -> bool {
    let (lo, hi) = bbox(points);
    let (w, h) = (hi.x - lo.x, hi.y - lo.y);
    if !(w > 0.05 * w.max(h) && h > 0.05 * w.max(h)) {
        return false;
    }
    let len = arc_length(points);
    (3..=cfg.check_n).all(|n| match collocate(points, n) {
        Ok(p) => {
            let spacing = len / (n - 1) as f64;
            p.segment_lengths().iter().all(|&c| c >= cfg.min_chord * spacing)
        }
        Err(_) => false,
    })
}

fn bbox(points: &[Point2]) -> (Point2, Point2) {
    let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    (lo, hi)
}

/// Rotate, scale so the longer box side is `extent`, then shift.
fn place(shape: &[Point2], extent: f64, angle: f64, offset: Point2) -> Vec<Point2> {
    let turned: Vec<Point2> = shape.iter().map(|p| p.rotated(angle)).collect();
    let (lo, hi) = bbox(&turned);
    let side = (hi.x - lo.x).max(hi.y - lo.y).max(f64::MIN_POSITIVE);
    let s = extent / side;
    turned.iter().map(|&p| (p - lo) * s + offset).collect()
}

fn spline(rng: &mut ChaCha8Rng, k: usize, resolution: usize) -> Vec<Point2> {
    let mut knots: Vec<Point2> = Vec::with_capacity(k);
    while knots.len() < k {
        let p = Point2::new(rng.random::<f64>(), rng.random::<f64>());
        if knots.iter().all(|q| (p - *q).norm() > 0.15) {
            knots.push(p);
        }
    }
    let ghost_start = knots[0] * 2.0 - knots[1];
    let ghost_end = knots[k - 1] * 2.0 - knots[k - 2];
    let mut ctrl = Vec::with_capacity(k + 2);
    ctrl.push(ghost_start);
    ctrl.extend_from_slice(&knots);
    ctrl.push(ghost_end);

    let spans = k - 1;
    let per_span = (resolution / spans).max(2);
    let mut pts = Vec::with_capacity(spans * per_span + 1);
    for s in 0..spans {
        for i in 0..per_span {
            let u = i as f64 / per_span as f64;
            pts.push(catmull_rom(&ctrl[s..s + 4], u));
        }
    }
    pts.push(knots[k - 1]);
    pts
}

/// Centripetal Catmull-Rom between `c[1]` and `c[2]`, `u ∈ [0, 1]`
/// (Barry-Goldman pyramid).
fn catmull_rom(c: &[Point2], u: f64) -> Point2 {
    let knot = |a: Point2, b: Point2| libm::sqrt((b - a).norm()).max(1e-9);
    let t0 = 0.0;
    let t1 = t0 + knot(c[0], c[1]);
    let t2 = t1 + knot(c[1], c[2]);
    let t3 = t2 + knot(c[2], c[3]);
    let t = t1 + u * (t2 - t1);
    let lerp = |p: Point2, q: Point2, ta: f64, tb: f64| p * ((tb - t) / (tb - ta)) + q * ((t - ta) / (tb - ta));
    let a1 = lerp(c[0], c[1], t0, t1);
    let a2 = lerp(c[1], c[2], t1, t2);
    let a3 = lerp(c[2], c[3], t2, t3);
    let b1 = lerp(a1, a2, t0, t2);
    let b2 = lerp(a2, a3, t1, t3);
    lerp(b1, b2, t1, t2)
}

fn lissajous(rng: &mut ChaCha8Rng, resolution: usize) -> Vec<Point2> {
    let a = rng.random_range(1..=3) as f64;
    let b = rng.random_range(1..=3) as f64;
    let delta = rng.random_range(0.2..PI - 0.2);
    let span = rng.random_range(0.4..0.85) * 2.0 * PI;
    let start = rng.random_range(0.0..2.0 * PI);
    let aspect = rng.random_range(0.4..1.0);
    (0..resolution)
        .map(|i| {
            let u = start + span * i as f64 / (resolution - 1) as f64;
            Point2::new(libm::sin(a * u + delta), aspect * libm::sin(b * u))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spline_passes_through_knots() {
        let c = [Point2::new(-1.0, 0.0), Point2::new(0.0, 0.0), Point2::new(1.0, 1.0), Point2::new(3.0, 1.0)];
        assert!((catmull_rom(&c, 0.0) - c[1]).norm() < 1e-12);
        assert!((catmull_rom(&c, 1.0) - c[2]).norm() < 1e-12);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = SynthConfig { knots: (1, 3), ..Default::default() };
        assert!(synth_curves(&cfg, 1).is_err());
    }
}
