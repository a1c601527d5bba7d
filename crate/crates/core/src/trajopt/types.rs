use alloc::format;
use alloc::vec::Vec;
use core::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

pub const DEFAULT_ORDER: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        libm::hypot(self.x, self.y)
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Self) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn rotated(self, angle: f64) -> Self {
        let (s, c) = libm::sincos(angle);
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn axis(self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => panic!("2D point has no axis {axis}"),
        }
    }
}

impl Add for Point2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

/// Ordered waypoints the trajectory must pass through (at least two).
#[derive(Debug, Clone, PartialEq)]
pub struct WaypointPath {
    points: Vec<Point2>,
}

impl WaypointPath {
    pub fn new(points: Vec<Point2>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Dimension(format!("need at least 2 waypoints, got {}", points.len())));
        }
        if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::Dimension("non-finite waypoint coordinate".into()));
        }
        Ok(Self { points })
    }

    pub fn from_xy(xy: &[[f64; 2]]) -> Result<Self> {
        Self::new(xy.iter().map(|p| Point2::new(p[0], p[1])).collect())
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn num_segments(&self) -> usize {
        self.points.len() - 1
    }

    pub fn segment_lengths(&self) -> Vec<f64> {
        self.points.windows(2).map(|w| (w[1] - w[0]).norm()).collect()
    }

    /// Errors on the first zero-length segment.
    pub fn checked_segment_lengths(&self) -> Result<Vec<f64>> {
        let d = self.segment_lengths();
        match d.iter().position(|&l| !(l > 0.0)) {
            Some(index) => Err(Error::DegenerateSegment { index, length: d[index] }),
            None => Ok(d),
        }
    }

    /// `p ↦ scale · R(angle) p + offset`
    pub fn transformed(&self, angle: f64, scale: f64, offset: Point2) -> Self {
        Self { points: self.points.iter().map(|&p| p.rotated(angle) * scale + offset).collect() }
    }
}

/// Per-segment durations; the total is their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeAllocation {
    durations: Vec<f64>,
    total: f64,
}

impl TimeAllocation {
    pub fn new(durations: Vec<f64>) -> Result<Self> {
        if durations.is_empty() {
            return Err(Error::InvalidAllocation("no segments".into()));
        }
        if let Some(i) = durations.iter().position(|&t| !(t > 0.0) || !t.is_finite()) {
            return Err(Error::InvalidAllocation(format!(
                "duration {i} is {} (must be positive and finite)",
                durations[i]
            )));
        }
        let total = durations.iter().sum();
        Ok(Self { durations, total })
    }

    /// `fractions · total`, with the total pinned exactly.
    pub fn from_fractions(fractions: &[f64], total: f64) -> Result<Self> {
        let sum: f64 = fractions.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::InvalidAllocation("fractions sum to zero".into()));
        }
        let mut a = Self::new(fractions.iter().map(|f| f / sum * total).collect())?;
        a.total = total;
        Ok(a)
    }

    pub fn durations(&self) -> &[f64] {
        &self.durations
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.durations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.durations.is_empty()
    }

    pub fn fractions(&self) -> Vec<f64> {
        self.durations.iter().map(|t| t / self.total).collect()
    }

    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        let mut a = Self::new(self.durations.iter().map(|t| t * alpha).collect())?;
        a.total = self.total * alpha;
        Ok(a)
    }
}

/// Boundary behaviour at the path ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EndpointAccel {
    #[default]
    Zero,
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct BoundaryConfig {
    /// Highest derivative kept continuous at interior waypoints.
    pub continuity: usize,
    pub endpoint_accel: EndpointAccel,
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        Self { continuity: 3, endpoint_accel: EndpointAccel::Zero }
    }
}

impl BoundaryConfig {
    pub fn validate(&self, order: usize) -> Result<()> {
        if self.continuity < 2 || self.continuity + super::SNAP_DERIVATIVE > order {
            return Err(Error::InvalidConfig(format!(
                "continuity order {} not supported for polynomial order {order} (need 2 ≤ C ≤ order − 4)",
                self.continuity
            )));
        }
        Ok(())
    }
}

/// Non-negative snap integral, summed over both axes.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct SnapCost(pub f64);

impl SnapCost {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// `m` polynomial segments of order `n` per axis, in local segment time.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseTrajectory {
    order: usize,
    durations: Vec<f64>,
    /// `coeffs[axis][k * (order + 1) + j]` multiplies `t^j` on segment `k`.
    coeffs: [Vec<f64>; 2],
}

impl PiecewiseTrajectory {
    pub fn new(order: usize, durations: Vec<f64>, coeffs_x: Vec<f64>, coeffs_y: Vec<f64>) -> Result<Self> {
        let want = durations.len() * (order + 1);
        if coeffs_x.len() != want || coeffs_y.len() != want {
            return Err(Error::Dimension(format!(
                "expected {want} coefficients per axis, got {} and {}",
                coeffs_x.len(),
                coeffs_y.len()
            )));
        }
        TimeAllocation::new(durations.clone())?;
        Ok(Self { order, durations, coeffs: [coeffs_x, coeffs_y] })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn num_segments(&self) -> usize {
        self.durations.len()
    }

    pub fn durations(&self) -> &[f64] {
        &self.durations
    }

    pub fn total_time(&self) -> f64 {
        self.durations.iter().sum()
    }

    pub fn axis_coeffs(&self, axis: usize) -> &[f64] {
        &self.coeffs[axis]
    }

    pub fn segment_coeffs(&self, axis: usize, k: usize) -> &[f64] {
        let w = self.order + 1;
        &self.coeffs[axis][k * w..(k + 1) * w]
    }

    /// Time-parametrization is always local per segment.
    pub fn is_local_time(&self) -> bool {
        true
    }
}
