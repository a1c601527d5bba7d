use alloc::vec::Vec;

use crate::error::{Error, Result};

use super::{falling_factorial, PiecewiseTrajectory, Point2};

/// `d`-th derivative of `Σ c_j t^j` at `t` (Horner on the differentiated
/// coefficients).
pub(crate) fn poly_deriv(coeffs: &[f64], t: f64, d: usize) -> f64 {
    let n = coeffs.len();
    if d >= n {
        return 0.0;
    }
    let mut acc = 0.0;
    for j in (d..n).rev() {
        acc = acc * t + coeffs[j] * falling_factorial(j, d);
    }
    acc
}

/// Segment index and local time for a global time; segments are
/// left-closed, the last one is also right-closed.
pub(crate) fn locate(durations: &[f64], t: f64) -> Option<(usize, f64)> {
    let total: f64 = durations.iter().sum();
    if !(t >= 0.0 && t <= total) {
        return None;
    }
    let mut start = 0.0;
    let last = durations.len() - 1;
    for (k, &tau) in durations.iter().enumerate() {
        let end = start + tau;
        if t < end || k == last {
            return Some((k, (t - start).clamp(0.0, tau)));
        }
        start = end;
    }
    None
}

/// Position (`deriv = 0`) or a time derivative of the trajectory at global
/// time `t`.
pub fn evaluate(traj: &PiecewiseTrajectory, t: f64, deriv: usize) -> Result<Point2> {
    let total = traj.total_time();
    if deriv > traj.order() {
        return Ok(Point2::default());
    }
    let (k, local) = locate(traj.durations(), t).ok_or(Error::OutOfRange { t, total })?;
    Ok(Point2::new(
        poly_deriv(traj.segment_coeffs(0, k), local, deriv),
        poly_deriv(traj.segment_coeffs(1, k), local, deriv),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub pos: Point2,
    pub vel: Point2,
    pub acc: Point2,
}

/// Uniform samples at `rate` Hz over `[0, T]`; the final time is always
/// included.
pub fn sample_trajectory(traj: &PiecewiseTrajectory, rate: f64) -> Result<Vec<TrajectorySample>> {
    if !(rate > 0.0) {
        return Err(Error::InvalidConfig(alloc::format!("sampling rate {rate} must be positive")));
    }
    let total = traj.total_time();
    let steps = libm::floor(total * rate + 1e-9) as usize;
    let mut times: Vec<f64> = (0..=steps).map(|i| (i as f64 / rate).min(total)).collect();
    if total - times[times.len() - 1] > 1e-12 {
        times.push(total);
    }
    times
        .into_iter()
        .map(|t| {
            Ok(TrajectorySample {
                t,
                pos: evaluate(traj, t, 0)?,
                vel: evaluate(traj, t, 1)?,
                acc: evaluate(traj, t, 2)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn line() -> PiecewiseTrajectory {
        // x = t on [0,1], then x = 1 + 2t on [0,2]
        let mut cx = vec![0.0; 16];
        cx[1] = 1.0;
        cx[8] = 1.0;
        cx[9] = 2.0;
        PiecewiseTrajectory::new(7, vec![1.0, 2.0], cx, vec![0.0; 16]).unwrap()
    }

    #[test]
    fn boundaries_are_left_closed() {
        let tr = line();
        // t = 1 belongs to segment 1 (local 0)
        assert_eq!(evaluate(&tr, 1.0, 1).unwrap().x, 2.0);
        assert_eq!(evaluate(&tr, 3.0, 0).unwrap().x, 5.0);
        assert_eq!(evaluate(&tr, 0.5, 0).unwrap().x, 0.5);
    }

    #[test]
    fn out_of_range_errors() {
        let tr = line();
        assert!(matches!(evaluate(&tr, -1e-9, 0), Err(Error::OutOfRange { .. })));
        assert!(matches!(evaluate(&tr, 3.0 + 1e-9, 0), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn sampling_includes_end() {
        let s = sample_trajectory(&line(), 2.0).unwrap();
        assert_eq!(s.len(), 7);
        assert_eq!(s.last().unwrap().t, 3.0);
    }

    #[test]
    fn poly_derivatives() {
        let c = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(poly_deriv(&c, 2.0, 0), 1.0 + 4.0 + 12.0 + 32.0);
        assert_eq!(poly_deriv(&c, 2.0, 1), 2.0 + 12.0 + 48.0);
        assert_eq!(poly_deriv(&c, 2.0, 3), 24.0);
        assert_eq!(poly_deriv(&c, 2.0, 4), 0.0);
    }
}
