use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::report::{CostReport, Method};
use crate::error::{Error, Result};

/// Fixed-width bins over `[lo, hi]`; the last bin is closed on the right.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Bins spanning the minimum and maximum of `values`.
    pub fn new(values: &[f64], bins: usize) -> Result<Self> {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::with_range(values, lo, hi, bins)
    }

    pub fn with_range(values: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("histogram of no values".into()));
        }
        if bins == 0 || !lo.is_finite() || !hi.is_finite() || hi < lo {
            return Err(Error::InvalidConfig(format!("histogram range [{lo}, {hi}] with {bins} bins")));
        }
        let mut counts = vec![0; bins];
        let w = (hi - lo) / bins as f64;
        for &v in values {
            if !(lo..=hi).contains(&v) {
                return Err(Error::InvalidConfig(format!("value {v} outside [{lo}, {hi}]")));
            }
            let i = if w > 0.0 { libm::floor((v - lo) / w) as usize } else { 0 };
            counts[i.min(bins - 1)] += 1;
        }
        Ok(Self { lo, hi, counts })
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    /// `bins + 1` boundaries.
    pub fn edges(&self) -> Vec<f64> {
        let n = self.counts.len();
        (0..=n).map(|i| if i == n { self.hi } else { self.lo + i as f64 * self.width() }).collect()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// One histogram of `E` per method present in the report, all over the
/// same range.
pub fn error_histograms(report: &CostReport, bins: usize) -> Result<Vec<(Method, Histogram)>> {
    let cols: Vec<(Method, Vec<f64>)> =
        Method::ALL.iter().map(|&m| (m, report.errors(m))).filter(|(_, v)| !v.is_empty()).collect();
    let all = cols.iter().flat_map(|(_, v)| v.iter().copied());
    let lo = all.clone().fold(f64::INFINITY, f64::min);
    let hi = all.fold(f64::NEG_INFINITY, f64::max);
    cols.into_iter().map(|(m, v)| Ok((m, Histogram::with_range(&v, lo, hi, bins)?))).collect()
}
