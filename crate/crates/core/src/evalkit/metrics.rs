use alloc::format;

use crate::error::{Error, Result};
use crate::trajopt::SnapCost;

/// `J^{1/7}`, which puts costs on the scale of time.
pub fn normalized_cost(j: SnapCost) -> Result<f64> {
    let v = j.value();
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::InvalidConfig(format!("cost {v} must be finite and non-negative")));
    }
    Ok(libm::pow(v, 1.0 / 7.0))
}

/// Percent error of the normalized method cost over the normalized baseline.
/// Negative when the method beats the baseline.
pub fn relative_error(j_method: SnapCost, j_baseline: SnapCost) -> Result<f64> {
    let b = normalized_cost(j_baseline)?;
    if b <= 0.0 {
        return Err(Error::InvalidConfig("baseline cost must be positive".into()));
    }
    Ok(100.0 * (normalized_cost(j_method)? - b) / b)
}

/// Mean, population standard deviation and share of negative values.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MethodStats {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub frac_negative: f64,
}

impl MethodStats {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let neg = values.iter().filter(|&&v| v < 0.0).count();
        Some(Self { count: values.len(), mean, std: libm::sqrt(var), frac_negative: neg as f64 / n })
    }
}
