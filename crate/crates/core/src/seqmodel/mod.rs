//! Learned time allocation: an encoder-decoder transformer and a fixed-size
//! MLP baseline, both trained through a small reverse-mode tape.

mod attention;
mod mlp;
mod params;
mod real;
pub mod tape;
mod tensor;
mod train;
mod transformer;

use alloc::vec::Vec;

pub use attention::{AttentionMap, AttentionRecord};
pub use mlp::{Mlp, MlpBank, MlpConfig};
pub use params::ParamStore;
pub use real::Real;
pub use tape::Graph;
pub use tensor::Tensor;
pub use train::{
    l1_loss, mean_loss, Dropout, EpochRecord, LossKind, Optimizer, Schedule, SeqSample, TrainConfig, Trainable,
    Trainer, TrainerState,
};
pub use transformer::{
    model_inputs, param_count, positional_encoding, ModelConfig, Precision, Prediction, Transformer, INPUT_QUANTUM,
};

use crate::error::{Error, Result};

/// Floor applied to raw outputs before normalization.
pub const OUTPUT_FLOOR: f64 = 1e-4;

/// Clamp each entry to at least [`OUTPUT_FLOOR`] and divide by the sum.
/// Empty, non-finite or all-zero input is a degenerate-output error.
pub fn normalize_output(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.is_empty() || raw.iter().any(|v| !v.is_finite()) || raw.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateOutput);
    }
    let clamped: Vec<f64> = raw.iter().map(|&v| v.max(OUTPUT_FLOOR)).collect();
    let sum: f64 = clamped.iter().sum();
    Ok(clamped.iter().map(|v| v / sum).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_examples() {
        assert_eq!(normalize_output(&[2.0, 2.0, 4.0]).unwrap(), [0.25, 0.25, 0.5]);
        assert_eq!(normalize_output(&[0.7]).unwrap(), [1.0]);
        let e = OUTPUT_FLOOR;
        let v = normalize_output(&[-1.0, 3.0]).unwrap();
        assert!((v[0] - e / (e + 3.0)).abs() < 1e-15 && (v[1] - 3.0 / (e + 3.0)).abs() < 1e-15);
        let f = [0.2, 0.3, 0.5];
        for (a, b) in normalize_output(&f).unwrap().iter().zip(&f) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(normalize_output(&[0.0, 0.0]), Err(Error::DegenerateOutput));
        assert_eq!(normalize_output(&[]), Err(Error::DegenerateOutput));
    }

    #[test]
    fn loss_examples() {
        assert_eq!(l1_loss(&[0.3, 0.7], &[0.3, 0.7], LossKind::PerStep).unwrap(), 0.0);
        assert!((l1_loss(&[0.6, 0.4], &[0.5, 0.5], LossKind::PerStep).unwrap() - 0.2).abs() < 1e-15);
        assert!((l1_loss(&[0.6, 0.4], &[0.5, 0.5], LossKind::Cumulative).unwrap() - 0.1).abs() < 1e-15);
        assert!(l1_loss(&[0.6], &[0.5, 0.5], LossKind::PerStep).is_err());
    }
}
