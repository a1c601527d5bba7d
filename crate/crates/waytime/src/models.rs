//! Precision-erased wrappers around the core models.

use waytime_core::dataprep::RangeAngleSequence;
use waytime_core::evalkit::Allocator;
use waytime_core::seqmodel::{model_inputs, MlpBank, ModelConfig, Precision, Prediction, Transformer};

use crate::error::Result;

#[derive(Debug, Clone)]
pub enum TransformerModel {
    F32(Transformer<f32>),
    F64(Transformer<f64>),
}

impl TransformerModel {
    pub fn new(cfg: ModelConfig, seed: u64) -> Result<Self> {
        Ok(match cfg.precision {
            Precision::F32 => Self::F32(Transformer::new(cfg, seed)?),
            Precision::F64 => Self::F64(Transformer::new(cfg, seed)?),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        match self {
            Self::F32(m) => m.config(),
            Self::F64(m) => m.config(),
        }
    }

    pub fn decode(&self, ra: &RangeAngleSequence) -> Result<Prediction> {
        let inputs = model_inputs(ra);
        Ok(match self {
            Self::F32(m) => m.decode_autoregressive(&inputs)?,
            Self::F64(m) => m.decode_autoregressive(&inputs)?,
        })
    }
}

impl Allocator for TransformerModel {
    fn allocate(&self, ra: &RangeAngleSequence) -> waytime_core::Result<Vec<f64>> {
        match self {
            Self::F32(m) => m.predict(ra),
            Self::F64(m) => m.predict(ra),
        }
    }
}

#[derive(Debug, Clone)]
pub enum BankModel {
    F32(MlpBank<f32>),
    F64(MlpBank<f64>),
}

impl BankModel {
    pub fn sizes(&self) -> Vec<usize> {
        match self {
            Self::F32(b) => b.sizes(),
            Self::F64(b) => b.sizes(),
        }
    }
}

impl Allocator for BankModel {
    fn allocate(&self, ra: &RangeAngleSequence) -> waytime_core::Result<Vec<f64>> {
        match self {
            Self::F32(b) => b.predict(ra),
            Self::F64(b) => b.predict(ra),
        }
    }
}
