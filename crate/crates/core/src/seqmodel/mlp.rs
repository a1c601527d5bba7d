use alloc::format;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::tape::{Graph, NodeId};
use super::train::{Dropout, LossKind, SeqSample, Trainable};
use super::transformer::model_inputs;
use super::{normalize_output, ParamStore, Real, Tensor};
use crate::dataprep::RangeAngleSequence;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MlpConfig {
    /// Waypoint count the model is built for; inputs of any other size are refused.
    pub waypoints: usize,
    pub hidden: Vec<usize>,
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.waypoints < 2 {
            return Err(Error::InvalidConfig(format!("mlp: need at least 2 waypoints, got {}", self.waypoints)));
        }
        if self.hidden.contains(&0) {
            return Err(Error::InvalidConfig("mlp: hidden widths must be positive".into()));
        }
        Ok(())
    }

    /// Layer widths from input to output.
    fn widths(&self) -> Vec<usize> {
        let m = self.waypoints - 1;
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(2 * m);
        w.extend_from_slice(&self.hidden);
        w.push(m);
        w
    }

    pub fn param_count(&self) -> usize {
        self.widths().windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

/// Fixed-size feedforward baseline: flattened `(d′, θ)` in, one raw value per
/// segment out.
#[derive(Debug, Clone)]
pub struct Mlp<R> {
    cfg: MlpConfig,
    params: ParamStore<R>,
}

impl<R: Real> Mlp<R> {
    pub fn new(cfg: MlpConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        for (l, w) in cfg.widths().windows(2).enumerate() {
            params.push_xavier(format!("layer.{l}.weight"), w[0], w[1], &mut rng);
            params.push_const(format!("layer.{l}.bias"), w[1], 0.0);
        }
        Ok(Self { cfg, params })
    }

    pub fn from_params(cfg: MlpConfig, params: ParamStore<R>) -> Result<Self> {
        let fresh = Self::new(cfg, 0)?;
        if fresh.params.names() != params.names() || fresh.params.shapes() != params.shapes() {
            return Err(Error::Dimension("parameter names or shapes do not match the MLP config".into()));
        }
        Ok(Self { cfg: fresh.cfg, params })
    }

    pub fn config(&self) -> &MlpConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ParamStore<R> {
        &self.params
    }

    fn forward(&self, g: &mut Graph<R>, inputs: &[[f64; 2]], drop: &mut Dropout) -> Result<NodeId> {
        if inputs.len() + 1 != self.cfg.waypoints {
            return Err(Error::FixedSize { expected: self.cfg.waypoints, got: inputs.len() + 1 });
        }
        let flat: Vec<f64> = inputs.iter().flatten().copied().collect();
        let mut x = g.leaf(Tensor::from_f64(1, flat.len(), &flat));
        let layers = self.params.len() / 2;
        for l in 0..layers {
            let w = g.param(&self.params, 2 * l);
            let b = g.param(&self.params, 2 * l + 1);
            x = g.linear(x, w, Some(b));
            if l + 1 < layers {
                x = g.relu(x);
                x = drop.apply(g, x);
            }
        }
        if !g.value(x).all_finite() {
            return Err(Error::NumericFailure { layer: "mlp output".into() });
        }
        Ok(x)
    }

    pub fn predict_inputs(&self, inputs: &[[f64; 2]]) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let out = self.forward(&mut g, inputs, &mut Dropout::off())?;
        let raw: Vec<f64> = g.value(out).data.iter().map(|v| v.f64()).collect();
        normalize_output(&raw)
    }

    pub fn predict(&self, ra: &RangeAngleSequence) -> Result<Vec<f64>> {
        self.predict_inputs(&model_inputs(ra))
    }
}

impl<R: Real> Trainable<R> for Mlp<R> {
    fn params(&self) -> &ParamStore<R> {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamStore<R> {
        &mut self.params
    }

    fn loss_node(&self, g: &mut Graph<R>, sample: &SeqSample, kind: LossKind, drop: &mut Dropout) -> Result<NodeId> {
        let out = self.forward(g, &sample.inputs, drop)?;
        if sample.target.len() != sample.inputs.len() {
            return Err(Error::Dimension("target length differs from input length".into()));
        }
        let target = sample.target.iter().map(|&t| R::of(t)).collect();
        Ok(g.l1_loss(out, target, kind == LossKind::Cumulative))
    }
}

/// One MLP per waypoint count.
#[derive(Debug, Clone, Default)]
pub struct MlpBank<R> {
    models: Vec<Mlp<R>>,
}

impl<R: Real> MlpBank<R> {
    pub fn new() -> Self {
        Self { models: Vec::new() }
    }

    /// Adds or replaces the model for its waypoint count.
    pub fn insert(&mut self, model: Mlp<R>) {
        let n = model.cfg.waypoints;
        self.models.retain(|m| m.cfg.waypoints != n);
        self.models.push(model);
        self.models.sort_by_key(|m| m.cfg.waypoints);
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.models.iter().map(|m| m.cfg.waypoints).collect()
    }

    pub fn models(&self) -> &[Mlp<R>] {
        &self.models
    }

    pub fn get(&self, waypoints: usize) -> Option<&Mlp<R>> {
        self.models.iter().find(|m| m.cfg.waypoints == waypoints)
    }

    pub fn param_count(&self) -> usize {
        self.models.iter().map(|m| m.cfg.param_count()).sum()
    }

    /// Fractions from the model matching the input size; any other size is
    /// a fixed-size error naming the nearest size the bank has.
    pub fn predict(&self, ra: &RangeAngleSequence) -> Result<Vec<f64>> {
        let n = ra.len() + 1;
        match self.get(n) {
            Some(m) => m.predict(ra),
            None => {
                let nearest = self.sizes().into_iter().min_by_key(|&s| s.abs_diff(n)).unwrap_or(0);
                Err(Error::FixedSize { expected: nearest, got: n })
            }
        }
    }
}
