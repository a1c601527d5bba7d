use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tape::{Graph, NodeId};
use super::transformer::model_inputs;
use super::{ParamStore, Real};
use crate::dataprep::LabeledSample;
use crate::error::{Error, Result};

/// Model input and target fractions for one labeled sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqSample {
    pub inputs: Vec<[f64; 2]>,
    pub target: Vec<f64>,
}

impl From<&LabeledSample> for SeqSample {
    fn from(s: &LabeledSample) -> Self {
        Self { inputs: model_inputs(&s.range_angle), target: s.fractions.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LossKind {
    /// `Σ|pred − target|`
    PerStep,
    /// `Σ|cumsum(pred) − cumsum(target)|`
    Cumulative,
}

/// Plain-number version of the training loss.
pub fn l1_loss(pred: &[f64], target: &[f64], kind: LossKind) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::Dimension(format!("loss over {} predictions and {} targets", pred.len(), target.len())));
    }
    let mut run = 0.0;
    Ok(pred
        .iter()
        .zip(target)
        .map(|(p, t)| match kind {
            LossKind::PerStep => (p - t).abs(),
            LossKind::Cumulative => {
                run += p - t;
                run.abs()
            }
        })
        .sum())
}

/// Inverted dropout; a zero rate (or no generator) is the identity.
#[derive(Debug, Clone)]
pub struct Dropout {
    rate: f64,
    rng: Option<ChaCha8Rng>,
}

impl Dropout {
    pub fn off() -> Self {
        Self { rate: 0.0, rng: None }
    }

    pub fn new(rate: f64, seed: u64) -> Self {
        Self { rate, rng: Some(ChaCha8Rng::seed_from_u64(seed)) }
    }

    pub fn apply<R: Real>(&mut self, g: &mut Graph<R>, x: NodeId) -> NodeId {
        let Some(rng) = self.rng.as_mut() else { return x };
        if self.rate <= 0.0 {
            return x;
        }
        let keep = R::of(1.0 / (1.0 - self.rate));
        let mask = (0..g.value(x).len())
            .map(|_| if rng.random::<f64>() < self.rate { R::zero() } else { keep })
            .collect();
        g.mask(x, mask)
    }
}

/// Anything with parameters and a differentiable per-sample loss.
pub trait Trainable<R: Real> {
    fn params(&self) -> &ParamStore<R>;
    fn params_mut(&mut self) -> &mut ParamStore<R>;
    fn dropout_rate(&self) -> f64 {
        0.0
    }
    fn loss_node(&self, g: &mut Graph<R>, sample: &SeqSample, kind: LossKind, drop: &mut Dropout) -> Result<NodeId>;
}

/// Mean per-sample loss without dropout.
pub fn mean_loss<R: Real, M: Trainable<R>>(model: &M, samples: &[SeqSample], kind: LossKind) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("no samples to evaluate".into()));
    }
    let mut total = 0.0;
    for s in samples {
        let mut g = Graph::new();
        let l = model.loss_node(&mut g, s, kind, &mut Dropout::off())?;
        total += g.value(l).data[0].f64();
    }
    Ok(total / samples.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Self::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Schedule {
    Constant,
    /// Cosine decay from the base rate to `min_lr` over all steps.
    Cosine { min_lr: f64 },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct TrainConfig {
    pub lr: f64,
    pub schedule: Schedule,
    pub optimizer: Optimizer,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub loss: LossKind,
    /// Global gradient-norm clip.
    pub grad_clip: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            schedule: Schedule::Cosine { min_lr: 0.0 },
            optimizer: Optimizer::adam(),
            batch_size: 16,
            epochs: 30,
            seed: 0,
            loss: LossKind::PerStep,
            grad_clip: Some(1.0),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(format!("train: {what}")));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return bad("batch size and epochs must be positive");
        }
        if let Schedule::Cosine { min_lr } = self.schedule {
            if !(0.0..=self.lr).contains(&min_lr) {
                return bad("min_lr must be in [0, lr]");
            }
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return bad("grad_clip must be positive");
            }
        }
        if let Optimizer::Adam { beta1, beta2, eps } = self.optimizer {
            if !((0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0) {
                return bad("Adam betas must be in [0, 1) and eps positive");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
}

/// Everything needed to continue training where it stopped.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainerState<R> {
    pub epoch: usize,
    pub step: usize,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val: f64,
    pub best_params: ParamStore<R>,
    /// First and second moment estimates, one buffer per parameter.
    pub moments: Vec<(Vec<f64>, Vec<f64>)>,
}

/// Minibatch trainer keeping the best-validation parameters.
#[derive(Debug, Clone)]
pub struct Trainer<R, M> {
    model: M,
    cfg: TrainConfig,
    state: TrainerState<R>,
}

impl<R: Real, M: Trainable<R>> Trainer<R, M> {
    /// Evaluates the untrained model as epoch 0.
    pub fn new(model: M, cfg: TrainConfig, train: &[SeqSample], val: &[SeqSample]) -> Result<Self> {
        cfg.validate()?;
        if train.is_empty() || val.is_empty() {
            return Err(Error::Empty("training and validation sets must be non-empty".into()));
        }
        let train_loss = mean_loss(&model, train, cfg.loss)?;
        let val_loss = mean_loss(&model, val, cfg.loss)?;
        let moments = model.params().tensors().iter().map(|t| (vec![0.0; t.len()], vec![0.0; t.len()])).collect();
        let state = TrainerState {
            epoch: 0,
            step: 0,
            history: vec![EpochRecord { epoch: 0, train_loss, val_loss, lr: 0.0 }],
            best_epoch: 0,
            best_val: val_loss,
            best_params: model.params().clone(),
            moments,
        };
        Ok(Self { model, cfg, state })
    }

    pub fn resume(model: M, cfg: TrainConfig, state: TrainerState<R>) -> Result<Self> {
        cfg.validate()?;
        if state.moments.len() != model.params().len() || state.best_params.shapes() != model.params().shapes() {
            return Err(Error::Dimension("trainer state does not match the model".into()));
        }
        Ok(Self { model, cfg, state })
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn state(&self) -> &TrainerState<R> {
        &self.state
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn history(&self) -> &[EpochRecord] {
        &self.state.history
    }

    pub fn is_done(&self) -> bool {
        self.state.epoch >= self.cfg.epochs
    }

    fn lr_at(&self, step: usize, total: usize) -> f64 {
        match self.cfg.schedule {
            Schedule::Constant => self.cfg.lr,
            Schedule::Cosine { min_lr } => {
                let u = (step as f64 / total.max(1) as f64).min(1.0);
                min_lr + 0.5 * (self.cfg.lr - min_lr) * (1.0 + libm::cos(core::f64::consts::PI * u))
            }
        }
    }

    /// One pass over `train` in a seed- and epoch-determined order, then a
    /// validation pass. On a non-finite loss or parameter the best
    /// parameters are restored and a divergence error returned.
    pub fn run_epoch(&mut self, train: &[SeqSample], val: &[SeqSample]) -> Result<EpochRecord> {
        let epoch = self.state.epoch + 1;
        let steps_per_epoch = train.len().div_ceil(self.cfg.batch_size);
        let total_steps = steps_per_epoch * self.cfg.epochs;
        let mut order: Vec<usize> = (0..train.len()).collect();
        let mix = self.cfg.seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix));
        let mut drop = match self.model.dropout_rate() {
            r if r > 0.0 => Dropout::new(r, mix.rotate_left(17)),
            _ => Dropout::off(),
        };

        let mut grads: Vec<Vec<f64>> = self.model.params().tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        let mut epoch_loss = 0.0;
        let mut lr = self.cfg.lr;
        for batch in order.chunks(self.cfg.batch_size) {
            grads.iter_mut().for_each(|g| g.iter_mut().for_each(|v| *v = 0.0));
            for &i in batch {
                let mut g = Graph::new();
                let l = self.model.loss_node(&mut g, &train[i], self.cfg.loss, &mut drop)?;
                epoch_loss += g.value(l).data[0].f64();
                for (p, t) in g.backward(l) {
                    for (s, v) in grads[p].iter_mut().zip(&t.data) {
                        *s += v.f64();
                    }
                }
            }
            let inv = 1.0 / batch.len() as f64;
            grads.iter_mut().for_each(|g| g.iter_mut().for_each(|v| *v *= inv));
            if let Some(clip) = self.cfg.grad_clip {
                let norm = libm::sqrt(grads.iter().flatten().map(|v| v * v).sum::<f64>());
                if norm > clip {
                    let s = clip / norm;
                    grads.iter_mut().for_each(|g| g.iter_mut().for_each(|v| *v *= s));
                }
            }
            lr = self.lr_at(self.state.step, total_steps);
            self.state.step += 1;
            self.apply(&grads, lr);
            if !epoch_loss.is_finite() || !self.model.params().all_finite() {
                return self.diverged(epoch);
            }
        }
        let train_loss = epoch_loss / train.len() as f64;
        let val_loss = match mean_loss(&self.model, val, self.cfg.loss) {
            Ok(v) if v.is_finite() => v,
            Ok(_) | Err(Error::NumericFailure { .. }) => return self.diverged(epoch),
            Err(e) => return Err(e),
        };
        let rec = EpochRecord { epoch, train_loss, val_loss, lr };
        self.state.history.push(rec);
        self.state.epoch = epoch;
        if val_loss < self.state.best_val {
            self.state.best_val = val_loss;
            self.state.best_epoch = epoch;
            self.state.best_params = self.model.params().clone();
        }
        Ok(rec)
    }

    fn diverged(&mut self, epoch: usize) -> Result<EpochRecord> {
        *self.model.params_mut() = self.state.best_params.clone();
        Err(Error::Diverged { epoch })
    }

    fn apply(&mut self, grads: &[Vec<f64>], lr: f64) {
        let t = self.state.step as f64;
        let opt = self.cfg.optimizer;
        let (bc1, bc2) = match opt {
            Optimizer::Adam { beta1, beta2, .. } => (1.0 - libm::pow(beta1, t), 1.0 - libm::pow(beta2, t)),
            Optimizer::Sgd => (1.0, 1.0),
        };
        let params = self.model.params_mut();
        for (i, g) in grads.iter().enumerate() {
            let data = &mut params.tensor_mut(i).data;
            let (m, v) = &mut self.state.moments[i];
            for j in 0..g.len() {
                let delta = match opt {
                    Optimizer::Sgd => lr * g[j],
                    Optimizer::Adam { beta1, beta2, eps } => {
                        m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
                        v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
                        let mh = m[j] / bc1;
                        let vh = v[j] / bc2;
                        lr * mh / (libm::sqrt(vh) + eps)
                    }
                };
                data[j] = R::of(data[j].f64() - delta);
            }
        }
    }

    /// Run the remaining epochs.
    pub fn fit(&mut self, train: &[SeqSample], val: &[SeqSample]) -> Result<()> {
        while !self.is_done() {
            self.run_epoch(train, val)?;
        }
        Ok(())
    }

    /// The model with its best-validation parameters, plus the loss history.
    pub fn into_best(mut self) -> (M, Vec<EpochRecord>) {
        *self.model.params_mut() = self.state.best_params.clone();
        (self.model, self.state.history)
    }
}
