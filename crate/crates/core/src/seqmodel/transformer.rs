use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::attention::{AttentionMap, AttentionRecord};
use super::tape::{Graph, NodeId};
use super::train::{Dropout, LossKind, SeqSample, Trainable};
use super::{normalize_output, ParamStore, Real, Tensor};
use crate::dataprep::RangeAngleSequence;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub num_heads: usize,
    pub enc_layers: usize,
    pub dec_layers: usize,
    pub ffn_dim: usize,
    pub max_seq_len: usize,
    pub dropout: f64,
    pub precision: Precision,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            embed_dim: 32,
            num_heads: 16,
            enc_layers: 3,
            dec_layers: 3,
            ffn_dim: 256,
            max_seq_len: 64,
            dropout: 0.0,
            precision: Precision::F32,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(format!("model: {what}")));
        if self.embed_dim == 0 || self.num_heads == 0 || self.ffn_dim == 0 || self.max_seq_len == 0 {
            return bad("all dimensions must be at least 1");
        }
        if self.enc_layers == 0 || self.dec_layers == 0 {
            return bad("need at least one encoder and one decoder layer");
        }
        if self.embed_dim % self.num_heads != 0 {
            return bad("embed_dim must be divisible by num_heads");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        Ok(())
    }
}

/// Trainable scalars for `cfg`: post-norm encoder/decoder layers with biased
/// Q/K/V/O projections, final norms on both stacks, a 2→d input map, a 1→d
/// output embedding and a d→1 head.
pub fn param_count(cfg: &ModelConfig) -> usize {
    let (d, f) = (cfg.embed_dim, cfg.ffn_dim);
    let attn = 4 * (d * d + d);
    let norm = 2 * d;
    let ffn = d * f + f + f * d + d;
    let enc = cfg.enc_layers * (attn + ffn + 2 * norm) + norm;
    let dec = cfg.dec_layers * (2 * attn + ffn + 3 * norm) + norm;
    (2 * d + d) + (d + d) + enc + dec + (d + 1)
}

/// Sinusoidal encoding: `sin(pos/10000^{2i/d})` at even index `2i`, the
/// cosine at `2i + 1`.
pub fn positional_encoding(pos: usize, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|j| {
            let i2 = (j - j % 2) as f64;
            let a = pos as f64 / libm::pow(10000.0, i2 / dim as f64);
            if j % 2 == 0 {
                libm::sin(a)
            } else {
                libm::cos(a)
            }
        })
        .collect()
}

/// Grid the model inputs are snapped to, so that inputs equal to within
/// floating noise become bit-identical.
pub const INPUT_QUANTUM: f64 = 1.0 / (1u64 << 20) as f64;

/// `(d′, θ)` per segment, snapped to [`INPUT_QUANTUM`].
pub fn model_inputs(ra: &RangeAngleSequence) -> Vec<[f64; 2]> {
    let q = |v: f64| libm::round(v / INPUT_QUANTUM) * INPUT_QUANTUM;
    ra.ranges.iter().zip(&ra.angles).map(|(d, t)| [q(*d), q(*t)]).collect()
}

#[derive(Debug, Clone, Copy)]
struct Lin {
    w: usize,
    b: usize,
}

#[derive(Debug, Clone, Copy)]
struct Norm {
    g: usize,
    b: usize,
}

#[derive(Debug, Clone, Copy)]
struct Attn {
    q: Lin,
    k: Lin,
    v: Lin,
    o: Lin,
}

#[derive(Debug, Clone, Copy)]
struct Ffn {
    up: Lin,
    down: Lin,
}

#[derive(Debug, Clone, Copy)]
struct EncLayer {
    attn: Attn,
    norm1: Norm,
    ffn: Ffn,
    norm2: Norm,
}

#[derive(Debug, Clone, Copy)]
struct DecLayer {
    self_attn: Attn,
    norm1: Norm,
    cross: Attn,
    norm2: Norm,
    ffn: Ffn,
    norm3: Norm,
}

#[derive(Debug, Clone)]
struct Layout {
    input: Lin,
    output_embed: Lin,
    enc: Vec<EncLayer>,
    enc_norm: Norm,
    dec: Vec<DecLayer>,
    dec_norm: Norm,
    head: Lin,
}

fn lin_params<R: Real>(p: &mut ParamStore<R>, rng: &mut ChaCha8Rng, name: &str, i: usize, o: usize) -> Lin {
    Lin { w: p.push_xavier(format!("{name}.weight"), i, o, rng), b: p.push_const(format!("{name}.bias"), o, 0.0) }
}

fn norm_params<R: Real>(p: &mut ParamStore<R>, name: &str, d: usize) -> Norm {
    Norm { g: p.push_const(format!("{name}.weight"), d, 1.0), b: p.push_const(format!("{name}.bias"), d, 0.0) }
}

fn attn_params<R: Real>(p: &mut ParamStore<R>, rng: &mut ChaCha8Rng, name: &str, d: usize) -> Attn {
    Attn {
        q: lin_params(p, rng, &format!("{name}.q"), d, d),
        k: lin_params(p, rng, &format!("{name}.k"), d, d),
        v: lin_params(p, rng, &format!("{name}.v"), d, d),
        o: lin_params(p, rng, &format!("{name}.o"), d, d),
    }
}

fn ffn_params<R: Real>(p: &mut ParamStore<R>, rng: &mut ChaCha8Rng, name: &str, d: usize, f: usize) -> Ffn {
    Ffn { up: lin_params(p, rng, &format!("{name}.up"), d, f), down: lin_params(p, rng, &format!("{name}.down"), f, d) }
}

fn build_layout<R: Real>(cfg: &ModelConfig, p: &mut ParamStore<R>, rng: &mut ChaCha8Rng) -> Layout {
    let (d, f) = (cfg.embed_dim, cfg.ffn_dim);
    let input = lin_params(p, rng, "input", 2, d);
    let output_embed = lin_params(p, rng, "output_embed", 1, d);
    let enc = (0..cfg.enc_layers)
        .map(|l| EncLayer {
            attn: attn_params(p, rng, &format!("encoder.{l}.self_attn"), d),
            norm1: norm_params(p, &format!("encoder.{l}.norm1"), d),
            ffn: ffn_params(p, rng, &format!("encoder.{l}.ffn"), d, f),
            norm2: norm_params(p, &format!("encoder.{l}.norm2"), d),
        })
        .collect();
    let enc_norm = norm_params(p, "encoder.norm", d);
    let dec = (0..cfg.dec_layers)
        .map(|l| DecLayer {
            self_attn: attn_params(p, rng, &format!("decoder.{l}.self_attn"), d),
            norm1: norm_params(p, &format!("decoder.{l}.norm1"), d),
            cross: attn_params(p, rng, &format!("decoder.{l}.cross_attn"), d),
            norm2: norm_params(p, &format!("decoder.{l}.norm2"), d),
            ffn: ffn_params(p, rng, &format!("decoder.{l}.ffn"), d, f),
            norm3: norm_params(p, &format!("decoder.{l}.norm3"), d),
        })
        .collect();
    let dec_norm = norm_params(p, "decoder.norm", d);
    let head = lin_params(p, rng, "head", d, 1);
    Layout { input, output_embed, enc, enc_norm, dec, dec_norm, head }
}

/// Autoregressive output of [`Transformer::decode_autoregressive`].
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Normalized allocation fractions.
    pub fractions: Vec<f64>,
    /// Raw per-step head outputs.
    pub raw: Vec<f64>,
    /// Attention maps of the final decode step.
    pub attention: AttentionRecord,
}

/// Encoder-decoder transformer mapping range-angle sequences to time
/// fractions.
#[derive(Debug, Clone)]
pub struct Transformer<R> {
    cfg: ModelConfig,
    params: ParamStore<R>,
    layout: Layout,
}

struct Captured {
    enc: Vec<NodeId>,
    dec_self: Vec<NodeId>,
    cross: Vec<NodeId>,
}

impl<R: Real> Transformer<R> {
    pub fn new(cfg: ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let layout = build_layout(&cfg, &mut params, &mut rng);
        Ok(Self { cfg, params, layout })
    }

    /// Rebuild around stored parameters; names and shapes must match `cfg`.
    pub fn from_params(cfg: ModelConfig, params: ParamStore<R>) -> Result<Self> {
        let mut fresh = Self::new(cfg, 0)?;
        if fresh.params.names() != params.names() || fresh.params.shapes() != params.shapes() {
            return Err(Error::Dimension("parameter names or shapes do not match the model config".into()));
        }
        fresh.params = params;
        Ok(fresh)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ParamStore<R> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<R> {
        &mut self.params
    }

    fn check_len(&self, m: usize) -> Result<()> {
        if m == 0 {
            return Err(Error::Empty("input sequence".into()));
        }
        if m > self.cfg.max_seq_len {
            return Err(Error::SequenceTooLong { len: m, max: self.cfg.max_seq_len });
        }
        Ok(())
    }

    fn lin(&self, g: &mut Graph<R>, x: NodeId, l: Lin) -> NodeId {
        let w = g.param(&self.params, l.w);
        let b = g.param(&self.params, l.b);
        g.linear(x, w, Some(b))
    }

    fn norm(&self, g: &mut Graph<R>, x: NodeId, n: Norm) -> NodeId {
        let gamma = g.param(&self.params, n.g);
        let beta = g.param(&self.params, n.b);
        g.layer_norm(x, gamma, beta)
    }

    fn mha(&self, g: &mut Graph<R>, x: NodeId, mem: NodeId, a: Attn, causal: bool) -> (NodeId, NodeId) {
        let q = self.lin(g, x, a.q);
        let k = self.lin(g, mem, a.k);
        let v = self.lin(g, mem, a.v);
        let att = g.attention(q, k, v, self.cfg.num_heads, causal);
        (self.lin(g, att, a.o), att)
    }

    fn ffn(&self, g: &mut Graph<R>, x: NodeId, f: Ffn, drop: &mut Dropout) -> NodeId {
        let h = self.lin(g, x, f.up);
        let h = g.relu(h);
        let h = drop.apply(g, h);
        self.lin(g, h, f.down)
    }

    fn embed(&self, g: &mut Graph<R>, x: Tensor<R>, l: Lin, drop: &mut Dropout) -> NodeId {
        let n = x.rows;
        let d = self.cfg.embed_dim;
        let x = g.leaf(x);
        let e = self.lin(g, x, l);
        let pe: Vec<f64> = (0..n).flat_map(|p| positional_encoding(p, d)).collect();
        let pe = g.leaf(Tensor::from_f64(n, d, &pe));
        let e = g.add(e, pe);
        drop.apply(g, e)
    }

    fn finite(g: &Graph<R>, id: NodeId, layer: &str) -> Result<()> {
        if g.value(id).all_finite() {
            Ok(())
        } else {
            Err(Error::NumericFailure { layer: layer.into() })
        }
    }

    /// Embedded input: `(d′, θ)` through the input map plus positional
    /// encoding.
    pub fn embed_inputs(&self, g: &mut Graph<R>, inputs: &[[f64; 2]]) -> Result<NodeId> {
        self.check_len(inputs.len())?;
        let flat: Vec<f64> = inputs.iter().flatten().copied().collect();
        Ok(self.embed(g, Tensor::from_f64(inputs.len(), 2, &flat), self.layout.input, &mut Dropout::off()))
    }

    fn encode(&self, g: &mut Graph<R>, inputs: &[[f64; 2]], drop: &mut Dropout, cap: &mut Captured) -> Result<NodeId> {
        self.check_len(inputs.len())?;
        let flat: Vec<f64> = inputs.iter().flatten().copied().collect();
        let mut x = self.embed(g, Tensor::from_f64(inputs.len(), 2, &flat), self.layout.input, drop);
        Self::finite(g, x, "input embedding")?;
        for (l, layer) in self.layout.enc.iter().enumerate() {
            let (a, probs) = self.mha(g, x, x, layer.attn, false);
            cap.enc.push(probs);
            let a = drop.apply(g, a);
            let s = g.add(x, a);
            x = self.norm(g, s, layer.norm1);
            let f = self.ffn(g, x, layer.ffn, drop);
            let f = drop.apply(g, f);
            let s = g.add(x, f);
            x = self.norm(g, s, layer.norm2);
            Self::finite(g, x, &format!("encoder layer {l}"))?;
        }
        Ok(self.norm(g, x, self.layout.enc_norm))
    }

    /// Decoder over `dec_in` (one scalar per step); returns the `k × 1` head
    /// output.
    fn decode(
        &self,
        g: &mut Graph<R>,
        memory: NodeId,
        dec_in: &[f64],
        drop: &mut Dropout,
        cap: &mut Captured,
    ) -> Result<NodeId> {
        let mut y = self.embed(g, Tensor::from_f64(dec_in.len(), 1, dec_in), self.layout.output_embed, drop);
        Self::finite(g, y, "output embedding")?;
        for (l, layer) in self.layout.dec.iter().enumerate() {
            let (a, probs) = self.mha(g, y, y, layer.self_attn, true);
            cap.dec_self.push(probs);
            let a = drop.apply(g, a);
            let s = g.add(y, a);
            y = self.norm(g, s, layer.norm1);
            let (c, probs) = self.mha(g, y, memory, layer.cross, false);
            cap.cross.push(probs);
            let c = drop.apply(g, c);
            let s = g.add(y, c);
            y = self.norm(g, s, layer.norm2);
            let f = self.ffn(g, y, layer.ffn, drop);
            let f = drop.apply(g, f);
            let s = g.add(y, f);
            y = self.norm(g, s, layer.norm3);
            Self::finite(g, y, &format!("decoder layer {l}"))?;
        }
        let y = self.norm(g, y, self.layout.dec_norm);
        let out = self.lin(g, y, self.layout.head);
        Self::finite(g, out, "output head")?;
        Ok(out)
    }

    fn record(&self, g: &Graph<R>, cap: &Captured) -> AttentionRecord {
        let maps = |ids: &[NodeId]| -> Vec<Vec<AttentionMap>> {
            ids.iter()
                .map(|&id| {
                    let (probs, heads, nq, nk) = g.attention_probs(id).expect("attention node");
                    (0..heads)
                        .map(|h| AttentionMap {
                            rows: nq,
                            cols: nk,
                            data: probs[h * nq * nk..(h + 1) * nq * nk].iter().map(|v| v.f64()).collect(),
                        })
                        .collect()
                })
                .collect()
        };
        AttentionRecord { encoder: maps(&cap.enc), decoder_self: maps(&cap.dec_self), cross: maps(&cap.cross) }
    }

    /// Decoder fed `[0, t₁, …, t_{m−1}]` under a causal mask. Returns the `m`
    /// raw outputs and every attention map.
    pub fn forward_teacher_forced(&self, inputs: &[[f64; 2]], targets: &[f64]) -> Result<(Vec<f64>, AttentionRecord)> {
        let mut g = Graph::new();
        let mut cap = Captured { enc: vec![], dec_self: vec![], cross: vec![] };
        let out = self.teacher_forced(&mut g, inputs, targets, &mut Dropout::off(), &mut cap)?;
        let raw = g.value(out).data.iter().map(|v| v.f64()).collect();
        Ok((raw, self.record(&g, &cap)))
    }

    fn teacher_forced(
        &self,
        g: &mut Graph<R>,
        inputs: &[[f64; 2]],
        targets: &[f64],
        drop: &mut Dropout,
        cap: &mut Captured,
    ) -> Result<NodeId> {
        if inputs.len() != targets.len() {
            return Err(Error::Dimension(format!("{} inputs but {} targets", inputs.len(), targets.len())));
        }
        let memory = self.encode(g, inputs, drop, cap)?;
        let mut dec_in = Vec::with_capacity(targets.len());
        dec_in.push(0.0);
        dec_in.extend_from_slice(&targets[..targets.len() - 1]);
        self.decode(g, memory, &dec_in, drop, cap)
    }

    /// Greedy decoding: `m` steps from the zero token, each step fed the raw
    /// outputs so far.
    pub fn decode_autoregressive(&self, inputs: &[[f64; 2]]) -> Result<Prediction> {
        let m = inputs.len();
        let mut g = Graph::new();
        let mut cap = Captured { enc: vec![], dec_self: vec![], cross: vec![] };
        let memory = self.encode(&mut g, inputs, &mut Dropout::off(), &mut cap)?;
        let memory = g.value(memory).clone();
        let mut raw: Vec<f64> = Vec::with_capacity(m);
        let mut dec_in = vec![0.0];
        let mut last = None;
        for step in 0..m {
            let mut dg = Graph::new();
            let mem = dg.leaf(memory.clone());
            let mut dcap = Captured { enc: vec![], dec_self: vec![], cross: vec![] };
            let out = self.decode(&mut dg, mem, &dec_in, &mut Dropout::off(), &mut dcap)?;
            let v = dg.value(out).data[step].f64();
            raw.push(v);
            dec_in.push(v);
            last = Some((dg, dcap));
        }
        let (dg, dcap) = last.expect("m >= 1");
        let mut attention = self.record(&dg, &dcap);
        attention.encoder = self.record(&g, &cap).encoder;
        let fractions = normalize_output(&raw)?;
        Ok(Prediction { fractions, raw, attention })
    }

    /// Fractions for a range-angle sequence.
    pub fn predict(&self, ra: &RangeAngleSequence) -> Result<Vec<f64>> {
        Ok(self.decode_autoregressive(&model_inputs(ra))?.fractions)
    }
}

impl<R: Real> Trainable<R> for Transformer<R> {
    fn params(&self) -> &ParamStore<R> {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamStore<R> {
        &mut self.params
    }

    fn dropout_rate(&self) -> f64 {
        self.cfg.dropout
    }

    fn loss_node(&self, g: &mut Graph<R>, sample: &SeqSample, kind: LossKind, drop: &mut Dropout) -> Result<NodeId> {
        let mut cap = Captured { enc: vec![], dec_self: vec![], cross: vec![] };
        let out = self.teacher_forced(g, &sample.inputs, &sample.target, drop, &mut cap)?;
        let target = sample.target.iter().map(|&t| R::of(t)).collect();
        Ok(g.l1_loss(out, target, kind == LossKind::Cumulative))
    }
}
