//! Reverse-mode differentiation over a handful of fused dense ops.

use alloc::vec;
use alloc::vec::Vec;

use super::tensor::{matmul_acc, matmul_at_acc, matmul_bt_acc};
use super::{ParamStore, Real, Tensor};

pub type NodeId = usize;

#[derive(Debug, Clone)]
enum Op<R> {
    Leaf,
    Param(usize),
    /// `x · w + b`
    Linear { x: NodeId, w: NodeId, b: Option<NodeId> },
    Add(NodeId, NodeId),
    Relu(NodeId),
    /// Elementwise product with a constant (dropout masks).
    Mask(NodeId, Vec<R>),
    LayerNorm { x: NodeId, gamma: NodeId, beta: NodeId, xhat: Vec<R>, rstd: Vec<R> },
    Attention { q: NodeId, k: NodeId, v: NodeId, heads: usize, probs: Vec<R> },
    L1 { pred: NodeId, target: Vec<R>, cumulative: bool },
}

#[derive(Debug, Clone)]
struct Node<R> {
    value: Tensor<R>,
    op: Op<R>,
}

/// Append-only expression graph. Values are computed eagerly as nodes are
/// added; [`Graph::backward`] walks the nodes in reverse.
#[derive(Debug, Clone, Default)]
pub struct Graph<R> {
    nodes: Vec<Node<R>>,
    param_nodes: Vec<Option<NodeId>>,
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

impl<R: Real> Graph<R> {
    pub fn new() -> Self {
        Self { nodes: Vec::new(), param_nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<R>, op: Op<R>) -> NodeId {
        self.nodes.push(Node { value, op });
        self.nodes.len() - 1
    }

    pub fn value(&self, id: NodeId) -> &Tensor<R> {
        &self.nodes[id].value
    }

    pub fn leaf(&mut self, t: Tensor<R>) -> NodeId {
        self.push(t, Op::Leaf)
    }

    /// Parameter `index` of `store`; repeated requests share one node.
    pub fn param(&mut self, store: &ParamStore<R>, index: usize) -> NodeId {
        if self.param_nodes.len() <= index {
            self.param_nodes.resize(index + 1, None);
        }
        if let Some(id) = self.param_nodes[index] {
            return id;
        }
        let id = self.push(store.tensor(index).clone(), Op::Param(index));
        self.param_nodes[index] = Some(id);
        id
    }

    pub fn linear(&mut self, x: NodeId, w: NodeId, b: Option<NodeId>) -> NodeId {
        let (xv, wv) = (&self.nodes[x].value, &self.nodes[w].value);
        assert_eq!(xv.cols, wv.rows, "linear: inner dimensions differ");
        let (n, k, m) = (xv.rows, xv.cols, wv.cols);
        let mut out = Tensor::zeros(n, m);
        if let Some(b) = b {
            let bv = &self.nodes[b].value;
            assert_eq!(bv.len(), m, "linear: bias length");
            for row in out.data.chunks_mut(m) {
                row.copy_from_slice(&bv.data);
            }
        }
        matmul_acc(&xv.data, &wv.data, &mut out.data, n, k, m);
        self.push(out, Op::Linear { x, w, b })
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (av, bv) = (&self.nodes[a].value, &self.nodes[b].value);
        assert_eq!((av.rows, av.cols), (bv.rows, bv.cols), "add: shapes differ");
        let data = av.data.iter().zip(&bv.data).map(|(x, y)| *x + *y).collect();
        let out = Tensor::from_vec(av.rows, av.cols, data);
        self.push(out, Op::Add(a, b))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let xv = &self.nodes[x].value;
        let data = xv.data.iter().map(|&v| if v > R::zero() { v } else { R::zero() }).collect();
        let out = Tensor::from_vec(xv.rows, xv.cols, data);
        self.push(out, Op::Relu(x))
    }

    pub fn mask(&mut self, x: NodeId, mask: Vec<R>) -> NodeId {
        let xv = &self.nodes[x].value;
        assert_eq!(xv.len(), mask.len());
        let data = xv.data.iter().zip(&mask).map(|(a, b)| *a * *b).collect();
        let out = Tensor::from_vec(xv.rows, xv.cols, data);
        self.push(out, Op::Mask(x, mask))
    }

    /// Per-row normalization with learned gain and shift.
    pub fn layer_norm(&mut self, x: NodeId, gamma: NodeId, beta: NodeId) -> NodeId {
        let xv = &self.nodes[x].value;
        let (g, b) = (&self.nodes[gamma].value.data, &self.nodes[beta].value.data);
        let (n, d) = (xv.rows, xv.cols);
        let eps = R::of(LAYER_NORM_EPS);
        let inv_d = R::one() / R::of(d as f64);
        let mut xhat = vec![R::zero(); n * d];
        let mut rstd = vec![R::zero(); n];
        let mut out = Tensor::zeros(n, d);
        for i in 0..n {
            let row = xv.row(i);
            let mean = row.iter().fold(R::zero(), |s, &v| s + v) * inv_d;
            let var = row.iter().fold(R::zero(), |s, &v| s + (v - mean) * (v - mean)) * inv_d;
            let r = R::one() / (var + eps).sqrt();
            rstd[i] = r;
            for j in 0..d {
                let h = (row[j] - mean) * r;
                xhat[i * d + j] = h;
                out.data[i * d + j] = h * g[j] + b[j];
            }
        }
        self.push(out, Op::LayerNorm { x, gamma, beta, xhat, rstd })
    }

    /// Multi-head scaled dot-product attention. With `causal`, query `i`
    /// sees keys `0..=i` only.
    pub fn attention(&mut self, q: NodeId, k: NodeId, v: NodeId, heads: usize, causal: bool) -> NodeId {
        let (qv, kv, vv) = (&self.nodes[q].value, &self.nodes[k].value, &self.nodes[v].value);
        let (nq, nk, d) = (qv.rows, kv.rows, qv.cols);
        assert!(kv.cols == d && vv.cols == d && vv.rows == nk && d % heads == 0);
        let dh = d / heads;
        let scale = R::one() / R::of(dh as f64).sqrt();
        let mut probs = vec![R::zero(); heads * nq * nk];
        let mut out = Tensor::zeros(nq, d);
        for h in 0..heads {
            let off = h * dh;
            for i in 0..nq {
                let visible = if causal { (i + 1).min(nk) } else { nk };
                let p = &mut probs[(h * nq + i) * nk..(h * nq + i + 1) * nk];
                let qi = &qv.data[i * d + off..i * d + off + dh];
                let mut max = R::neg_infinity();
                for (j, pj) in p.iter_mut().enumerate().take(visible) {
                    let kj = &kv.data[j * d + off..j * d + off + dh];
                    let s = qi.iter().zip(kj).fold(R::zero(), |s, (a, b)| s + *a * *b) * scale;
                    *pj = s;
                    max = max.max(s);
                }
                let mut sum = R::zero();
                for pj in p.iter_mut().take(visible) {
                    *pj = (*pj - max).exp();
                    sum += *pj;
                }
                for pj in p.iter_mut().take(visible) {
                    *pj /= sum;
                }
                let oi = &mut out.data[i * d + off..i * d + off + dh];
                for (j, &pj) in p.iter().enumerate().take(visible) {
                    let vj = &vv.data[j * d + off..j * d + off + dh];
                    for (o, x) in oi.iter_mut().zip(vj) {
                        *o += pj * *x;
                    }
                }
            }
        }
        self.push(out, Op::Attention { q, k, v, heads, probs })
    }

    /// Attention weights of an attention node, `heads × queries × keys`.
    pub fn attention_probs(&self, id: NodeId) -> Option<(&[R], usize, usize, usize)> {
        match &self.nodes[id].op {
            Op::Attention { q, k, heads, probs, .. } => {
                Some((probs.as_slice(), *heads, self.nodes[*q].value.rows, self.nodes[*k].value.rows))
            }
            _ => None,
        }
    }

    /// `Σ|pred − target|`, or over running sums with `cumulative`.
    pub fn l1_loss(&mut self, pred: NodeId, target: Vec<R>, cumulative: bool) -> NodeId {
        let pv = &self.nodes[pred].value;
        assert_eq!(pv.len(), target.len(), "loss: length mismatch");
        let mut total = R::zero();
        let mut run = R::zero();
        for (p, t) in pv.data.iter().zip(&target) {
            if cumulative {
                run += *p - *t;
                total += run.abs();
            } else {
                total += (*p - *t).abs();
            }
        }
        self.push(Tensor::from_vec(1, 1, vec![total]), Op::L1 { pred, target, cumulative })
    }

    /// Gradients of the scalar `loss` with respect to every parameter that
    /// appears in the graph, as `(parameter index, gradient)`.
    pub fn backward(&self, loss: NodeId) -> Vec<(usize, Tensor<R>)> {
        assert_eq!(self.nodes[loss].value.len(), 1, "backward needs a scalar");
        let mut grads: Vec<Option<Vec<R>>> = vec![None; loss + 1];
        grads[loss] = Some(vec![R::one()]);
        let mut out = Vec::new();

        fn slot<'a, R: Real>(grads: &'a mut [Option<Vec<R>>], nodes: &[Node<R>], id: NodeId) -> &'a mut [R] {
            grads[id].get_or_insert_with(|| vec![R::zero(); nodes[id].value.len()])
        }

        for id in (0..=loss).rev() {
            let Some(g) = grads[id].take() else { continue };
            let nodes = &self.nodes;
            match &nodes[id].op {
                Op::Leaf => {}
                Op::Param(p) => {
                    let v = &nodes[id].value;
                    out.push((*p, Tensor::from_vec(v.rows, v.cols, g)));
                }
                Op::Linear { x, w, b } => {
                    let (xv, wv) = (&nodes[*x].value, &nodes[*w].value);
                    let (n, k, m) = (xv.rows, xv.cols, wv.cols);
                    matmul_bt_acc(&g, &wv.data, slot(&mut grads, nodes, *x), n, m, k);
                    matmul_at_acc(&xv.data, &g, slot(&mut grads, nodes, *w), n, k, m);
                    if let Some(b) = b {
                        let gb = slot(&mut grads, nodes, *b);
                        for row in g.chunks(m) {
                            for (s, v) in gb.iter_mut().zip(row) {
                                *s += *v;
                            }
                        }
                    }
                }
                Op::Add(a, b) => {
                    for t in [a, b] {
                        for (s, v) in slot(&mut grads, nodes, *t).iter_mut().zip(&g) {
                            *s += *v;
                        }
                    }
                }
                Op::Relu(x) => {
                    let xv = &nodes[*x].value.data;
                    for ((s, v), xi) in slot(&mut grads, nodes, *x).iter_mut().zip(&g).zip(xv) {
                        if *xi > R::zero() {
                            *s += *v;
                        }
                    }
                }
                Op::Mask(x, mask) => {
                    for ((s, v), mi) in slot(&mut grads, nodes, *x).iter_mut().zip(&g).zip(mask) {
                        *s += *v * *mi;
                    }
                }
                Op::LayerNorm { x, gamma, beta, xhat, rstd } => {
                    let d = nodes[*x].value.cols;
                    let gam = &nodes[*gamma].value.data;
                    let inv_d = R::one() / R::of(d as f64);
                    {
                        let gg = slot(&mut grads, nodes, *gamma);
                        for (i, row) in g.chunks(d).enumerate() {
                            for j in 0..d {
                                gg[j] += row[j] * xhat[i * d + j];
                            }
                        }
                    }
                    {
                        let gb = slot(&mut grads, nodes, *beta);
                        for row in g.chunks(d) {
                            for (s, v) in gb.iter_mut().zip(row) {
                                *s += *v;
                            }
                        }
                    }
                    let gx = slot(&mut grads, nodes, *x);
                    let mut dxhat = vec![R::zero(); d];
                    for (i, row) in g.chunks(d).enumerate() {
                        let xh = &xhat[i * d..(i + 1) * d];
                        let mut sum = R::zero();
                        let mut sum_xh = R::zero();
                        for j in 0..d {
                            dxhat[j] = row[j] * gam[j];
                            sum += dxhat[j];
                            sum_xh += dxhat[j] * xh[j];
                        }
                        for j in 0..d {
                            gx[i * d + j] += rstd[i] * (dxhat[j] - (sum + xh[j] * sum_xh) * inv_d);
                        }
                    }
                }
                Op::Attention { q, k, v, heads, probs } => {
                    let (qv, kv, vv) = (&nodes[*q].value, &nodes[*k].value, &nodes[*v].value);
                    let (nq, nk, d) = (qv.rows, kv.rows, qv.cols);
                    let dh = d / heads;
                    let scale = R::one() / R::of(dh as f64).sqrt();
                    let mut gq = vec![R::zero(); nq * d];
                    let mut gk = vec![R::zero(); nk * d];
                    let mut gv = vec![R::zero(); nk * d];
                    let mut dp = vec![R::zero(); nk];
                    for h in 0..*heads {
                        let off = h * dh;
                        for i in 0..nq {
                            let p = &probs[(h * nq + i) * nk..(h * nq + i + 1) * nk];
                            let gi = &g[i * d + off..i * d + off + dh];
                            let mut dot = R::zero();
                            for j in 0..nk {
                                if p[j] == R::zero() {
                                    dp[j] = R::zero();
                                    continue;
                                }
                                let vj = &vv.data[j * d + off..j * d + off + dh];
                                dp[j] = gi.iter().zip(vj).fold(R::zero(), |s, (a, b)| s + *a * *b);
                                dot += p[j] * dp[j];
                                for (s, gij) in gv[j * d + off..j * d + off + dh].iter_mut().zip(gi) {
                                    *s += p[j] * *gij;
                                }
                            }
                            for j in 0..nk {
                                if p[j] == R::zero() {
                                    continue;
                                }
                                let ds = p[j] * (dp[j] - dot) * scale;
                                let (qi, kj) = (i * d + off, j * d + off);
                                for c in 0..dh {
                                    gq[qi + c] += ds * kv.data[kj + c];
                                    gk[kj + c] += ds * qv.data[qi + c];
                                }
                            }
                        }
                    }
                    for (t, gt) in [(q, gq), (k, gk), (v, gv)] {
                        for (s, x) in slot(&mut grads, nodes, *t).iter_mut().zip(&gt) {
                            *s += *x;
                        }
                    }
                }
                Op::L1 { pred, target, cumulative } => {
                    let pv = &nodes[*pred].value.data;
                    let sign = |x: R| {
                        if x > R::zero() {
                            R::one()
                        } else if x < R::zero() {
                            -R::one()
                        } else {
                            R::zero()
                        }
                    };
                    let gp = slot(&mut grads, nodes, *pred);
                    if *cumulative {
                        let mut run = R::zero();
                        let signs: Vec<R> = pv
                            .iter()
                            .zip(target)
                            .map(|(p, t)| {
                                run += *p - *t;
                                sign(run)
                            })
                            .collect();
                        let mut tail = R::zero();
                        for j in (0..pv.len()).rev() {
                            tail += signs[j];
                            gp[j] += g[0] * tail;
                        }
                    } else {
                        for ((s, p), t) in gp.iter_mut().zip(pv).zip(target) {
                            *s += g[0] * sign(*p - *t);
                        }
                    }
                }
            }
        }
        out
    }
}
