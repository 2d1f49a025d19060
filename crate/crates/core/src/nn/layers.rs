use super::{Graph, NodeId, ParamId, ParamStore, Tensor};
use crate::error::{invalid_input, shape_err, Error, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Fully-connected layer `y = x W + b`.
#[derive(Debug, Clone)]
pub struct Affine {
    pub weight: ParamId,
    pub bias: ParamId,
    pub input_dim: usize,
    pub output_dim: usize,
}

impl Affine {
    pub fn new(store: &mut ParamStore, name: &str, input_dim: usize, output_dim: usize, rng: &mut impl Rng) -> Result<Self> {
        let weight = store.add_glorot(&format!("{name}.weight"), input_dim, output_dim, rng)?;
        let bias = store.add_zeros(&format!("{name}.bias"), 1, output_dim)?;
        Ok(Self { weight, bias, input_dim, output_dim })
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: NodeId) -> Result<NodeId> {
        if g.value(x).cols() != self.input_dim {
            return Err(shape_err(format!(
                "affine expects {} inputs, got {:?}",
                self.input_dim,
                g.value(x).shape()
            )));
        }
        let w = g.param(store, self.weight);
        let b = g.param(store, self.bias);
        let y = g.matmul(x, w)?;
        g.add_bias(y, b)
    }
}

/// Inverted dropout: kept units are scaled by `1 / (1 - rate)` so that
/// evaluation needs no rescaling. With no RNG it is the identity.
#[derive(Debug)]
pub struct Dropout {
    rate: f64,
    rng: Option<ChaCha8Rng>,
}

impl Dropout {
    pub fn train(rate: f64, rng: ChaCha8Rng) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidConfig(format!("dropout rate must be in [0, 1), got {rate}")));
        }
        Ok(Self { rate, rng: Some(rng) })
    }

    pub fn eval() -> Self {
        Self { rate: 0.0, rng: None }
    }

    pub fn is_active(&self) -> bool {
        self.rng.is_some() && self.rate > 0.0
    }

    pub fn apply(&mut self, g: &mut Graph, x: NodeId) -> Result<NodeId> {
        if !self.is_active() {
            return Ok(x);
        }
        let rng = self.rng.as_mut().expect("active dropout has an rng");
        let keep = 1.0 - self.rate;
        let mask = (0..g.value(x).len())
            .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        g.dropout(x, mask)
    }
}

/// Residual TDNN block: `y = ReLU(splice(x) W + b) + x`.
#[derive(Debug, Clone)]
pub struct TdnnBlock {
    pub affine: Affine,
    pub offsets: Vec<isize>,
    pub dim: usize,
}

impl TdnnBlock {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize, offsets: &[isize], rng: &mut impl Rng) -> Result<Self> {
        if offsets.is_empty() {
            return Err(Error::InvalidConfig("TDNN needs at least one context offset".into()));
        }
        let affine = Affine::new(store, name, dim * offsets.len(), dim, rng)?;
        Ok(Self { affine, offsets: offsets.to_vec(), dim })
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: NodeId, dropout: &mut Dropout) -> Result<NodeId> {
        let xv = g.value(x);
        if xv.cols() != self.dim {
            return Err(shape_err(format!(
                "residual block of width {} got input {:?}",
                self.dim,
                xv.shape()
            )));
        }
        if xv.rows() == 0 {
            return Err(invalid_input("TDNN block over zero frames"));
        }
        let spliced = g.splice(x, &self.offsets)?;
        let h = self.affine.forward(g, store, spliced)?;
        let h = g.relu(h);
        let y = g.add(h, x)?;
        dropout.apply(g, y)
    }
}

/// Multi-head self-attentive pooling settings. The first `spiky_heads` heads
/// are pushed towards peaked weights, the remaining `smooth_heads` towards
/// uniform weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttentionConfig {
    pub n_heads: usize,
    pub spiky_heads: usize,
    pub smooth_heads: usize,
    pub penalty_weight: f64,
    pub attn_hidden: usize,
}

impl Default for AttentionConfig {
    fn default() -> Self {
        Self { n_heads: 5, spiky_heads: 3, smooth_heads: 2, penalty_weight: 0.05, attn_hidden: 64 }
    }
}

impl AttentionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_heads == 0 || self.spiky_heads + self.smooth_heads != self.n_heads {
            return Err(Error::InvalidConfig(format!(
                "attention heads: {} spiky + {} smooth must equal {} > 0",
                self.spiky_heads, self.smooth_heads, self.n_heads
            )));
        }
        if self.attn_hidden == 0 {
            return Err(Error::InvalidConfig("attention hidden size must be positive".into()));
        }
        if !(self.penalty_weight >= 0.0) {
            return Err(Error::InvalidConfig("penalty weight must be non-negative".into()));
        }
        Ok(())
    }
}

/// Output of [`SelfAttentivePooling::forward`].
#[derive(Debug, Clone, Copy)]
pub struct Pooled {
    /// `1 × (n_heads · d)`: per-head weighted sums, concatenated.
    pub embedding: NodeId,
    /// `T × n_heads` attention weights (column `h` is head `h`).
    pub attention: NodeId,
}

/// Structured self-attention: `A = softmax_T(tanh(H W1) W2)`, `E = Aᵀ H`.
#[derive(Debug, Clone)]
pub struct SelfAttentivePooling {
    pub w1: ParamId,
    pub w2: ParamId,
    pub input_dim: usize,
    pub cfg: AttentionConfig,
}

impl SelfAttentivePooling {
    pub fn new(store: &mut ParamStore, name: &str, input_dim: usize, cfg: AttentionConfig, rng: &mut impl Rng) -> Result<Self> {
        cfg.validate()?;
        let w1 = store.add_glorot(&format!("{name}.w1"), input_dim, cfg.attn_hidden, rng)?;
        let w2 = store.add_glorot(&format!("{name}.w2"), cfg.attn_hidden, cfg.n_heads, rng)?;
        Ok(Self { w1, w2, input_dim, cfg })
    }

    pub fn output_dim(&self) -> usize {
        self.cfg.n_heads * self.input_dim
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, h: NodeId, mask: &[bool]) -> Result<Pooled> {
        let hv = g.value(h);
        if hv.rows() == 0 {
            return Err(invalid_input("attention pooling over zero frames"));
        }
        if hv.cols() != self.input_dim {
            return Err(shape_err(format!("pooling width {} got {:?}", self.input_dim, hv.shape())));
        }
        if mask.len() != hv.rows() {
            return Err(shape_err(format!("mask of {} for {} frames", mask.len(), hv.rows())));
        }
        if !mask.iter().any(|m| *m) {
            return Err(invalid_input("attention pooling with every position masked"));
        }
        let w1 = g.param(store, self.w1);
        let w2 = g.param(store, self.w2);
        let u = g.matmul(h, w1)?;
        let u = g.tanh(u);
        let scores = g.matmul(u, w2)?;
        let attention = g.masked_softmax_cols(scores, mask)?;
        let pooled = g.matmul_tn(attention, h)?;
        let embedding = g.flatten(pooled);
        Ok(Pooled { embedding, attention })
    }

    /// `μ ·` the spiky/smooth penalty of a pooling result, as a graph node.
    pub fn penalty(&self, g: &mut Graph, pooled: &Pooled, mask: &[bool]) -> Result<NodeId> {
        let p = g.attention_penalty(pooled.attention, mask, self.cfg.spiky_heads)?;
        Ok(g.scale(p, self.cfg.penalty_weight))
    }
}

/// Penalty of `attn (T × H)` and its gradient: `(1 - max_t A)²` for the first
/// `spiky_heads` columns, `Σ_t (A - 1/T')²` over the `T'` unmasked rows for
/// the rest.
pub(crate) fn penalty_with_grad(attn: &Tensor, mask: &[bool], spiky_heads: usize) -> Result<(f64, Tensor)> {
    let (t_len, heads) = (attn.rows(), attn.cols());
    if mask.len() != t_len {
        return Err(shape_err(format!("mask of {} for {t_len} rows", mask.len())));
    }
    let live: Vec<usize> = (0..t_len).filter(|&t| mask[t]).collect();
    if live.is_empty() {
        return Err(invalid_input("penalty over an all-masked attention matrix"));
    }
    let uniform = 1.0 / live.len() as f64;
    let mut grad = Tensor::zeros(t_len, heads);
    let mut value = 0.0;
    for h in 0..heads {
        if h < spiky_heads {
            let (arg, max) = live
                .iter()
                .map(|&t| (t, attn.get(t, h)))
                .fold((live[0], f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
            let deficit = 1.0 - max;
            value += deficit * deficit;
            grad.set(arg, h, -2.0 * deficit);
        } else {
            for &t in &live {
                let diff = attn.get(t, h) - uniform;
                value += diff * diff;
                grad.set(t, h, 2.0 * diff);
            }
        }
    }
    Ok((value, grad))
}

/// `μ · (Σ_spiky (1 - max_t A[h,t])² + Σ_smooth Σ_t (A[h,t] - 1/T')²)` for
/// attention weights laid out `n_heads × T`.
pub fn attention_penalty(attn_heads_by_time: &Tensor, mask: &[bool], cfg: &AttentionConfig) -> Result<f64> {
    if attn_heads_by_time.rows() != cfg.n_heads {
        return Err(shape_err(format!(
            "expected {} heads, got {}",
            cfg.n_heads,
            attn_heads_by_time.rows()
        )));
    }
    let (v, _) = penalty_with_grad(&attn_heads_by_time.transpose(), mask, cfg.spiky_heads)?;
    Ok(cfg.penalty_weight * v)
}
