use super::config::{ModelConfig, AUDIO25_DIM, FBK250_DIM};
use crate::error::{invalid_input, shape_err, Error, Result};
use crate::nn::{
    cosine_logits, Affine, Dropout, Grads, Graph, NodeId, ParamId, ParamStore, SelfAttentivePooling, TdnnBlock, Tensor,
};
use crate::text::{ContextWindow, GLOVE_DIM};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Frame-level streams of one utterance, each `T × d`. Only the streams
/// enabled in the model's feature set are read.
#[derive(Debug, Clone, Copy, Default)]
pub struct TsbInput<'a> {
    pub audio25: Option<&'a Tensor>,
    pub fbk250: Option<&'a Tensor>,
    pub glove: Option<&'a Tensor>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ModelInput<'a> {
    pub tsb: TsbInput<'a>,
    pub context: Option<&'a ContextWindow>,
}

#[derive(Debug, Clone)]
pub struct BranchOutput {
    /// `1 × (n_heads · width)`.
    pub embedding: NodeId,
    /// `T × n_heads`, absent when the branch was bypassed.
    pub attention: Option<NodeId>,
    pub mask: Vec<bool>,
}

#[derive(Debug, Clone)]
struct TsbLayers {
    input: Affine,
    blocks: Vec<TdnnBlock>,
    pool: SelfAttentivePooling,
}

#[derive(Debug, Clone)]
struct TabLayers {
    proj: Affine,
    pool: SelfAttentivePooling,
}

#[derive(Debug, Clone)]
pub struct TwoBranchModel {
    cfg: ModelConfig,
    params: ParamStore,
    tsb: Option<TsbLayers>,
    tab: Option<TabLayers>,
    fusion: Affine,
    classes: ParamId,
}

/// Mean loss and gradients over a batch.
#[derive(Debug, Clone)]
pub struct BatchOutcome {
    pub loss: f64,
    pub grads: Grads,
    pub correct: usize,
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

const BATCH_CHUNK: usize = 4;

impl TwoBranchModel {
    pub fn new(cfg: ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let mut fused = 0;

        let tsb = if cfg.features.uses_tsb() {
            let d = cfg.tsb.encoder_dim;
            let input = Affine::new(&mut params, "tsb.input", cfg.features.tsb_input_dim(), d, &mut rng)?;
            let blocks = (0..cfg.tsb.n_blocks)
                .map(|i| TdnnBlock::new(&mut params, &format!("tsb.block{i}"), d, &cfg.tsb.context_offsets, &mut rng))
                .collect::<Result<Vec<_>>>()?;
            let pool = SelfAttentivePooling::new(&mut params, "tsb.pool", d, cfg.attention, &mut rng)?;
            fused += pool.output_dim();
            Some(TsbLayers { input, blocks, pool })
        } else {
            None
        };

        let tab = if cfg.features.uses_tab() {
            let proj = Affine::new(&mut params, "tab.proj", cfg.tab.sentence_dim, cfg.tab.proj_dim, &mut rng)?;
            let pool = SelfAttentivePooling::new(&mut params, "tab.pool", cfg.tab.proj_dim, cfg.attention, &mut rng)?;
            fused += pool.output_dim();
            Some(TabLayers { proj, pool })
        } else {
            None
        };

        let fusion = Affine::new(&mut params, "fusion", fused, cfg.fusion.hidden_dim, &mut rng)?;
        let classes = params.add_glorot("classifier.weight", cfg.fusion.n_classes, cfg.fusion.hidden_dim, &mut rng)?;
        Ok(Self { cfg, params, tsb, tab, fusion, classes })
    }

    /// Rebuilds a model around previously trained parameters, checking that
    /// names and shapes match the configuration.
    pub fn from_parts(cfg: ModelConfig, params: ParamStore) -> Result<Self> {
        let mut model = Self::new(cfg, 0)?;
        if model.params.len() != params.len() {
            return Err(Error::Format(format!(
                "checkpoint has {} tensors, configuration expects {}",
                params.len(),
                model.params.len()
            )));
        }
        model.params.copy_from(&params).map_err(|e| Error::Format(e.to_string()))?;
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Sets the target-class blend weight of the margin loss.
    pub fn set_margin_blend(&mut self, blend: f64) -> Result<()> {
        let margin = crate::nn::MarginConfig { blend, ..self.cfg.margin };
        margin.validate()?;
        self.cfg.margin = margin;
        Ok(())
    }

    pub fn n_classes(&self) -> usize {
        self.cfg.fusion.n_classes
    }

    pub fn tsb_embedding_dim(&self) -> usize {
        self.tsb.as_ref().map_or(0, |t| t.pool.output_dim())
    }

    pub fn tab_embedding_dim(&self) -> usize {
        self.tab.as_ref().map_or(0, |t| t.pool.output_dim())
    }

    /// Concatenates the enabled streams frame by frame.
    pub fn tsb_frames(&self, input: &TsbInput) -> Result<Tensor> {
        let f = self.cfg.features;
        let wanted = [
            (f.audio25, input.audio25, AUDIO25_DIM, "audio25"),
            (f.fbk250, input.fbk250, FBK250_DIM, "fbk250"),
            (f.glove, input.glove, GLOVE_DIM, "glove"),
        ];
        let mut parts: Vec<&Tensor> = Vec::new();
        for (on, stream, dim, name) in wanted {
            if !on {
                continue;
            }
            let t = stream.ok_or_else(|| Error::MissingData(format!("{name} stream not provided")))?;
            if t.cols() != dim {
                return Err(shape_err(format!("{name} stream has width {}, expected {dim}", t.cols())));
            }
            parts.push(t);
        }
        let frames = parts.first().map_or(0, |t| t.rows());
        if frames == 0 {
            return Err(invalid_input("utterance has no frames"));
        }
        if let Some(bad) = parts.iter().find(|t| t.rows() != frames) {
            return Err(shape_err(format!("streams disagree on frame count: {} vs {frames}", bad.rows())));
        }
        let width: usize = parts.iter().map(|t| t.cols()).sum();
        let mut data = Vec::with_capacity(frames * width);
        for r in 0..frames {
            for t in &parts {
                data.extend_from_slice(t.row(r));
            }
        }
        Tensor::from_vec(frames, width, data)
    }

    pub fn tsb_forward(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        input: &TsbInput,
        dropout: &mut Dropout,
    ) -> Result<BranchOutput> {
        let layers = self.tsb.as_ref().ok_or_else(|| Error::InvalidConfig("TSB is disabled".into()))?;
        let frames = self.tsb_frames(input)?;
        let mask = vec![true; frames.rows()];
        let x = g.input(frames);
        let h = layers.input.forward(g, store, x)?;
        let mut h = g.relu(h);
        for block in &layers.blocks {
            h = block.forward(g, store, h, dropout)?;
        }
        let pooled = layers.pool.forward(g, store, h, &mask)?;
        let embedding = dropout.apply(g, pooled.embedding)?;
        Ok(BranchOutput { embedding, attention: Some(pooled.attention), mask })
    }

    pub fn tab_forward(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        window: &ContextWindow,
        dropout: &mut Dropout,
    ) -> Result<BranchOutput> {
        let layers = self.tab.as_ref().ok_or_else(|| Error::InvalidConfig("TAB is disabled".into()))?;
        if window.len() != self.cfg.tab.span.len() {
            return Err(shape_err(format!(
                "context window of {} slots for span {}",
                window.len(),
                self.cfg.tab.span
            )));
        }
        if window.dim != self.cfg.tab.sentence_dim {
            return Err(shape_err(format!(
                "sentence vectors of width {}, expected {}",
                window.dim, self.cfg.tab.sentence_dim
            )));
        }
        if !window.any_present() {
            return Err(invalid_input("context window has no present utterance"));
        }
        let x = g.input(Tensor::from_vec(window.len(), window.dim, window.flat())?);
        let p = layers.proj.forward(g, store, x)?;
        let p = g.relu(p);
        let pooled = layers.pool.forward(g, store, p, &window.mask)?;
        let embedding = dropout.apply(g, pooled.embedding)?;
        Ok(BranchOutput { embedding, attention: Some(pooled.attention), mask: window.mask.clone() })
    }

    /// `ReLU(W [tsb; tab] + b)`, the input of the margin layer.
    pub fn fuse(&self, g: &mut Graph, store: &ParamStore, tsb: Option<NodeId>, tab: Option<NodeId>) -> Result<NodeId> {
        let x = match (tsb, tab) {
            (Some(a), Some(b)) => g.concat_cols(&[a, b])?,
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => return Err(Error::InvalidConfig("both branches are disabled".into())),
        };
        let h = self.fusion.forward(g, store, x)?;
        Ok(g.relu(h))
    }

    /// Runs both enabled branches. A context window with every slot masked
    /// (no transcript for the utterance or its neighbours) contributes a zero
    /// TAB embedding and no penalty.
    fn branches(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        input: &ModelInput,
        dropout: &mut Dropout,
    ) -> Result<(Option<BranchOutput>, Option<BranchOutput>)> {
        let tsb = match self.tsb {
            Some(_) => Some(self.tsb_forward(g, store, &input.tsb, dropout)?),
            None => None,
        };
        let tab = match self.tab {
            Some(_) => {
                let window = input.context.ok_or_else(|| Error::MissingData("context window not provided".into()))?;
                if window.any_present() {
                    Some(self.tab_forward(g, store, window, dropout)?)
                } else {
                    let zero = g.input(Tensor::zeros(1, self.tab_embedding_dim()));
                    Some(BranchOutput { embedding: zero, attention: None, mask: window.mask.clone() })
                }
            }
            None => None,
        };
        Ok((tsb, tab))
    }

    /// Fused hidden vector and the μ-weighted attention penalty.
    pub fn forward(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        input: &ModelInput,
        dropout: &mut Dropout,
    ) -> Result<(NodeId, Option<NodeId>)> {
        let (tsb, tab) = self.branches(g, store, input, dropout)?;
        let hidden = self.fuse(g, store, tsb.as_ref().map(|b| b.embedding), tab.as_ref().map(|b| b.embedding))?;
        let mut penalty: Option<NodeId> = None;
        for branch in [tsb, tab].into_iter().flatten() {
            if let Some(attn) = branch.attention {
                let p = g.attention_penalty(attn, &branch.mask, self.cfg.attention.spiky_heads)?;
                penalty = Some(match penalty {
                    Some(acc) => g.add(acc, p)?,
                    None => p,
                });
            }
        }
        let penalty = penalty.map(|p| g.scale(p, self.cfg.attention.penalty_weight));
        Ok((hidden, penalty))
    }

    /// Margin-softmax cross-entropy of one sample plus its attention penalty.
    pub fn sample_loss(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        input: &ModelInput,
        label: usize,
        dropout: &mut Dropout,
    ) -> Result<NodeId> {
        let (hidden, penalty) = self.forward(g, store, input, dropout)?;
        let w = g.param(store, self.classes);
        let ce = g.margin_loss(hidden, w, &[label], &self.cfg.margin)?;
        match penalty {
            Some(p) => g.add(ce, p),
            None => Ok(ce),
        }
    }

    /// Class scores `s · cos θ_j` without the margin, in evaluation mode.
    pub fn scores(&self, input: &ModelInput) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let (hidden, _) = self.forward(&mut g, &self.params, input, &mut Dropout::eval())?;
        let logits = cosine_logits(g.value(hidden), self.params.get(self.classes), &self.cfg.margin)?;
        Ok(logits.row(0).to_vec())
    }

    pub fn posteriors(&self, input: &ModelInput) -> Result<Vec<f64>> {
        Ok(softmax(&self.scores(input)?))
    }

    pub fn predict(&self, input: &ModelInput) -> Result<usize> {
        Ok(argmax(&self.scores(input)?))
    }

    /// Attention matrices (`T × n_heads`) of both branches in evaluation mode.
    pub fn attention_maps(&self, input: &ModelInput) -> Result<(Option<Tensor>, Option<Tensor>)> {
        let mut g = Graph::new();
        let (tsb, tab) = self.branches(&mut g, &self.params, input, &mut Dropout::eval())?;
        let grab = |b: Option<BranchOutput>| b.and_then(|b| b.attention).map(|a| g.value(a).clone());
        Ok((grab(tsb), grab(tab)))
    }

    /// Mean loss and mean gradients over `batch`. Samples run in parallel in
    /// fixed chunks whose results are summed in order, so the outcome does
    /// not depend on the thread count. `dropout(i)` supplies the dropout for
    /// the `i`-th sample.
    pub fn batch_loss(
        &self,
        batch: &[(ModelInput, usize)],
        dropout: &(dyn Fn(usize) -> Dropout + Sync),
    ) -> Result<BatchOutcome> {
        self.batch_loss_with(&self.params, batch, dropout)
    }

    pub fn batch_loss_with(
        &self,
        store: &ParamStore,
        batch: &[(ModelInput, usize)],
        dropout: &(dyn Fn(usize) -> Dropout + Sync),
    ) -> Result<BatchOutcome> {
        if batch.is_empty() {
            return Err(invalid_input("empty batch"));
        }
        let chunks: Vec<Result<(f64, Grads, usize)>> = batch
            .par_chunks(BATCH_CHUNK)
            .enumerate()
            .map(|(c, chunk)| {
                let mut grads = store.zeros_like();
                let mut loss = 0.0;
                let mut correct = 0;
                for (k, (input, label)) in chunk.iter().enumerate() {
                    let mut g = Graph::new();
                    let mut drop = dropout(c * BATCH_CHUNK + k);
                    let (hidden, penalty) = self.forward(&mut g, store, input, &mut drop)?;
                    let w = g.param(store, self.classes);
                    let ce = g.margin_loss(hidden, w, &[*label], &self.cfg.margin)?;
                    let total = match penalty {
                        Some(p) => g.add(ce, p)?,
                        None => ce,
                    };
                    let logits = cosine_logits(g.value(hidden), store.get(self.classes), &self.cfg.margin)?;
                    correct += (argmax(logits.row(0)) == *label) as usize;
                    loss += g.value(total).item();
                    for (p, grad) in g.backward(total)?.param_grads() {
                        grads.accumulate(p, grad);
                    }
                }
                Ok((loss, grads, correct))
            })
            .collect();
        let mut outcome = BatchOutcome { loss: 0.0, grads: store.zeros_like(), correct: 0 };
        for chunk in chunks {
            let (loss, grads, correct) = chunk?;
            outcome.loss += loss;
            outcome.grads.add(&grads);
            outcome.correct += correct;
        }
        let inv = 1.0 / batch.len() as f64;
        outcome.loss *= inv;
        outcome.grads.scale(inv);
        Ok(outcome)
    }
}
