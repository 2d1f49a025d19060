use super::loss::{margin_loss_with_grads, MarginConfig};
use super::tensor::{matmul, matmul_nt, matmul_tn};
use super::{ParamId, ParamStore, Tensor};
use crate::error::{invalid_input, shape_err, Result};
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    MatMulTn(NodeId, NodeId),
    AddBias(NodeId, NodeId),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Relu(NodeId),
    Tanh(NodeId),
    ConcatCols(Vec<NodeId>),
    Splice { input: NodeId, offsets: Vec<isize> },
    Dropout { input: NodeId, mask: Vec<f64> },
    MaskedSoftmaxCols { input: NodeId, mask: Vec<bool> },
    Flatten(NodeId),
    Sum(NodeId),
    Detach,
    /// Scalar op whose local gradient was computed during the forward pass.
    Fused { inputs: Vec<(NodeId, Tensor)> },
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Tensor,
}

/// Reverse-mode tape. Nodes are appended in evaluation order, so a single
/// reverse sweep in [`Graph::backward`] visits every consumer before its
/// inputs.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    params: HashMap<ParamId, NodeId>,
}

/// Gradients of a scalar with respect to every node of a graph.
#[derive(Debug)]
pub struct Backward {
    grads: Vec<Option<Tensor>>,
    params: Vec<(ParamId, NodeId)>,
}

impl Backward {
    /// Gradient of the loss w.r.t. `node`, or `None` if it does not
    /// influence the loss.
    pub fn grad(&self, node: NodeId) -> Option<&Tensor> {
        self.grads[node.0].as_ref()
    }

    /// Gradients of every parameter used in the graph.
    pub fn param_grads(&self) -> impl Iterator<Item = (ParamId, &Tensor)> {
        self.params
            .iter()
            .filter_map(|(p, n)| self.grads[n.0].as_ref().map(|g| (*p, g)))
    }
}

fn same_shape(a: &Tensor, b: &Tensor, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(shape_err(format!("{what}: {:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, n: NodeId) -> &Tensor {
        &self.nodes[n.0].value
    }

    pub fn input(&mut self, t: Tensor) -> NodeId {
        self.push(Op::Leaf, t)
    }

    /// Leaf holding a parameter. Repeated requests share one node, so the
    /// parameter's gradient accumulates over every use.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> NodeId {
        if let Some(n) = self.params.get(&id) {
            return *n;
        }
        let n = self.push(Op::Leaf, store.get(id).clone());
        self.params.insert(id, n);
        n
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = matmul(self.value(a), self.value(b))?;
        Ok(self.push(Op::MatMul(a, b), v))
    }

    /// `aᵀ b`.
    pub fn matmul_tn(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = matmul_tn(self.value(a), self.value(b))?;
        Ok(self.push(Op::MatMulTn(a, b), v))
    }

    /// Adds the `1 × m` row `b` to every row of `x`.
    pub fn add_bias(&mut self, x: NodeId, b: NodeId) -> Result<NodeId> {
        let (xv, bv) = (self.value(x), self.value(b));
        if bv.rows() != 1 || bv.cols() != xv.cols() {
            return Err(shape_err(format!("bias {:?} for input {:?}", bv.shape(), xv.shape())));
        }
        let mut v = xv.clone();
        let m = v.cols();
        for row in v.data_mut().chunks_exact_mut(m) {
            for (o, b) in row.iter_mut().zip(bv.data()) {
                *o += b;
            }
        }
        Ok(self.push(Op::AddBias(x, b), v))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        same_shape(self.value(a), self.value(b), "add")?;
        let mut v = self.value(a).clone();
        v.add_assign(self.value(b));
        Ok(self.push(Op::Add(a, b), v))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        same_shape(self.value(a), self.value(b), "mul")?;
        let mut v = self.value(a).clone();
        for (o, y) in v.data_mut().iter_mut().zip(self.value(b).data()) {
            *o *= y;
        }
        Ok(self.push(Op::Mul(a, b), v))
    }

    pub fn scale(&mut self, a: NodeId, s: f64) -> NodeId {
        let mut v = self.value(a).clone();
        v.scale_in_place(s);
        self.push(Op::Scale(a, s), v)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let mut v = self.value(a).clone();
        v.data_mut().iter_mut().for_each(|x| *x = x.max(0.0));
        self.push(Op::Relu(a), v)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let mut v = self.value(a).clone();
        v.data_mut().iter_mut().for_each(|x| *x = x.tanh());
        self.push(Op::Tanh(a), v)
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let rows = parts
            .first()
            .map(|p| self.value(*p).rows())
            .ok_or_else(|| invalid_input("nothing to concatenate"))?;
        if parts.iter().any(|p| self.value(*p).rows() != rows) {
            return Err(shape_err("concat_cols: row counts differ"));
        }
        let cols: usize = parts.iter().map(|p| self.value(*p).cols()).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for p in parts {
                data.extend_from_slice(self.value(*p).row(r));
            }
        }
        let v = Tensor::from_vec(rows, cols, data)?;
        Ok(self.push(Op::ConcatCols(parts.to_vec()), v))
    }

    /// Stacks time-shifted copies of `x (T × d)` side by side, giving
    /// `T × (d · offsets.len())`. Shifts past either end replicate the edge
    /// frame.
    pub fn splice(&mut self, x: NodeId, offsets: &[isize]) -> Result<NodeId> {
        if offsets.is_empty() {
            return Err(invalid_input("splice needs at least one offset"));
        }
        let xv = self.value(x);
        let (t_len, d) = (xv.rows(), xv.cols());
        if t_len == 0 {
            return Err(invalid_input("splice over zero frames"));
        }
        let width = d * offsets.len();
        let mut data = Vec::with_capacity(t_len * width);
        for t in 0..t_len as isize {
            for o in offsets {
                let src = (t + o).clamp(0, t_len as isize - 1) as usize;
                data.extend_from_slice(xv.row(src));
            }
        }
        let v = Tensor::from_vec(t_len, width, data)?;
        Ok(self.push(Op::Splice { input: x, offsets: offsets.to_vec() }, v))
    }

    /// Multiplies by a fixed mask (already scaled for inverted dropout).
    pub fn dropout(&mut self, x: NodeId, mask: Vec<f64>) -> Result<NodeId> {
        if mask.len() != self.value(x).len() {
            return Err(shape_err("dropout mask size"));
        }
        let mut v = self.value(x).clone();
        for (o, m) in v.data_mut().iter_mut().zip(&mask) {
            *o *= m;
        }
        Ok(self.push(Op::Dropout { input: x, mask }, v))
    }

    /// Softmax down each column of `x (T × H)` over the rows where `mask`
    /// is set. Masked rows come out as exact zeros.
    pub fn masked_softmax_cols(&mut self, x: NodeId, mask: &[bool]) -> Result<NodeId> {
        let xv = self.value(x);
        let (t_len, h) = (xv.rows(), xv.cols());
        if mask.len() != t_len {
            return Err(shape_err(format!("mask of {} for {t_len} rows", mask.len())));
        }
        if !mask.iter().any(|m| *m) {
            return Err(invalid_input("softmax over an all-masked column"));
        }
        let mut v = Tensor::zeros(t_len, h);
        for c in 0..h {
            let max = (0..t_len)
                .filter(|&t| mask[t])
                .map(|t| xv.get(t, c))
                .fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for t in (0..t_len).filter(|&t| mask[t]) {
                let e = (xv.get(t, c) - max).exp();
                v.set(t, c, e);
                z += e;
            }
            for t in (0..t_len).filter(|&t| mask[t]) {
                v.set(t, c, v.get(t, c) / z);
            }
        }
        Ok(self.push(Op::MaskedSoftmaxCols { input: x, mask: mask.to_vec() }, v))
    }

    /// Row-major flattening into `1 × (rows · cols)`.
    pub fn flatten(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).clone();
        let n = v.len();
        let v = v.reshape(1, n).expect("same element count");
        self.push(Op::Flatten(x), v)
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let s = self.value(x).data().iter().sum();
        self.push(Op::Sum(x), Tensor::scalar(s))
    }

    /// Identity in the forward pass; blocks gradients.
    pub fn detach(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).clone();
        self.push(Op::Detach, v)
    }

    /// Unweighted spiky/smooth attention penalty of `attn (T × H)`; see
    /// [`super::attention_penalty`].
    pub fn attention_penalty(&mut self, attn: NodeId, mask: &[bool], spiky_heads: usize) -> Result<NodeId> {
        let a = self.value(attn);
        let (value, grad) = super::layers::penalty_with_grad(a, mask, spiky_heads)?;
        Ok(self.push(Op::Fused { inputs: vec![(attn, grad)] }, Tensor::scalar(value)))
    }

    /// Mean large-margin softmax loss of the rows of `x (B × d)` against
    /// class weights `w (K × d)`.
    pub fn margin_loss(&mut self, x: NodeId, w: NodeId, labels: &[usize], cfg: &MarginConfig) -> Result<NodeId> {
        let (loss, gx, gw) = margin_loss_with_grads(self.value(x), self.value(w), labels, cfg)?;
        Ok(self.push(Op::Fused { inputs: vec![(x, gx), (w, gw)] }, Tensor::scalar(loss)))
    }

    /// Back-propagates from the scalar node `loss`.
    pub fn backward(&self, loss: NodeId) -> Result<Backward> {
        if self.value(loss).len() != 1 {
            return Err(shape_err("backward needs a scalar output"));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));

        fn acc(grads: &mut [Option<Tensor>], n: NodeId, g: Tensor) {
            match &mut grads[n.0] {
                Some(existing) => existing.add_assign(&g),
                slot @ None => *slot = Some(g),
            }
        }

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf | Op::Detach => {}
                Op::MatMul(a, b) => {
                    acc(&mut grads, *a, matmul_nt(&g, self.value(*b))?);
                    acc(&mut grads, *b, matmul_tn(self.value(*a), &g)?);
                }
                Op::MatMulTn(a, b) => {
                    acc(&mut grads, *a, matmul_nt(self.value(*b), &g)?);
                    acc(&mut grads, *b, matmul(self.value(*a), &g)?);
                }
                Op::AddBias(x, b) => {
                    let m = g.cols();
                    let mut gb = Tensor::zeros(1, m);
                    for row in g.data().chunks_exact(m) {
                        for (o, v) in gb.data_mut().iter_mut().zip(row) {
                            *o += v;
                        }
                    }
                    acc(&mut grads, *b, gb);
                    acc(&mut grads, *x, g.clone());
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g.clone());
                }
                Op::Mul(a, b) => {
                    let mut ga = g.clone();
                    for (o, y) in ga.data_mut().iter_mut().zip(self.value(*b).data()) {
                        *o *= y;
                    }
                    let mut gb = g.clone();
                    for (o, y) in gb.data_mut().iter_mut().zip(self.value(*a).data()) {
                        *o *= y;
                    }
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Scale(a, s) => {
                    let mut ga = g.clone();
                    ga.scale_in_place(*s);
                    acc(&mut grads, *a, ga);
                }
                Op::Relu(a) => {
                    let mut ga = g.clone();
                    for (o, y) in ga.data_mut().iter_mut().zip(node.value.data()) {
                        if *y <= 0.0 {
                            *o = 0.0;
                        }
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::Tanh(a) => {
                    let mut ga = g.clone();
                    for (o, y) in ga.data_mut().iter_mut().zip(node.value.data()) {
                        *o *= 1.0 - y * y;
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::ConcatCols(parts) => {
                    let rows = g.rows();
                    let mut offset = 0;
                    for p in parts {
                        let w = self.value(*p).cols();
                        let mut gp = Vec::with_capacity(rows * w);
                        for r in 0..rows {
                            gp.extend_from_slice(&g.row(r)[offset..offset + w]);
                        }
                        acc(&mut grads, *p, Tensor::from_vec(rows, w, gp)?);
                        offset += w;
                    }
                }
                Op::Splice { input, offsets } => {
                    let xv = self.value(*input);
                    let (t_len, d) = (xv.rows(), xv.cols());
                    let mut gx = Tensor::zeros(t_len, d);
                    for t in 0..t_len as isize {
                        let grow = g.row(t as usize);
                        for (j, o) in offsets.iter().enumerate() {
                            let src = (t + o).clamp(0, t_len as isize - 1) as usize;
                            let dst = &mut gx.data_mut()[src * d..(src + 1) * d];
                            for (a, b) in dst.iter_mut().zip(&grow[j * d..(j + 1) * d]) {
                                *a += b;
                            }
                        }
                    }
                    acc(&mut grads, *input, gx);
                }
                Op::Dropout { input, mask } => {
                    let mut gx = g.clone();
                    for (o, m) in gx.data_mut().iter_mut().zip(mask) {
                        *o *= m;
                    }
                    acc(&mut grads, *input, gx);
                }
                Op::MaskedSoftmaxCols { input, mask } => {
                    let a = &node.value;
                    let (t_len, h) = (a.rows(), a.cols());
                    let mut gx = Tensor::zeros(t_len, h);
                    for c in 0..h {
                        let dot: f64 = (0..t_len).map(|t| a.get(t, c) * g.get(t, c)).sum();
                        for t in (0..t_len).filter(|&t| mask[t]) {
                            gx.set(t, c, a.get(t, c) * (g.get(t, c) - dot));
                        }
                    }
                    acc(&mut grads, *input, gx);
                }
                Op::Flatten(x) => {
                    let [r, c] = self.value(*x).shape();
                    acc(&mut grads, *x, g.clone().reshape(r, c)?);
                }
                Op::Sum(x) => {
                    let [r, c] = self.value(*x).shape();
                    acc(&mut grads, *x, Tensor::full(r, c, g.item()));
                }
                Op::Fused { inputs } => {
                    let s = g.item();
                    for (n, local) in inputs {
                        let mut gi = local.clone();
                        gi.scale_in_place(s);
                        acc(&mut grads, *n, gi);
                    }
                }
            }
            grads[i] = Some(g);
        }
        let params = self.params.iter().map(|(p, n)| (*p, *n)).collect();
        Ok(Backward { grads, params })
    }
}
