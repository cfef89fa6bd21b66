//! Tape-based reverse-mode automatic differentiation over [`Tensor`]s.
//!
//! Every primitive appends a node holding its value. Nodes are stored in
//! creation order, which is already a topological order, so the backward
//! sweep is a single reverse pass over the node list.
//!
//! ```
//! use fraudlens::autodiff::{Tape, Tensor};
//!
//! let mut tape = Tape::new();
//! let x = tape.leaf(Tensor::row(&[1.0, 2.0]), true);
//! let sq = tape.mul(x, x);
//! let loss = tape.sum(sq);
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.get(x).unwrap().data(), &[2.0, 4.0]);
//! ```

use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AdError, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Whether stochastic primitives are active.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Grouping of rows into segments, used by segment mean and segment softmax.
#[derive(Clone, Debug)]
pub struct Segments {
    ids: Vec<usize>,
    counts: Vec<usize>,
}

impl Segments {
    pub fn new(ids: Vec<usize>, n_segments: usize) -> Self {
        let mut counts = vec![0; n_segments];
        for &s in &ids {
            assert!(s < n_segments, "contract violation: segment id {s} >= {n_segments}");
            counts[s] += 1;
        }
        Self { ids, counts }
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn n_segments(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }
}

enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    GatherRows(Var, Rc<[usize]>),
    MeanRows(Var),
    SegmentMean(Var, Rc<Segments>),
    SoftmaxRows(Var),
    SegmentSoftmax(Var, Rc<Segments>),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    Log(Var),
    Recip(Var),
    LayerNorm { x: Var, inv_std: Vec<f64> },
    Dropout(Var, Vec<f64>),
    CrossEntropy { logits: Var, probs: Tensor, labels: Vec<usize>, weights: Vec<f64> },
    Sum(Var),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::ConcatRows(_) => "concat_rows",
            Op::ConcatCols(_) => "concat_cols",
            Op::GatherRows(..) => "gather_rows",
            Op::MeanRows(_) => "mean_rows",
            Op::SegmentMean(..) => "segment_mean",
            Op::SoftmaxRows(_) => "softmax",
            Op::SegmentSoftmax(..) => "segment_softmax",
            Op::Relu(_) => "relu",
            Op::Tanh(_) => "tanh",
            Op::Sigmoid(_) => "sigmoid",
            Op::Log(_) => "log",
            Op::Recip(_) => "recip",
            Op::LayerNorm { .. } => "layer_norm",
            Op::Dropout(..) => "dropout",
            Op::CrossEntropy { .. } => "cross_entropy",
            Op::Sum(_) => "sum",
        }
    }
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of a `requires_grad` leaf; `None` for values that do not require gradients.
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, var: Var) -> Option<Tensor> {
        self.grads.get_mut(var.0).and_then(Option::take)
    }
}

const LAYER_NORM_EPS: f64 = 1e-5;

/// Records primitive applications for a single forward/backward pass.
pub struct Tape {
    nodes: Vec<Node>,
    rng: ChaCha8Rng,
    overflow: Option<&'static str>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::seeded(0)
    }

    /// A tape whose dropout masks are drawn from a stream seeded with `seed`.
    pub fn seeded(seed: u64) -> Self {
        Self {
            nodes: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            overflow: None,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// First primitive that produced a non-finite value, if any.
    pub fn check_finite(&self) -> Result<(), AdError> {
        match self.overflow {
            Some(primitive) => Err(AdError::NonFinite { primitive }),
            None => Ok(()),
        }
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        if !value.is_finite() && self.overflow.is_none() {
            self.overflow = Some("leaf");
        }
        self.nodes.push(Node { value, op: Op::Leaf, requires_grad });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    fn push(&mut self, value: Tensor, op: Op, parents: &[Var]) -> Var {
        if self.overflow.is_none() && !value.is_finite() {
            self.overflow = Some(op.name());
        }
        let requires_grad = parents.iter().any(|p| self.nodes[p.0].requires_grad);
        // Ops without a differentiable input only need their value.
        let op = if requires_grad { op } else { Op::Leaf };
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).matmul(self.value(b));
        self.push(value, Op::MatMul(a, b), &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = broadcast_zip(self.value(a), self.value(b), "add", |x, y| x + y);
        self.push(value, Op::Add(a, b), &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = broadcast_zip(self.value(a), self.value(b), "sub", |x, y| x - y);
        self.push(value, Op::Sub(a, b), &[a, b])
    }

    /// Elementwise product. `b` may broadcast as a row, a column or a scalar.
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = broadcast_zip(self.value(a), self.value(b), "mul", |x, y| x * y);
        self.push(value, Op::Mul(a, b), &[a, b])
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.value(a).map(|x| x * factor);
        self.push(value, Op::Scale(a, factor), &[a])
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "contract violation: concat of nothing");
        let cols = self.value(parts[0]).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let t = self.value(p);
            assert_eq!(t.cols(), cols, "contract violation: concat_rows column mismatch");
            data.extend_from_slice(t.data());
            rows += t.rows();
        }
        self.push(Tensor::new(rows, cols, data), Op::ConcatRows(parts.to_vec()), parts)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "contract violation: concat of nothing");
        let rows = self.value(parts[0]).rows();
        let total: usize = parts
            .iter()
            .map(|&p| {
                let t = self.value(p);
                assert_eq!(t.rows(), rows, "contract violation: concat_cols row mismatch");
                t.cols()
            })
            .sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row_slice(r));
            }
        }
        self.push(Tensor::new(rows, total, data), Op::ConcatCols(parts.to_vec()), parts)
    }

    /// Row selection `out[i] = a[index[i]]`; indices may repeat.
    pub fn gather_rows(&mut self, a: Var, index: Rc<[usize]>) -> Var {
        let src = self.value(a);
        let cols = src.cols();
        let mut data = Vec::with_capacity(index.len() * cols);
        for &i in index.iter() {
            assert!(i < src.rows(), "contract violation: gather index {i} out of {}", src.rows());
            data.extend_from_slice(src.row_slice(i));
        }
        let value = Tensor::new(index.len(), cols, data);
        self.push(value, Op::GatherRows(a, index), &[a])
    }

    /// Column means, producing a single row.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let t = self.value(a);
        assert!(t.rows() > 0, "contract violation: mean of zero rows");
        let mut out = vec![0.0; t.cols()];
        for r in 0..t.rows() {
            for (o, v) in out.iter_mut().zip(t.row_slice(r)) {
                *o += v;
            }
        }
        let n = t.rows() as f64;
        out.iter_mut().for_each(|o| *o /= n);
        self.push(Tensor::row(&out), Op::MeanRows(a), &[a])
    }

    /// Per-segment row means; empty segments yield zero rows.
    pub fn segment_mean(&mut self, a: Var, segments: Rc<Segments>) -> Var {
        let t = self.value(a);
        assert_eq!(t.rows(), segments.ids().len(), "contract violation: segment_mean rows");
        let cols = t.cols();
        let mut out = vec![0.0; segments.n_segments() * cols];
        for (r, &s) in segments.ids().iter().enumerate() {
            let o = &mut out[s * cols..(s + 1) * cols];
            for (o, v) in o.iter_mut().zip(t.row_slice(r)) {
                *o += v;
            }
        }
        for (s, &c) in segments.counts().iter().enumerate() {
            if c > 0 {
                let inv = 1.0 / c as f64;
                out[s * cols..(s + 1) * cols].iter_mut().for_each(|o| *o *= inv);
            }
        }
        let value = Tensor::new(segments.n_segments(), cols, out);
        self.push(value, Op::SegmentMean(a, segments), &[a])
    }

    /// Softmax across the columns of each row.
    pub fn softmax(&mut self, a: Var) -> Var {
        let value = softmax_rows(self.value(a));
        self.push(value, Op::SoftmaxRows(a), &[a])
    }

    /// Softmax down each column, independently within every segment of rows.
    pub fn segment_softmax(&mut self, a: Var, segments: Rc<Segments>) -> Var {
        let t = self.value(a);
        assert_eq!(t.rows(), segments.ids().len(), "contract violation: segment_softmax rows");
        let cols = t.cols();
        let n_seg = segments.n_segments();
        let mut max = vec![f64::NEG_INFINITY; n_seg * cols];
        for (r, &s) in segments.ids().iter().enumerate() {
            for (c, &v) in t.row_slice(r).iter().enumerate() {
                let m = &mut max[s * cols + c];
                if v > *m {
                    *m = v;
                }
            }
        }
        let mut out = vec![0.0; t.len()];
        let mut denom = vec![0.0; n_seg * cols];
        for (r, &s) in segments.ids().iter().enumerate() {
            for (c, &v) in t.row_slice(r).iter().enumerate() {
                let e = (v - max[s * cols + c]).exp();
                out[r * cols + c] = e;
                denom[s * cols + c] += e;
            }
        }
        for (r, &s) in segments.ids().iter().enumerate() {
            for c in 0..cols {
                out[r * cols + c] /= denom[s * cols + c];
            }
        }
        let value = Tensor::new(t.rows(), cols, out);
        self.push(value, Op::SegmentSoftmax(a, segments), &[a])
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.max(0.0));
        self.push(value, Op::Relu(a), &[a])
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::tanh);
        self.push(value, Op::Tanh(a), &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(sigmoid);
        self.push(value, Op::Sigmoid(a), &[a])
    }

    pub fn log(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::ln);
        self.push(value, Op::Log(a), &[a])
    }

    /// Elementwise `1 / a`.
    pub fn recip(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| 1.0 / x);
        self.push(value, Op::Recip(a), &[a])
    }

    /// Normalizes each row to zero mean and unit variance (no affine part).
    pub fn layer_norm(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let cols = t.cols();
        let mut out = vec![0.0; t.len()];
        let mut inv_std = Vec::with_capacity(t.rows());
        for r in 0..t.rows() {
            let row = t.row_slice(r);
            let mean = row.iter().sum::<f64>() / cols as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
            let is = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            for (o, v) in out[r * cols..(r + 1) * cols].iter_mut().zip(row) {
                *o = (v - mean) * is;
            }
            inv_std.push(is);
        }
        let value = Tensor::new(t.rows(), cols, out);
        self.push(value, Op::LayerNorm { x: a, inv_std }, &[a])
    }

    /// Inverted dropout: survivors are scaled by `1 / (1 - rate)`; identity in eval mode.
    pub fn dropout(&mut self, a: Var, rate: f64, mode: Mode) -> Var {
        assert!((0.0..1.0).contains(&rate), "contract violation: dropout rate {rate}");
        if mode == Mode::Eval || rate == 0.0 {
            return a;
        }
        let keep = 1.0 / (1.0 - rate);
        let n = self.value(a).len();
        let mask: Vec<f64> =
            (0..n).map(|_| if self.rng.gen::<f64>() < rate { 0.0 } else { keep }).collect();
        let t = self.value(a);
        let data = t.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let value = Tensor::new(t.rows(), t.cols(), data);
        self.push(value, Op::Dropout(a, mask), &[a])
    }

    /// Weighted mean of per-row `-ln softmax(logits)[label]`.
    ///
    /// `weights` defaults to all ones; the result is divided by the total weight.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize], weights: Option<&[f64]>) -> Var {
        let t = self.value(logits);
        assert_eq!(t.rows(), labels.len(), "contract violation: cross_entropy labels");
        let weights = match weights {
            Some(w) => {
                assert_eq!(w.len(), labels.len(), "contract violation: cross_entropy weights");
                w.to_vec()
            }
            None => vec![1.0; labels.len()],
        };
        let probs = softmax_rows(t);
        let total: f64 = weights.iter().sum();
        let mut loss = 0.0;
        for (r, (&y, &w)) in labels.iter().zip(&weights).enumerate() {
            assert!(y < t.cols(), "contract violation: label {y} >= {} classes", t.cols());
            let row = t.row_slice(r);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            loss += w * (lse - row[y]);
        }
        let value = Tensor::scalar(loss / total);
        let op = Op::CrossEntropy { logits, probs, labels: labels.to_vec(), weights };
        self.push(value, op, &[logits])
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).sum());
        self.push(value, Op::Sum(a), &[a])
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients, AdError> {
        self.check_finite()?;
        let root = &self.nodes[loss.0];
        if root.value.shape() != (1, 1) {
            return Err(AdError::NotScalar { shape: root.value.shape() });
        }
        if !root.requires_grad {
            return Err(AdError::Detached);
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for id in (0..=loss.0).rev() {
            let node = &self.nodes[id];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            self.propagate(node, &g, &mut grads);
        }

        for (id, node) in self.nodes.iter().enumerate() {
            let is_param = node.requires_grad && matches!(node.op, Op::Leaf);
            if !is_param {
                grads[id] = None;
            } else if grads[id].is_none() {
                let (r, c) = node.value.shape();
                grads[id] = Some(Tensor::zeros(r, c));
            }
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let mut acc = |v: Var, delta: Tensor| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&delta),
                slot @ None => *slot = Some(delta),
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let av = self.value(*a);
                let bv = self.value(*b);
                if self.requires_grad(*a) {
                    acc(*a, g.matmul_t(bv));
                }
                if self.requires_grad(*b) {
                    acc(*b, av.t_matmul(g));
                }
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, reduce_to(g, self.value(*b).shape()));
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, reduce_to(g, self.value(*b).shape()).map(|x| -x));
            }
            Op::Mul(a, b) => {
                let av = self.value(*a);
                let bv = self.value(*b);
                if self.requires_grad(*a) {
                    acc(*a, broadcast_zip(g, bv, "mul", |x, y| x * y));
                }
                if self.requires_grad(*b) {
                    let ga = broadcast_zip(g, av, "mul", |x, y| x * y);
                    acc(*b, reduce_to(&ga, bv.shape()));
                }
            }
            Op::Scale(a, f) => acc(*a, g.map(|x| x * f)),
            Op::ConcatRows(parts) => {
                let cols = g.cols();
                let mut offset = 0;
                for &p in parts {
                    let rows = self.value(p).rows();
                    let slice = g.data()[offset * cols..(offset + rows) * cols].to_vec();
                    acc(p, Tensor::new(rows, cols, slice));
                    offset += rows;
                }
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let (rows, cols) = self.value(p).shape();
                    let mut data = Vec::with_capacity(rows * cols);
                    for r in 0..rows {
                        data.extend_from_slice(&g.row_slice(r)[offset..offset + cols]);
                    }
                    acc(p, Tensor::new(rows, cols, data));
                    offset += cols;
                }
            }
            Op::GatherRows(a, index) => {
                let (rows, cols) = self.value(*a).shape();
                let mut out = Tensor::zeros(rows, cols);
                let d = out.data_mut();
                for (i, &src) in index.iter().enumerate() {
                    for (o, v) in d[src * cols..(src + 1) * cols].iter_mut().zip(g.row_slice(i)) {
                        *o += v;
                    }
                }
                acc(*a, out);
            }
            Op::MeanRows(a) => {
                let (rows, cols) = self.value(*a).shape();
                let inv = 1.0 / rows as f64;
                let mut data = Vec::with_capacity(rows * cols);
                for _ in 0..rows {
                    data.extend(g.data().iter().map(|v| v * inv));
                }
                acc(*a, Tensor::new(rows, cols, data));
            }
            Op::SegmentMean(a, seg) => {
                let (rows, cols) = self.value(*a).shape();
                let mut data = Vec::with_capacity(rows * cols);
                for &s in seg.ids() {
                    let inv = 1.0 / seg.counts()[s] as f64;
                    data.extend(g.row_slice(s).iter().map(|v| v * inv));
                }
                acc(*a, Tensor::new(rows, cols, data));
            }
            Op::SoftmaxRows(a) => {
                let y = &node.value;
                let cols = y.cols();
                let mut data = vec![0.0; y.len()];
                for r in 0..y.rows() {
                    let yr = y.row_slice(r);
                    let gr = g.row_slice(r);
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for c in 0..cols {
                        data[r * cols + c] = yr[c] * (gr[c] - dot);
                    }
                }
                acc(*a, Tensor::new(y.rows(), cols, data));
            }
            Op::SegmentSoftmax(a, seg) => {
                let y = &node.value;
                let cols = y.cols();
                let mut dot = vec![0.0; seg.n_segments() * cols];
                for (r, &s) in seg.ids().iter().enumerate() {
                    for c in 0..cols {
                        dot[s * cols + c] += y.get(r, c) * g.get(r, c);
                    }
                }
                let mut data = vec![0.0; y.len()];
                for (r, &s) in seg.ids().iter().enumerate() {
                    for c in 0..cols {
                        data[r * cols + c] = y.get(r, c) * (g.get(r, c) - dot[s * cols + c]);
                    }
                }
                acc(*a, Tensor::new(y.rows(), cols, data));
            }
            Op::Relu(a) => {
                let x = self.value(*a);
                let data = x.data().iter().zip(g.data()).map(|(&x, &g)| if x > 0.0 { g } else { 0.0 });
                acc(*a, Tensor::new(x.rows(), x.cols(), data.collect()));
            }
            Op::Tanh(a) => {
                let y = &node.value;
                let data = y.data().iter().zip(g.data()).map(|(y, g)| g * (1.0 - y * y));
                acc(*a, Tensor::new(y.rows(), y.cols(), data.collect()));
            }
            Op::Sigmoid(a) => {
                let y = &node.value;
                let data = y.data().iter().zip(g.data()).map(|(y, g)| g * y * (1.0 - y));
                acc(*a, Tensor::new(y.rows(), y.cols(), data.collect()));
            }
            Op::Log(a) => {
                let x = self.value(*a);
                let data = x.data().iter().zip(g.data()).map(|(x, g)| g / x);
                acc(*a, Tensor::new(x.rows(), x.cols(), data.collect()));
            }
            Op::Recip(a) => {
                let y = &node.value;
                let data = y.data().iter().zip(g.data()).map(|(y, g)| -g * y * y);
                acc(*a, Tensor::new(y.rows(), y.cols(), data.collect()));
            }
            Op::LayerNorm { x, inv_std } => {
                let y = &node.value;
                let cols = y.cols();
                let n = cols as f64;
                let mut data = vec![0.0; y.len()];
                for r in 0..y.rows() {
                    let yr = y.row_slice(r);
                    let gr = g.row_slice(r);
                    let mean_g = gr.iter().sum::<f64>() / n;
                    let mean_gy = gr.iter().zip(yr).map(|(a, b)| a * b).sum::<f64>() / n;
                    for c in 0..cols {
                        data[r * cols + c] = inv_std[r] * (gr[c] - mean_g - yr[c] * mean_gy);
                    }
                }
                acc(*x, Tensor::new(y.rows(), cols, data));
            }
            Op::Dropout(a, mask) => {
                let data = g.data().iter().zip(mask).map(|(g, m)| g * m).collect();
                acc(*a, Tensor::new(g.rows(), g.cols(), data));
            }
            Op::CrossEntropy { logits, probs, labels, weights } => {
                let scale = g.item() / weights.iter().sum::<f64>();
                let mut out = probs.clone();
                for (r, (&y, &w)) in labels.iter().zip(weights).enumerate() {
                    let cols = out.cols();
                    let row = &mut out.data_mut()[r * cols..(r + 1) * cols];
                    row[y] -= 1.0;
                    row.iter_mut().for_each(|v| *v *= w * scale);
                }
                acc(*logits, out);
            }
            Op::Sum(a) => {
                let (rows, cols) = self.value(*a).shape();
                acc(*a, Tensor::filled(rows, cols, g.item()));
            }
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(t: &Tensor) -> Tensor {
    let cols = t.cols();
    let mut out = vec![0.0; t.len()];
    for r in 0..t.rows() {
        let row = t.row_slice(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let o = &mut out[r * cols..(r + 1) * cols];
        let mut denom = 0.0;
        for (o, v) in o.iter_mut().zip(row) {
            *o = (v - max).exp();
            denom += *o;
        }
        o.iter_mut().for_each(|v| *v /= denom);
    }
    Tensor::new(t.rows(), cols, out)
}

fn broadcast_zip(a: &Tensor, b: &Tensor, op: &str, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let (rows, cols) = a.shape();
    let mut data = Vec::with_capacity(rows * cols);
    match b.shape() {
        s if s == (rows, cols) => data.extend(a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y))),
        (1, c) if c == cols => {
            for r in 0..rows {
                data.extend(a.row_slice(r).iter().zip(b.data()).map(|(&x, &y)| f(x, y)));
            }
        }
        (r, 1) if r == rows => {
            for r in 0..rows {
                let y = b.data()[r];
                data.extend(a.row_slice(r).iter().map(|&x| f(x, y)));
            }
        }
        (1, 1) => {
            let y = b.data()[0];
            data.extend(a.data().iter().map(|&x| f(x, y)));
        }
        other => panic!("contract violation: {op} {:?} with {:?}", a.shape(), other),
    }
    Tensor::new(rows, cols, data)
}

/// Sums a full-shape gradient down to a broadcast operand's shape.
fn reduce_to(g: &Tensor, shape: (usize, usize)) -> Tensor {
    if g.shape() == shape {
        return g.clone();
    }
    let (rows, cols) = g.shape();
    match shape {
        (1, c) if c == cols => {
            let mut out = vec![0.0; cols];
            for r in 0..rows {
                for (o, v) in out.iter_mut().zip(g.row_slice(r)) {
                    *o += v;
                }
            }
            Tensor::row(&out)
        }
        (r, 1) if r == rows => {
            Tensor::column(&(0..rows).map(|r| g.row_slice(r).iter().sum()).collect::<Vec<_>>())
        }
        (1, 1) => Tensor::scalar(g.sum()),
        other => panic!("contract violation: cannot reduce {:?} to {:?}", g.shape(), other),
    }
}
