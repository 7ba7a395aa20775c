//! Reverse-mode differentiation over a linear tape of 2-D tensor operations.
//!
//! Every operation appends a node; [`Tape::backward`] walks the tape in
//! reverse and accumulates adjoints. Sparse operators, index lists and
//! dropout masks enter as constants.

use std::sync::Arc;

use flexdiff_core::{CsrMatrix, Graph};

use crate::tensor::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Constant sparse left operand with its transpose cached for the backward pass.
#[derive(Debug, Clone)]
pub struct SparseOp {
    pub matrix: CsrMatrix<f64>,
    transpose: CsrMatrix<f64>,
}

impl SparseOp {
    pub fn new(matrix: CsrMatrix<f64>) -> Self {
        let transpose = matrix.transpose();
        SparseOp { matrix, transpose }
    }
}

fn spmm(a: &CsrMatrix<f64>, x: &Tensor) -> Tensor {
    assert_eq!(a.n_cols(), x.rows(), "sparse operator does not match rows");
    let mut out = Tensor::zeros(a.n_rows(), x.cols());
    for i in 0..a.n_rows() {
        for (j, v) in a.row(i) {
            let src = x.row(j).to_vec();
            for (o, s) in out.row_mut(i).iter_mut().zip(src) {
                *o += v * s;
            }
        }
    }
    out
}

/// Directed node pairs `(i, j)` grouped by `i`: the attention neighborhoods.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pairs {
    offsets: Vec<usize>,
    owners: Vec<usize>,
    targets: Vec<usize>,
}

impl Pairs {
    /// `j in N(i)`, plus `j = i` when `self_pairs` is set; targets ascending.
    pub fn from_graph(g: &Graph, self_pairs: bool) -> Self {
        let n = g.node_count();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut owners = Vec::new();
        let mut targets = Vec::new();
        offsets.push(0);
        for i in 0..n {
            let nb = g.neighbors(i);
            let split = nb.partition_point(|&j| j < i);
            let mut row: Vec<usize> = nb[..split].to_vec();
            if self_pairs {
                row.push(i);
            }
            row.extend_from_slice(&nb[split..]);
            owners.extend(std::iter::repeat_n(i, row.len()));
            targets.extend(row);
            offsets.push(targets.len());
        }
        Pairs {
            offsets,
            owners,
            targets,
        }
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn owners(&self) -> &[usize] {
        &self.owners
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn segment(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }
}

enum Op {
    Leaf,
    MatMul(Var, Var),
    SpMM(Arc<SparseOp>, Var),
    Add(Var, Var),
    Relu(Var),
    LeakyRelu(Var, f64),
    /// Elementwise product with a constant (dropout mask with rescaling).
    Mask(Var, Arc<Tensor>),
    ConcatCols(Vec<Var>),
    GatherRows(Var, Arc<Vec<usize>>),
    EdgeSoftmax(Var, Arc<Pairs>),
    EdgeAggregate(Var, Var, Arc<Pairs>),
    SoftmaxRows(Var),
    CrossEntropy(Var, Arc<Vec<usize>>, Arc<Vec<usize>>),
    Sum(Var),
}

struct Node {
    value: Tensor,
    op: Op,
}

pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints of every node, indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }

    /// Adjoint of `v`, zero-filled if it does not influence the output.
    pub fn take(&mut self, v: Var, shape: (usize, usize)) -> Tensor {
        self.grads[v.0].take().unwrap_or_else(|| Tensor::zeros(shape.0, shape.1))
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn spmm(&mut self, s: Arc<SparseOp>, x: Var) -> Var {
        let v = spmm(&s.matrix, self.value(x));
        self.push(v, Op::SpMM(s, x))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut v = self.value(a).clone();
        v.add_assign(self.value(b));
        self.push(v, Op::Add(a, b))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let v = self.value(x).map(|t| t.max(0.0));
        self.push(v, Op::Relu(x))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let v = self.value(x).map(|t| if t > 0.0 { t } else { slope * t });
        self.push(v, Op::LeakyRelu(x, slope))
    }

    pub fn mask(&mut self, x: Var, m: Arc<Tensor>) -> Var {
        let xv = self.value(x);
        assert_eq!(xv.shape(), m.shape(), "mask shape differs");
        let data = xv.data().iter().zip(m.data()).map(|(a, b)| a * b).collect();
        let v = Tensor::from_vec(xv.rows(), xv.cols(), data);
        self.push(v, Op::Mask(x, m))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows();
        assert!(parts.iter().all(|&p| self.value(p).rows() == rows), "row counts differ");
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut v = Tensor::zeros(rows, cols);
        for i in 0..rows {
            let mut off = 0;
            for &p in parts {
                let src = self.value(p).row(i);
                v.row_mut(i)[off..off + src.len()].copy_from_slice(src);
                off += src.len();
            }
        }
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    pub fn gather_rows(&mut self, x: Var, idx: Arc<Vec<usize>>) -> Var {
        let v = self.value(x).select_rows(&idx);
        self.push(v, Op::GatherRows(x, idx))
    }

    /// Softmax of a pair-score column within each owner's segment.
    pub fn edge_softmax(&mut self, scores: Var, pairs: Arc<Pairs>) -> Var {
        let s = self.value(scores);
        assert_eq!(s.shape(), (pairs.len(), 1), "scores must be a pair column");
        let mut out = Tensor::zeros(pairs.len(), 1);
        for i in 0..pairs.node_count() {
            let seg = pairs.segment(i);
            if seg.is_empty() {
                continue;
            }
            let hi = seg.clone().map(|k| s.get(k, 0)).fold(f64::NEG_INFINITY, f64::max);
            let total: f64 = seg.clone().map(|k| (s.get(k, 0) - hi).exp()).sum();
            for k in seg {
                out.set(k, 0, (s.get(k, 0) - hi).exp() / total);
            }
        }
        self.push(out, Op::EdgeSoftmax(scores, pairs))
    }

    /// `out_i = sum over pairs (i, j) of coef_ij * values_j`.
    pub fn edge_aggregate(&mut self, coef: Var, values: Var, pairs: Arc<Pairs>) -> Var {
        let c = self.value(coef);
        let x = self.value(values);
        assert_eq!(c.shape(), (pairs.len(), 1), "coefficients must be a pair column");
        let mut out = Tensor::zeros(pairs.node_count(), x.cols());
        for i in 0..pairs.node_count() {
            for k in pairs.segment(i) {
                let w = c.get(k, 0);
                let src = x.row(pairs.targets[k]);
                for (o, s) in out.row_mut(i).iter_mut().zip(src) {
                    *o += w * s;
                }
            }
        }
        self.push(out, Op::EdgeAggregate(coef, values, pairs))
    }

    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let mut out = Tensor::zeros(xv.rows(), xv.cols());
        for i in 0..xv.rows() {
            let row = xv.row(i);
            let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let total: f64 = row.iter().map(|v| (v - hi).exp()).sum();
            for (o, v) in out.row_mut(i).iter_mut().zip(row) {
                *o = (v - hi).exp() / total;
            }
        }
        self.push(out, Op::SoftmaxRows(x))
    }

    /// `-(1/|rows|) sum_r ln max(Y[r, labels[r]], 1e-12)` over the listed rows.
    pub fn cross_entropy(&mut self, probs: Var, labels: Arc<Vec<usize>>, rows: Arc<Vec<usize>>) -> Var {
        assert!(!rows.is_empty(), "cross entropy over an empty row set");
        let y = self.value(probs);
        let loss = -rows
            .iter()
            .map(|&r| y.get(r, labels[r]).max(LOG_CLAMP).ln())
            .sum::<f64>()
            / rows.len() as f64;
        self.push(Tensor::from_vec(1, 1, vec![loss]), Op::CrossEntropy(probs, labels, rows))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).sum();
        self.push(Tensor::from_vec(1, 1, vec![s]), Op::Sum(x))
    }

    /// Adjoints of every node with respect to the scalar `output`.
    pub fn backward(&self, output: Var) -> Gradients {
        assert_eq!(self.value(output).shape(), (1, 1), "backward needs a scalar output");
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Tensor::from_vec(1, 1, vec![1.0]));
        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let mut contributions: Vec<(Var, Tensor)> = Vec::new();
            let mut acc = |v: Var, t: Tensor| contributions.push((v, t));
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    acc(*a, g.matmul_t(self.value(*b)));
                    acc(*b, self.value(*a).t_matmul(&g));
                }
                Op::SpMM(s, x) => acc(*x, spmm(&s.transpose, &g)),
                Op::Add(a, b) => {
                    acc(*a, g.clone());
                    acc(*b, g.clone());
                }
                Op::Relu(x) => {
                    let xv = self.value(*x);
                    let data = g.data().iter().zip(xv.data()).map(|(d, &v)| if v > 0.0 { *d } else { 0.0 });
                    acc(*x, Tensor::from_vec(g.rows(), g.cols(), data.collect()));
                }
                Op::LeakyRelu(x, slope) => {
                    let xv = self.value(*x);
                    let data = g
                        .data()
                        .iter()
                        .zip(xv.data())
                        .map(|(d, &v)| if v > 0.0 { *d } else { slope * d });
                    acc(*x, Tensor::from_vec(g.rows(), g.cols(), data.collect()));
                }
                Op::Mask(x, m) => {
                    let data = g.data().iter().zip(m.data()).map(|(d, k)| d * k).collect();
                    acc(*x, Tensor::from_vec(g.rows(), g.cols(), data));
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let w = self.value(p).cols();
                        let part = Tensor::from_fn(g.rows(), w, |i, j| g.get(i, off + j));
                        acc(p, part);
                        off += w;
                    }
                }
                Op::GatherRows(x, idx) => {
                    let xv = self.value(*x);
                    let mut dx = Tensor::zeros(xv.rows(), xv.cols());
                    for (k, &r) in idx.iter().enumerate() {
                        for (o, d) in dx.row_mut(r).iter_mut().zip(g.row(k)) {
                            *o += d;
                        }
                    }
                    acc(*x, dx);
                }
                Op::EdgeSoftmax(x, pairs) => {
                    let y = &node.value;
                    let mut dx = Tensor::zeros(pairs.len(), 1);
                    for i in 0..pairs.node_count() {
                        let seg = pairs.segment(i);
                        let dot: f64 = seg.clone().map(|k| y.get(k, 0) * g.get(k, 0)).sum();
                        for k in seg {
                            dx.set(k, 0, y.get(k, 0) * (g.get(k, 0) - dot));
                        }
                    }
                    acc(*x, dx);
                }
                Op::EdgeAggregate(c, x, pairs) => {
                    let cv = self.value(*c);
                    let xv = self.value(*x);
                    let mut dc = Tensor::zeros(pairs.len(), 1);
                    let mut dx = Tensor::zeros(xv.rows(), xv.cols());
                    for i in 0..pairs.node_count() {
                        let gi = g.row(i);
                        for k in pairs.segment(i) {
                            let j = pairs.targets[k];
                            dc.set(k, 0, gi.iter().zip(xv.row(j)).map(|(a, b)| a * b).sum());
                            let w = cv.get(k, 0);
                            for (o, d) in dx.row_mut(j).iter_mut().zip(gi) {
                                *o += w * d;
                            }
                        }
                    }
                    acc(*c, dc);
                    acc(*x, dx);
                }
                Op::SoftmaxRows(x) => {
                    let y = &node.value;
                    let mut dx = Tensor::zeros(y.rows(), y.cols());
                    for i in 0..y.rows() {
                        let dot: f64 = y.row(i).iter().zip(g.row(i)).map(|(a, b)| a * b).sum();
                        for j in 0..y.cols() {
                            dx.set(i, j, y.get(i, j) * (g.get(i, j) - dot));
                        }
                    }
                    acc(*x, dx);
                }
                Op::CrossEntropy(p, labels, rows) => {
                    let y = self.value(*p);
                    let scale = g.get(0, 0) / rows.len() as f64;
                    let mut dy = Tensor::zeros(y.rows(), y.cols());
                    for &r in rows.iter() {
                        let v = y.get(r, labels[r]);
                        if v > LOG_CLAMP {
                            dy.set(r, labels[r], dy.get(r, labels[r]) - scale / v);
                        }
                    }
                    acc(*p, dy);
                }
                Op::Sum(x) => {
                    let (r, c) = self.value(*x).shape();
                    acc(*x, Tensor::from_vec(r, c, vec![g.get(0, 0); r * c]));
                }
            }
            for (v, t) in contributions {
                match &mut grads[v.0] {
                    Some(existing) => existing.add_assign(&t),
                    slot @ None => *slot = Some(t),
                }
            }
            grads[idx] = Some(g);
        }
        Gradients { grads }
    }
}
