//! Reverse-mode gradient tape.
//!
//! Every op appends a node whose inputs precede it, so a single reverse sweep
//! over the node list visits nodes in topological order. Values are checked
//! for finiteness as they are recorded; a NaN or Inf is reported as an error
//! at the op that produced it.

use super::tensor::{gemm, Tensor};
use crate::error::{shape_err, CtdError, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulT(Var, Var),
    AddRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    SliceCols { x: Var, start: usize },
    ConcatCols(Vec<Var>),
    GroupMean { x: Var, group: usize },
    RepeatRows { x: Var, times: usize },
    RowDot { q: Var, keys: Var },
    SoftmaxRows(Var),
    LogSoftmaxRows(Var),
    Gather { table: Var, idx: Vec<usize> },
    StraightThrough(Var),
    SoftmaxCe { logits: Var, targets: Vec<usize> },
    BceLogits { logits: Var, labels: Vec<f64> },
    Mse(Var, Var),
    SqDist(Var, Var),
    Sum(Var),
    Mean(Var),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::MatMulT(..) => "matmul_t",
            Op::AddRow(..) => "add_row",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::Relu(..) => "relu",
            Op::Tanh(..) => "tanh",
            Op::Sigmoid(..) => "sigmoid",
            Op::SliceCols { .. } => "slice_cols",
            Op::ConcatCols(..) => "concat_cols",
            Op::GroupMean { .. } => "group_mean",
            Op::RepeatRows { .. } => "repeat_rows",
            Op::RowDot { .. } => "row_dot",
            Op::SoftmaxRows(..) => "softmax_rows",
            Op::LogSoftmaxRows(..) => "log_softmax_rows",
            Op::Gather { .. } => "gather",
            Op::StraightThrough(..) => "straight_through",
            Op::SoftmaxCe { .. } => "softmax_cross_entropy",
            Op::BceLogits { .. } => "bce_with_logits",
            Op::Mse(..) => "mse",
            Op::SqDist(..) => "sq_dist",
            Op::Sum(..) => "sum",
            Op::Mean(..) => "mean",
        }
    }
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    // softmax probabilities saved for the backward pass
    aux: Option<Tensor>,
}

/// Gradient buffers produced by [`Tape::backward`], keyed by node.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient of `v`, or zeros of `like`'s shape when `v` was unreachable.
    pub fn get_or_zeros(&self, v: Var, like: &Tensor) -> Tensor {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(like.shape()))
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softmax_row(x: &[f64], out: &mut [f64]) {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for (o, &v) in out.iter_mut().zip(x) {
        *o = (v - m).exp();
        s += *o;
    }
    for o in out.iter_mut() {
        *o /= s;
    }
}

fn log_sum_exp(x: &[f64]) -> f64 {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
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

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool, aux: Option<Tensor>) -> Result<Var> {
        if !value.is_finite() {
            return Err(CtdError::NonFinite(op.name()));
        }
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            aux,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&mut self, t: Tensor) -> Result<Var> {
        self.push(t, Op::Leaf, false, None)
    }

    /// A leaf whose gradient is collected by [`Tape::backward`].
    pub fn variable(&mut self, t: Tensor) -> Result<Var> {
        self.push(t, Op::Leaf, true, None)
    }

    /// Stop-gradient: a constant copy of `v`'s current value.
    pub fn detach(&mut self, v: Var) -> Result<Var> {
        let t = self.value(v).clone();
        self.constant(t)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (m, k) = (ta.rows(), ta.cols());
        let (k2, n) = (tb.rows(), tb.cols());
        if k != k2 {
            return Err(shape_err(
                "matmul",
                format!("[{m}x{k}] x [{k2}x{n}]"),
            ));
        }
        let mut out = vec![0.0; m * n];
        match sparse_rows(ta) {
            Some(rows) => {
                for (i, row) in rows.iter().enumerate() {
                    let o = &mut out[i * n..(i + 1) * n];
                    for &(j, x) in row {
                        for (ov, bv) in o.iter_mut().zip(tb.row(j)) {
                            *ov += x * bv;
                        }
                    }
                }
            }
            None => gemm(ta.data(), m, k, false, tb.data(), k2, n, false, &mut out, false),
        }
        let rg = self.rg(a) || self.rg(b);
        self.push(Tensor::matrix(m, n, out)?, Op::MatMul(a, b), rg, None)
    }

    /// `a · bᵀ` for `a[m×k]`, `b[n×k]`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (m, k) = (ta.rows(), ta.cols());
        let (n, k2) = (tb.rows(), tb.cols());
        if k != k2 {
            return Err(shape_err("matmul_t", format!("[{m}x{k}] x [{n}x{k2}]^T")));
        }
        let mut out = vec![0.0; m * n];
        gemm(ta.data(), m, k, false, tb.data(), n, k, true, &mut out, false);
        let rg = self.rg(a) || self.rg(b);
        self.push(Tensor::matrix(m, n, out)?, Op::MatMulT(a, b), rg, None)
    }

    /// `x[B×n] + b[n]`, the bias broadcast over rows.
    pub fn add_row(&mut self, x: Var, b: Var) -> Result<Var> {
        let (tx, tb) = (self.value(x), self.value(b));
        let n = tx.cols();
        if tb.len() != n {
            return Err(shape_err(
                "add_row",
                format!("rows of width {n}, bias of length {}", tb.len()),
            ));
        }
        let mut out = tx.clone();
        for r in 0..out.rows() {
            for (o, bv) in out.row_mut(r).iter_mut().zip(tb.data()) {
                *o += bv;
            }
        }
        let rg = self.rg(x) || self.rg(b);
        self.push(out, Op::AddRow(x, b), rg, None)
    }

    /// `x·w + b`.
    pub fn matmul_add(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let y = self.matmul(x, w)?;
        self.add_row(y, b)
    }

    fn binary(&mut self, a: Var, b: Var, name: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.len() != tb.len() {
            return Err(shape_err(name, format!("{:?} vs {:?}", ta.shape(), tb.shape())));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(ta.shape().to_vec(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.binary(a, b, "add", |x, y| x + y)?;
        let rg = self.rg(a) || self.rg(b);
        self.push(t, Op::Add(a, b), rg, None)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.binary(a, b, "sub", |x, y| x - y)?;
        let rg = self.rg(a) || self.rg(b);
        self.push(t, Op::Sub(a, b), rg, None)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.binary(a, b, "mul", |x, y| x * y)?;
        let rg = self.rg(a) || self.rg(b);
        self.push(t, Op::Mul(a, b), rg, None)
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Result<Var> {
        let t = self.value(a).map(|v| v * k);
        let rg = self.rg(a);
        self.push(t, Op::Scale(a, k), rg, None)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a).map(|v| v.max(0.0));
        let rg = self.rg(a);
        self.push(t, Op::Relu(a), rg, None)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a).map(f64::tanh);
        let rg = self.rg(a);
        self.push(t, Op::Tanh(a), rg, None)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a).map(sigmoid);
        let rg = self.rg(a);
        self.push(t, Op::Sigmoid(a), rg, None)
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let tx = self.value(x);
        let (r, c) = (tx.rows(), tx.cols());
        if start + len > c {
            return Err(shape_err("slice_cols", format!("[{start}..{}] of {c}", start + len)));
        }
        let mut out = Vec::with_capacity(r * len);
        for i in 0..r {
            out.extend_from_slice(&tx.row(i)[start..start + len]);
        }
        let rg = self.rg(x);
        self.push(Tensor::matrix(r, len, out)?, Op::SliceCols { x, start }, rg, None)
    }

    pub fn concat_cols(&mut self, xs: &[Var]) -> Result<Var> {
        let r = xs
            .first()
            .map(|&v| self.value(v).rows())
            .ok_or_else(|| shape_err("concat_cols", "no inputs"))?;
        if xs.iter().any(|&v| self.value(v).rows() != r) {
            return Err(shape_err("concat_cols", "row counts differ"));
        }
        let total: usize = xs.iter().map(|&v| self.value(v).cols()).sum();
        let mut out = Vec::with_capacity(r * total);
        for i in 0..r {
            for &v in xs {
                out.extend_from_slice(self.value(v).row(i));
            }
        }
        let rg = xs.iter().any(|&v| self.rg(v));
        self.push(Tensor::matrix(r, total, out)?, Op::ConcatCols(xs.to_vec()), rg, None)
    }

    /// Mean over consecutive groups of `group` rows: `[B·g × d] → [B × d]`.
    pub fn group_mean(&mut self, x: Var, group: usize) -> Result<Var> {
        let tx = self.value(x);
        let (r, c) = (tx.rows(), tx.cols());
        if group == 0 || r % group != 0 {
            return Err(shape_err("group_mean", format!("{r} rows in groups of {group}")));
        }
        let b = r / group;
        let mut out = vec![0.0; b * c];
        for i in 0..r {
            let o = &mut out[(i / group) * c..(i / group + 1) * c];
            for (ov, xv) in o.iter_mut().zip(tx.row(i)) {
                *ov += xv;
            }
        }
        let inv = 1.0 / group as f64;
        out.iter_mut().for_each(|v| *v *= inv);
        let rg = self.rg(x);
        self.push(Tensor::matrix(b, c, out)?, Op::GroupMean { x, group }, rg, None)
    }

    /// Each row repeated `times` times in place: `[B × d] → [B·t × d]`.
    pub fn repeat_rows(&mut self, x: Var, times: usize) -> Result<Var> {
        let tx = self.value(x);
        let (r, c) = (tx.rows(), tx.cols());
        let mut out = Vec::with_capacity(r * times * c);
        for i in 0..r {
            for _ in 0..times {
                out.extend_from_slice(tx.row(i));
            }
        }
        let rg = self.rg(x);
        self.push(Tensor::matrix(r * times, c, out)?, Op::RepeatRows { x, times }, rg, None)
    }

    /// Per-sample dot products: `q[B×d]`, `keys[B·n×d]` → `[B×n]`.
    pub fn row_dot(&mut self, q: Var, keys: Var) -> Result<Var> {
        let (tq, tk) = (self.value(q), self.value(keys));
        let (b, d) = (tq.rows(), tq.cols());
        if tk.cols() != d || b == 0 || tk.rows() % b != 0 {
            return Err(shape_err(
                "row_dot",
                format!("queries {:?}, keys {:?}", tq.shape(), tk.shape()),
            ));
        }
        let n = tk.rows() / b;
        let mut out = vec![0.0; b * n];
        for i in 0..b {
            let qi = tq.row(i);
            for j in 0..n {
                out[i * n + j] = qi.iter().zip(tk.row(i * n + j)).map(|(a, b)| a * b).sum();
            }
        }
        let rg = self.rg(q) || self.rg(keys);
        self.push(Tensor::matrix(b, n, out)?, Op::RowDot { q, keys }, rg, None)
    }

    pub fn softmax_rows(&mut self, x: Var) -> Result<Var> {
        let tx = self.value(x);
        let mut out = Tensor::zeros(&[tx.rows(), tx.cols()]);
        for i in 0..tx.rows() {
            softmax_row(tx.row(i), out.row_mut(i));
        }
        let rg = self.rg(x);
        self.push(out, Op::SoftmaxRows(x), rg, None)
    }

    pub fn log_softmax_rows(&mut self, x: Var) -> Result<Var> {
        let tx = self.value(x);
        let mut out = Tensor::zeros(&[tx.rows(), tx.cols()]);
        let mut probs = Tensor::zeros(&[tx.rows(), tx.cols()]);
        for i in 0..tx.rows() {
            let lse = log_sum_exp(tx.row(i));
            for (o, v) in out.row_mut(i).iter_mut().zip(tx.row(i)) {
                *o = v - lse;
            }
            softmax_row(tx.row(i), probs.row_mut(i));
        }
        let rg = self.rg(x);
        self.push(out, Op::LogSoftmaxRows(x), rg, Some(probs))
    }

    /// Row lookup: output row `r` is `table` row `idx[r]`.
    pub fn gather(&mut self, table: Var, idx: &[usize]) -> Result<Var> {
        let tt = self.value(table);
        let (n, c) = (tt.rows(), tt.cols());
        let mut out = Vec::with_capacity(idx.len() * c);
        for &k in idx {
            if k >= n {
                return Err(CtdError::Index {
                    what: "gather table",
                    index: k,
                    len: n,
                });
            }
            out.extend_from_slice(tt.row(k));
        }
        let rg = self.rg(table);
        self.push(
            Tensor::matrix(idx.len(), c, out)?,
            Op::Gather {
                table,
                idx: idx.to_vec(),
            },
            rg,
            None,
        )
    }

    /// Emits `value` in the forward pass; the backward pass hands the
    /// incoming gradient to `source` unchanged (straight-through rule).
    pub fn straight_through(&mut self, source: Var, value: Tensor) -> Result<Var> {
        if value.len() != self.value(source).len() {
            return Err(shape_err(
                "straight_through",
                format!("{:?} vs {:?}", value.shape(), self.value(source).shape()),
            ));
        }
        let rg = self.rg(source);
        self.push(value, Op::StraightThrough(source), rg, None)
    }

    /// Mean over rows of `-log softmax(logits)[target]`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let tl = self.value(logits);
        let (b, n) = (tl.rows(), tl.cols());
        if targets.len() != b {
            return Err(shape_err("softmax_cross_entropy", format!("{b} rows, {} targets", targets.len())));
        }
        let mut probs = Tensor::zeros(&[b, n]);
        let mut loss = 0.0;
        for (i, &t) in targets.iter().enumerate() {
            if t >= n {
                return Err(CtdError::Index {
                    what: "cross-entropy target",
                    index: t,
                    len: n,
                });
            }
            let row = tl.row(i);
            loss += log_sum_exp(row) - row[t];
            softmax_row(row, probs.row_mut(i));
        }
        let rg = self.rg(logits);
        self.push(
            Tensor::scalar(loss / b as f64),
            Op::SoftmaxCe {
                logits,
                targets: targets.to_vec(),
            },
            rg,
            Some(probs),
        )
    }

    /// Mean binary cross-entropy on raw logits, computed as
    /// `max(x,0) - x·y + ln(1 + e^{-|x|})`.
    pub fn bce_with_logits(&mut self, logits: Var, labels: &[f64]) -> Result<Var> {
        let tl = self.value(logits);
        if tl.len() != labels.len() {
            return Err(shape_err("bce_with_logits", format!("{} logits, {} labels", tl.len(), labels.len())));
        }
        let n = labels.len().max(1) as f64;
        let loss: f64 = tl
            .data()
            .iter()
            .zip(labels)
            .map(|(&x, &y)| x.max(0.0) - x * y + (-x.abs()).exp().ln_1p())
            .sum();
        let rg = self.rg(logits);
        self.push(
            Tensor::scalar(loss / n),
            Op::BceLogits {
                logits,
                labels: labels.to_vec(),
            },
            rg,
            None,
        )
    }

    /// Mean of squared element differences.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err("mse", format!("{:?} vs {:?}", ta.shape(), tb.shape())));
        }
        let n = ta.len().max(1) as f64;
        let s: f64 = ta.data().iter().zip(tb.data()).map(|(x, y)| (x - y) * (x - y)).sum();
        let rg = self.rg(a) || self.rg(b);
        self.push(Tensor::scalar(s / n), Op::Mse(a, b), rg, None)
    }

    /// Mean over rows of the squared L2 distance between matching rows.
    pub fn sq_dist(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rows() != tb.rows() || ta.cols() != tb.cols() {
            return Err(shape_err("sq_dist", format!("{:?} vs {:?}", ta.shape(), tb.shape())));
        }
        let r = ta.rows().max(1) as f64;
        let s: f64 = ta.data().iter().zip(tb.data()).map(|(x, y)| (x - y) * (x - y)).sum();
        let rg = self.rg(a) || self.rg(b);
        self.push(Tensor::scalar(s / r), Op::SqDist(a, b), rg, None)
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).sum();
        let rg = self.rg(a);
        self.push(Tensor::scalar(s), Op::Sum(a), rg, None)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let s = t.sum() / t.len().max(1) as f64;
        let rg = self.rg(a);
        self.push(Tensor::scalar(s), Op::Mean(a), rg, None)
    }

    /// Reverse sweep from the scalar `output`.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        if self.value(output).len() != 1 {
            return Err(shape_err("backward", "output must be a scalar"));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Tensor::filled(self.value(output).shape(), 1.0));

        for i in (0..=output.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(gy) = grads[i].take() else { continue };
            self.propagate(node, &gy, &mut grads);
            grads[i] = Some(gy);
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
        if !self.rg(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(acc) => acc.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    fn propagate(&self, node: &Node, gy: &Tensor, grads: &mut [Option<Tensor>]) {
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
                if self.rg(*a) {
                    let mut ga = vec![0.0; m * k];
                    gemm(gy.data(), m, n, false, tb.data(), k, n, true, &mut ga, false);
                    self.accumulate(grads, *a, Tensor::new(ta.shape().to_vec(), ga).unwrap());
                }
                if self.rg(*b) {
                    let mut gb = vec![0.0; k * n];
                    match sparse_rows(ta) {
                        Some(rows) => {
                            for (i, row) in rows.iter().enumerate() {
                                for &(j, x) in row {
                                    for (g, yv) in gb[j * n..(j + 1) * n].iter_mut().zip(gy.row(i)) {
                                        *g += x * yv;
                                    }
                                }
                            }
                        }
                        None => gemm(ta.data(), m, k, true, gy.data(), m, n, false, &mut gb, false),
                    }
                    self.accumulate(grads, *b, Tensor::new(tb.shape().to_vec(), gb).unwrap());
                }
            }
            Op::MatMulT(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k, n) = (ta.rows(), ta.cols(), tb.rows());
                if self.rg(*a) {
                    let mut ga = vec![0.0; m * k];
                    gemm(gy.data(), m, n, false, tb.data(), n, k, false, &mut ga, false);
                    self.accumulate(grads, *a, Tensor::new(ta.shape().to_vec(), ga).unwrap());
                }
                if self.rg(*b) {
                    let mut gb = vec![0.0; n * k];
                    gemm(gy.data(), m, n, true, ta.data(), m, k, false, &mut gb, false);
                    self.accumulate(grads, *b, Tensor::new(tb.shape().to_vec(), gb).unwrap());
                }
            }
            Op::AddRow(x, b) => {
                self.accumulate(grads, *x, gy.clone());
                if self.rg(*b) {
                    let tb = self.value(*b);
                    let mut gb = vec![0.0; tb.len()];
                    for r in 0..gy.rows() {
                        for (g, v) in gb.iter_mut().zip(gy.row(r)) {
                            *g += v;
                        }
                    }
                    self.accumulate(grads, *b, Tensor::new(tb.shape().to_vec(), gb).unwrap());
                }
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, gy.clone());
                self.accumulate(grads, *b, gy.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, gy.clone());
                self.accumulate(grads, *b, gy.map(|v| -v));
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                if self.rg(*a) {
                    let g = gy.data().iter().zip(tb.data()).map(|(g, y)| g * y).collect();
                    self.accumulate(grads, *a, Tensor::new(ta.shape().to_vec(), g).unwrap());
                }
                if self.rg(*b) {
                    let g = gy.data().iter().zip(ta.data()).map(|(g, x)| g * x).collect();
                    self.accumulate(grads, *b, Tensor::new(tb.shape().to_vec(), g).unwrap());
                }
            }
            Op::Scale(a, k) => self.accumulate(grads, *a, gy.map(|v| v * k)),
            Op::Relu(a) => {
                let ta = self.value(*a);
                let g = gy
                    .data()
                    .iter()
                    .zip(ta.data())
                    .map(|(g, &x)| if x > 0.0 { *g } else { 0.0 })
                    .collect();
                self.accumulate(grads, *a, Tensor::new(ta.shape().to_vec(), g).unwrap());
            }
            Op::Tanh(a) => {
                let y = &node.value;
                let g = gy.data().iter().zip(y.data()).map(|(g, y)| g * (1.0 - y * y)).collect();
                self.accumulate(grads, *a, Tensor::new(y.shape().to_vec(), g).unwrap());
            }
            Op::Sigmoid(a) => {
                let y = &node.value;
                let g = gy.data().iter().zip(y.data()).map(|(g, y)| g * y * (1.0 - y)).collect();
                self.accumulate(grads, *a, Tensor::new(y.shape().to_vec(), g).unwrap());
            }
            Op::SliceCols { x, start } => {
                let tx = self.value(*x);
                let (r, c) = (tx.rows(), tx.cols());
                let len = gy.cols();
                let mut g = vec![0.0; r * c];
                for i in 0..r {
                    g[i * c + start..i * c + start + len].copy_from_slice(gy.row(i));
                }
                self.accumulate(grads, *x, Tensor::new(tx.shape().to_vec(), g).unwrap());
            }
            Op::ConcatCols(xs) => {
                let mut off = 0;
                for &v in xs {
                    let tv = self.value(v);
                    let (r, c) = (tv.rows(), tv.cols());
                    if self.rg(v) {
                        let mut g = Vec::with_capacity(r * c);
                        for i in 0..r {
                            g.extend_from_slice(&gy.row(i)[off..off + c]);
                        }
                        self.accumulate(grads, v, Tensor::new(tv.shape().to_vec(), g).unwrap());
                    }
                    off += c;
                }
            }
            Op::GroupMean { x, group } => {
                let tx = self.value(*x);
                let (r, c) = (tx.rows(), tx.cols());
                let inv = 1.0 / *group as f64;
                let mut g = vec![0.0; r * c];
                for i in 0..r {
                    for (gv, yv) in g[i * c..(i + 1) * c].iter_mut().zip(gy.row(i / group)) {
                        *gv = yv * inv;
                    }
                }
                self.accumulate(grads, *x, Tensor::new(tx.shape().to_vec(), g).unwrap());
            }
            Op::RepeatRows { x, times } => {
                let tx = self.value(*x);
                let (r, c) = (tx.rows(), tx.cols());
                let mut g = vec![0.0; r * c];
                for i in 0..r * times {
                    for (gv, yv) in g[(i / times) * c..(i / times + 1) * c].iter_mut().zip(gy.row(i)) {
                        *gv += yv;
                    }
                }
                self.accumulate(grads, *x, Tensor::new(tx.shape().to_vec(), g).unwrap());
            }
            Op::RowDot { q, keys } => {
                let (tq, tk) = (self.value(*q), self.value(*keys));
                let (b, d) = (tq.rows(), tq.cols());
                let n = tk.rows() / b;
                if self.rg(*q) {
                    let mut g = vec![0.0; b * d];
                    for i in 0..b {
                        for j in 0..n {
                            let s = gy.get(i, j);
                            for (gv, kv) in g[i * d..(i + 1) * d].iter_mut().zip(tk.row(i * n + j)) {
                                *gv += s * kv;
                            }
                        }
                    }
                    self.accumulate(grads, *q, Tensor::new(tq.shape().to_vec(), g).unwrap());
                }
                if self.rg(*keys) {
                    let mut g = vec![0.0; tk.len()];
                    for i in 0..b {
                        for j in 0..n {
                            let s = gy.get(i, j);
                            let row = i * n + j;
                            for (gv, qv) in g[row * d..(row + 1) * d].iter_mut().zip(tq.row(i)) {
                                *gv = s * qv;
                            }
                        }
                    }
                    self.accumulate(grads, *keys, Tensor::new(tk.shape().to_vec(), g).unwrap());
                }
            }
            Op::SoftmaxRows(x) => {
                let y = &node.value;
                let mut g = Tensor::zeros(y.shape());
                for i in 0..y.rows() {
                    let dot: f64 = gy.row(i).iter().zip(y.row(i)).map(|(a, b)| a * b).sum();
                    for ((gv, yv), gyv) in g.row_mut(i).iter_mut().zip(y.row(i)).zip(gy.row(i)) {
                        *gv = yv * (gyv - dot);
                    }
                }
                let shape = self.value(*x).shape().to_vec();
                self.accumulate(grads, *x, g.reshape(shape).unwrap());
            }
            Op::LogSoftmaxRows(x) => {
                let p = node.aux.as_ref().expect("log-softmax probabilities");
                let mut g = Tensor::zeros(p.shape());
                for i in 0..p.rows() {
                    let s: f64 = gy.row(i).iter().sum();
                    for ((gv, pv), gyv) in g.row_mut(i).iter_mut().zip(p.row(i)).zip(gy.row(i)) {
                        *gv = gyv - pv * s;
                    }
                }
                let shape = self.value(*x).shape().to_vec();
                self.accumulate(grads, *x, g.reshape(shape).unwrap());
            }
            Op::Gather { table, idx } => {
                let tt = self.value(*table);
                let c = tt.cols();
                let mut g = Tensor::zeros(tt.shape());
                for (r, &k) in idx.iter().enumerate() {
                    for (gv, yv) in g.data_mut()[k * c..(k + 1) * c].iter_mut().zip(gy.row(r)) {
                        *gv += yv;
                    }
                }
                self.accumulate(grads, *table, g);
            }
            Op::StraightThrough(src) => {
                let shape = self.value(*src).shape().to_vec();
                self.accumulate(grads, *src, gy.clone().reshape(shape).unwrap());
            }
            Op::SoftmaxCe { logits, targets } => {
                let p = node.aux.as_ref().expect("cross-entropy probabilities");
                let s = gy.item() / targets.len() as f64;
                let mut g = p.clone();
                for (i, &t) in targets.iter().enumerate() {
                    let row = g.row_mut(i);
                    row[t] -= 1.0;
                    row.iter_mut().for_each(|v| *v *= s);
                }
                let shape = self.value(*logits).shape().to_vec();
                self.accumulate(grads, *logits, g.reshape(shape).unwrap());
            }
            Op::BceLogits { logits, labels } => {
                let tl = self.value(*logits);
                let s = gy.item() / labels.len().max(1) as f64;
                let g = tl
                    .data()
                    .iter()
                    .zip(labels)
                    .map(|(&x, &y)| (sigmoid(x) - y) * s)
                    .collect();
                self.accumulate(grads, *logits, Tensor::new(tl.shape().to_vec(), g).unwrap());
            }
            Op::Mse(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let s = 2.0 * gy.item() / ta.len().max(1) as f64;
                let d: Vec<f64> = ta.data().iter().zip(tb.data()).map(|(x, y)| (x - y) * s).collect();
                if self.rg(*b) {
                    let neg = d.iter().map(|v| -v).collect();
                    self.accumulate(grads, *b, Tensor::new(tb.shape().to_vec(), neg).unwrap());
                }
                self.accumulate(grads, *a, Tensor::new(ta.shape().to_vec(), d).unwrap());
            }
            Op::SqDist(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let s = 2.0 * gy.item() / ta.rows().max(1) as f64;
                let d: Vec<f64> = ta.data().iter().zip(tb.data()).map(|(x, y)| (x - y) * s).collect();
                if self.rg(*b) {
                    let neg = d.iter().map(|v| -v).collect();
                    self.accumulate(grads, *b, Tensor::new(tb.shape().to_vec(), neg).unwrap());
                }
                self.accumulate(grads, *a, Tensor::new(ta.shape().to_vec(), d).unwrap());
            }
            Op::Sum(a) => {
                let ta = self.value(*a);
                self.accumulate(grads, *a, Tensor::filled(ta.shape(), gy.item()));
            }
            Op::Mean(a) => {
                let ta = self.value(*a);
                let v = gy.item() / ta.len().max(1) as f64;
                self.accumulate(grads, *a, Tensor::filled(ta.shape(), v));
            }
        }
    }
}

/// Non-zero entries per row when at most a quarter of `t` is non-zero, so
/// one-hot inputs skip the dense product.
fn sparse_rows(t: &Tensor) -> Option<Vec<Vec<(usize, f64)>>> {
    let nnz = t.data().iter().filter(|v| **v != 0.0).count();
    if 4 * nnz > t.len() || t.len() < 64 {
        return None;
    }
    Some(
        (0..t.rows())
            .map(|i| t.row(i).iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, &v)| (j, v)).collect())
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Tensor {
        Tensor::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn matmul_add_hand_product() {
        let mut t = Tape::new();
        let x = t.constant(m(&[&[1.0, 0.0]])).unwrap();
        let w = t.constant(m(&[&[2.0, 3.0], &[4.0, 5.0]])).unwrap();
        let b = t.constant(Tensor::vector(vec![0.0, 0.0])).unwrap();
        let y = t.matmul_add(x, w, b).unwrap();
        assert_eq!(t.value(y).data(), &[2.0, 3.0]);
    }

    #[test]
    fn matmul_zero_input_passes_bias() {
        let mut t = Tape::new();
        let x = t.constant(m(&[&[0.0, 0.0]])).unwrap();
        let w = t.constant(m(&[&[9.0, -3.0], &[1.5, 5.0]])).unwrap();
        let b = t.constant(Tensor::vector(vec![7.0, 7.0])).unwrap();
        let y = t.matmul_add(x, w, b).unwrap();
        assert_eq!(t.value(y).data(), &[7.0, 7.0]);
    }

    #[test]
    fn matmul_identity_returns_weights() {
        let mut t = Tape::new();
        let x = t.constant(m(&[&[1.0, 0.0], &[0.0, 1.0]])).unwrap();
        let wt = m(&[&[0.3, -1.2], &[2.5, 4.0]]);
        let w = t.constant(wt.clone()).unwrap();
        let b = t.constant(Tensor::vector(vec![0.0, 0.0])).unwrap();
        let y = t.matmul_add(x, w, b).unwrap();
        assert_eq!(t.value(y).data(), wt.data());
    }

    #[test]
    fn matmul_shape_mismatch() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::zeros(&[1, 3])).unwrap();
        let w = t.constant(Tensor::zeros(&[2, 2])).unwrap();
        assert!(matches!(t.matmul(x, w), Err(CtdError::Shape { .. })));
    }

    #[test]
    fn cross_entropy_values() {
        let mut t = Tape::new();
        let l = t.constant(Tensor::zeros(&[1, 20])).unwrap();
        let ce = t.softmax_cross_entropy(l, &[3]).unwrap();
        assert!((t.value(ce).item() - 20f64.ln()).abs() < 1e-12);

        let mut row = vec![0.0; 5];
        row[2] = 1e6;
        let l = t.constant(Tensor::matrix(1, 5, row).unwrap()).unwrap();
        let ce = t.softmax_cross_entropy(l, &[2]).unwrap();
        assert!(t.value(ce).item().abs() < 1e-12);

        let l = t.constant(m(&[&[1.0, 2.0, 3.0]])).unwrap();
        let ce = t.softmax_cross_entropy(l, &[2]).unwrap();
        // -ln(e^3 / (e + e^2 + e^3)), evaluated independently
        let direct = -(3f64.exp() / (1f64.exp() + 2f64.exp() + 3f64.exp())).ln();
        assert!((t.value(ce).item() - direct).abs() < 1e-12);
        assert!((t.value(ce).item() - 0.40761).abs() < 1e-5);
    }

    #[test]
    fn cross_entropy_index_out_of_range() {
        let mut t = Tape::new();
        let l = t.constant(Tensor::zeros(&[1, 3])).unwrap();
        assert!(matches!(t.softmax_cross_entropy(l, &[3]), Err(CtdError::Index { .. })));
    }

    #[test]
    fn cross_entropy_gradient_is_softmax_minus_onehot() {
        let mut t = Tape::new();
        let l = t.variable(m(&[&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]])).unwrap();
        let ce = t.softmax_cross_entropy(l, &[2, 0]).unwrap();
        let g = t.backward(ce).unwrap();
        let g = g.get(l).unwrap();
        let z = 1f64.exp() + 2f64.exp() + 3f64.exp();
        let expect = [
            1f64.exp() / z / 2.0,
            2f64.exp() / z / 2.0,
            (3f64.exp() / z - 1.0) / 2.0,
            (1.0 / 3.0 - 1.0) / 2.0,
            1.0 / 6.0,
            1.0 / 6.0,
        ];
        for (a, b) in g.data().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn bce_values() {
        let mut t = Tape::new();
        let l = t.constant(Tensor::vector(vec![0.0, 0.0, 0.0])).unwrap();
        let v = t.bce_with_logits(l, &[1.0, 0.0, 1.0]).unwrap();
        assert!((t.value(v).item() - 2f64.ln()).abs() < 1e-12);

        let l = t.constant(Tensor::vector(vec![40.0])).unwrap();
        let v = t.bce_with_logits(l, &[1.0]).unwrap();
        assert!(t.value(v).item() < 1e-15);

        let l = t.constant(Tensor::vector(vec![1.0, -1.0])).unwrap();
        let v = t.bce_with_logits(l, &[1.0, 0.0]).unwrap();
        let direct = -(1.0 / (1.0 + (-1f64).exp())).ln();
        assert!((t.value(v).item() - direct).abs() < 1e-12);
        assert!((t.value(v).item() - 0.31326).abs() < 1e-5);
    }

    #[test]
    fn mse_values() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::vector(vec![1.0, 1.0])).unwrap();
        let b = t.constant(Tensor::vector(vec![0.0, 0.0])).unwrap();
        let v = t.mse(a, b).unwrap();
        assert_eq!(t.value(v).item(), 1.0);
        let v = t.mse(a, a).unwrap();
        assert_eq!(t.value(v).item(), 0.0);
        let a = t.constant(Tensor::vector(vec![2.0])).unwrap();
        let b = t.constant(Tensor::vector(vec![-2.0])).unwrap();
        let v = t.mse(a, b).unwrap();
        assert_eq!(t.value(v).item(), 16.0);
        let c = t.constant(Tensor::vector(vec![1.0, 2.0, 3.0])).unwrap();
        assert!(t.mse(a, c).is_err());
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut t = Tape::new();
        let x = t.constant(m(&[&[1e3, -1e3, 0.5], &[3.0, 3.0, 3.0]])).unwrap();
        let y = t.softmax_rows(x).unwrap();
        for i in 0..2 {
            let s: f64 = t.value(y).row(i).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn straight_through_passes_gradient() {
        let mut t = Tape::new();
        let z = t.variable(Tensor::vector(vec![0.3, 0.7])).unwrap();
        let q = t.straight_through(z, Tensor::vector(vec![0.0, 1.0])).unwrap();
        let w = t.constant(Tensor::vector(vec![2.0, -5.0])).unwrap();
        let p = t.mul(q, w).unwrap();
        let s = t.sum(p).unwrap();
        assert_eq!(t.value(s).item(), -5.0);
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(z).unwrap().data(), &[2.0, -5.0]);
    }

    #[test]
    fn non_finite_is_an_error() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::vector(vec![f64::MAX])).unwrap();
        assert!(matches!(t.scale(a, 10.0), Err(CtdError::NonFinite(_))));
    }
}
