//! Reverse-mode tape over 2-D matrices.
//!
//! Nodes are appended in evaluation order, so walking the tape backwards is
//! a valid topological order for the backward pass.

use std::borrow::Cow;
use std::collections::HashMap;

use super::params::{Grads, ParamStore};
use super::tensor::{gemm, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param(usize),
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Softmax(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Transpose(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    SliceRows(Var, usize),
    Embedding(Var, Vec<usize>),
    SumAll(Var),
    CrossEntropy {
        logits: Var,
        target: usize,
        probs: Vec<f64>,
    },
    Mse {
        pred: Var,
        target: Vec<f64>,
    },
    Cosine {
        pred: Var,
        target: Vec<f64>,
        eps: f64,
    },
}

struct Node<'p> {
    value: Cow<'p, Tensor>,
    op: Op,
}

/// A single forward pass. Parameters are borrowed from a [`ParamStore`] and
/// never copied.
pub struct Graph<'p> {
    nodes: Vec<Node<'p>>,
    params: HashMap<usize, Var>,
}

fn dims(t: &Tensor) -> (usize, usize) {
    (t.rows(), t.cols())
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::Dimension {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Tensor {
    Tensor::matrix(rows, cols, data).expect("internal shape bookkeeping")
}

impl<'p> Default for Graph<'p> {
    fn default() -> Self {
        Graph::new()
    }
}

impl<'p> Graph<'p> {
    pub fn new() -> Graph<'p> {
        Graph {
            nodes: Vec::new(),
            params: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Cow<'p, Tensor>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn owned(&mut self, value: Tensor, op: Op) -> Var {
        self.push(Cow::Owned(value), op)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// A constant input; gradients flowing into it are discarded.
    pub fn input(&mut self, t: Tensor) -> Var {
        self.owned(t, Op::Leaf)
    }

    /// The parameter with index `id` in `store`. Repeated calls return the
    /// same node so its gradient accumulates in one place.
    pub fn param(&mut self, store: &'p ParamStore, id: usize) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let v = self.push(Cow::Borrowed(store.tensor(id)), Op::Param(id));
        self.params.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let ((m, k), (k2, n)) = (dims(ta), dims(tb));
        if k != k2 {
            return Err(mismatch("matmul", ta, tb));
        }
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, ta.data(), false, tb.data(), false, &mut out, false);
        Ok(self.owned(matrix(m, n, out), Op::MatMul(a, b)))
    }

    /// `a · bᵀ` without materializing the transpose.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let ((m, k), (n, k2)) = (dims(ta), dims(tb));
        if k != k2 {
            return Err(mismatch("matmul_nt", ta, tb));
        }
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, ta.data(), false, tb.data(), true, &mut out, false);
        Ok(self.owned(matrix(m, n, out), Op::MatMulNt(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if dims(ta) != dims(tb) {
            return Err(mismatch("add", ta, tb));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x + y).collect();
        let (m, n) = dims(ta);
        Ok(self.owned(matrix(m, n, data), Op::Add(a, b)))
    }

    /// Adds the `1×n` row `bias` to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(bias));
        let (m, n) = dims(ta);
        if tb.len() != n {
            return Err(mismatch("add_row", ta, tb));
        }
        let b = tb.data();
        let mut data = ta.data().to_vec();
        for row in data.chunks_mut(n.max(1)) {
            row.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        Ok(self.owned(matrix(m, n, data), Op::AddRow(a, bias)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if dims(ta) != dims(tb) {
            return Err(mismatch("mul", ta, tb));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).collect();
        let (m, n) = dims(ta);
        Ok(self.owned(matrix(m, n, data), Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let ta = self.value(a);
        let (m, n) = dims(ta);
        let data = ta.data().iter().map(|x| x * c).collect();
        self.owned(matrix(m, n, data), Op::Scale(a, c))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let (m, n) = dims(ta);
        let data = ta.data().iter().map(|&x| x.max(0.0)).collect();
        self.owned(matrix(m, n, data), Op::Relu(a))
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let (m, n) = dims(ta);
        let mut data = ta.data().to_vec();
        for row in data.chunks_mut(n.max(1)) {
            softmax_in_place(row);
        }
        self.owned(matrix(m, n, data), Op::Softmax(a))
    }

    /// Row-wise layer normalization followed by the affine map
    /// `gamma ⊙ x̂ + beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let tx = self.value(x);
        let (m, n) = dims(tx);
        let (tg, tb) = (self.value(gamma), self.value(beta));
        if tg.len() != n || tb.len() != n {
            return Err(mismatch("layer_norm", tx, tg));
        }
        let (g, b) = (tg.data(), tb.data());
        let mut xhat = vec![0.0; m * n];
        let mut inv_std = vec![0.0; m];
        let mut out = vec![0.0; m * n];
        for r in 0..m {
            let row = &tx.data()[r * n..(r + 1) * n];
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let is = 1.0 / (var + eps).sqrt();
            inv_std[r] = is;
            for c in 0..n {
                let h = (row[c] - mean) * is;
                xhat[r * n + c] = h;
                out[r * n + c] = g[c] * h + b[c];
            }
        }
        Ok(self.owned(
            matrix(m, n, out),
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
        ))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let (m, n) = dims(ta);
        let data = transposed(m, n, ta.data());
        self.owned(matrix(n, m, data), Op::Transpose(a))
    }

    /// Concatenation along the given axis (0 = rows, 1 = columns).
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        match axis {
            0 => self.concat_rows(parts),
            1 => self.concat_cols(parts),
            _ => Err(Error::Dimension {
                op: "concat",
                left: vec![axis],
                right: vec![2],
            }),
        }
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let m = parts.first().map_or(0, |&v| self.value(v).rows());
        let mut total = 0;
        for &p in parts {
            let t = self.value(p);
            if t.rows() != m {
                return Err(mismatch("concat_cols", self.value(parts[0]), t));
            }
            total += t.cols();
        }
        let mut data = Vec::with_capacity(m * total);
        for r in 0..m {
            for &p in parts {
                data.extend_from_slice(self.value(p).row_slice(r));
            }
        }
        Ok(self.owned(matrix(m, total, data), Op::ConcatCols(parts.to_vec())))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let n = parts.first().map_or(0, |&v| self.value(v).cols());
        let mut rows = 0;
        let mut data = Vec::new();
        for &p in parts {
            let t = self.value(p);
            if t.cols() != n {
                return Err(mismatch("concat_rows", self.value(parts[0]), t));
            }
            rows += t.rows();
            data.extend_from_slice(t.data());
        }
        Ok(self.owned(matrix(rows, n, data), Op::ConcatRows(parts.to_vec())))
    }

    /// Columns `start..end` of `a`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let ta = self.value(a);
        let (m, n) = dims(ta);
        if start > end || end > n {
            return Err(Error::Dimension {
                op: "slice_cols",
                left: vec![m, n],
                right: vec![start, end],
            });
        }
        let w = end - start;
        let mut data = Vec::with_capacity(m * w);
        for r in 0..m {
            data.extend_from_slice(&ta.row_slice(r)[start..end]);
        }
        Ok(self.owned(matrix(m, w, data), Op::SliceCols(a, start)))
    }

    /// Rows `start..end` of `a`.
    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let ta = self.value(a);
        let (m, n) = dims(ta);
        if start > end || end > m {
            return Err(Error::Dimension {
                op: "slice_rows",
                left: vec![m, n],
                right: vec![start, end],
            });
        }
        let data = ta.data()[start * n..end * n].to_vec();
        Ok(self.owned(matrix(end - start, n, data), Op::SliceRows(a, start)))
    }

    /// Gathers rows of `table` by index.
    pub fn embedding(&mut self, table: Var, indices: &[usize]) -> Result<Var> {
        let tt = self.value(table);
        let (m, n) = dims(tt);
        let mut data = Vec::with_capacity(indices.len() * n);
        for &i in indices {
            if i >= m {
                return Err(Error::Dimension {
                    op: "embedding",
                    left: vec![m, n],
                    right: vec![i],
                });
            }
            data.extend_from_slice(tt.row_slice(i));
        }
        Ok(self.owned(
            matrix(indices.len(), n, data),
            Op::Embedding(table, indices.to_vec()),
        ))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.owned(matrix(1, 1, vec![s]), Op::SumAll(a))
    }

    /// Softmax cross-entropy of a single row of logits against a class index.
    pub fn cross_entropy(&mut self, logits: Var, target: usize) -> Result<Var> {
        let tl = self.value(logits);
        if tl.rows() != 1 || target >= tl.cols() {
            return Err(Error::Dimension {
                op: "cross_entropy",
                left: tl.shape().to_vec(),
                right: vec![target],
            });
        }
        let mut probs = tl.data().to_vec();
        let lse = log_sum_exp(&probs);
        let loss = lse - probs[target];
        for p in probs.iter_mut() {
            *p = (*p - lse).exp();
        }
        Ok(self.owned(
            matrix(1, 1, vec![loss]),
            Op::CrossEntropy {
                logits,
                target,
                probs,
            },
        ))
    }

    /// Mean squared error against a constant target.
    pub fn mse(&mut self, pred: Var, target: &[f64]) -> Result<Var> {
        let tp = self.value(pred);
        if tp.len() != target.len() || target.is_empty() {
            return Err(Error::Dimension {
                op: "mse",
                left: tp.shape().to_vec(),
                right: vec![target.len()],
            });
        }
        let loss = tp
            .data()
            .iter()
            .zip(target)
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / target.len() as f64;
        Ok(self.owned(
            matrix(1, 1, vec![loss]),
            Op::Mse {
                pred,
                target: target.to_vec(),
            },
        ))
    }

    /// `1 − cos(pred, target)`; both norms are floored at `eps`.
    pub fn cosine_loss(&mut self, pred: Var, target: &[f64], eps: f64) -> Result<Var> {
        let tp = self.value(pred);
        if tp.len() != target.len() {
            return Err(Error::Dimension {
                op: "cosine_loss",
                left: tp.shape().to_vec(),
                right: vec![target.len()],
            });
        }
        let (cos, _, _) = cosine_parts(tp.data(), target, eps);
        Ok(self.owned(
            matrix(1, 1, vec![1.0 - cos]),
            Op::Cosine {
                pred,
                target: target.to_vec(),
                eps,
            },
        ))
    }

    /// Runs the backward pass from a scalar node and returns the gradient of
    /// every parameter that took part in the forward pass.
    pub fn backward(&self, loss: Var, store: &ParamStore) -> Result<Grads> {
        let mut grads = Grads::zeros_like(store);
        self.backward_into(loss, &mut grads)?;
        Ok(grads)
    }

    /// Like [`Graph::backward`] but accumulates into existing buffers.
    pub fn backward_into(&self, loss: Var, out: &mut Grads) -> Result<()> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(Error::Dimension {
                op: "backward",
                left: lv.shape().to_vec(),
                right: vec![1],
            });
        }
        let mut g: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        g[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(dy) = g[i].take() else { continue };
            let node = &self.nodes[i];
            let (m, n) = dims(&node.value);
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => out.accumulate(*id, &dy),
                Op::MatMul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let k = ta.cols();
                    gemm(m, n, k, &dy, false, tb.data(), true, acc(&mut g, *a, m * k), true);
                    gemm(k, m, n, ta.data(), true, &dy, false, acc(&mut g, *b, k * n), true);
                }
                Op::MatMulNt(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let k = ta.cols();
                    gemm(m, n, k, &dy, false, tb.data(), false, acc(&mut g, *a, m * k), true);
                    gemm(n, m, k, &dy, true, ta.data(), false, acc(&mut g, *b, n * k), true);
                }
                Op::Add(a, b) => {
                    add_into(acc(&mut g, *a, m * n), &dy);
                    add_into(acc(&mut g, *b, m * n), &dy);
                }
                Op::AddRow(a, b) => {
                    add_into(acc(&mut g, *a, m * n), &dy);
                    let gb = acc(&mut g, *b, n);
                    for row in dy.chunks(n.max(1)) {
                        add_into(gb, row);
                    }
                }
                Op::Mul(a, b) => {
                    let (ta, tb) = (self.value(*a).data(), self.value(*b).data());
                    let ga = acc(&mut g, *a, m * n);
                    for j in 0..m * n {
                        ga[j] += dy[j] * tb[j];
                    }
                    let gb = acc(&mut g, *b, m * n);
                    for j in 0..m * n {
                        gb[j] += dy[j] * ta[j];
                    }
                }
                Op::Scale(a, c) => {
                    let ga = acc(&mut g, *a, m * n);
                    ga.iter_mut().zip(&dy).for_each(|(x, d)| *x += c * d);
                }
                Op::Relu(a) => {
                    let ta = self.value(*a).data();
                    let ga = acc(&mut g, *a, m * n);
                    for j in 0..m * n {
                        if ta[j] > 0.0 {
                            ga[j] += dy[j];
                        }
                    }
                }
                Op::Softmax(a) => {
                    let y = node.value.data();
                    let ga = acc(&mut g, *a, m * n);
                    for r in 0..m {
                        let s = r * n..(r + 1) * n;
                        let dot: f64 = y[s.clone()].iter().zip(&dy[s.clone()]).map(|(p, d)| p * d).sum();
                        for j in s {
                            ga[j] += y[j] * (dy[j] - dot);
                        }
                    }
                }
                Op::LayerNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    inv_std,
                } => {
                    let gam = self.value(*gamma).data().to_vec();
                    {
                        let gg = acc(&mut g, *gamma, n);
                        for r in 0..m {
                            for c in 0..n {
                                gg[c] += dy[r * n + c] * xhat[r * n + c];
                            }
                        }
                    }
                    {
                        let gb = acc(&mut g, *beta, n);
                        for row in dy.chunks(n.max(1)) {
                            add_into(gb, row);
                        }
                    }
                    let gx = acc(&mut g, *x, m * n);
                    let nf = n as f64;
                    for r in 0..m {
                        let mut sum_d = 0.0;
                        let mut sum_dx = 0.0;
                        for c in 0..n {
                            let d = dy[r * n + c] * gam[c];
                            sum_d += d;
                            sum_dx += d * xhat[r * n + c];
                        }
                        for c in 0..n {
                            let d = dy[r * n + c] * gam[c];
                            gx[r * n + c] +=
                                inv_std[r] / nf * (nf * d - sum_d - xhat[r * n + c] * sum_dx);
                        }
                    }
                }
                Op::Transpose(a) => {
                    let t = transposed(m, n, &dy);
                    add_into(acc(&mut g, *a, m * n), &t);
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let w = self.value(p).cols();
                        let gp = acc(&mut g, p, m * w);
                        for r in 0..m {
                            add_into(&mut gp[r * w..(r + 1) * w], &dy[r * n + off..r * n + off + w]);
                        }
                        off += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let len = self.value(p).len();
                        add_into(acc(&mut g, p, len), &dy[off..off + len]);
                        off += len;
                    }
                }
                Op::SliceCols(a, start) => {
                    let src = self.value(*a).cols();
                    let ga = acc(&mut g, *a, m * src);
                    for r in 0..m {
                        add_into(&mut ga[r * src + start..r * src + start + n], &dy[r * n..(r + 1) * n]);
                    }
                }
                Op::SliceRows(a, start) => {
                    let len = self.value(*a).len();
                    let ga = acc(&mut g, *a, len);
                    add_into(&mut ga[start * n..start * n + m * n], &dy);
                }
                Op::Embedding(table, idx) => {
                    let len = self.value(*table).len();
                    let gt = acc(&mut g, *table, len);
                    for (r, &i) in idx.iter().enumerate() {
                        add_into(&mut gt[i * n..(i + 1) * n], &dy[r * n..(r + 1) * n]);
                    }
                }
                Op::SumAll(a) => {
                    let len = self.value(*a).len();
                    acc(&mut g, *a, len).iter_mut().for_each(|x| *x += dy[0]);
                }
                Op::CrossEntropy {
                    logits,
                    target,
                    probs,
                } => {
                    let gl = acc(&mut g, *logits, probs.len());
                    for (j, p) in probs.iter().enumerate() {
                        let onehot = if j == *target { 1.0 } else { 0.0 };
                        gl[j] += dy[0] * (p - onehot);
                    }
                }
                Op::Mse { pred, target } => {
                    let tp = self.value(*pred).data();
                    let scale = 2.0 / target.len() as f64;
                    let gp = acc(&mut g, *pred, target.len());
                    for j in 0..target.len() {
                        gp[j] += dy[0] * scale * (tp[j] - target[j]);
                    }
                }
                Op::Cosine { pred, target, eps } => {
                    let p = self.value(*pred).data();
                    let (cos, pn, tn) = cosine_parts(p, target, *eps);
                    let gp = acc(&mut g, *pred, target.len());
                    let p_free = pn > *eps;
                    for j in 0..target.len() {
                        let mut d = target[j] / (pn * tn);
                        if p_free {
                            d -= cos * p[j] / (pn * pn);
                        }
                        gp[j] -= dy[0] * d;
                    }
                }
            }
        }
        Ok(())
    }
}

fn acc(g: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut [f64] {
    g[v.0].get_or_insert_with(|| vec![0.0; len])
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}

fn transposed(m: usize, n: usize, x: &[f64]) -> Vec<f64> {
    let mut t = vec![0.0; m * n];
    for r in 0..m {
        for c in 0..n {
            t[c * m + r] = x[r * n + c];
        }
    }
    t
}

pub(crate) fn log_sum_exp(x: &[f64]) -> f64 {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + x.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Returns `(cos, max(|p|, eps), max(|t|, eps))`.
fn cosine_parts(p: &[f64], t: &[f64], eps: f64) -> (f64, f64, f64) {
    let dot: f64 = p.iter().zip(t).map(|(a, b)| a * b).sum();
    let pn = p.iter().map(|a| a * a).sum::<f64>().sqrt().max(eps);
    let tn = t.iter().map(|a| a * a).sum::<f64>().sqrt().max(eps);
    (dot / (pn * tn), pn, tn)
}
