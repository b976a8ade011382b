//! Reverse-mode automatic differentiation on an eager tape.
//!
//! Values are computed at op-construction time; `backward` walks the tape in
//! reverse creation order (a valid topological order) and accumulates
//! gradients. Every op validates shapes and checks its output for NaN/Inf,
//! so a numeric failure surfaces with the operation named instead of
//! poisoning downstream math.

use super::params::{BoundParams, ParamSet};
use super::tensor::{NnError, Tensor};

/// Handle to a node on the tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    MatMul(Var, Var),
    MatMulNT(Var, Var),
    AddRowBroadcast(Var, Var),
    Tanh(Var),
    Sigmoid(Var),
    SoftmaxRows(Var),
    LogSoftmaxRows(Var),
    CausalSoftmaxScaled(Var, f64),
    Sum(Var),
    RowSums(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    RowSlice(Var, usize),
    SliceCols(Var, usize, usize),
    MulColBroadcast(Var, Var),
    PickPerRow(Var, Vec<usize>),
    LayerNormRows(Var, Vec<f64>),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::MatMul(..) => "matmul",
            Op::MatMulNT(..) => "matmul_nt",
            Op::AddRowBroadcast(..) => "add_row_broadcast",
            Op::Tanh(..) => "tanh",
            Op::Sigmoid(..) => "sigmoid",
            Op::SoftmaxRows(..) => "softmax_rows",
            Op::LogSoftmaxRows(..) => "log_softmax_rows",
            Op::CausalSoftmaxScaled(..) => "causal_softmax_scaled",
            Op::Sum(..) => "sum",
            Op::RowSums(..) => "row_sums",
            Op::ConcatCols(..) => "concat_cols",
            Op::ConcatRows(..) => "concat_rows",
            Op::RowSlice(..) => "row_slice",
            Op::SliceCols(..) => "slice_cols",
            Op::MulColBroadcast(..) => "mul_col_broadcast",
            Op::PickPerRow(..) => "pick_per_row",
            Op::LayerNormRows(..) => "layer_norm_rows",
        }
    }
}

struct Node {
    op: Op,
    value: Tensor,
}

/// Eager computation tape.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Value of a node.
    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op: Op, value: Tensor) -> Result<Var, NnError> {
        value.check_finite(op.name())?;
        self.nodes.push(Node { op, value });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Inserts a constant or parameter value into the graph.
    pub fn leaf(&mut self, value: Tensor) -> Result<Var, NnError> {
        self.push(Op::Leaf, value)
    }

    /// Binds every tensor of a parameter set as a leaf, in order.
    pub fn bind(&mut self, params: &ParamSet) -> Result<BoundParams, NnError> {
        let mut vars = Vec::with_capacity(params.len());
        for t in params.tensors() {
            vars.push(self.leaf(t.clone())?);
        }
        Ok(BoundParams { vars })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let v = self.value(a).add(self.value(b))?;
        self.push(Op::Add(a, b), v)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let v = self.value(a).sub(self.value(b))?;
        self.push(Op::Sub(a, b), v)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let v = self.value(a).mul(self.value(b))?;
        self.push(Op::Mul(a, b), v)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var, NnError> {
        let v = self.value(a).scale(c);
        self.push(Op::Scale(a, c), v)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let v = self.value(a).matmul(self.value(b))?;
        self.push(Op::MatMul(a, b), v)
    }

    /// `a @ b^T`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let v = self.value(a).matmul_nt(self.value(b))?;
        self.push(Op::MatMulNT(a, b), v)
    }

    /// Adds a `1 x d` row vector to every row of a `n x d` matrix.
    pub fn add_row_broadcast(&mut self, mat: Var, row: Var) -> Result<Var, NnError> {
        let m = self.value(mat);
        let r = self.value(row);
        if r.rows() != 1 || r.cols() != m.cols() {
            return Err(NnError::Dimension(format!(
                "add_row_broadcast: {:?} + {:?}",
                m.shape(),
                r.shape()
            )));
        }
        let cols = m.cols();
        let mut out = m.clone();
        for i in 0..out.numel() {
            out.data_mut()[i] += r.data()[i % cols];
        }
        self.push(Op::AddRowBroadcast(mat, row), out)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, NnError> {
        let v = self.value(a).map(f64::tanh);
        self.push(Op::Tanh(a), v)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, NnError> {
        let v = self.value(a).map(|x| 1.0 / (1.0 + (-x).exp()));
        self.push(Op::Sigmoid(a), v)
    }

    /// Row-wise softmax with max subtraction.
    pub fn softmax_rows(&mut self, a: Var) -> Result<Var, NnError> {
        let x = self.value(a);
        let (r, c) = (x.rows(), x.cols());
        let mut out = Tensor::zeros(&[r, c]);
        for i in 0..r {
            softmax_row(x.row(i), &mut out.data_mut()[i * c..(i + 1) * c]);
        }
        self.push(Op::SoftmaxRows(a), out)
    }

    /// Row-wise log-softmax.
    pub fn log_softmax_rows(&mut self, a: Var) -> Result<Var, NnError> {
        let x = self.value(a);
        let (r, c) = (x.rows(), x.cols());
        let mut out = Tensor::zeros(&[r, c]);
        for i in 0..r {
            let row = x.row(i);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
            for (o, &v) in out.data_mut()[i * c..(i + 1) * c].iter_mut().zip(row) {
                *o = v - lse;
            }
        }
        self.push(Op::LogSoftmaxRows(a), out)
    }

    /// Row-wise softmax restricted to the causal prefix: row `t` of the
    /// square score matrix is softmaxed over columns `0..=t` (after scaling
    /// by `scale`), columns beyond `t` get exactly zero weight.
    ///
    /// Equivalent to masking with the lower-triangular matrix, subtracting
    /// the large-constant penalty on excluded entries, scaling, and taking
    /// a full softmax: excluded entries underflow to zero either way.
    pub fn causal_softmax_scaled(&mut self, a: Var, scale: f64) -> Result<Var, NnError> {
        let x = self.value(a);
        let (r, c) = (x.rows(), x.cols());
        if r != c {
            return Err(NnError::Dimension(format!(
                "causal_softmax: square matrix required, got {:?}",
                x.shape()
            )));
        }
        let mut out = Tensor::zeros(&[r, c]);
        for t in 0..r {
            let row = &x.row(t)[..=t];
            let dst = &mut out.data_mut()[t * c..t * c + t + 1];
            let max = row
                .iter()
                .map(|&v| v * scale)
                .fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (o, &v) in dst.iter_mut().zip(row) {
                *o = (v * scale - max).exp();
                sum += *o;
            }
            for o in dst.iter_mut() {
                *o /= sum;
            }
        }
        self.push(Op::CausalSoftmaxScaled(a, scale), out)
    }

    /// Sum of all entries, as a 1x1 tensor.
    pub fn sum(&mut self, a: Var) -> Result<Var, NnError> {
        let v = Tensor::scalar(self.value(a).sum());
        self.push(Op::Sum(a), v)
    }

    /// Mean of all entries, as a 1x1 tensor.
    pub fn mean(&mut self, a: Var) -> Result<Var, NnError> {
        let n = self.value(a).numel() as f64;
        let s = self.sum(a)?;
        self.scale(s, 1.0 / n)
    }

    /// Per-row sums: `n x c` -> `n x 1`.
    pub fn row_sums(&mut self, a: Var) -> Result<Var, NnError> {
        let x = self.value(a);
        let (r, c) = (x.rows(), x.cols());
        let mut out = Tensor::zeros(&[r, 1]);
        for i in 0..r {
            out.data_mut()[i] = x.row(i).iter().sum();
        }
        let _ = c;
        self.push(Op::RowSums(a), out)
    }

    /// Horizontal concatenation of matrices with equal row counts.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, NnError> {
        if parts.is_empty() {
            return Err(NnError::Dimension("concat_cols: empty input".into()));
        }
        let r = self.value(parts[0]).rows();
        if parts.iter().any(|&p| self.value(p).rows() != r) {
            return Err(NnError::Dimension("concat_cols: row counts differ".into()));
        }
        let total: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut out = Tensor::zeros(&[r, total]);
        let mut off = 0;
        for &p in parts {
            let t = self.value(p);
            let c = t.cols();
            for i in 0..r {
                let dst = i * total + off;
                out.data_mut()[dst..dst + c].copy_from_slice(t.row(i));
            }
            off += c;
        }
        self.push(Op::ConcatCols(parts.to_vec()), out)
    }

    /// Vertical concatenation of matrices with equal column counts.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, NnError> {
        if parts.is_empty() {
            return Err(NnError::Dimension("concat_rows: empty input".into()));
        }
        let c = self.value(parts[0]).cols();
        if parts.iter().any(|&p| self.value(p).cols() != c) {
            return Err(NnError::Dimension("concat_rows: col counts differ".into()));
        }
        let total: usize = parts.iter().map(|&p| self.value(p).rows()).sum();
        let mut out = Tensor::zeros(&[total, c]);
        let mut off = 0;
        for &p in parts {
            let t = self.value(p);
            let n = t.numel();
            out.data_mut()[off..off + n].copy_from_slice(t.data());
            off += n;
        }
        self.push(Op::ConcatRows(parts.to_vec()), out)
    }

    /// Extracts row `r` as a `1 x c` matrix.
    pub fn row_slice(&mut self, a: Var, r: usize) -> Result<Var, NnError> {
        let x = self.value(a);
        if r >= x.rows() {
            return Err(NnError::Dimension(format!(
                "row_slice: row {r} of {:?}",
                x.shape()
            )));
        }
        let v = Tensor::new(vec![1, x.cols()], x.row(r).to_vec())?;
        self.push(Op::RowSlice(a, r), v)
    }

    /// Extracts columns `[start, start+len)`.
    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var, NnError> {
        let x = self.value(a);
        let (r, c) = (x.rows(), x.cols());
        if start + len > c {
            return Err(NnError::Dimension(format!(
                "slice_cols: [{start}, {}) of {c} cols",
                start + len
            )));
        }
        let mut out = Tensor::zeros(&[r, len]);
        for i in 0..r {
            out.data_mut()[i * len..(i + 1) * len]
                .copy_from_slice(&x.row(i)[start..start + len]);
        }
        self.push(Op::SliceCols(a, start, len), out)
    }

    /// Scales each row of `a` (`n x d`) by the matching entry of `col` (`n x 1`).
    pub fn mul_col_broadcast(&mut self, a: Var, col: Var) -> Result<Var, NnError> {
        let x = self.value(a);
        let w = self.value(col);
        if w.cols() != 1 || w.rows() != x.rows() {
            return Err(NnError::Dimension(format!(
                "mul_col_broadcast: {:?} * {:?}",
                x.shape(),
                w.shape()
            )));
        }
        let c = x.cols();
        let mut out = x.clone();
        for i in 0..x.rows() {
            let s = w.data()[i];
            for v in &mut out.data_mut()[i * c..(i + 1) * c] {
                *v *= s;
            }
        }
        self.push(Op::MulColBroadcast(a, col), out)
    }

    /// Selects one entry per row: `out[i] = a[i][idx[i]]`, shape `n x 1`.
    pub fn pick_per_row(&mut self, a: Var, idx: &[usize]) -> Result<Var, NnError> {
        let x = self.value(a);
        if idx.len() != x.rows() {
            return Err(NnError::Dimension(format!(
                "pick_per_row: {} indices for {} rows",
                idx.len(),
                x.rows()
            )));
        }
        if idx.iter().any(|&j| j >= x.cols()) {
            return Err(NnError::Dimension("pick_per_row: index out of range".into()));
        }
        let data: Vec<f64> = idx.iter().enumerate().map(|(i, &j)| x.at2(i, j)).collect();
        let v = Tensor::new(vec![x.rows(), 1], data)?;
        self.push(Op::PickPerRow(a, idx.to_vec()), v)
    }

    /// Row-wise layer normalization without affine parameters.
    pub fn layer_norm_rows(&mut self, a: Var) -> Result<Var, NnError> {
        const EPS: f64 = 1e-6;
        let x = self.value(a);
        let (r, c) = (x.rows(), x.cols());
        let mut out = Tensor::zeros(&[r, c]);
        let mut inv_std = Vec::with_capacity(r);
        for i in 0..r {
            let row = x.row(i);
            let mu = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / c as f64;
            let s = 1.0 / (var + EPS).sqrt();
            inv_std.push(s);
            for (o, &v) in out.data_mut()[i * c..(i + 1) * c].iter_mut().zip(row) {
                *o = (v - mu) * s;
            }
        }
        self.push(Op::LayerNormRows(a, inv_std), out)
    }

    /// Back-propagates from a scalar loss node, returning per-node gradients.
    ///
    /// Gradients are populated for every node that the loss depends on;
    /// unreachable nodes keep a zero gradient.
    pub fn backward(&self, loss: Var) -> Result<Gradients, NnError> {
        let lv = self.value(loss);
        if lv.numel() != 1 {
            return Err(NnError::Dimension(format!(
                "backward: loss must be scalar, got {:?}",
                lv.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for i in (0..=loss.0).rev() {
            let g = match grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            let node = &self.nodes[i];
            self.accumulate(node, &g, &mut grads)?;
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn accumulate(
        &self,
        node: &Node,
        g: &Tensor,
        grads: &mut [Option<Tensor>],
    ) -> Result<(), NnError> {
        let add_into = |grads: &mut [Option<Tensor>], v: Var, delta: Tensor| -> Result<(), NnError> {
            delta.check_finite(node.op.name())?;
            match &mut grads[v.0] {
                Some(acc) => {
                    for (a, d) in acc.data_mut().iter_mut().zip(delta.data()) {
                        *a += d;
                    }
                }
                slot @ None => *slot = Some(delta),
            }
            Ok(())
        };

        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                add_into(grads, *a, g.clone())?;
                add_into(grads, *b, g.clone())?;
            }
            Op::Sub(a, b) => {
                add_into(grads, *a, g.clone())?;
                add_into(grads, *b, g.scale(-1.0))?;
            }
            Op::Mul(a, b) => {
                add_into(grads, *a, g.mul(self.value(*b))?)?;
                add_into(grads, *b, g.mul(self.value(*a))?)?;
            }
            Op::Scale(a, c) => add_into(grads, *a, g.scale(*c))?,
            Op::MatMul(a, b) => {
                add_into(grads, *a, g.matmul_nt(self.value(*b))?)?;
                add_into(grads, *b, self.value(*a).matmul_tn(g)?)?;
            }
            Op::MatMulNT(a, b) => {
                add_into(grads, *a, g.matmul(self.value(*b))?)?;
                add_into(grads, *b, g.matmul_tn(self.value(*a))?)?;
            }
            Op::AddRowBroadcast(mat, row) => {
                add_into(grads, *mat, g.clone())?;
                let c = g.cols();
                let mut rb = Tensor::zeros(&[1, c]);
                for i in 0..g.rows() {
                    for (acc, &v) in rb.data_mut().iter_mut().zip(g.row(i)) {
                        *acc += v;
                    }
                }
                add_into(grads, *row, rb)?;
            }
            Op::Tanh(a) => {
                let y = &node.value;
                let delta = g.mul(&y.map(|v| 1.0 - v * v))?;
                add_into(grads, *a, delta)?;
            }
            Op::Sigmoid(a) => {
                let y = &node.value;
                let delta = g.mul(&y.map(|v| v * (1.0 - v)))?;
                add_into(grads, *a, delta)?;
            }
            Op::SoftmaxRows(a) => {
                let y = &node.value;
                let (r, c) = (y.rows(), y.cols());
                let mut dx = Tensor::zeros(&[r, c]);
                for i in 0..r {
                    let yi = y.row(i);
                    let gi = g.row(i);
                    let dot: f64 = yi.iter().zip(gi).map(|(&yv, &gv)| yv * gv).sum();
                    for j in 0..c {
                        dx.set2(i, j, yi[j] * (gi[j] - dot));
                    }
                }
                add_into(grads, *a, dx)?;
            }
            Op::CausalSoftmaxScaled(a, scale) => {
                let y = &node.value;
                let (r, c) = (y.rows(), y.cols());
                let mut dx = Tensor::zeros(&[r, c]);
                for t in 0..r {
                    let yi = &y.row(t)[..=t];
                    let gi = &g.row(t)[..=t];
                    let dot: f64 = yi.iter().zip(gi).map(|(&yv, &gv)| yv * gv).sum();
                    let dst = &mut dx.data_mut()[t * c..t * c + t + 1];
                    for j in 0..=t {
                        dst[j] = scale * yi[j] * (gi[j] - dot);
                    }
                }
                add_into(grads, *a, dx)?;
            }
            Op::LogSoftmaxRows(a) => {
                // softmax = exp(log_softmax)
                let y = &node.value;
                let (r, c) = (y.rows(), y.cols());
                let mut dx = Tensor::zeros(&[r, c]);
                for i in 0..r {
                    let gi = g.row(i);
                    let gsum: f64 = gi.iter().sum();
                    let yi = y.row(i);
                    for j in 0..c {
                        dx.set2(i, j, gi[j] - yi[j].exp() * gsum);
                    }
                }
                add_into(grads, *a, dx)?;
            }
            Op::Sum(a) => {
                let s = g.data()[0];
                add_into(grads, *a, Tensor::full(self.value(*a).shape(), s))?;
            }
            Op::RowSums(a) => {
                let x = self.value(*a);
                let (r, c) = (x.rows(), x.cols());
                let mut dx = Tensor::zeros(&[r, c]);
                for i in 0..r {
                    let gv = g.data()[i];
                    for j in 0..c {
                        dx.set2(i, j, gv);
                    }
                }
                add_into(grads, *a, dx)?;
            }
            Op::ConcatCols(parts) => {
                let total = g.cols();
                let mut off = 0;
                for &p in parts {
                    let t = self.value(p);
                    let (r, c) = (t.rows(), t.cols());
                    let mut dp = Tensor::zeros(&[r, c]);
                    for i in 0..r {
                        dp.data_mut()[i * c..(i + 1) * c]
                            .copy_from_slice(&g.data()[i * total + off..i * total + off + c]);
                    }
                    add_into(grads, p, dp)?;
                    off += c;
                }
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for &p in parts {
                    let t = self.value(p);
                    let n = t.numel();
                    let dp = Tensor::new(t.shape().to_vec(), g.data()[off..off + n].to_vec())?;
                    add_into(grads, p, dp)?;
                    off += n;
                }
            }
            Op::RowSlice(a, r) => {
                let x = self.value(*a);
                let c = x.cols();
                let mut dx = Tensor::zeros(&[x.rows(), c]);
                dx.data_mut()[r * c..(r + 1) * c].copy_from_slice(g.data());
                add_into(grads, *a, dx)?;
            }
            Op::SliceCols(a, start, len) => {
                let x = self.value(*a);
                let (r, c) = (x.rows(), x.cols());
                let mut dx = Tensor::zeros(&[r, c]);
                for i in 0..r {
                    dx.data_mut()[i * c + start..i * c + start + len]
                        .copy_from_slice(&g.data()[i * len..(i + 1) * len]);
                }
                add_into(grads, *a, dx)?;
            }
            Op::MulColBroadcast(a, col) => {
                let x = self.value(*a);
                let w = self.value(*col);
                let c = x.cols();
                let mut dx = Tensor::zeros(&[x.rows(), c]);
                let mut dw = Tensor::zeros(&[x.rows(), 1]);
                for i in 0..x.rows() {
                    let s = w.data()[i];
                    let mut acc = 0.0;
                    for j in 0..c {
                        dx.set2(i, j, g.at2(i, j) * s);
                        acc += g.at2(i, j) * x.at2(i, j);
                    }
                    dw.data_mut()[i] = acc;
                }
                add_into(grads, *a, dx)?;
                add_into(grads, *col, dw)?;
            }
            Op::PickPerRow(a, idx) => {
                let x = self.value(*a);
                let mut dx = Tensor::zeros(&[x.rows(), x.cols()]);
                for (i, &j) in idx.iter().enumerate() {
                    dx.set2(i, j, g.data()[i]);
                }
                add_into(grads, *a, dx)?;
            }
            Op::LayerNormRows(a, inv_std) => {
                let y = &node.value;
                let (r, c) = (y.rows(), y.cols());
                let mut dx = Tensor::zeros(&[r, c]);
                for i in 0..r {
                    let yi = y.row(i);
                    let gi = g.row(i);
                    let gmean: f64 = gi.iter().sum::<f64>() / c as f64;
                    let gymean: f64 =
                        gi.iter().zip(yi).map(|(&gv, &yv)| gv * yv).sum::<f64>() / c as f64;
                    let s = inv_std[i];
                    for j in 0..c {
                        dx.set2(i, j, s * (gi[j] - gmean - yi[j] * gymean));
                    }
                }
                add_into(grads, *a, dx)?;
            }
        }
        Ok(())
    }
}

fn softmax_row(row: &[f64], out: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &v) in out.iter_mut().zip(row) {
        *o = (v - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Gradients produced by [`Graph::backward`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the loss with respect to a node; zeros if unreachable.
    pub fn of(&self, v: Var, graph: &Graph) -> Tensor {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => Tensor::zeros(graph.value(v).shape()),
        }
    }

    /// Gradients for every bound parameter, aligned with the parameter set.
    pub fn for_params(&self, bound: &BoundParams, graph: &Graph) -> Vec<Tensor> {
        bound.vars.iter().map(|&v| self.of(v, graph)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_params_has_unit_gradient() {
        let mut g = Graph::new();
        let w = g
            .leaf(Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap())
            .unwrap();
        let loss = g.sum(w).unwrap();
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.of(w, &g).data(), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn quadratic_gradient_equals_weights() {
        let mut g = Graph::new();
        let w = g
            .leaf(Tensor::from_rows(&[vec![0.5, -1.5], vec![2.0, 0.0]]).unwrap())
            .unwrap();
        let sq = g.mul(w, w).unwrap();
        let s = g.sum(sq).unwrap();
        let loss = g.scale(s, 0.5).unwrap();
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.of(w, &g).data(), &[0.5, -1.5, 2.0, 0.0]);
    }

    #[test]
    fn unreachable_parameter_gets_zero_gradient() {
        let mut g = Graph::new();
        let used = g.leaf(Tensor::scalar(3.0)).unwrap();
        let unused = g.leaf(Tensor::from_rows(&[vec![1.0, 2.0]]).unwrap()).unwrap();
        let loss = g.sum(used).unwrap();
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.of(unused, &g).data(), &[0.0, 0.0]);
        assert_eq!(grads.of(used, &g).data(), &[1.0]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut g = Graph::new();
        let w = g.leaf(Tensor::from_rows(&[vec![1.0, 2.0]]).unwrap()).unwrap();
        assert!(g.backward(w).is_err());
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut g = Graph::new();
        let x = g
            .leaf(Tensor::from_rows(&[vec![1.0, 2.0, 3.0], vec![-5.0, 0.0, 5.0]]).unwrap())
            .unwrap();
        let s = g.softmax_rows(x).unwrap();
        for i in 0..2 {
            let sum: f64 = g.value(s).row(i).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn matmul_backward_matches_manual() {
        // loss = sum(A @ B)  =>  dA = 1 @ B^T, dB = A^T @ 1
        let mut g = Graph::new();
        let a = g
            .leaf(Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap())
            .unwrap();
        let b = g
            .leaf(Tensor::from_rows(&[vec![5.0, 6.0], vec![7.0, 8.0]]).unwrap())
            .unwrap();
        let c = g.matmul(a, b).unwrap();
        let loss = g.sum(c).unwrap();
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.of(a, &g).data(), &[11.0, 15.0, 11.0, 15.0]);
        assert_eq!(grads.of(b, &g).data(), &[4.0, 4.0, 6.0, 6.0]);
    }

    #[test]
    fn nonfinite_forward_is_an_error() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::scalar(1e308)).unwrap();
        let doubled = g.add(x, x); // 2e308 overflows to inf
        assert!(matches!(doubled, Err(NnError::NonFinite(_))));
    }
}
