//! Reverse-mode autodiff over a linear tape.
//!
//! A [`Tape`] records one forward pass as a sequence of nodes in
//! topological order. [`Tape::backward`] walks the tape in reverse and
//! scatters parameter gradients into the [`ParamSet`] the forward pass
//! read from. Tapes are cheap to build and are discarded after each
//! optimization step.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use super::params::ParamSet;
use super::tensor::{Tensor, TensorError};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValueId(usize);

/// Symmetric sparse row-weight structure, used for the normalized
/// adjacency product in graph convolutions. Rows of logically deleted
/// nodes are empty. The backward pass relies on symmetry (`M = Mᵀ`).
#[derive(Debug, Clone)]
pub struct SparseSym {
    rows: Vec<Vec<(u32, f64)>>,
}

impl SparseSym {
    pub fn new(rows: Vec<Vec<(u32, f64)>>) -> Self {
        SparseSym { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `M · x` for dense `x` with `self.len()` rows.
    fn apply(&self, x: &Tensor) -> Tensor {
        let cols = x.cols();
        let mut out = Tensor::zeros(self.rows.len(), cols);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                let src = x.row(j as usize);
                let dst = &mut out.data_mut()[i * cols..(i + 1) * cols];
                for (d, s) in dst.iter_mut().zip(src.iter()) {
                    *d += w * s;
                }
            }
        }
        out
    }
}

enum Op {
    Constant,
    Param { slot: usize },
    MatMul { a: ValueId, b: ValueId },
    Add { a: ValueId, b: ValueId },
    Sub { a: ValueId, b: ValueId },
    Mul { a: ValueId, b: ValueId },
    AddRowBroadcast { x: ValueId, row: ValueId },
    BroadcastRows { row: ValueId, rows: usize },
    Relu { x: ValueId },
    Tanh { x: ValueId },
    Sigmoid { x: ValueId },
    AffineConst { x: ValueId, mul: f64 },
    Square { x: ValueId },
    SumAll { x: ValueId },
    ConcatCols { a: ValueId, b: ValueId },
    MeanPoolRows { x: ValueId, mask: Arc<Vec<bool>>, count: usize },
    SymAgg { m: Arc<SparseSym>, x: ValueId },
    RowSelect { x: ValueId, row: usize },
    LayerNorm { x: ValueId, gain: ValueId, bias: ValueId },
}

struct Node {
    value: Tensor,
    op: Op,
}

const LAYER_NORM_EPS: f64 = 1e-5;

/// Records a forward pass for reverse-mode differentiation.
pub struct Tape {
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    fn push(&mut self, value: Tensor, op: Op) -> ValueId {
        self.nodes.push(Node { value, op });
        ValueId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: ValueId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Records a constant (no gradient flows into it).
    pub fn constant(&mut self, t: Tensor) -> ValueId {
        self.push(t, Op::Constant)
    }

    pub fn scalar(&mut self, v: f64) -> ValueId {
        self.constant(Tensor::scalar(v))
    }

    /// Records a parameter leaf; its gradient is scattered back to `slot`
    /// during [`Tape::backward`].
    pub fn param(&mut self, params: &ParamSet, slot: usize) -> ValueId {
        let value = params.value(slot).clone();
        self.push(value, Op::Param { slot })
    }

    pub fn matmul(&mut self, a: ValueId, b: ValueId) -> Result<ValueId, TensorError> {
        let v = self.value(a).matmul(self.value(b))?;
        Ok(self.push(v, Op::MatMul { a, b }))
    }

    pub fn add(&mut self, a: ValueId, b: ValueId) -> Result<ValueId, TensorError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "add",
                lhs: ta.shape(),
                rhs: tb.shape(),
            });
        }
        let mut v = ta.clone();
        v.add_assign(tb)?;
        Ok(self.push(v, Op::Add { a, b }))
    }

    pub fn sub(&mut self, a: ValueId, b: ValueId) -> Result<ValueId, TensorError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "sub",
                lhs: ta.shape(),
                rhs: tb.shape(),
            });
        }
        let mut v = ta.clone();
        for (x, y) in v.data_mut().iter_mut().zip(tb.data().iter()) {
            *x -= y;
        }
        Ok(self.push(v, Op::Sub { a, b }))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: ValueId, b: ValueId) -> Result<ValueId, TensorError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "mul",
                lhs: ta.shape(),
                rhs: tb.shape(),
            });
        }
        let mut v = ta.clone();
        for (x, y) in v.data_mut().iter_mut().zip(tb.data().iter()) {
            *x *= y;
        }
        Ok(self.push(v, Op::Mul { a, b }))
    }

    /// Adds a 1 x C row vector to every row of an R x C tensor.
    pub fn add_row_broadcast(&mut self, x: ValueId, row: ValueId) -> Result<ValueId, TensorError> {
        let (tx, tr) = (self.value(x), self.value(row));
        if tr.rows() != 1 || tr.cols() != tx.cols() {
            return Err(TensorError::ShapeMismatch {
                op: "add_row_broadcast",
                lhs: tx.shape(),
                rhs: tr.shape(),
            });
        }
        let mut v = tx.clone();
        let cols = v.cols();
        for r in 0..v.rows() {
            let dst = &mut v.data_mut()[r * cols..(r + 1) * cols];
            for (d, s) in dst.iter_mut().zip(tr.data().iter()) {
                *d += s;
            }
        }
        Ok(self.push(v, Op::AddRowBroadcast { x, row }))
    }

    /// Repeats a 1 x C row vector into an R x C tensor.
    pub fn broadcast_rows(&mut self, row: ValueId, rows: usize) -> Result<ValueId, TensorError> {
        let tr = self.value(row);
        if tr.rows() != 1 {
            return Err(TensorError::ShapeMismatch {
                op: "broadcast_rows",
                lhs: tr.shape(),
                rhs: (1, tr.cols()),
            });
        }
        let mut v = Tensor::zeros(rows, tr.cols());
        let cols = tr.cols();
        for r in 0..rows {
            v.data_mut()[r * cols..(r + 1) * cols].copy_from_slice(tr.data());
        }
        Ok(self.push(v, Op::BroadcastRows { row, rows }))
    }

    pub fn relu(&mut self, x: ValueId) -> ValueId {
        let mut v = self.value(x).clone();
        for e in v.data_mut() {
            if *e < 0.0 {
                *e = 0.0;
            }
        }
        self.push(v, Op::Relu { x })
    }

    pub fn tanh(&mut self, x: ValueId) -> ValueId {
        let mut v = self.value(x).clone();
        for e in v.data_mut() {
            *e = libm::tanh(*e);
        }
        self.push(v, Op::Tanh { x })
    }

    pub fn sigmoid(&mut self, x: ValueId) -> ValueId {
        let mut v = self.value(x).clone();
        for e in v.data_mut() {
            *e = 1.0 / (1.0 + libm::exp(-*e));
        }
        self.push(v, Op::Sigmoid { x })
    }

    /// `mul * x + add`, elementwise with constants.
    pub fn affine_const(&mut self, x: ValueId, mul: f64, add: f64) -> ValueId {
        let mut v = self.value(x).clone();
        for e in v.data_mut() {
            *e = mul * *e + add;
        }
        self.push(v, Op::AffineConst { x, mul })
    }

    pub fn square(&mut self, x: ValueId) -> ValueId {
        let mut v = self.value(x).clone();
        for e in v.data_mut() {
            *e = *e * *e;
        }
        self.push(v, Op::Square { x })
    }

    /// Sum of all entries, as a 1x1 tensor.
    pub fn sum_all(&mut self, x: ValueId) -> ValueId {
        let s: f64 = self.value(x).data().iter().sum();
        self.push(Tensor::scalar(s), Op::SumAll { x })
    }

    /// Column-wise concatenation `[a ‖ b]` of two tensors with equal rows.
    pub fn concat_cols(&mut self, a: ValueId, b: ValueId) -> Result<ValueId, TensorError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rows() != tb.rows() {
            return Err(TensorError::ShapeMismatch {
                op: "concat_cols",
                lhs: ta.shape(),
                rhs: tb.shape(),
            });
        }
        let (rows, ca, cb) = (ta.rows(), ta.cols(), tb.cols());
        let mut v = Tensor::zeros(rows, ca + cb);
        for r in 0..rows {
            v.data_mut()[r * (ca + cb)..r * (ca + cb) + ca].copy_from_slice(ta.row(r));
            v.data_mut()[r * (ca + cb) + ca..(r + 1) * (ca + cb)].copy_from_slice(tb.row(r));
        }
        Ok(self.push(v, Op::ConcatCols { a, b }))
    }

    /// Mean over the rows selected by `mask` (alive nodes), as 1 x C.
    pub fn mean_pool_rows(
        &mut self,
        x: ValueId,
        mask: Arc<Vec<bool>>,
    ) -> Result<ValueId, TensorError> {
        let tx = self.value(x);
        if mask.len() != tx.rows() {
            return Err(TensorError::ShapeMismatch {
                op: "mean_pool_rows",
                lhs: tx.shape(),
                rhs: (mask.len(), 1),
            });
        }
        let count = mask.iter().filter(|m| **m).count();
        if count == 0 {
            return Err(TensorError::EmptyMask {
                op: "mean_pool_rows",
            });
        }
        let mut v = Tensor::zeros(1, tx.cols());
        for (r, keep) in mask.iter().enumerate() {
            if *keep {
                for (d, s) in v.data_mut().iter_mut().zip(tx.row(r).iter()) {
                    *d += s;
                }
            }
        }
        for d in v.data_mut() {
            *d /= count as f64;
        }
        Ok(self.push(v, Op::MeanPoolRows { x, mask, count }))
    }

    /// `M · x` for a symmetric sparse matrix (graph aggregation).
    pub fn sym_agg(&mut self, m: Arc<SparseSym>, x: ValueId) -> Result<ValueId, TensorError> {
        let tx = self.value(x);
        if m.len() != tx.rows() {
            return Err(TensorError::ShapeMismatch {
                op: "sym_agg",
                lhs: (m.len(), m.len()),
                rhs: tx.shape(),
            });
        }
        let v = m.apply(tx);
        Ok(self.push(v, Op::SymAgg { m, x }))
    }

    /// Extracts row `row` of `x` as a 1 x C tensor.
    pub fn row_select(&mut self, x: ValueId, row: usize) -> Result<ValueId, TensorError> {
        let tx = self.value(x);
        if row >= tx.rows() {
            return Err(TensorError::RowOutOfBounds {
                op: "row_select",
                row,
                rows: tx.rows(),
            });
        }
        let v = Tensor::row_vector(tx.row(row).to_vec());
        Ok(self.push(v, Op::RowSelect { x, row }))
    }

    /// Per-row layer normalization with learned gain and bias (1 x C each).
    pub fn layer_norm(
        &mut self,
        x: ValueId,
        gain: ValueId,
        bias: ValueId,
    ) -> Result<ValueId, TensorError> {
        let (tx, tg, tb) = (self.value(x), self.value(gain), self.value(bias));
        if tg.shape() != (1, tx.cols()) || tb.shape() != (1, tx.cols()) {
            return Err(TensorError::ShapeMismatch {
                op: "layer_norm",
                lhs: tx.shape(),
                rhs: tg.shape(),
            });
        }
        let cols = tx.cols();
        let mut v = Tensor::zeros(tx.rows(), cols);
        for r in 0..tx.rows() {
            let row = tx.row(r);
            let mean: f64 = row.iter().sum::<f64>() / cols as f64;
            let var: f64 = row.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / cols as f64;
            let inv = 1.0 / libm::sqrt(var + LAYER_NORM_EPS);
            for c in 0..cols {
                let norm = (row[c] - mean) * inv;
                v.set(r, c, norm * tg.data()[c] + tb.data()[c]);
            }
        }
        Ok(self.push(v, Op::LayerNorm { x, gain, bias }))
    }

    /// Reverse pass from a 1x1 loss. Parameter gradients are accumulated
    /// into `params` (added to whatever is already there).
    pub fn backward(&self, loss: ValueId, params: &mut ParamSet) -> Result<(), TensorError> {
        if self.value(loss).shape() != (1, 1) {
            return Err(TensorError::NotScalar {
                op: "backward",
                shape: self.value(loss).shape(),
            });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for i in (0..=loss.0).rev() {
            let grad = match grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            match &self.nodes[i].op {
                Op::Constant => {}
                Op::Param { slot } => {
                    params.accumulate_grad(*slot, &grad)?;
                }
                Op::MatMul { a, b } => {
                    let da = grad.matmul_transpose_rhs(self.value(*b))?;
                    let db = self.value(*a).transpose_matmul(&grad)?;
                    accumulate(&mut grads, *a, da)?;
                    accumulate(&mut grads, *b, db)?;
                }
                Op::Add { a, b } => {
                    accumulate(&mut grads, *a, grad.clone())?;
                    accumulate(&mut grads, *b, grad)?;
                }
                Op::Sub { a, b } => {
                    let mut neg = grad.clone();
                    for e in neg.data_mut() {
                        *e = -*e;
                    }
                    accumulate(&mut grads, *a, grad)?;
                    accumulate(&mut grads, *b, neg)?;
                }
                Op::Mul { a, b } => {
                    let mut da = grad.clone();
                    for (d, s) in da.data_mut().iter_mut().zip(self.value(*b).data()) {
                        *d *= s;
                    }
                    let mut db = grad;
                    for (d, s) in db.data_mut().iter_mut().zip(self.value(*a).data()) {
                        *d *= s;
                    }
                    accumulate(&mut grads, *a, da)?;
                    accumulate(&mut grads, *b, db)?;
                }
                Op::AddRowBroadcast { x, row } => {
                    let cols = grad.cols();
                    let mut drow = Tensor::zeros(1, cols);
                    for r in 0..grad.rows() {
                        for (d, s) in drow.data_mut().iter_mut().zip(grad.row(r).iter()) {
                            *d += s;
                        }
                    }
                    accumulate(&mut grads, *x, grad)?;
                    accumulate(&mut grads, *row, drow)?;
                }
                Op::BroadcastRows { row, rows } => {
                    let cols = grad.cols();
                    let mut drow = Tensor::zeros(1, cols);
                    for r in 0..*rows {
                        for (d, s) in drow.data_mut().iter_mut().zip(grad.row(r).iter()) {
                            *d += s;
                        }
                    }
                    accumulate(&mut grads, *row, drow)?;
                }
                Op::Relu { x } => {
                    let mut dx = grad;
                    for (d, s) in dx.data_mut().iter_mut().zip(self.nodes[i].value.data()) {
                        if *s <= 0.0 {
                            *d = 0.0;
                        }
                    }
                    accumulate(&mut grads, *x, dx)?;
                }
                Op::Tanh { x } => {
                    let mut dx = grad;
                    for (d, y) in dx.data_mut().iter_mut().zip(self.nodes[i].value.data()) {
                        *d *= 1.0 - y * y;
                    }
                    accumulate(&mut grads, *x, dx)?;
                }
                Op::Sigmoid { x } => {
                    let mut dx = grad;
                    for (d, y) in dx.data_mut().iter_mut().zip(self.nodes[i].value.data()) {
                        *d *= y * (1.0 - y);
                    }
                    accumulate(&mut grads, *x, dx)?;
                }
                Op::AffineConst { x, mul } => {
                    let mut dx = grad;
                    for d in dx.data_mut() {
                        *d *= mul;
                    }
                    accumulate(&mut grads, *x, dx)?;
                }
                Op::Square { x } => {
                    let mut dx = grad;
                    for (d, s) in dx.data_mut().iter_mut().zip(self.value(*x).data()) {
                        *d *= 2.0 * s;
                    }
                    accumulate(&mut grads, *x, dx)?;
                }
                Op::SumAll { x } => {
                    let g = grad.get(0, 0);
                    let (r, c) = self.value(*x).shape();
                    let mut dx = Tensor::zeros(r, c);
                    dx.fill(g);
                    accumulate(&mut grads, *x, dx)?;
                }
                Op::ConcatCols { a, b } => {
                    let (ca, cb) = (self.value(*a).cols(), self.value(*b).cols());
                    let rows = grad.rows();
                    let mut da = Tensor::zeros(rows, ca);
                    let mut db = Tensor::zeros(rows, cb);
                    for r in 0..rows {
                        let g = grad.row(r);
                        da.data_mut()[r * ca..(r + 1) * ca].copy_from_slice(&g[..ca]);
                        db.data_mut()[r * cb..(r + 1) * cb].copy_from_slice(&g[ca..]);
                    }
                    accumulate(&mut grads, *a, da)?;
                    accumulate(&mut grads, *b, db)?;
                }
                Op::MeanPoolRows { x, mask, count } => {
                    let tx = self.value(*x);
                    let mut dx = Tensor::zeros(tx.rows(), tx.cols());
                    let scale = 1.0 / *count as f64;
                    for (r, keep) in mask.iter().enumerate() {
                        if *keep {
                            let dst = &mut dx.data_mut()[r * tx.cols()..(r + 1) * tx.cols()];
                            for (d, s) in dst.iter_mut().zip(grad.data().iter()) {
                                *d += s * scale;
                            }
                        }
                    }
                    accumulate(&mut grads, *x, dx)?;
                }
                Op::SymAgg { m, x } => {
                    // M symmetric: d/dx (M x) pulls back through M again.
                    let dx = m.apply(&grad);
                    accumulate(&mut grads, *x, dx)?;
                }
                Op::RowSelect { x, row } => {
                    let tx = self.value(*x);
                    let mut dx = Tensor::zeros(tx.rows(), tx.cols());
                    dx.data_mut()[row * tx.cols()..(row + 1) * tx.cols()]
                        .copy_from_slice(grad.data());
                    accumulate(&mut grads, *x, dx)?;
                }
                Op::LayerNorm { x, gain, bias } => {
                    let tx = self.value(*x);
                    let tg = self.value(*gain);
                    let cols = tx.cols();
                    let mut dx = Tensor::zeros(tx.rows(), cols);
                    let mut dgain = Tensor::zeros(1, cols);
                    let mut dbias = Tensor::zeros(1, cols);
                    for r in 0..tx.rows() {
                        let row = tx.row(r);
                        let mean: f64 = row.iter().sum::<f64>() / cols as f64;
                        let var: f64 =
                            row.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / cols as f64;
                        let inv = 1.0 / libm::sqrt(var + LAYER_NORM_EPS);
                        let g = grad.row(r);
                        // dxhat = dy * gain; dx via the standard layer-norm pullback
                        let mut dxhat = vec![0.0; cols];
                        let mut xhat = vec![0.0; cols];
                        for c in 0..cols {
                            xhat[c] = (row[c] - mean) * inv;
                            dxhat[c] = g[c] * tg.data()[c];
                            dgain.data_mut()[c] += g[c] * xhat[c];
                            dbias.data_mut()[c] += g[c];
                        }
                        let mean_dxhat: f64 = dxhat.iter().sum::<f64>() / cols as f64;
                        let mean_dxhat_xhat: f64 = dxhat
                            .iter()
                            .zip(xhat.iter())
                            .map(|(a, b)| a * b)
                            .sum::<f64>()
                            / cols as f64;
                        for c in 0..cols {
                            dx.set(
                                r,
                                c,
                                inv * (dxhat[c] - mean_dxhat - xhat[c] * mean_dxhat_xhat),
                            );
                        }
                    }
                    accumulate(&mut grads, *x, dx)?;
                    accumulate(&mut grads, *gain, dgain)?;
                    accumulate(&mut grads, *bias, dbias)?;
                }
            }
        }
        Ok(())
    }
}

fn accumulate(
    grads: &mut [Option<Tensor>],
    id: ValueId,
    g: Tensor,
) -> Result<(), TensorError> {
    match &mut grads[id.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => {
            *slot = Some(g);
            Ok(())
        }
    }
}
