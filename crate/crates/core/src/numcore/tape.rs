//! Recorded computation and reverse-mode gradient propagation.
//!
//! A [`Tape`] owns every intermediate value produced during one forward pass.
//! Operations append a node and return a [`Var`] handle. [`Tape::backward`]
//! walks the nodes in exact reverse order, accumulating (`+=`) gradients, and
//! finally adds parameter gradients into the [`ParamStore`].

use rand::Rng;

use super::tensor::matmul_into;
use super::{NumError, ParamId, ParamStore, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    Gather { param: ParamId, indices: Vec<usize> },
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    SliceRows(Var, usize),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    SoftmaxRows(Var),
    LogSumExpRows(Var),
    LogSumExpCols(Var),
    Dropout(Var, Vec<f64>),
    Sum(Var),
    ShiftRows { x: Var, offset: isize, block: usize },
    BlendRows { mask: Vec<bool>, on: Var, off: Var },
    Pick { x: Var, at: Vec<(usize, usize)> },
    LseTransition { alpha: Var, trans: Var },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// A single-threaded unit of recorded work.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> NumError {
    NumError::ShapeMismatch {
        op,
        left: a.shape(),
        right: b.shape(),
    }
}

fn lse(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
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

    pub fn scalar(&self, v: Var) -> Result<f64, NumError> {
        self.value(v).item()
    }

    /// Signs (-1, 0, 1) of every ReLU input recorded so far.
    pub fn relu_pattern(&self) -> Vec<i8> {
        self.nodes
            .iter()
            .filter_map(|n| match n.op {
                Op::Relu(a) => Some(a),
                _ => None,
            })
            .flat_map(|a| {
                self.nodes[a.0]
                    .value
                    .data()
                    .iter()
                    .map(|&x| (x > 0.0) as i8 - (x < 0.0) as i8)
            })
            .collect()
    }

    fn push(&mut self, op: &'static str, value: Tensor, node_op: Op) -> Result<Var, NumError> {
        if !value.is_finite() {
            return Err(NumError::NonFinite { op });
        }
        self.nodes.push(Node { value, op: node_op });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Records a value that receives no gradient.
    pub fn constant(&mut self, value: Tensor) -> Result<Var, NumError> {
        self.push("constant", value, Op::Constant)
    }

    /// Records the current value of a parameter as a leaf.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Result<Var, NumError> {
        self.push("param", store.value(id).clone(), Op::Param(id))
    }

    /// Row lookup `out[i] = table[indices[i]]`, without copying the whole table.
    pub fn gather(&mut self, store: &ParamStore, id: ParamId, indices: &[usize]) -> Result<Var, NumError> {
        let table = store.value(id);
        let mut out = Tensor::zeros(indices.len(), table.cols());
        for (r, &ix) in indices.iter().enumerate() {
            if ix >= table.rows() {
                return Err(NumError::IndexOutOfRange {
                    op: "gather",
                    index: ix,
                    bound: table.rows(),
                });
            }
            out.row_mut(r).copy_from_slice(table.row(ix));
        }
        self.push(
            "gather",
            out,
            Op::Gather {
                param: id,
                indices: indices.to_vec(),
            },
        )
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.cols() != bv.rows() {
            return Err(mismatch("matmul", av, bv));
        }
        let mut out = Tensor::zeros(av.rows(), bv.cols());
        matmul_into(av, bv, &mut out);
        self.push("matmul", out, Op::MatMul(a, b))
    }

    fn zip_same(&self, op: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Result<Tensor, NumError> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(mismatch(op, av, bv));
        }
        let data = av.data().iter().zip(bv.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(av.rows(), av.cols(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        let out = self.zip_same("add", a, b, |x, y| x + y)?;
        self.push("add", out, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        let out = self.zip_same("sub", a, b, |x, y| x - y)?;
        self.push("sub", out, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        let out = self.zip_same("mul", a, b, |x, y| x * y)?;
        self.push("mul", out, Op::Mul(a, b))
    }

    /// Adds a `1 × cols` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var, NumError> {
        let (av, rv) = (self.value(a), self.value(row));
        if rv.rows() != 1 || rv.cols() != av.cols() {
            return Err(mismatch("add_row", av, rv));
        }
        let mut out = av.clone();
        for r in 0..out.rows() {
            for (o, &b) in out.row_mut(r).iter_mut().zip(rv.data()) {
                *o += b;
            }
        }
        self.push("add_row", out, Op::AddRow(a, row))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var, NumError> {
        let av = self.value(a);
        let data = av.data().iter().map(|x| x * factor).collect();
        let out = Tensor::new(av.rows(), av.cols(), data)?;
        self.push("scale", out, Op::Scale(a, factor))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, NumError> {
        let first = parts.first().ok_or(NumError::Empty { op: "concat_cols" })?;
        let rows = self.value(*first).rows();
        let mut cols = 0;
        for &p in parts {
            let pv = self.value(p);
            if pv.rows() != rows {
                return Err(mismatch("concat_cols", self.value(*first), pv));
            }
            cols += pv.cols();
        }
        let mut out = Tensor::zeros(rows, cols);
        let mut offset = 0;
        for &p in parts {
            let pv = self.value(p);
            for r in 0..rows {
                out.row_mut(r)[offset..offset + pv.cols()].copy_from_slice(pv.row(r));
            }
            offset += pv.cols();
        }
        self.push("concat_cols", out, Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, NumError> {
        let first = parts.first().ok_or(NumError::Empty { op: "concat_rows" })?;
        let cols = self.value(*first).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let pv = self.value(p);
            if pv.cols() != cols {
                return Err(mismatch("concat_rows", self.value(*first), pv));
            }
            data.extend_from_slice(pv.data());
            rows += pv.rows();
        }
        let out = Tensor::new(rows, cols, data)?;
        self.push("concat_rows", out, Op::ConcatRows(parts.to_vec()))
    }

    /// Concatenation along `axis` (0 = rows, 1 = columns).
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var, NumError> {
        match axis {
            0 => self.concat_rows(parts),
            1 => self.concat_cols(parts),
            _ => Err(NumError::BadAxis { axis }),
        }
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var, NumError> {
        let av = self.value(a);
        if start + len > av.cols() {
            return Err(NumError::IndexOutOfRange {
                op: "slice_cols",
                index: start + len,
                bound: av.cols(),
            });
        }
        let mut out = Tensor::zeros(av.rows(), len);
        for r in 0..av.rows() {
            out.row_mut(r).copy_from_slice(&av.row(r)[start..start + len]);
        }
        self.push("slice_cols", out, Op::SliceCols(a, start))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var, NumError> {
        let av = self.value(a);
        if start + len > av.rows() {
            return Err(NumError::IndexOutOfRange {
                op: "slice_rows",
                index: start + len,
                bound: av.rows(),
            });
        }
        let c = av.cols();
        let out = Tensor::new(len, c, av.data()[start * c..(start + len) * c].to_vec())?;
        self.push("slice_rows", out, Op::SliceRows(a, start))
    }

    fn map(&self, a: Var, f: impl Fn(f64) -> f64) -> Tensor {
        let av = self.value(a);
        let data = av.data().iter().map(|&x| f(x)).collect();
        Tensor::new(av.rows(), av.cols(), data).expect("shape preserved")
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, NumError> {
        let out = self.map(a, |x| x.max(0.0));
        self.push("relu", out, Op::Relu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, NumError> {
        let out = self.map(a, f64::tanh);
        self.push("tanh", out, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, NumError> {
        let out = self.map(a, sigmoid);
        self.push("sigmoid", out, Op::Sigmoid(a))
    }

    /// Softmax over the last axis (each row independently).
    pub fn softmax_rows(&mut self, a: Var) -> Result<Var, NumError> {
        let av = self.value(a);
        let mut out = av.clone();
        for r in 0..out.rows() {
            let row = out.row_mut(r);
            let z = lse(row.iter().copied());
            row.iter_mut().for_each(|x| *x = (*x - z).exp());
        }
        self.push("softmax", out, Op::SoftmaxRows(a))
    }

    /// Log-sum-exp along `axis`: axis 1 reduces each row to `rows × 1`,
    /// axis 0 reduces each column to `1 × cols`.
    pub fn log_sum_exp(&mut self, a: Var, axis: usize) -> Result<Var, NumError> {
        let av = self.value(a);
        match axis {
            1 => {
                let data = (0..av.rows()).map(|r| lse(av.row(r).iter().copied())).collect();
                let out = Tensor::new(av.rows(), 1, data)?;
                self.push("log_sum_exp", out, Op::LogSumExpRows(a))
            }
            0 => {
                let data = (0..av.cols()).map(|c| lse((0..av.rows()).map(|r| av.get(r, c)))).collect();
                let out = Tensor::new(1, av.cols(), data)?;
                self.push("log_sum_exp", out, Op::LogSumExpCols(a))
            }
            _ => Err(NumError::BadAxis { axis }),
        }
    }

    /// Inverted dropout: with `train` off this is the identity (no node is
    /// recorded); otherwise each entry survives with probability `1 - rate`
    /// and survivors are scaled by `1 / (1 - rate)`.
    pub fn dropout<R: Rng>(&mut self, a: Var, rate: f64, train: bool, rng: &mut R) -> Result<Var, NumError> {
        if !(0.0..1.0).contains(&rate) {
            return Err(NumError::DropoutRate(rate));
        }
        if !train || rate == 0.0 {
            return Ok(a);
        }
        let keep = 1.0 / (1.0 - rate);
        let av = self.value(a);
        let mask: Vec<f64> = (0..av.len())
            .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
            .collect();
        let data = av.data().iter().zip(&mask).map(|(x, m)| x * m).collect();
        let out = Tensor::new(av.rows(), av.cols(), data)?;
        self.push("dropout", out, Op::Dropout(a, mask))
    }

    /// Sum of all entries, as a `1 × 1` tensor.
    pub fn sum(&mut self, a: Var) -> Result<Var, NumError> {
        let out = Tensor::scalar(self.value(a).sum());
        self.push("sum", out, Op::Sum(a))
    }

    /// Shifts rows by whole time steps in a time-major layout.
    ///
    /// Rows are grouped into consecutive blocks of `block` rows (one block per
    /// time step). Output block `t` is input block `t + offset`, or zeros when
    /// that block is outside the sequence.
    pub fn shift_rows(&mut self, x: Var, offset: isize, block: usize) -> Result<Var, NumError> {
        let xv = self.value(x);
        if block == 0 || !xv.rows().is_multiple_of(block) {
            return Err(NumError::BadBlock { rows: xv.rows(), block });
        }
        let steps = (xv.rows() / block) as isize;
        let width = block * xv.cols();
        let mut out = Tensor::zeros(xv.rows(), xv.cols());
        for t in 0..steps {
            let src = t + offset;
            if (0..steps).contains(&src) {
                let (s, d) = (src as usize * width, t as usize * width);
                out.data_mut()[d..d + width].copy_from_slice(&xv.data()[s..s + width]);
            }
        }
        self.push("shift_rows", out, Op::ShiftRows { x, offset, block })
    }

    /// Per-row select: row `r` comes from `on` where `mask[r]`, else from `off`.
    pub fn blend_rows(&mut self, mask: &[bool], on: Var, off: Var) -> Result<Var, NumError> {
        let (ov, fv) = (self.value(on), self.value(off));
        if ov.shape() != fv.shape() || mask.len() != ov.rows() {
            return Err(mismatch("blend_rows", ov, fv));
        }
        let mut out = fv.clone();
        for (r, &m) in mask.iter().enumerate() {
            if m {
                out.row_mut(r).copy_from_slice(ov.row(r));
            }
        }
        self.push(
            "blend_rows",
            out,
            Op::BlendRows {
                mask: mask.to_vec(),
                on,
                off,
            },
        )
    }

    /// Collects the entries at `(row, col)` positions into a `k × 1` column.
    pub fn pick(&mut self, x: Var, at: &[(usize, usize)]) -> Result<Var, NumError> {
        let xv = self.value(x);
        let mut data = Vec::with_capacity(at.len());
        for &(r, c) in at {
            if r >= xv.rows() || c >= xv.cols() {
                return Err(NumError::IndexOutOfRange {
                    op: "pick",
                    index: r * xv.cols() + c,
                    bound: xv.len(),
                });
            }
            data.push(xv.get(r, c));
        }
        let out = Tensor::new(at.len(), 1, data)?;
        self.push("pick", out, Op::Pick { x, at: at.to_vec() })
    }

    /// One step of the log-space forward recursion:
    /// `out[b][j] = lse_i(alpha[b][i] + trans[i][j])`.
    pub fn lse_transition(&mut self, alpha: Var, trans: Var) -> Result<Var, NumError> {
        let (av, tv) = (self.value(alpha), self.value(trans));
        let l = tv.rows();
        if tv.cols() != l || av.cols() != l {
            return Err(mismatch("lse_transition", av, tv));
        }
        let mut out = Tensor::zeros(av.rows(), l);
        for b in 0..av.rows() {
            let a = av.row(b);
            for j in 0..l {
                let v = lse((0..l).map(|i| a[i] + tv.get(i, j)));
                out.set(b, j, v);
            }
        }
        self.push("lse_transition", out, Op::LseTransition { alpha, trans })
    }

    /// Propagates `d loss / d value` to every recorded node and accumulates
    /// parameter gradients into `store`.
    pub fn backward(&mut self, loss: Var, store: &mut ParamStore) -> Result<(), NumError> {
        if self.consumed {
            return Err(NumError::BackwardTwice);
        }
        let loss_shape = self.value(loss).shape();
        if loss_shape != [1, 1] {
            return Err(NumError::NotScalar { shape: loss_shape });
        }
        self.consumed = true;

        let mut grads: Vec<Option<Tensor>> = Vec::with_capacity(self.nodes.len());
        grads.resize_with(self.nodes.len(), || None);
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let acc = |v: Var, grads: &mut Vec<Option<Tensor>>, f: &dyn Fn(&mut Tensor)| {
                let slot = grads[v.0].get_or_insert_with(|| {
                    let s = self.nodes[v.0].value.shape();
                    Tensor::zeros(s[0], s[1])
                });
                f(slot);
            };
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => {
                    let p = store.get_mut(*id);
                    if p.trainable {
                        add_skipping_row(&mut p.grad, &g, p.frozen_row);
                    }
                }
                Op::Gather { param, indices } => {
                    let p = store.get_mut(*param);
                    if p.trainable {
                        for (r, &ix) in indices.iter().enumerate() {
                            if p.frozen_row == Some(ix) {
                                continue;
                            }
                            for (d, s) in p.grad.row_mut(ix).iter_mut().zip(g.row(r)) {
                                *d += s;
                            }
                        }
                    }
                }
                Op::MatMul(a, b) => {
                    let av = &self.nodes[a.0].value;
                    let bv = &self.nodes[b.0].value;
                    // dA += G · Bᵀ
                    acc(*a, &mut grads, &|ga| {
                        for i in 0..g.rows() {
                            let g_row = g.row(i);
                            for k in 0..bv.rows() {
                                let b_row = bv.row(k);
                                let s: f64 = g_row.iter().zip(b_row).map(|(x, y)| x * y).sum();
                                ga.data_mut()[i * bv.rows() + k] += s;
                            }
                        }
                    });
                    // dB += Aᵀ · G
                    acc(*b, &mut grads, &|gb| {
                        let n = g.cols();
                        for i in 0..av.rows() {
                            let g_row = g.row(i);
                            for k in 0..av.cols() {
                                let aik = av.get(i, k);
                                if aik == 0.0 {
                                    continue;
                                }
                                let dst = &mut gb.data_mut()[k * n..(k + 1) * n];
                                for (d, &gv) in dst.iter_mut().zip(g_row) {
                                    *d += aik * gv;
                                }
                            }
                        }
                    });
                }
                Op::Add(a, b) => {
                    acc(*a, &mut grads, &|ga| ga.add_assign(&g));
                    acc(*b, &mut grads, &|gb| gb.add_assign(&g));
                }
                Op::Sub(a, b) => {
                    acc(*a, &mut grads, &|ga| ga.add_assign(&g));
                    acc(*b, &mut grads, &|gb| {
                        for (d, s) in gb.data_mut().iter_mut().zip(g.data()) {
                            *d -= s;
                        }
                    });
                }
                Op::Mul(a, b) => {
                    let av = &self.nodes[a.0].value;
                    let bv = &self.nodes[b.0].value;
                    acc(*a, &mut grads, &|ga| {
                        for ((d, s), y) in ga.data_mut().iter_mut().zip(g.data()).zip(bv.data()) {
                            *d += s * y;
                        }
                    });
                    acc(*b, &mut grads, &|gb| {
                        for ((d, s), x) in gb.data_mut().iter_mut().zip(g.data()).zip(av.data()) {
                            *d += s * x;
                        }
                    });
                }
                Op::AddRow(a, row) => {
                    acc(*a, &mut grads, &|ga| ga.add_assign(&g));
                    acc(*row, &mut grads, &|gr| {
                        for r in 0..g.rows() {
                            for (d, s) in gr.data_mut().iter_mut().zip(g.row(r)) {
                                *d += s;
                            }
                        }
                    });
                }
                Op::Scale(a, factor) => {
                    acc(*a, &mut grads, &|ga| {
                        for (d, s) in ga.data_mut().iter_mut().zip(g.data()) {
                            *d += s * factor;
                        }
                    });
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let w = self.nodes[p.0].value.cols();
                        acc(p, &mut grads, &|gp| {
                            for r in 0..g.rows() {
                                let src = &g.row(r)[offset..offset + w];
                                for (d, s) in gp.row_mut(r).iter_mut().zip(src) {
                                    *d += s;
                                }
                            }
                        });
                        offset += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    let c = g.cols();
                    for &p in parts {
                        let n = self.nodes[p.0].value.len();
                        acc(p, &mut grads, &|gp| {
                            let src = &g.data()[offset..offset + n];
                            for (d, s) in gp.data_mut().iter_mut().zip(src) {
                                *d += s;
                            }
                        });
                        offset += n;
                        debug_assert_eq!(offset % c.max(1), 0);
                    }
                }
                Op::SliceCols(a, start) => {
                    acc(*a, &mut grads, &|ga| {
                        for r in 0..g.rows() {
                            let dst = &mut ga.row_mut(r)[*start..*start + g.cols()];
                            for (d, s) in dst.iter_mut().zip(g.row(r)) {
                                *d += s;
                            }
                        }
                    });
                }
                Op::SliceRows(a, start) => {
                    acc(*a, &mut grads, &|ga| {
                        let c = g.cols();
                        let dst = &mut ga.data_mut()[start * c..start * c + g.len()];
                        for (d, s) in dst.iter_mut().zip(g.data()) {
                            *d += s;
                        }
                    });
                }
                Op::Relu(a) => {
                    let av = &self.nodes[a.0].value;
                    acc(*a, &mut grads, &|ga| {
                        for ((d, s), x) in ga.data_mut().iter_mut().zip(g.data()).zip(av.data()) {
                            if *x > 0.0 {
                                *d += s;
                            }
                        }
                    });
                }
                Op::Tanh(a) => {
                    let out = &node.value;
                    acc(*a, &mut grads, &|ga| {
                        for ((d, s), y) in ga.data_mut().iter_mut().zip(g.data()).zip(out.data()) {
                            *d += s * (1.0 - y * y);
                        }
                    });
                }
                Op::Sigmoid(a) => {
                    let out = &node.value;
                    acc(*a, &mut grads, &|ga| {
                        for ((d, s), y) in ga.data_mut().iter_mut().zip(g.data()).zip(out.data()) {
                            *d += s * y * (1.0 - y);
                        }
                    });
                }
                Op::SoftmaxRows(a) => {
                    let out = &node.value;
                    acc(*a, &mut grads, &|ga| {
                        for r in 0..out.rows() {
                            let (y, gr) = (out.row(r), g.row(r));
                            let dot: f64 = y.iter().zip(gr).map(|(p, q)| p * q).sum();
                            for ((d, &yi), &gi) in ga.row_mut(r).iter_mut().zip(y).zip(gr) {
                                *d += yi * (gi - dot);
                            }
                        }
                    });
                }
                Op::LogSumExpRows(a) => {
                    let av = &self.nodes[a.0].value;
                    let out = &node.value;
                    acc(*a, &mut grads, &|ga| {
                        for r in 0..av.rows() {
                            let (z, gr) = (out.get(r, 0), g.get(r, 0));
                            for (d, &x) in ga.row_mut(r).iter_mut().zip(av.row(r)) {
                                *d += gr * (x - z).exp();
                            }
                        }
                    });
                }
                Op::LogSumExpCols(a) => {
                    let av = &self.nodes[a.0].value;
                    let out = &node.value;
                    acc(*a, &mut grads, &|ga| {
                        for r in 0..av.rows() {
                            for c in 0..av.cols() {
                                let w = (av.get(r, c) - out.get(0, c)).exp();
                                ga.data_mut()[r * av.cols() + c] += g.get(0, c) * w;
                            }
                        }
                    });
                }
                Op::Dropout(a, mask) => {
                    acc(*a, &mut grads, &|ga| {
                        for ((d, s), m) in ga.data_mut().iter_mut().zip(g.data()).zip(mask) {
                            *d += s * m;
                        }
                    });
                }
                Op::Sum(a) => {
                    let s = g.get(0, 0);
                    acc(*a, &mut grads, &|ga| ga.data_mut().iter_mut().for_each(|d| *d += s));
                }
                Op::ShiftRows { x, offset, block } => {
                    let cols = g.cols();
                    acc(*x, &mut grads, &|gx| {
                        let steps = (g.rows() / block) as isize;
                        let width = block * cols;
                        for t in 0..steps {
                            let src = t + offset;
                            if (0..steps).contains(&src) {
                                let (s, d) = (src as usize * width, t as usize * width);
                                let from = &g.data()[d..d + width];
                                for (dst, v) in gx.data_mut()[s..s + width].iter_mut().zip(from) {
                                    *dst += v;
                                }
                            }
                        }
                    });
                }
                Op::BlendRows { mask, on, off } => {
                    acc(*on, &mut grads, &|go| {
                        for (r, &m) in mask.iter().enumerate() {
                            if m {
                                for (d, s) in go.row_mut(r).iter_mut().zip(g.row(r)) {
                                    *d += s;
                                }
                            }
                        }
                    });
                    acc(*off, &mut grads, &|gf| {
                        for (r, &m) in mask.iter().enumerate() {
                            if !m {
                                for (d, s) in gf.row_mut(r).iter_mut().zip(g.row(r)) {
                                    *d += s;
                                }
                            }
                        }
                    });
                }
                Op::Pick { x, at } => {
                    acc(*x, &mut grads, &|gx| {
                        let c = gx.cols();
                        for (k, &(r, col)) in at.iter().enumerate() {
                            gx.data_mut()[r * c + col] += g.get(k, 0);
                        }
                    });
                }
                Op::LseTransition { alpha, trans } => {
                    let av = &self.nodes[alpha.0].value;
                    let tv = &self.nodes[trans.0].value;
                    let out = &node.value;
                    let l = tv.rows();
                    // weight[b][i][j] = exp(alpha[b][i] + trans[i][j] - out[b][j])
                    let weight = |b: usize, i: usize, j: usize| (av.get(b, i) + tv.get(i, j) - out.get(b, j)).exp();
                    acc(*alpha, &mut grads, &|ga| {
                        for b in 0..av.rows() {
                            for i in 0..l {
                                let s: f64 = (0..l).map(|j| g.get(b, j) * weight(b, i, j)).sum();
                                ga.data_mut()[b * l + i] += s;
                            }
                        }
                    });
                    acc(*trans, &mut grads, &|gt| {
                        for i in 0..l {
                            for j in 0..l {
                                let s: f64 = (0..av.rows()).map(|b| g.get(b, j) * weight(b, i, j)).sum();
                                gt.data_mut()[i * l + j] += s;
                            }
                        }
                    });
                }
            }
        }
        Ok(())
    }
}

fn add_skipping_row(dst: &mut Tensor, src: &Tensor, skip: Option<usize>) {
    let c = dst.cols();
    for (i, (d, s)) in dst.data_mut().iter_mut().zip(src.data()).enumerate() {
        if skip != Some(i / c.max(1)) {
            *d += s;
        }
    }
}
