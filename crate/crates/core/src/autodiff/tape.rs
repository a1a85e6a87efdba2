use std::sync::Arc;

use super::tensor::Tensor;
use crate::error::{KaneError, Result};

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    MatVec(Var, Var),
    MatMul(Var, Var),
    Transpose(Var),
    Concat(Vec<Var>),
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    Sum(Var),
    SumRows(Var),
    Dot(Var, Var),
    RowDot(Var, Var),
    L1Norm(Var),
    L2Norm(Var),
    LeakyRelu(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Log(Var),
    SegmentSoftmax(Var, Arc<[usize]>),
    SegmentSum(Var, Arc<[usize]>),
    GatherRows(Var, Arc<[usize]>),
    ScaleRows(Var, Var),
    Reshape(Var),
    BceWithLogits(Var, Var),
}

struct Node {
    value: Tensor,
    op: Op,
    param: bool,
}

/// Records tensor operations in execution order for reverse-mode
/// differentiation. Parents always precede children, so a reverse scan
/// is a valid topological order.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar root with respect to every parameter leaf.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    /// Moves the gradient out; parameters always have one after backward.
    pub fn take(&mut self, var: Var) -> Option<Tensor> {
        self.grads.get_mut(var.0).and_then(Option::take)
    }
}

fn shape_of_rows(rows: usize, rest: &[usize]) -> Vec<usize> {
    let mut s = Vec::with_capacity(rest.len() + 1);
    s.push(rows);
    s.extend_from_slice(rest);
    s
}

fn check_segments(op: &'static str, offsets: &[usize], n: usize) -> Result<()> {
    let ok = offsets.len() >= 2
        && offsets[0] == 0
        && *offsets.last().unwrap() == n
        && offsets.windows(2).all(|w| w[0] < w[1]);
    if ok {
        Ok(())
    } else {
        Err(KaneError::Contract(format!(
            "{op}: offsets must rise strictly from 0 to {n}, got {} segments",
            offsets.len().saturating_sub(1)
        )))
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
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

    fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node {
            value,
            op,
            param: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// Trainable leaf: receives a gradient on backward.
    pub fn param(&mut self, value: Tensor) -> Var {
        let v = self.push(value, Op::Leaf);
        self.nodes[v.0].param = true;
        v
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(KaneError::shape(op, self.shape(a), self.shape(b)));
        }
        Ok(())
    }

    fn zip(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        let va = &self.nodes[a.0].value;
        let vb = &self.nodes[b.0].value;
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        let value = Tensor::new(va.shape().to_vec(), data).expect("shape preserved");
        self.push(value, op)
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let value = self.nodes[a.0].value.map(f);
        self.push(value, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        Ok(self.zip(a, b, |x, y| x + y, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        Ok(self.zip(a, b, |x, y| x - y, Op::Sub(a, b)))
    }

    /// Element-wise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("elementwise_mul", a, b)?;
        Ok(self.zip(a, b, |x, y| x * y, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, |x| c * x, Op::Scale(a, c))
    }

    pub fn matvec(&mut self, m: Var, v: Var) -> Result<Var> {
        let (ms, vs) = (self.shape(m), self.shape(v));
        if ms.len() != 2 || vs.len() != 1 || ms[1] != vs[0] {
            return Err(KaneError::shape("matvec", ms, vs));
        }
        let (rows, cols) = (ms[0], ms[1]);
        let mv = &self.nodes[m.0].value;
        let vv = self.nodes[v.0].value.data();
        let out = (0..rows)
            .map(|i| mv.row(i).iter().zip(vv).map(|(a, b)| a * b).sum())
            .collect();
        debug_assert_eq!(mv.data().len(), rows * cols);
        let value = Tensor::vector(out)?;
        Ok(self.push(value, Op::MatVec(m, v)))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(KaneError::shape("matmul", sa, sb));
        }
        let (n, m, p) = (sa[0], sa[1], sb[1]);
        let out = matmul_raw(
            self.nodes[a.0].value.data(),
            self.nodes[b.0].value.data(),
            n,
            m,
            p,
        );
        let value = Tensor::matrix(n, p, out)?;
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let s = self.shape(a);
        if s.len() != 2 {
            return Err(KaneError::shape("transpose", s, &[0, 0]));
        }
        let (r, c) = (s[0], s[1]);
        let value = Tensor::matrix(c, r, transpose_raw(self.nodes[a.0].value.data(), r, c))?;
        Ok(self.push(value, Op::Transpose(a)))
    }

    /// Concatenates vectors end to end.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let mut data = Vec::new();
        for &p in parts {
            if self.shape(p).len() != 1 {
                return Err(KaneError::shape("concat", self.shape(p), &[0]));
            }
            data.extend_from_slice(self.nodes[p.0].value.data());
        }
        let value = Tensor::vector(data)?;
        Ok(self.push(value, Op::Concat(parts.to_vec())))
    }

    /// Stacks tensors along the leading dimension.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| KaneError::Contract("concat_rows of nothing".into()))?;
        let rest = self.shape(first)[1..].to_vec();
        let mut rows = 0;
        let mut data = Vec::new();
        for &p in parts {
            if self.shape(p)[1..] != rest[..] {
                return Err(KaneError::shape("concat_rows", self.shape(first), self.shape(p)));
            }
            rows += self.shape(p)[0];
            data.extend_from_slice(self.nodes[p.0].value.data());
        }
        let value = Tensor::new(shape_of_rows(rows, &rest), data)?;
        Ok(self.push(value, Op::ConcatRows(parts.to_vec())))
    }

    /// Joins matrices with equal row counts side by side.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| KaneError::Contract("concat_cols of nothing".into()))?;
        let rows = self.shape(first)[0];
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let s = self.shape(p);
            if s.len() != 2 || s[0] != rows {
                return Err(KaneError::shape("concat_cols", self.shape(first), s));
            }
            widths.push(s[1]);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(rows * total);
        for i in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.nodes[p.0].value.row(i));
            }
        }
        let value = Tensor::matrix(rows, total, data)?;
        Ok(self.push(value, Op::ConcatCols(parts.to_vec())))
    }

    /// Sum of every element, as a one-element tensor.
    pub fn sum(&mut self, a: Var) -> Var {
        let s: f64 = self.nodes[a.0].value.data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    /// Adds the rows of a matrix together, giving one row.
    pub fn sum_rows(&mut self, a: Var) -> Result<Var> {
        let t = &self.nodes[a.0].value;
        if t.rank() != 2 {
            return Err(KaneError::shape("sum_rows", t.shape(), &[0, 0]));
        }
        let mut out = vec![0.0; t.row_width()];
        for i in 0..t.rows() {
            for (o, x) in out.iter_mut().zip(t.row(i)) {
                *o += x;
            }
        }
        let value = Tensor::vector(out)?;
        Ok(self.push(value, Op::SumRows(a)))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a).len() != 1 {
            return Err(KaneError::shape("dot", self.shape(a), self.shape(b)));
        }
        self.same_shape("dot", a, b)?;
        let s = self.nodes[a.0]
            .value
            .data()
            .iter()
            .zip(self.nodes[b.0].value.data())
            .map(|(x, y)| x * y)
            .sum();
        Ok(self.push(Tensor::scalar(s), Op::Dot(a, b)))
    }

    /// Per-row dot product of two equally shaped matrices.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a).len() != 2 {
            return Err(KaneError::shape("row_dot", self.shape(a), self.shape(b)));
        }
        self.same_shape("row_dot", a, b)?;
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let out = (0..ta.rows())
            .map(|i| ta.row(i).iter().zip(tb.row(i)).map(|(x, y)| x * y).sum())
            .collect();
        let value = Tensor::vector(out)?;
        Ok(self.push(value, Op::RowDot(a, b)))
    }

    fn rowwise_reduce(&self, a: Var, f: impl Fn(&[f64]) -> f64) -> Tensor {
        let t = &self.nodes[a.0].value;
        if t.rank() == 1 {
            Tensor::scalar(f(t.data()))
        } else {
            let out = (0..t.rows()).map(|i| f(t.row(i))).collect();
            Tensor::vector(out).expect("rows >= 1")
        }
    }

    /// L1 norm of a vector, or of every row of a matrix.
    pub fn l1_norm(&mut self, a: Var) -> Result<Var> {
        if self.shape(a).len() > 2 {
            return Err(KaneError::shape("l1_norm", self.shape(a), &[0, 0]));
        }
        let value = self.rowwise_reduce(a, |r| r.iter().map(|x| x.abs()).sum());
        Ok(self.push(value, Op::L1Norm(a)))
    }

    /// L2 norm of a vector, or of every row of a matrix.
    pub fn l2_norm(&mut self, a: Var) -> Result<Var> {
        if self.shape(a).len() > 2 {
            return Err(KaneError::shape("l2_norm", self.shape(a), &[0, 0]));
        }
        let value = self.rowwise_reduce(a, |r| r.iter().map(|x| x * x).sum::<f64>().sqrt());
        Ok(self.push(value, Op::L2Norm(a)))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        self.unary(a, |x| if x > 0.0 { x } else { slope * x }, Op::LeakyRelu(a, slope))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.leaky_relu(a, 0.0)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        if let Some(bad) = self.nodes[a.0].value.data().iter().find(|&&x| !(x > 0.0)) {
            return Err(KaneError::Domain {
                op: "log",
                message: format!("input {bad} is not positive"),
            });
        }
        Ok(self.unary(a, f64::ln, Op::Log(a)))
    }

    /// Softmax over a whole vector of logits.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let n = self.shape(a)[0];
        self.segment_softmax(a, Arc::from(vec![0, n]))
    }

    /// Independent softmax over each contiguous group `offsets[g]..offsets[g+1]`
    /// of a logit vector.
    pub fn segment_softmax(&mut self, a: Var, offsets: Arc<[usize]>) -> Result<Var> {
        let t = &self.nodes[a.0].value;
        if t.rank() != 1 {
            return Err(KaneError::shape("softmax_over_group", t.shape(), &[0]));
        }
        check_segments("softmax_over_group", &offsets, t.len())?;
        let x = t.data();
        let mut out = vec![0.0; x.len()];
        for w in offsets.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let max = x[lo..hi].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for i in lo..hi {
                out[i] = (x[i] - max).exp();
                z += out[i];
            }
            for o in &mut out[lo..hi] {
                *o /= z;
            }
        }
        let value = Tensor::vector(out)?;
        Ok(self.push(value, Op::SegmentSoftmax(a, offsets)))
    }

    /// Sums each contiguous group of rows into one output row.
    pub fn segment_sum(&mut self, a: Var, offsets: Arc<[usize]>) -> Result<Var> {
        let t = &self.nodes[a.0].value;
        check_segments("segment_sum", &offsets, t.rows())?;
        let w = t.row_width();
        let groups = offsets.len() - 1;
        let mut out = vec![0.0; groups * w];
        for (g, win) in offsets.windows(2).enumerate() {
            let dst = &mut out[g * w..(g + 1) * w];
            for i in win[0]..win[1] {
                for (o, x) in dst.iter_mut().zip(t.row(i)) {
                    *o += x;
                }
            }
        }
        let value = Tensor::new(shape_of_rows(groups, &t.shape()[1..]), out)?;
        Ok(self.push(value, Op::SegmentSum(a, offsets)))
    }

    /// Selects rows by index (repeats allowed).
    pub fn gather_rows(&mut self, a: Var, indices: Arc<[usize]>) -> Result<Var> {
        let t = &self.nodes[a.0].value;
        if indices.is_empty() {
            return Err(KaneError::Contract("gather_rows with no indices".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= t.rows()) {
            return Err(KaneError::Lookup(format!(
                "row {bad} out of range for tensor with {} rows",
                t.rows()
            )));
        }
        let w = t.row_width();
        let mut out = Vec::with_capacity(indices.len() * w);
        for &i in indices.iter() {
            out.extend_from_slice(t.row(i));
        }
        let value = Tensor::new(shape_of_rows(indices.len(), &t.shape()[1..]), out)?;
        Ok(self.push(value, Op::GatherRows(a, indices)))
    }

    /// Single row of a matrix as a vector.
    pub fn row(&mut self, a: Var, index: usize) -> Result<Var> {
        let g = self.gather_rows(a, Arc::from(vec![index]))?;
        let w = self.nodes[a.0].value.row_width();
        self.reshape(g, vec![w])
    }

    /// Multiplies row `i` of a matrix by `weights[i]`.
    pub fn scale_rows(&mut self, a: Var, weights: Var) -> Result<Var> {
        let (sa, sw) = (self.shape(a), self.shape(weights));
        if sw.len() != 1 || sa[0] != sw[0] {
            return Err(KaneError::shape("scale_rows", sa, sw));
        }
        let t = &self.nodes[a.0].value;
        let wv = self.nodes[weights.0].value.data();
        let mut out = Vec::with_capacity(t.len());
        for (i, &w) in wv.iter().enumerate() {
            out.extend(t.row(i).iter().map(|x| x * w));
        }
        let value = Tensor::new(t.shape().to_vec(), out)?;
        Ok(self.push(value, Op::ScaleRows(a, weights)))
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var> {
        let value = self.nodes[a.0].value.clone().reshaped(shape)?;
        Ok(self.push(value, Op::Reshape(a)))
    }

    /// Mean over rows of the summed per-class binary cross-entropy between
    /// `sigmoid(logits)` and `targets`, computed in the overflow-free form.
    pub fn bce_with_logits(&mut self, logits: Var, targets: Var) -> Result<Var> {
        self.same_shape("bce_with_logits", logits, targets)?;
        let f = &self.nodes[logits.0].value;
        let n = f.rows() as f64;
        let total: f64 = f
            .data()
            .iter()
            .zip(self.nodes[targets.0].value.data())
            .map(|(&x, &y)| x.max(0.0) - x * y + (-x.abs()).exp().ln_1p())
            .sum();
        Ok(self.push(Tensor::scalar(total / n), Op::BceWithLogits(logits, targets)))
    }

    /// Reverse sweep from a one-element root.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let root_value = &self.nodes[root.0].value;
        if root_value.len() != 1 {
            return Err(KaneError::Contract(format!(
                "backward needs a scalar root, got shape {:?}",
                root_value.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(vec![1.0]);

        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(&node.op, &node.value, &g, &mut grads);
        }

        let mut out = Vec::with_capacity(grads.len());
        for (i, g) in grads.into_iter().enumerate() {
            let node = &self.nodes[i];
            if node.param {
                let data = g.unwrap_or_else(|| vec![0.0; node.value.len()]);
                out.push(Some(Tensor::new(node.value.shape().to_vec(), data)?));
            } else {
                out.push(None);
            }
        }
        Ok(Gradients { grads: out })
    }

    fn propagate(&self, op: &Op, out: &Tensor, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let val = |v: Var| &self.nodes[v.0].value;
        macro_rules! acc {
            ($v:expr) => {{
                let v: Var = $v;
                let len = self.nodes[v.0].value.len();
                grads[v.0].get_or_insert_with(|| vec![0.0; len])
            }};
        }
        match *op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                add_into(acc!(a), g);
                add_into(acc!(b), g);
            }
            Op::Sub(a, b) => {
                add_into(acc!(a), g);
                for (d, x) in acc!(b).iter_mut().zip(g) {
                    *d -= x;
                }
            }
            Op::Mul(a, b) => {
                let (va, vb) = (val(a).data(), val(b).data());
                for ((d, x), y) in acc!(a).iter_mut().zip(g).zip(vb) {
                    *d += x * y;
                }
                for ((d, x), y) in acc!(b).iter_mut().zip(g).zip(va) {
                    *d += x * y;
                }
            }
            Op::Scale(a, c) => {
                for (d, x) in acc!(a).iter_mut().zip(g) {
                    *d += c * x;
                }
            }
            Op::MatVec(m, v) => {
                let (tm, tv) = (val(m), val(v).data());
                let cols = tv.len();
                let dm = acc!(m);
                for (i, gi) in g.iter().enumerate() {
                    for (d, x) in dm[i * cols..(i + 1) * cols].iter_mut().zip(tv) {
                        *d += gi * x;
                    }
                }
                let dv = acc!(v);
                for (i, gi) in g.iter().enumerate() {
                    for (d, x) in dv.iter_mut().zip(tm.row(i)) {
                        *d += gi * x;
                    }
                }
            }
            Op::MatMul(a, b) => {
                let (ta, tb) = (val(a), val(b));
                let (n, m, p) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
                // dA = G·Bᵀ, dB = Aᵀ·G
                let bt = transpose_raw(tb.data(), m, p);
                add_into(acc!(a), &matmul_raw(g, &bt, n, p, m));
                let at = transpose_raw(ta.data(), n, m);
                add_into(acc!(b), &matmul_raw(&at, g, m, n, p));
            }
            Op::Transpose(a) => {
                let s = out.shape();
                add_into(acc!(a), &transpose_raw(g, s[0], s[1]));
            }
            Op::Concat(ref parts) | Op::ConcatRows(ref parts) => {
                let mut offset = 0;
                for &p in parts {
                    let len = val(p).len();
                    add_into(acc!(p), &g[offset..offset + len]);
                    offset += len;
                }
            }
            Op::ConcatCols(ref parts) => {
                let rows = out.shape()[0];
                let total = out.shape()[1];
                let mut col = 0;
                for &p in parts {
                    let w = val(p).shape()[1];
                    let d = acc!(p);
                    for i in 0..rows {
                        add_into(
                            &mut d[i * w..(i + 1) * w],
                            &g[i * total + col..i * total + col + w],
                        );
                    }
                    col += w;
                }
            }
            Op::Sum(a) => {
                for d in acc!(a).iter_mut() {
                    *d += g[0];
                }
            }
            Op::SumRows(a) => {
                let w = g.len();
                for chunk in acc!(a).chunks_mut(w) {
                    add_into(chunk, g);
                }
            }
            Op::Dot(a, b) => {
                let (va, vb) = (val(a).data(), val(b).data());
                for (d, y) in acc!(a).iter_mut().zip(vb) {
                    *d += g[0] * y;
                }
                for (d, x) in acc!(b).iter_mut().zip(va) {
                    *d += g[0] * x;
                }
            }
            Op::RowDot(a, b) => {
                let (ta, tb) = (val(a), val(b));
                let w = ta.row_width();
                let da = acc!(a);
                for (i, gi) in g.iter().enumerate() {
                    for (d, y) in da[i * w..(i + 1) * w].iter_mut().zip(tb.row(i)) {
                        *d += gi * y;
                    }
                }
                let db = acc!(b);
                for (i, gi) in g.iter().enumerate() {
                    for (d, x) in db[i * w..(i + 1) * w].iter_mut().zip(ta.row(i)) {
                        *d += gi * x;
                    }
                }
            }
            Op::L1Norm(a) => {
                let x = val(a).data();
                let w = x.len() / g.len();
                let d = acc!(a);
                for (j, xj) in x.iter().enumerate() {
                    // subgradient at zero is zero
                    let sign = if *xj > 0.0 {
                        1.0
                    } else if *xj < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    d[j] += g[j / w] * sign;
                }
            }
            Op::L2Norm(a) => {
                let x = val(a).data();
                let norms = out.data();
                let w = x.len() / g.len();
                let d = acc!(a);
                for (r, (gi, n)) in g.iter().zip(norms).enumerate() {
                    if *n == 0.0 {
                        continue;
                    }
                    for j in r * w..(r + 1) * w {
                        d[j] += gi * x[j] / n;
                    }
                }
            }
            Op::LeakyRelu(a, slope) => {
                let x = val(a).data();
                for ((d, gi), xi) in acc!(a).iter_mut().zip(g).zip(x) {
                    *d += if *xi > 0.0 { *gi } else { slope * gi };
                }
            }
            Op::Sigmoid(a) => {
                for ((d, gi), y) in acc!(a).iter_mut().zip(g).zip(out.data()) {
                    *d += gi * y * (1.0 - y);
                }
            }
            Op::Tanh(a) => {
                for ((d, gi), y) in acc!(a).iter_mut().zip(g).zip(out.data()) {
                    *d += gi * (1.0 - y * y);
                }
            }
            Op::Log(a) => {
                let x = val(a).data();
                for ((d, gi), xi) in acc!(a).iter_mut().zip(g).zip(x) {
                    *d += gi / xi;
                }
            }
            Op::SegmentSoftmax(a, ref offsets) => {
                let y = out.data();
                let d = acc!(a);
                for w in offsets.windows(2) {
                    let (lo, hi) = (w[0], w[1]);
                    let inner: f64 = (lo..hi).map(|i| g[i] * y[i]).sum();
                    for i in lo..hi {
                        d[i] += y[i] * (g[i] - inner);
                    }
                }
            }
            Op::SegmentSum(a, ref offsets) => {
                let w = val(a).row_width();
                let d = acc!(a);
                for (s, win) in offsets.windows(2).enumerate() {
                    let gs = &g[s * w..(s + 1) * w];
                    for i in win[0]..win[1] {
                        add_into(&mut d[i * w..(i + 1) * w], gs);
                    }
                }
            }
            Op::GatherRows(a, ref indices) => {
                let w = val(a).row_width();
                let d = acc!(a);
                for (k, &i) in indices.iter().enumerate() {
                    add_into(&mut d[i * w..(i + 1) * w], &g[k * w..(k + 1) * w]);
                }
            }
            Op::ScaleRows(a, weights) => {
                let (ta, tw) = (val(a), val(weights).data());
                let w = ta.row_width();
                let da = acc!(a);
                for (i, wi) in tw.iter().enumerate() {
                    for (d, gi) in da[i * w..(i + 1) * w].iter_mut().zip(&g[i * w..(i + 1) * w]) {
                        *d += gi * wi;
                    }
                }
                let dw = acc!(weights);
                for (i, d) in dw.iter_mut().enumerate() {
                    *d += ta
                        .row(i)
                        .iter()
                        .zip(&g[i * w..(i + 1) * w])
                        .map(|(x, gi)| x * gi)
                        .sum::<f64>();
                }
            }
            Op::Reshape(a) => add_into(acc!(a), g),
            Op::BceWithLogits(f, y) => {
                let (tf, ty) = (val(f), val(y));
                let n = tf.rows() as f64;
                for ((d, x), t) in acc!(f).iter_mut().zip(tf.data()).zip(ty.data()) {
                    *d += g[0] * (sigmoid(*x) - t) / n;
                }
                for (d, x) in acc!(y).iter_mut().zip(tf.data()) {
                    *d -= g[0] * x / n;
                }
            }
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn matmul_raw(a: &[f64], b: &[f64], n: usize, m: usize, p: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * p];
    for i in 0..n {
        let row = &mut out[i * p..(i + 1) * p];
        for k in 0..m {
            let aik = a[i * m + k];
            if aik == 0.0 {
                continue;
            }
            for (o, bkj) in row.iter_mut().zip(&b[k * p..(k + 1) * p]) {
                *o += aik * bkj;
            }
        }
    }
    out
}

fn transpose_raw(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = a[i * cols + j];
        }
    }
    out
}
