//! Dense f64 tensors with reverse-mode automatic differentiation.
//!
//! A [`Tensor`] is a flat row-major buffer plus a shape. A [`Tape`] records
//! every operation applied through it; [`Tape::backward`] replays the
//! recording in reverse and deposits gradients into the participating
//! parameter tensors. The tape is dynamic: model code builds a fresh tape
//! per forward/backward pass and parameters (created with
//! [`Tensor::param`]) persist across passes.
//!
//! All arithmetic is 64-bit. Negative infinity is a first-class score value:
//! softmax maps `-inf` entries to exactly zero, which is what additive
//! attention masks rely on.

mod compose;

pub use compose::{broadcast_row, gather_rows, mean_rows, one_hot_rows};

use std::cell::{Ref, RefCell};
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

// ───────────────────────────── Tensor ─────────────────────────────

#[derive(Debug)]
struct TensorData {
    shape: Vec<usize>,
    data: Vec<f64>,
    grad: Option<Vec<f64>>,
    requires_grad: bool,
    /// (tape id, node index) of the tape that most recently saw this tensor.
    node: Option<(u64, usize)>,
}

/// Shared handle to a dense tensor. Cloning is cheap and aliases storage.
#[derive(Debug, Clone)]
pub struct Tensor {
    cell: Rc<RefCell<TensorData>>,
}

impl Tensor {
    fn build(data: Vec<f64>, shape: &[usize], requires_grad: bool) -> Result<Tensor> {
        if shape.contains(&0) {
            return Err(Error::dim("tensor", format!("zero dimension in shape {shape:?}")));
        }
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::dim(
                "tensor",
                format!("shape {shape:?} implies {numel} elements, got {}", data.len()),
            ));
        }
        Ok(Tensor {
            cell: Rc::new(RefCell::new(TensorData {
                shape: shape.to_vec(),
                data,
                grad: None,
                requires_grad,
                node: None,
            })),
        })
    }

    /// Non-trainable tensor (input data, constants).
    pub fn new(data: Vec<f64>, shape: &[usize]) -> Result<Tensor> {
        Tensor::build(data, shape, false)
    }

    /// Trainable leaf: participates in gradient accumulation and SGD.
    pub fn param(data: Vec<f64>, shape: &[usize]) -> Result<Tensor> {
        Tensor::build(data, shape, true)
    }

    pub fn zeros(shape: &[usize]) -> Result<Tensor> {
        let numel: usize = shape.iter().product();
        Tensor::build(vec![0.0; numel], shape, false)
    }

    pub fn scalar(value: f64) -> Tensor {
        Tensor::build(vec![value], &[1], false).unwrap()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.cell.borrow().shape.clone()
    }

    pub fn numel(&self) -> usize {
        self.cell.borrow().data.len()
    }

    /// Borrow the flat row-major data.
    pub fn data(&self) -> Ref<'_, [f64]> {
        Ref::map(self.cell.borrow(), |d| d.data.as_slice())
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.cell.borrow().data.clone()
    }

    pub fn grad(&self) -> Option<Vec<f64>> {
        self.cell.borrow().grad.clone()
    }

    pub fn requires_grad(&self) -> bool {
        self.cell.borrow().requires_grad
    }

    pub fn clear_grad(&self) {
        self.cell.borrow_mut().grad = None;
    }

    pub fn entry(&self, idx: usize) -> f64 {
        self.cell.borrow().data[idx]
    }

    /// Overwrite one entry in place (used by finite-difference probes and
    /// optimizer steps).
    pub fn set_entry(&self, idx: usize, value: f64) {
        self.cell.borrow_mut().data[idx] = value;
    }

    /// Replace the whole buffer. Length must match the existing shape.
    pub fn set_data(&self, data: Vec<f64>) -> Result<()> {
        let mut cell = self.cell.borrow_mut();
        if data.len() != cell.data.len() {
            return Err(Error::dim(
                "set_data",
                format!("expected {} elements, got {}", cell.data.len(), data.len()),
            ));
        }
        cell.data = data;
        Ok(())
    }

    /// Expect a 2-D shape, returning (rows, cols).
    pub fn dims2(&self, op: &'static str) -> Result<(usize, usize)> {
        let shape = self.shape();
        if shape.len() != 2 {
            return Err(Error::dim(op, format!("expected 2-d tensor, got shape {shape:?}")));
        }
        Ok((shape[0], shape[1]))
    }

    fn node_on(&self, tape_id: u64) -> Option<usize> {
        match self.cell.borrow().node {
            Some((id, idx)) if id == tape_id => Some(idx),
            _ => None,
        }
    }

    fn bind(&self, tape_id: u64, idx: usize) {
        self.cell.borrow_mut().node = Some((tape_id, idx));
    }

    fn accumulate_grad(&self, delta: &[f64]) {
        let mut cell = self.cell.borrow_mut();
        match cell.grad {
            Some(ref mut g) => {
                for (gi, di) in g.iter_mut().zip(delta) {
                    *gi += di;
                }
            }
            None => cell.grad = Some(delta.to_vec()),
        }
    }
}

// ───────────────────────────── Tape ─────────────────────────────

/// Available elementwise activations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Tanh,
    Relu,
    /// No nonlinearity; handy for oracle tests.
    Identity,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Matmul { m: usize, k: usize, n: usize },
    Transpose { rows: usize, cols: usize },
    Add,
    Sub,
    Mul,
    Scale { c: f64 },
    /// Multiply a tensor by a scalar *tensor* (second input, numel 1).
    ScaleT,
    Sigmoid,
    Tanh,
    Relu,
    Softmax { axis: usize },
    Concat { axis: usize, extents: Vec<usize> },
    MaxOverAxis { argmax: Vec<usize> },
    SumAll,
    Reshape,
    CrossEntropyLogits { targets: Vec<usize> },
}

struct Node {
    inputs: Vec<usize>,
    op: Op,
    out: Tensor,
}

struct TapeData {
    id: u64,
    nodes: Vec<Node>,
    backward_done: bool,
    last_visits: usize,
}

/// Records operations for one forward/backward pass.
pub struct Tape {
    cell: Rc<RefCell<TapeData>>,
}

impl Default for Tape {
    fn default() -> Self {
        Tape::new()
    }
}

impl Tape {
    pub fn new() -> Tape {
        Tape {
            cell: Rc::new(RefCell::new(TapeData {
                id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
                nodes: Vec::new(),
                backward_done: false,
                last_visits: 0,
            })),
        }
    }

    /// Drop the recording and allow a fresh forward/backward pass. Tensors
    /// recorded earlier are unbound from this tape.
    pub fn reset(&self) {
        let mut td = self.cell.borrow_mut();
        td.nodes.clear();
        td.backward_done = false;
        td.last_visits = 0;
        td.id = NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed);
    }

    pub fn num_nodes(&self) -> usize {
        self.cell.borrow().nodes.len()
    }

    /// How many nodes the most recent backward pass visited.
    pub fn last_backward_visits(&self) -> usize {
        self.cell.borrow().last_visits
    }

    /// Node index of `t` on this tape, registering it as a leaf on first use.
    fn register(&self, t: &Tensor) -> usize {
        let id = self.cell.borrow().id;
        if let Some(idx) = t.node_on(id) {
            return idx;
        }
        let mut td = self.cell.borrow_mut();
        let idx = td.nodes.len();
        td.nodes.push(Node { inputs: Vec::new(), op: Op::Leaf, out: t.clone() });
        drop(td);
        t.bind(id, idx);
        idx
    }

    fn record(&self, inputs: Vec<usize>, op: Op, data: Vec<f64>, shape: &[usize]) -> Tensor {
        let out = Tensor::build(data, shape, false).expect("op produced invalid shape");
        let mut td = self.cell.borrow_mut();
        let idx = td.nodes.len();
        let id = td.id;
        td.nodes.push(Node { inputs, op, out: out.clone() });
        drop(td);
        out.bind(id, idx);
        out
    }

    // ────────────────────────── forward ops ──────────────────────────

    /// Matrix product of 2-d tensors: `[m×k] · [k×n] -> [m×n]`.
    pub fn matmul(&self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        let (m, k) = a.dims2("matmul")?;
        let (k2, n) = b.dims2("matmul")?;
        if k != k2 {
            return Err(Error::dim(
                "matmul",
                format!("inner dimensions disagree: {:?} x {:?}", a.shape(), b.shape()),
            ));
        }
        let ia = self.register(a);
        let ib = self.register(b);
        let out = raw_matmul(&a.data(), &b.data(), m, k, n);
        Ok(self.record(vec![ia, ib], Op::Matmul { m, k, n }, out, &[m, n]))
    }

    pub fn transpose(&self, a: &Tensor) -> Result<Tensor> {
        let (rows, cols) = a.dims2("transpose")?;
        let ia = self.register(a);
        let src = a.data();
        let mut out = vec![0.0; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                out[c * rows + r] = src[r * cols + c];
            }
        }
        drop(src);
        Ok(self.record(vec![ia], Op::Transpose { rows, cols }, out, &[cols, rows]))
    }

    fn zip_op(
        &self,
        name: &'static str,
        a: &Tensor,
        b: &Tensor,
        op: Op,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        let (sa, sb) = (a.shape(), b.shape());
        if sa != sb {
            return Err(Error::dim(name, format!("operand shapes differ: {sa:?} vs {sb:?}")));
        }
        let ia = self.register(a);
        let ib = self.register(b);
        let out: Vec<f64> = a.data().iter().zip(b.data().iter()).map(|(&x, &y)| f(x, y)).collect();
        Ok(self.record(vec![ia, ib], op, out, &sa))
    }

    pub fn add(&self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        self.zip_op("add", a, b, Op::Add, |x, y| x + y)
    }

    pub fn sub(&self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        self.zip_op("sub", a, b, Op::Sub, |x, y| x - y)
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        self.zip_op("mul", a, b, Op::Mul, |x, y| x * y)
    }

    /// Multiply by a compile-time-known scalar constant.
    pub fn scale(&self, a: &Tensor, c: f64) -> Result<Tensor> {
        let ia = self.register(a);
        let shape = a.shape();
        let out: Vec<f64> = a.data().iter().map(|&x| x * c).collect();
        Ok(self.record(vec![ia], Op::Scale { c }, out, &shape))
    }

    /// Multiply every entry of `a` by the single entry of `s`. The scalar is
    /// a tensor so it stays trainable (gates use this).
    pub fn scale_by(&self, a: &Tensor, s: &Tensor) -> Result<Tensor> {
        if s.numel() != 1 {
            return Err(Error::dim(
                "scale_by",
                format!("scale factor must have one element, got shape {:?}", s.shape()),
            ));
        }
        let ia = self.register(a);
        let is = self.register(s);
        let c = s.entry(0);
        let shape = a.shape();
        let out: Vec<f64> = a.data().iter().map(|&x| x * c).collect();
        Ok(self.record(vec![ia, is], Op::ScaleT, out, &shape))
    }

    fn unary_op(&self, a: &Tensor, op: Op, f: impl Fn(f64) -> f64) -> Tensor {
        let ia = self.register(a);
        let shape = a.shape();
        let out: Vec<f64> = a.data().iter().map(|&x| f(x)).collect();
        self.record(vec![ia], op, out, &shape)
    }

    pub fn sigmoid(&self, a: &Tensor) -> Tensor {
        self.unary_op(a, Op::Sigmoid, |x| 1.0 / (1.0 + (-x).exp()))
    }

    pub fn tanh(&self, a: &Tensor) -> Tensor {
        self.unary_op(a, Op::Tanh, f64::tanh)
    }

    pub fn relu(&self, a: &Tensor) -> Tensor {
        self.unary_op(a, Op::Relu, |x| x.max(0.0))
    }

    pub fn activate(&self, a: &Tensor, act: Activation) -> Tensor {
        match act {
            Activation::Sigmoid => self.sigmoid(a),
            Activation::Tanh => self.tanh(a),
            Activation::Relu => self.relu(a),
            Activation::Identity => self.scale(a, 1.0).expect("identity scale"),
        }
    }

    /// Softmax along `axis`, with max-subtraction. `-inf` entries come out
    /// as exactly 0; a slice of only `-inf` is an error.
    pub fn softmax(&self, a: &Tensor, axis: usize) -> Result<Tensor> {
        let shape = a.shape();
        let (outer, len, inner) = split_axis("softmax", &shape, axis)?;
        let ia = self.register(a);
        let src = a.data();
        let mut out = vec![0.0; src.len()];
        for o in 0..outer {
            for i in 0..inner {
                let at = |s: usize| o * len * inner + s * inner + i;
                let mut max = f64::NEG_INFINITY;
                for s in 0..len {
                    max = max.max(src[at(s)]);
                }
                if max == f64::NEG_INFINITY {
                    return Err(Error::DegenerateSlice { op: "softmax", index: o * inner + i });
                }
                let mut sum = 0.0;
                for s in 0..len {
                    let e = (src[at(s)] - max).exp();
                    out[at(s)] = e;
                    sum += e;
                }
                for s in 0..len {
                    out[at(s)] /= sum;
                }
            }
        }
        drop(src);
        Ok(self.record(vec![ia], Op::Softmax { axis }, out, &shape))
    }

    /// Concatenate along `axis`; all other dimensions must agree.
    pub fn concat(&self, parts: &[Tensor], axis: usize) -> Result<Tensor> {
        if parts.is_empty() {
            return Err(Error::dim("concat", "no tensors given".to_string()));
        }
        let first = parts[0].shape();
        if axis >= first.len() {
            return Err(Error::dim("concat", format!("axis {axis} out of range for {first:?}")));
        }
        let mut extents = Vec::with_capacity(parts.len());
        let mut total = 0;
        for p in parts {
            let s = p.shape();
            if s.len() != first.len()
                || s.iter().zip(&first).enumerate().any(|(d, (a, b))| d != axis && a != b)
            {
                return Err(Error::dim(
                    "concat",
                    format!("incompatible shapes {first:?} vs {s:?} along axis {axis}"),
                ));
            }
            extents.push(s[axis]);
            total += s[axis];
        }
        let mut out_shape = first.clone();
        out_shape[axis] = total;
        let outer: usize = first[..axis].iter().product();
        let inner: usize = first[axis + 1..].iter().product();

        let mut out = vec![0.0; outer * total * inner];
        let inputs: Vec<usize> = parts.iter().map(|p| self.register(p)).collect();
        let mut offset = 0;
        for (p, &len) in parts.iter().zip(&extents) {
            let src = p.data();
            for o in 0..outer {
                let dst_start = (o * total + offset) * inner;
                let src_start = o * len * inner;
                out[dst_start..dst_start + len * inner]
                    .copy_from_slice(&src[src_start..src_start + len * inner]);
            }
            offset += len;
        }
        Ok(self.record(inputs, Op::Concat { axis, extents }, out, &out_shape))
    }

    /// Maximum along `axis`, plus the flat input index of each winner.
    /// Ties go to the first occurrence. The axis is removed from the shape
    /// (a full reduction yields shape `[1]`).
    pub fn max_over_axis(&self, a: &Tensor, axis: usize) -> Result<(Tensor, Vec<usize>)> {
        let shape = a.shape();
        let (outer, len, inner) = split_axis("max_over_axis", &shape, axis)?;
        let ia = self.register(a);
        let src = a.data();
        let mut out = vec![0.0; outer * inner];
        let mut argmax = vec![0usize; outer * inner];
        for o in 0..outer {
            for i in 0..inner {
                let mut best = f64::NEG_INFINITY;
                let mut best_at = o * len * inner + i;
                for s in 0..len {
                    let idx = o * len * inner + s * inner + i;
                    if src[idx] > best {
                        best = src[idx];
                        best_at = idx;
                    }
                }
                out[o * inner + i] = best;
                argmax[o * inner + i] = best_at;
            }
        }
        drop(src);
        let mut out_shape: Vec<usize> =
            shape.iter().enumerate().filter(|&(d, _)| d != axis).map(|(_, &v)| v).collect();
        if out_shape.is_empty() {
            out_shape.push(1);
        }
        let t = self.record(vec![ia], Op::MaxOverAxis { argmax: argmax.clone() }, out, &out_shape);
        Ok((t, argmax))
    }

    /// Sum of all entries, as a `[1]` tensor.
    pub fn sum_all(&self, a: &Tensor) -> Tensor {
        let ia = self.register(a);
        let s: f64 = a.data().iter().sum();
        self.record(vec![ia], Op::SumAll, vec![s], &[1])
    }

    /// Mean of all entries, as a `[1]` tensor.
    pub fn mean_all(&self, a: &Tensor) -> Tensor {
        let n = a.numel() as f64;
        let s = self.sum_all(a);
        self.scale(&s, 1.0 / n).expect("scale scalar")
    }

    pub fn reshape(&self, a: &Tensor, shape: &[usize]) -> Result<Tensor> {
        let numel: usize = shape.iter().product();
        if numel != a.numel() || shape.contains(&0) {
            return Err(Error::dim(
                "reshape",
                format!("cannot reshape {:?} to {shape:?}", a.shape()),
            ));
        }
        let ia = self.register(a);
        let out = a.to_vec();
        Ok(self.record(vec![ia], Op::Reshape, out, shape))
    }

    /// Mean negative log-likelihood of `targets` under row-wise softmax of
    /// `logits` (`[rows × classes]`). Fused for numerical stability.
    pub fn cross_entropy_logits(&self, logits: &Tensor, targets: &[usize]) -> Result<Tensor> {
        let (rows, classes) = logits.dims2("cross_entropy_logits")?;
        if targets.len() != rows {
            return Err(Error::Contract(format!(
                "cross_entropy_logits: {rows} logit rows but {} targets",
                targets.len()
            )));
        }
        if let Some(&t) = targets.iter().find(|&&t| t >= classes) {
            return Err(Error::Contract(format!(
                "cross_entropy_logits: target {t} out of range for {classes} classes"
            )));
        }
        let ia = self.register(logits);
        let src = logits.data();
        let mut total = 0.0;
        for r in 0..rows {
            let row = &src[r * classes..(r + 1) * classes];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
            total += lse - row[targets[r]];
        }
        drop(src);
        let loss = total / rows as f64;
        Ok(self.record(
            vec![ia],
            Op::CrossEntropyLogits { targets: targets.to_vec() },
            vec![loss],
            &[1],
        ))
    }

    // ────────────────────────── backward ──────────────────────────

    /// Reverse sweep from a scalar loss. Visits every node exactly once and
    /// accumulates gradients into trainable leaves. A second call without
    /// [`Tape::reset`] is rejected.
    pub fn backward(&self, loss: &Tensor) -> Result<()> {
        if loss.numel() != 1 {
            return Err(Error::Contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                loss.shape()
            )));
        }
        let tape_id = self.cell.borrow().id;
        let loss_node = loss.node_on(tape_id).ok_or_else(|| {
            Error::Contract("loss tensor was not produced on this tape".to_string())
        })?;
        {
            let td = self.cell.borrow();
            if td.backward_done {
                return Err(Error::State(
                    "backward already ran on this tape; call reset() or build a new tape"
                        .to_string(),
                ));
            }
        }

        let td = self.cell.borrow();
        let n = td.nodes.len();
        let mut grads: Vec<Option<Vec<f64>>> = (0..n).map(|_| None).collect();
        grads[loss_node] = Some(vec![1.0]);
        let mut visits = 0usize;

        for i in (0..n).rev() {
            visits += 1;
            let Some(g) = grads[i].take() else { continue };
            let node = &td.nodes[i];
            match &node.op {
                Op::Leaf => {
                    if node.out.requires_grad() {
                        node.out.accumulate_grad(&g);
                    }
                }
                Op::Matmul { m, k, n: nn } => {
                    let (m, k, nn) = (*m, *k, *nn);
                    let a = td.nodes[node.inputs[0]].out.data();
                    let b = td.nodes[node.inputs[1]].out.data();
                    // dA = G · Bᵀ
                    let mut da = vec![0.0; m * k];
                    for r in 0..m {
                        for c in 0..k {
                            let mut s = 0.0;
                            for j in 0..nn {
                                s += g[r * nn + j] * b[c * nn + j];
                            }
                            da[r * k + c] = s;
                        }
                    }
                    // dB = Aᵀ · G
                    let mut db = vec![0.0; k * nn];
                    for r in 0..k {
                        for j in 0..nn {
                            let mut s = 0.0;
                            for q in 0..m {
                                s += a[q * k + r] * g[q * nn + j];
                            }
                            db[r * nn + j] = s;
                        }
                    }
                    drop(a);
                    drop(b);
                    scatter(&mut grads, node.inputs[0], da);
                    scatter(&mut grads, node.inputs[1], db);
                }
                Op::Transpose { rows, cols } => {
                    // output is [cols × rows]; route back transposed
                    let mut dg = vec![0.0; rows * cols];
                    for r in 0..*cols {
                        for c in 0..*rows {
                            dg[c * cols + r] = g[r * rows + c];
                        }
                    }
                    scatter(&mut grads, node.inputs[0], dg);
                }
                Op::Add => {
                    scatter(&mut grads, node.inputs[0], g.clone());
                    scatter(&mut grads, node.inputs[1], g);
                }
                Op::Sub => {
                    scatter(&mut grads, node.inputs[0], g.clone());
                    scatter(&mut grads, node.inputs[1], g.iter().map(|x| -x).collect());
                }
                Op::Mul => {
                    let a = td.nodes[node.inputs[0]].out.data();
                    let b = td.nodes[node.inputs[1]].out.data();
                    let da: Vec<f64> = g.iter().zip(b.iter()).map(|(gi, bi)| gi * bi).collect();
                    let db: Vec<f64> = g.iter().zip(a.iter()).map(|(gi, ai)| gi * ai).collect();
                    drop(a);
                    drop(b);
                    scatter(&mut grads, node.inputs[0], da);
                    scatter(&mut grads, node.inputs[1], db);
                }
                Op::Scale { c } => {
                    scatter(&mut grads, node.inputs[0], g.iter().map(|x| x * c).collect());
                }
                Op::ScaleT => {
                    let x = td.nodes[node.inputs[0]].out.data();
                    let s = td.nodes[node.inputs[1]].out.entry(0);
                    let dx: Vec<f64> = g.iter().map(|gi| gi * s).collect();
                    let ds: f64 = g.iter().zip(x.iter()).map(|(gi, xi)| gi * xi).sum();
                    drop(x);
                    scatter(&mut grads, node.inputs[0], dx);
                    scatter(&mut grads, node.inputs[1], vec![ds]);
                }
                Op::Sigmoid => {
                    let y = node.out.data();
                    let dx: Vec<f64> =
                        g.iter().zip(y.iter()).map(|(gi, yi)| gi * yi * (1.0 - yi)).collect();
                    drop(y);
                    scatter(&mut grads, node.inputs[0], dx);
                }
                Op::Tanh => {
                    let y = node.out.data();
                    let dx: Vec<f64> =
                        g.iter().zip(y.iter()).map(|(gi, yi)| gi * (1.0 - yi * yi)).collect();
                    drop(y);
                    scatter(&mut grads, node.inputs[0], dx);
                }
                Op::Relu => {
                    let x = td.nodes[node.inputs[0]].out.data();
                    let dx: Vec<f64> = g
                        .iter()
                        .zip(x.iter())
                        .map(|(gi, xi)| if *xi > 0.0 { *gi } else { 0.0 })
                        .collect();
                    drop(x);
                    scatter(&mut grads, node.inputs[0], dx);
                }
                Op::Softmax { axis } => {
                    let y = node.out.data();
                    let shape = node.out.shape();
                    let (outer, len, inner) = split_axis("softmax", &shape, *axis).unwrap();
                    let mut dx = vec![0.0; y.len()];
                    for o in 0..outer {
                        for i in 0..inner {
                            let at = |s: usize| o * len * inner + s * inner + i;
                            let mut dot = 0.0;
                            for s in 0..len {
                                dot += g[at(s)] * y[at(s)];
                            }
                            for s in 0..len {
                                dx[at(s)] = y[at(s)] * (g[at(s)] - dot);
                            }
                        }
                    }
                    drop(y);
                    scatter(&mut grads, node.inputs[0], dx);
                }
                Op::Concat { axis, extents } => {
                    let out_shape = node.out.shape();
                    let total = out_shape[*axis];
                    let outer: usize = out_shape[..*axis].iter().product();
                    let inner: usize = out_shape[*axis + 1..].iter().product();
                    let mut offset = 0;
                    for (p, &len) in extents.iter().enumerate() {
                        let mut dp = vec![0.0; outer * len * inner];
                        for o in 0..outer {
                            let src_start = (o * total + offset) * inner;
                            let dst_start = o * len * inner;
                            dp[dst_start..dst_start + len * inner]
                                .copy_from_slice(&g[src_start..src_start + len * inner]);
                        }
                        scatter(&mut grads, node.inputs[p], dp);
                        offset += len;
                    }
                }
                Op::MaxOverAxis { argmax } => {
                    let in_numel = td.nodes[node.inputs[0]].out.numel();
                    let mut dx = vec![0.0; in_numel];
                    for (slot, &src_idx) in argmax.iter().enumerate() {
                        dx[src_idx] += g[slot];
                    }
                    scatter(&mut grads, node.inputs[0], dx);
                }
                Op::SumAll => {
                    let in_numel = td.nodes[node.inputs[0]].out.numel();
                    scatter(&mut grads, node.inputs[0], vec![g[0]; in_numel]);
                }
                Op::Reshape => {
                    scatter(&mut grads, node.inputs[0], g);
                }
                Op::CrossEntropyLogits { targets } => {
                    let logits = td.nodes[node.inputs[0]].out.data();
                    let rows = targets.len();
                    let classes = logits.len() / rows;
                    let mut dl = vec![0.0; logits.len()];
                    for r in 0..rows {
                        let row = &logits[r * classes..(r + 1) * classes];
                        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        let sum: f64 = row.iter().map(|&x| (x - max).exp()).sum();
                        for c in 0..classes {
                            let p = (row[c] - max).exp() / sum;
                            let ind = if c == targets[r] { 1.0 } else { 0.0 };
                            dl[r * classes + c] = g[0] * (p - ind) / rows as f64;
                        }
                    }
                    drop(logits);
                    scatter(&mut grads, node.inputs[0], dl);
                }
            }
        }
        drop(td);

        let mut td = self.cell.borrow_mut();
        td.backward_done = true;
        td.last_visits = visits;
        Ok(())
    }
}

fn scatter(grads: &mut [Option<Vec<f64>>], idx: usize, delta: Vec<f64>) {
    match grads[idx] {
        Some(ref mut g) => {
            for (gi, di) in g.iter_mut().zip(&delta) {
                *gi += di;
            }
        }
        None => grads[idx] = Some(delta),
    }
}

fn split_axis(op: &'static str, shape: &[usize], axis: usize) -> Result<(usize, usize, usize)> {
    if axis >= shape.len() {
        return Err(Error::dim(op, format!("axis {axis} out of range for shape {shape:?}")));
    }
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    Ok((outer, shape[axis], inner))
}

fn raw_matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            let crow = &mut c[i * n..(i + 1) * n];
            for j in 0..n {
                crow[j] += aip * brow[j];
            }
        }
    }
    c
}

/// Trainable `[rows × cols]` matrix with Glorot-uniform entries.
pub fn xavier_init(rng: &mut crate::rng::Prng, rows: usize, cols: usize) -> Tensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.uniform(-bound, bound)).collect();
    Tensor::param(data, &[rows, cols]).expect("xavier shape")
}

// ───────────────────────────── optimizer ─────────────────────────────

/// One plain gradient-descent step: `param <- param - lr * grad`, then the
/// gradients are cleared. Errors if any parameter has no gradient.
pub fn sgd_step(params: &[Tensor], learning_rate: f64) -> Result<()> {
    for p in params {
        if p.grad().is_none() {
            return Err(Error::State(format!(
                "sgd_step: parameter with shape {:?} has no gradient (run backward first)",
                p.shape()
            )));
        }
    }
    for p in params {
        let mut cell = p.cell.borrow_mut();
        let grad = cell.grad.take().expect("checked above");
        for (x, g) in cell.data.iter_mut().zip(&grad) {
            *x -= learning_rate * g;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests;
