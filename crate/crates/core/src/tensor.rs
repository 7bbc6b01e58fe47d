//! Minimal reverse-mode automatic differentiation over dense f64 tensors.
//!
//! Tensors are row-major with explicit shapes. Every operation that consumes
//! a tracked tensor records a node holding its parents and a backward closure;
//! `backward()` on a scalar walks the graph in reverse topological order and
//! accumulates gradients into every tracked ancestor. Gradients accumulate
//! across calls until `zero_grad()` is invoked.
//!
//! There is no broadcasting beyond scalars: binary elementwise operations
//! require identical shapes. All values are f64; graphs are confined to one
//! thread (`Rc` interior), independent graphs may live on separate threads.

use std::cell::{Cell, Ref, RefCell};
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::rc::Rc;

use rand::Rng;

use crate::error::{Error, Result};

/// Per-parent gradient contributions, aligned with `Node::parents`.
/// An empty vec means "no contribution" (parent untracked).
type BackwardFn = Box<dyn Fn(&[f64]) -> Vec<Vec<f64>>>;

struct Node {
    op: &'static str,
    parents: Vec<Tensor>,
    backward: BackwardFn,
}

struct Inner {
    shape: Vec<usize>,
    data: RefCell<Vec<f64>>,
    grad: RefCell<Option<Vec<f64>>>,
    requires_grad: Cell<bool>,
    node: Option<Node>,
}

/// Handle to a tensor value; clones share storage and autograd lineage.
pub struct Tensor {
    inner: Rc<Inner>,
}

impl Clone for Tensor {
    fn clone(&self) -> Self {
        Tensor {
            inner: Rc::clone(&self.inner),
        }
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = self.inner.node.as_ref().map(|n| n.op).unwrap_or("leaf");
        write!(
            f,
            "Tensor{{shape: {:?}, op: {}, tracked: {}}}",
            self.inner.shape,
            op,
            self.is_tracked()
        )
    }
}

fn numel_of(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Tensor> {
        if numel_of(&shape) != data.len() {
            return Err(Error::InvalidArgument(format!(
                "shape {:?} holds {} elements, got {}",
                shape,
                numel_of(&shape),
                data.len()
            )));
        }
        Ok(Self::make(shape, data, None))
    }

    pub fn zeros(shape: Vec<usize>) -> Tensor {
        let n = numel_of(&shape);
        Self::make(shape, vec![0.0; n], None)
    }

    pub fn scalar(v: f64) -> Tensor {
        Self::make(vec![1], vec![v], None)
    }

    /// Leaf tensor with gradient tracking enabled (a trainable parameter).
    pub fn param(shape: Vec<usize>, data: Vec<f64>) -> Result<Tensor> {
        let t = Tensor::new(shape, data)?;
        t.inner.requires_grad.set(true);
        Ok(t)
    }

    /// Uniform(lo, hi) initialized leaf, drawn in row-major element order.
    pub fn rand_uniform<R: Rng>(shape: Vec<usize>, lo: f64, hi: f64, rng: &mut R) -> Tensor {
        let n = numel_of(&shape);
        let data = (0..n).map(|_| rng.gen::<f64>() * (hi - lo) + lo).collect();
        Self::make(shape, data, None)
    }

    fn make(shape: Vec<usize>, data: Vec<f64>, node: Option<Node>) -> Tensor {
        Tensor {
            inner: Rc::new(Inner {
                shape,
                data: RefCell::new(data),
                grad: RefCell::new(None),
                requires_grad: Cell::new(false),
                node,
            }),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn numel(&self) -> usize {
        self.inner.data.borrow().len()
    }

    pub fn data(&self) -> Ref<'_, Vec<f64>> {
        self.inner.data.borrow()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.inner.data.borrow().clone()
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.numel(), 1, "item() on non-scalar");
        self.inner.data.borrow()[0]
    }

    /// Overwrite the stored values in place (used by optimizers and grad_check).
    pub fn set_data(&self, vals: &[f64]) -> Result<()> {
        let mut d = self.inner.data.borrow_mut();
        if d.len() != vals.len() {
            return Err(Error::InvalidArgument(format!(
                "set_data length {} != tensor size {}",
                vals.len(),
                d.len()
            )));
        }
        d.copy_from_slice(vals);
        Ok(())
    }

    fn set_elem(&self, i: usize, v: f64) {
        self.inner.data.borrow_mut()[i] = v;
    }

    pub fn set_tracked(&self, tracked: bool) {
        self.inner.requires_grad.set(tracked);
    }

    /// True when this tensor participates in gradient flow.
    pub fn is_tracked(&self) -> bool {
        self.inner.requires_grad.get() || self.inner.node.is_some()
    }

    pub fn grad(&self) -> Option<Vec<f64>> {
        self.inner.grad.borrow().clone()
    }

    pub fn zero_grad(&self) {
        *self.inner.grad.borrow_mut() = None;
    }

    /// Clear one row's slice of a 2-D tensor's gradient, if a gradient exists.
    pub fn zero_grad_row(&self, row: usize) -> Result<()> {
        if self.inner.shape.len() != 2 {
            return Err(Error::dim("zero_grad_row", &self.inner.shape, &[]));
        }
        let cols = self.inner.shape[1];
        if row >= self.inner.shape[0] {
            return Err(Error::InvalidArgument(format!(
                "zero_grad_row: row {} out of {}",
                row, self.inner.shape[0]
            )));
        }
        if let Some(g) = self.inner.grad.borrow_mut().as_mut() {
            for v in &mut g[row * cols..(row + 1) * cols] {
                *v = 0.0;
            }
        }
        Ok(())
    }

    fn accum_grad(&self, g: &[f64]) {
        let mut slot = self.inner.grad.borrow_mut();
        match slot.as_mut() {
            Some(acc) => {
                for (a, b) in acc.iter_mut().zip(g) {
                    *a += b;
                }
            }
            None => *slot = Some(g.to_vec()),
        }
    }

    fn ptr_id(&self) -> usize {
        Rc::as_ptr(&self.inner) as usize
    }

    fn with_parents(
        shape: Vec<usize>,
        data: Vec<f64>,
        op: &'static str,
        parents: Vec<Tensor>,
        backward: BackwardFn,
    ) -> Tensor {
        let tracked = parents.iter().any(|p| p.is_tracked());
        let node = if tracked {
            Some(Node {
                op,
                parents,
                backward,
            })
        } else {
            None
        };
        Self::make(shape, data, node)
    }
}

// ---------------------------------------------------------------------------
// raw kernels (no autograd)
// ---------------------------------------------------------------------------

fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            let crow = &mut c[i * n..(i + 1) * n];
            for j in 0..n {
                crow[j] += av * brow[j];
            }
        }
    }
    c
}

fn transpose_raw(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = a[i * cols + j];
        }
    }
    out
}

/// (outer, axis_len, inner) block decomposition for an axis.
fn lane_dims(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

// ---------------------------------------------------------------------------
// operations
// ---------------------------------------------------------------------------

impl Tensor {
    /// Matrix product of two 2-D tensors.
    pub fn matmul(&self, rhs: &Tensor) -> Result<Tensor> {
        let (sa, sb) = (self.shape(), rhs.shape());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::dim("matmul", sa, sb));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let out = matmul_raw(&self.data(), &rhs.data(), m, k, n);
        let (a_saved, b_saved) = (self.to_vec(), rhs.to_vec());
        let (need_a, need_b) = (self.is_tracked(), rhs.is_tracked());
        Ok(Tensor::with_parents(
            vec![m, n],
            out,
            "matmul",
            vec![self.clone(), rhs.clone()],
            Box::new(move |dy| {
                let da = if need_a {
                    // dA = dC · Bᵀ
                    matmul_raw(dy, &transpose_raw(&b_saved, k, n), m, n, k)
                } else {
                    vec![]
                };
                let db = if need_b {
                    // dB = Aᵀ · dC
                    matmul_raw(&transpose_raw(&a_saved, m, k), dy, k, m, n)
                } else {
                    vec![]
                };
                vec![da, db]
            }),
        ))
    }

    /// Matrix-vector product: self is [m × k], x is [k], result [m].
    pub fn matvec(&self, x: &Tensor) -> Result<Tensor> {
        let (sa, sx) = (self.shape(), x.shape());
        if sa.len() != 2 || sx.len() != 1 || sa[1] != sx[0] {
            return Err(Error::dim("matvec", sa, sx));
        }
        let (m, k) = (sa[0], sa[1]);
        let a = self.data();
        let xv = x.data();
        let mut out = vec![0.0; m];
        for i in 0..m {
            let row = &a[i * k..(i + 1) * k];
            out[i] = row.iter().zip(xv.iter()).map(|(r, v)| r * v).sum();
        }
        drop(a);
        drop(xv);
        let (a_saved, x_saved) = (self.to_vec(), x.to_vec());
        let (need_a, need_x) = (self.is_tracked(), x.is_tracked());
        Ok(Tensor::with_parents(
            vec![m],
            out,
            "matvec",
            vec![self.clone(), x.clone()],
            Box::new(move |dy| {
                let da = if need_a {
                    // dA = dy ⊗ x
                    let mut g = vec![0.0; m * k];
                    for i in 0..m {
                        for j in 0..k {
                            g[i * k + j] = dy[i] * x_saved[j];
                        }
                    }
                    g
                } else {
                    vec![]
                };
                let dx = if need_x {
                    // dx = Aᵀ · dy
                    let mut g = vec![0.0; k];
                    for i in 0..m {
                        for j in 0..k {
                            g[j] += a_saved[i * k + j] * dy[i];
                        }
                    }
                    g
                } else {
                    vec![]
                };
                vec![da, dx]
            }),
        ))
    }

    /// 2-D transpose.
    pub fn transpose(&self) -> Result<Tensor> {
        let s = self.shape();
        if s.len() != 2 {
            return Err(Error::dim("transpose", s, &[]));
        }
        let (r, c) = (s[0], s[1]);
        let out = transpose_raw(&self.data(), r, c);
        Ok(Tensor::with_parents(
            vec![c, r],
            out,
            "transpose",
            vec![self.clone()],
            Box::new(move |dy| vec![transpose_raw(dy, c, r)]),
        ))
    }

    /// Inner product of two equal-length 1-D tensors; result has shape [1].
    pub fn dot(&self, rhs: &Tensor) -> Result<Tensor> {
        let (sa, sb) = (self.shape(), rhs.shape());
        if sa.len() != 1 || sa != sb {
            return Err(Error::dim("dot", sa, sb));
        }
        let v: f64 = self
            .data()
            .iter()
            .zip(rhs.data().iter())
            .map(|(a, b)| a * b)
            .sum();
        let (a_saved, b_saved) = (self.to_vec(), rhs.to_vec());
        Ok(Tensor::with_parents(
            vec![1],
            vec![v],
            "dot",
            vec![self.clone(), rhs.clone()],
            Box::new(move |dy| {
                let d = dy[0];
                vec![
                    b_saved.iter().map(|b| d * b).collect(),
                    a_saved.iter().map(|a| d * a).collect(),
                ]
            }),
        ))
    }

    fn binary_elementwise(
        &self,
        rhs: &Tensor,
        op: &'static str,
        f: fn(f64, f64) -> f64,
        df: fn(f64, f64, f64) -> (f64, f64),
    ) -> Result<Tensor> {
        if self.shape() != rhs.shape() {
            return Err(Error::dim(op, self.shape(), rhs.shape()));
        }
        let out: Vec<f64> = self
            .data()
            .iter()
            .zip(rhs.data().iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        let (a_saved, b_saved) = (self.to_vec(), rhs.to_vec());
        Ok(Tensor::with_parents(
            self.shape().to_vec(),
            out,
            op,
            vec![self.clone(), rhs.clone()],
            Box::new(move |dy| {
                let mut da = vec![0.0; dy.len()];
                let mut db = vec![0.0; dy.len()];
                for i in 0..dy.len() {
                    let (ga, gb) = df(a_saved[i], b_saved[i], dy[i]);
                    da[i] = ga;
                    db[i] = gb;
                }
                vec![da, db]
            }),
        ))
    }

    pub fn add(&self, rhs: &Tensor) -> Result<Tensor> {
        self.binary_elementwise(rhs, "add", |a, b| a + b, |_, _, d| (d, d))
    }

    pub fn sub(&self, rhs: &Tensor) -> Result<Tensor> {
        self.binary_elementwise(rhs, "sub", |a, b| a - b, |_, _, d| (d, -d))
    }

    pub fn mul(&self, rhs: &Tensor) -> Result<Tensor> {
        self.binary_elementwise(rhs, "mul", |a, b| a * b, |a, b, d| (d * b, d * a))
    }

    pub fn add_scalar(&self, c: f64) -> Tensor {
        let out: Vec<f64> = self.data().iter().map(|&a| a + c).collect();
        Tensor::with_parents(
            self.shape().to_vec(),
            out,
            "add_scalar",
            vec![self.clone()],
            Box::new(move |dy| vec![dy.to_vec()]),
        )
    }

    pub fn mul_scalar(&self, c: f64) -> Tensor {
        let out: Vec<f64> = self.data().iter().map(|&a| a * c).collect();
        Tensor::with_parents(
            self.shape().to_vec(),
            out,
            "mul_scalar",
            vec![self.clone()],
            Box::new(move |dy| vec![dy.iter().map(|d| d * c).collect()]),
        )
    }

    pub fn neg(&self) -> Tensor {
        self.mul_scalar(-1.0)
    }

    pub fn tanh(&self) -> Tensor {
        let out: Vec<f64> = self.data().iter().map(|a| a.tanh()).collect();
        let y = out.clone();
        Tensor::with_parents(
            self.shape().to_vec(),
            out,
            "tanh",
            vec![self.clone()],
            Box::new(move |dy| {
                vec![dy
                    .iter()
                    .zip(y.iter())
                    .map(|(d, y)| d * (1.0 - y * y))
                    .collect()]
            }),
        )
    }

    pub fn sigmoid(&self) -> Tensor {
        let out: Vec<f64> = self
            .data()
            .iter()
            .map(|a| 1.0 / (1.0 + (-a).exp()))
            .collect();
        let y = out.clone();
        Tensor::with_parents(
            self.shape().to_vec(),
            out,
            "sigmoid",
            vec![self.clone()],
            Box::new(move |dy| {
                vec![dy
                    .iter()
                    .zip(y.iter())
                    .map(|(d, y)| d * y * (1.0 - y))
                    .collect()]
            }),
        )
    }

    /// Sum of all elements; result has shape [1].
    pub fn sum(&self) -> Tensor {
        let v: f64 = self.data().iter().sum();
        let n = self.numel();
        Tensor::with_parents(
            vec![1],
            vec![v],
            "sum",
            vec![self.clone()],
            Box::new(move |dy| vec![vec![dy[0]; n]]),
        )
    }

    /// Numerically stable softmax along `axis` (max subtraction per lane).
    pub fn softmax(&self, axis: usize) -> Result<Tensor> {
        self.check_lane_op("softmax", axis)?;
        let (outer, len, inner) = lane_dims(self.shape(), axis);
        let x = self.data();
        let mut out = vec![0.0; x.len()];
        for o in 0..outer {
            for i in 0..inner {
                let at = |j: usize| (o * len + j) * inner + i;
                let mut mx = f64::NEG_INFINITY;
                for j in 0..len {
                    mx = mx.max(x[at(j)]);
                }
                let mut z = 0.0;
                for j in 0..len {
                    let e = (x[at(j)] - mx).exp();
                    out[at(j)] = e;
                    z += e;
                }
                for j in 0..len {
                    out[at(j)] /= z;
                }
            }
        }
        drop(x);
        let y = out.clone();
        let shape = self.shape().to_vec();
        Ok(Tensor::with_parents(
            shape,
            out,
            "softmax",
            vec![self.clone()],
            Box::new(move |dy| {
                let mut dx = vec![0.0; dy.len()];
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |j: usize| (o * len + j) * inner + i;
                        let s: f64 = (0..len).map(|j| dy[at(j)] * y[at(j)]).sum();
                        for j in 0..len {
                            dx[at(j)] = y[at(j)] * (dy[at(j)] - s);
                        }
                    }
                }
                vec![dx]
            }),
        ))
    }

    /// log(softmax(x)) computed directly from the log-sum-exp, along `axis`.
    pub fn log_softmax(&self, axis: usize) -> Result<Tensor> {
        self.check_lane_op("log_softmax", axis)?;
        let (outer, len, inner) = lane_dims(self.shape(), axis);
        let x = self.data();
        let mut out = vec![0.0; x.len()];
        for o in 0..outer {
            for i in 0..inner {
                let at = |j: usize| (o * len + j) * inner + i;
                let mut mx = f64::NEG_INFINITY;
                for j in 0..len {
                    mx = mx.max(x[at(j)]);
                }
                let mut z = 0.0;
                for j in 0..len {
                    z += (x[at(j)] - mx).exp();
                }
                let lse = mx + z.ln();
                for j in 0..len {
                    out[at(j)] = x[at(j)] - lse;
                }
            }
        }
        drop(x);
        let y = out.clone();
        let shape = self.shape().to_vec();
        Ok(Tensor::with_parents(
            shape,
            out,
            "log_softmax",
            vec![self.clone()],
            Box::new(move |dy| {
                let mut dx = vec![0.0; dy.len()];
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |j: usize| (o * len + j) * inner + i;
                        let s: f64 = (0..len).map(|j| dy[at(j)]).sum();
                        for j in 0..len {
                            dx[at(j)] = dy[at(j)] - y[at(j)].exp() * s;
                        }
                    }
                }
                vec![dx]
            }),
        ))
    }

    fn check_lane_op(&self, op: &'static str, axis: usize) -> Result<()> {
        if axis >= self.shape().len() {
            return Err(Error::InvalidArgument(format!(
                "{op}: axis {axis} out of range for shape {:?}",
                self.shape()
            )));
        }
        if self.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("{op}: non-finite input")));
        }
        Ok(())
    }

    /// Contiguous sub-range along one axis.
    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> Result<Tensor> {
        let shape = self.shape().to_vec();
        if axis >= shape.len() || start + len > shape[axis] || len == 0 {
            return Err(Error::InvalidArgument(format!(
                "narrow: range {start}..{} invalid for axis {axis} of shape {shape:?}",
                start + len
            )));
        }
        let (outer, axis_len, inner) = lane_dims(&shape, axis);
        let x = self.data();
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * axis_len + start) * inner;
            out.extend_from_slice(&x[base..base + len * inner]);
        }
        drop(x);
        let mut out_shape = shape.clone();
        out_shape[axis] = len;
        let total = numel_of(&shape);
        Ok(Tensor::with_parents(
            out_shape,
            out,
            "narrow",
            vec![self.clone()],
            Box::new(move |dy| {
                let mut dx = vec![0.0; total];
                for o in 0..outer {
                    let src = o * len * inner;
                    let dst = (o * axis_len + start) * inner;
                    dx[dst..dst + len * inner].copy_from_slice(&dy[src..src + len * inner]);
                }
                vec![dx]
            }),
        ))
    }

    /// Row `i` of a 2-D tensor as a 1-D tensor.
    pub fn row(&self, i: usize) -> Result<Tensor> {
        let s = self.shape();
        if s.len() != 2 || i >= s[0] {
            return Err(Error::InvalidArgument(format!(
                "row: index {i} invalid for shape {s:?}"
            )));
        }
        let (r, c) = (s[0], s[1]);
        let out = self.data()[i * c..(i + 1) * c].to_vec();
        Ok(Tensor::with_parents(
            vec![c],
            out,
            "row",
            vec![self.clone()],
            Box::new(move |dy| {
                let mut dx = vec![0.0; r * c];
                dx[i * c..(i + 1) * c].copy_from_slice(dy);
                vec![dx]
            }),
        ))
    }

    /// Same data under a new shape with equal element count.
    pub fn reshape(&self, new_shape: Vec<usize>) -> Result<Tensor> {
        if numel_of(&new_shape) != self.numel() {
            return Err(Error::dim("reshape", self.shape(), &new_shape));
        }
        Ok(Tensor::with_parents(
            new_shape,
            self.to_vec(),
            "reshape",
            vec![self.clone()],
            Box::new(move |dy| vec![dy.to_vec()]),
        ))
    }

    /// Rows of an embedding matrix selected by index, one per entry of `ids`.
    /// Gradient scatters back into the selected rows when tracked.
    pub fn gather_rows(&self, ids: &[usize]) -> Result<Tensor> {
        let s = self.shape();
        if s.len() != 2 {
            return Err(Error::dim("gather_rows", s, &[]));
        }
        let (rows, cols) = (s[0], s[1]);
        if let Some(&bad) = ids.iter().find(|&&i| i >= rows) {
            return Err(Error::InvalidArgument(format!(
                "gather_rows: id {bad} out of range (rows: {rows})"
            )));
        }
        let x = self.data();
        let mut out = Vec::with_capacity(ids.len() * cols);
        for &i in ids {
            out.extend_from_slice(&x[i * cols..(i + 1) * cols]);
        }
        drop(x);
        let ids_saved = ids.to_vec();
        Ok(Tensor::with_parents(
            vec![ids.len(), cols],
            out,
            "gather_rows",
            vec![self.clone()],
            Box::new(move |dy| {
                let mut dx = vec![0.0; rows * cols];
                for (k, &i) in ids_saved.iter().enumerate() {
                    for j in 0..cols {
                        dx[i * cols + j] += dy[k * cols + j];
                    }
                }
                vec![dx]
            }),
        ))
    }

    /// Inverted dropout: in training each element is zeroed with probability
    /// `p` and survivors are scaled by 1/(1-p); in eval the input passes
    /// through unchanged.
    pub fn dropout<R: Rng>(&self, p: f64, training: bool, rng: &mut R) -> Result<Tensor> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Config(format!(
                "dropout probability {p} outside [0, 1)"
            )));
        }
        if !training || p == 0.0 {
            return Ok(self.clone());
        }
        let scale = 1.0 / (1.0 - p);
        let mask: Vec<f64> = (0..self.numel())
            .map(|_| if rng.gen::<f64>() < p { 0.0 } else { scale })
            .collect();
        let out: Vec<f64> = self
            .data()
            .iter()
            .zip(mask.iter())
            .map(|(x, m)| x * m)
            .collect();
        Ok(Tensor::with_parents(
            self.shape().to_vec(),
            out,
            "dropout",
            vec![self.clone()],
            Box::new(move |dy| vec![dy.iter().zip(mask.iter()).map(|(d, m)| d * m).collect()]),
        ))
    }
}

/// Concatenate tensors along `axis`; all other dimensions must agree.
pub fn concat(parts: &[&Tensor], axis: usize) -> Result<Tensor> {
    if parts.is_empty() {
        return Err(Error::InvalidArgument("concat: no inputs".into()));
    }
    let first = parts[0].shape().to_vec();
    if axis >= first.len() {
        return Err(Error::InvalidArgument(format!(
            "concat: axis {axis} out of range for shape {first:?}"
        )));
    }
    let mut axis_total = 0;
    for p in parts {
        let s = p.shape();
        if s.len() != first.len()
            || s.iter()
                .enumerate()
                .any(|(d, &v)| d != axis && v != first[d])
        {
            return Err(Error::dim("concat", &first, s));
        }
        axis_total += s[axis];
    }
    let mut out_shape = first.clone();
    out_shape[axis] = axis_total;
    let (outer, _, inner) = lane_dims(&out_shape, axis);
    let sizes: Vec<usize> = parts.iter().map(|p| p.shape()[axis]).collect();
    let mut out = vec![0.0; numel_of(&out_shape)];
    for o in 0..outer {
        let mut offset = 0;
        for (p, &sz) in parts.iter().zip(&sizes) {
            let d = p.data();
            let src = o * sz * inner;
            let dst = (o * axis_total + offset) * inner;
            out[dst..dst + sz * inner].copy_from_slice(&d[src..src + sz * inner]);
            offset += sz;
        }
    }
    let parents: Vec<Tensor> = parts.iter().map(|p| (*p).clone()).collect();
    Ok(Tensor::with_parents(
        out_shape,
        out,
        "concat",
        parents,
        Box::new(move |dy| {
            let mut grads: Vec<Vec<f64>> = sizes.iter().map(|&sz| vec![0.0; outer * sz * inner]).collect();
            for o in 0..outer {
                let mut offset = 0;
                for (g, &sz) in grads.iter_mut().zip(&sizes) {
                    let dst = o * sz * inner;
                    let src = (o * axis_total + offset) * inner;
                    g[dst..dst + sz * inner].copy_from_slice(&dy[src..src + sz * inner]);
                    offset += sz;
                }
            }
            grads
        }),
    ))
}

/// Stack equal-length 1-D tensors into a [rows × len] matrix.
pub fn stack_rows(rows: &[Tensor]) -> Result<Tensor> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("stack_rows: no inputs".into()));
    }
    let len = rows[0].numel();
    for r in rows {
        if r.shape().len() != 1 || r.numel() != len {
            return Err(Error::dim("stack_rows", rows[0].shape(), r.shape()));
        }
    }
    let mut out = Vec::with_capacity(rows.len() * len);
    for r in rows {
        out.extend_from_slice(&r.data());
    }
    let n = rows.len();
    Ok(Tensor::with_parents(
        vec![n, len],
        out,
        "stack_rows",
        rows.to_vec(),
        Box::new(move |dy| (0..n).map(|i| dy[i * len..(i + 1) * len].to_vec()).collect()),
    ))
}

// ---------------------------------------------------------------------------
// backward pass
// ---------------------------------------------------------------------------

impl Tensor {
    /// Reverse-mode gradient pass from a scalar. Gradients of tracked
    /// ancestors are accumulated (call `zero_grad` between steps).
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(Error::InvalidArgument(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.shape()
            )));
        }
        let order = topo_post_order(self);
        let mut scratch: HashMap<usize, Vec<f64>> = HashMap::new();
        scratch.insert(self.ptr_id(), vec![1.0]);
        for t in order.iter().rev() {
            let Some(g) = scratch.get(&t.ptr_id()).cloned() else {
                continue;
            };
            if let Some(node) = &t.inner.node {
                let contribs = (node.backward)(&g);
                debug_assert_eq!(contribs.len(), node.parents.len(), "op {}", node.op);
                for (p, c) in node.parents.iter().zip(contribs) {
                    if c.is_empty() {
                        continue;
                    }
                    match scratch.get_mut(&p.ptr_id()) {
                        Some(acc) => {
                            for (a, b) in acc.iter_mut().zip(&c) {
                                *a += b;
                            }
                        }
                        None => {
                            scratch.insert(p.ptr_id(), c);
                        }
                    }
                }
            }
        }
        for t in &order {
            if !t.is_tracked() {
                continue;
            }
            if let Some(g) = scratch.get(&t.ptr_id()) {
                t.accum_grad(g);
            }
        }
        Ok(())
    }
}

fn topo_post_order(root: &Tensor) -> Vec<Tensor> {
    enum Frame {
        Enter(Tensor),
        Exit(Tensor),
    }
    let mut order = Vec::new();
    let mut visited: HashSet<usize> = HashSet::new();
    let mut stack = vec![Frame::Enter(root.clone())];
    while let Some(frame) = stack.pop() {
        match frame {
            Frame::Enter(t) => {
                if !visited.insert(t.ptr_id()) {
                    continue;
                }
                stack.push(Frame::Exit(t.clone()));
                if let Some(node) = &t.inner.node {
                    for p in &node.parents {
                        if !visited.contains(&p.ptr_id()) {
                            stack.push(Frame::Enter(p.clone()));
                        }
                    }
                }
            }
            Frame::Exit(t) => order.push(t),
        }
    }
    order
}

// ---------------------------------------------------------------------------
// gradient checking
// ---------------------------------------------------------------------------

/// Compare analytic gradients of `f` at `x` against central finite
/// differences. Returns the max over elements of
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
pub fn grad_check<F>(f: F, x: &Tensor, eps: f64) -> Result<f64>
where
    F: Fn(&Tensor) -> Result<Tensor>,
{
    if eps <= 0.0 {
        return Err(Error::InvalidArgument("grad_check: eps must be > 0".into()));
    }
    if !x.inner.requires_grad.get() {
        return Err(Error::InvalidArgument(
            "grad_check: x must be a tracked leaf".into(),
        ));
    }
    x.zero_grad();
    let loss = f(x)?;
    if loss.numel() != 1 {
        return Err(Error::InvalidArgument(
            "grad_check: f must be scalar-valued".into(),
        ));
    }
    loss.backward()?;
    let analytic = x.grad().unwrap_or_else(|| vec![0.0; x.numel()]);
    let mut max_rel: f64 = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        let orig = x.data()[i];
        x.set_elem(i, orig + eps);
        let lp = f(x)?.item();
        x.set_elem(i, orig - eps);
        let lm = f(x)?.item();
        x.set_elem(i, orig);
        let numeric = (lp - lm) / (2.0 * eps);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        max_rel = max_rel.max(rel);
    }
    x.zero_grad();
    Ok(max_rel)
}
