use rand::{Rng, RngCore};

use super::kernels::{self, ConvGeom};
use super::{sigmoid, Scalar, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddBias(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Relu(Var),
    Sigmoid(Var),
    Softmax {
        x: Var,
        outer: usize,
        len: usize,
        inner: usize,
    },
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        normed: Vec<T>,
        rstd: Vec<T>,
    },
    Dropout {
        x: Var,
        mask: Vec<T>,
    },
    Conv2d {
        x: Var,
        kernel: Var,
        bias: Option<Var>,
        geom: ConvGeom,
    },
    MaxPool2d {
        x: Var,
        argmax: Vec<usize>,
    },
    GlobalAvgPool {
        x: Var,
        spatial: usize,
    },
    Concat {
        parts: Vec<(Var, usize)>,
        outer: usize,
        inner: usize,
    },
    Gather {
        table: Var,
        indices: Vec<usize>,
    },
    Transpose(Var),
    SliceCols {
        x: Var,
        start: usize,
    },
    Reshape(Var),
    Sum(Var),
    Mean(Var),
    BceWithLogits {
        logits: Var,
        targets: Vec<T>,
    },
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Records primitive applications in order; `backward` replays them in
/// reverse. Node indices are assigned at creation, so every node's inputs
/// precede it.
#[derive(Debug)]
pub struct Tape<T = f32> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Vec<T>>>,
}

impl<T> Default for Tape<T> {
    fn default() -> Self {
        Self {
            nodes: Vec::new(),
            grads: Vec::new(),
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }
}

fn check_finite<T: Scalar>(op: &'static str, data: &[T]) -> Result<()> {
    if data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { op })
    }
}

fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

fn accumulate<T: Scalar>(grads: &mut [Option<Vec<T>>], v: Var, contrib: &[T]) {
    match &mut grads[v.0] {
        Some(g) => {
            for (a, &b) in g.iter_mut().zip(contrib) {
                *a += b;
            }
        }
        slot @ None => *slot = Some(contrib.to_vec()),
    }
}

impl<T: Scalar> Tape<T> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient from the last backward pass, if `v` took part in it.
    pub fn grad(&self, v: Var) -> Option<Tensor<T>> {
        let g = self.grads.get(v.0)?.as_ref()?;
        Some(Tensor::from_vec(self.shape(v).to_vec(), g.clone()).expect("grad matches value shape"))
    }

    /// Records a trainable leaf.
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, true)
    }

    /// Records a leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, false)
    }

    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    fn record(&mut self, name: &'static str, shape: Vec<usize>, data: Vec<T>, op: Op<T>, inputs: &[Var]) -> Result<Var> {
        check_finite(name, &data)?;
        let requires_grad = self.rg(inputs);
        let value = Tensor::from_vec(shape, data)?;
        Ok(self.push(value, op, requires_grad))
    }

    fn dims2(&self, op: &'static str, v: Var) -> Result<(usize, usize)> {
        match *self.shape(v) {
            [r, c] => Ok((r, c)),
            ref s => Err(Error::Shape(format!("{op} expects a 2-D tensor, got {s:?}"))),
        }
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Dimension {
                op,
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let dim_err = || Error::Dimension {
            op: "matmul",
            lhs: self.shape(a).to_vec(),
            rhs: self.shape(b).to_vec(),
        };
        let ((m, k), (k2, n)) = match (self.dims2("matmul", a), self.dims2("matmul", b)) {
            (Ok(x), Ok(y)) => (x, y),
            _ => return Err(dim_err()),
        };
        if k != k2 {
            return Err(dim_err());
        }
        let data = kernels::matmul(self.value(a).data(), self.value(b).data(), m, k, n);
        self.record("matmul", vec![m, n], data, Op::MatMul(a, b), &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(&x, &y)| x + y).collect();
        self.record("add", self.shape(a).to_vec(), data, Op::Add(a, b), &[a, b])
    }

    /// `x[m×n] + bias[n]`, broadcasting the bias over rows.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (_, n) = self.dims2("add_bias", x)?;
        if self.value(bias).numel() != n {
            return Err(Error::Dimension {
                op: "add_bias",
                lhs: self.shape(x).to_vec(),
                rhs: self.shape(bias).to_vec(),
            });
        }
        let b = self.value(bias).data();
        let data = self.value(x).data().chunks(n).flat_map(|row| row.iter().zip(b).map(|(&x, &y)| x + y)).collect();
        self.record("add_bias", self.shape(x).to_vec(), data, Op::AddBias(x, bias), &[x, bias])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(&x, &y)| x * y).collect();
        self.record("mul", self.shape(a).to_vec(), data, Op::Mul(a, b), &[a, b])
    }

    pub fn scale(&mut self, x: Var, factor: f32) -> Result<Var> {
        let factor = T::of(factor as f64);
        let data = self.value(x).data().iter().map(|&v| v * factor).collect();
        self.record("scale", self.shape(x).to_vec(), data, Op::Scale(x, factor), &[x])
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let data = self.value(x).data().iter().map(|&v| v.max(T::zero())).collect();
        self.record("relu", self.shape(x).to_vec(), data, Op::Relu(x), &[x])
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        let data = self.value(x).data().iter().map(|&v| sigmoid(v)).collect();
        self.record("sigmoid", self.shape(x).to_vec(), data, Op::Sigmoid(x), &[x])
    }

    /// Softmax along `axis`, stabilized by subtracting each slice's max.
    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() {
            return Err(Error::Shape(format!("softmax axis {axis} out of range for {shape:?}")));
        }
        let (outer, len, inner) = split_axis(&shape, axis);
        let src = self.value(x).data();
        let mut out = vec![T::zero(); src.len()];
        for o in 0..outer {
            for i in 0..inner {
                let idx = |j: usize| (o * len + j) * inner + i;
                let max = (0..len).map(|j| src[idx(j)]).fold(T::neg_infinity(), T::max);
                let mut total = T::zero();
                for j in 0..len {
                    let e = (src[idx(j)] - max).exp();
                    out[idx(j)] = e;
                    total += e;
                }
                for j in 0..len {
                    out[idx(j)] /= total;
                }
            }
        }
        self.record("softmax", shape, out, Op::Softmax { x, outer, len, inner }, &[x])
    }

    /// Normalizes over the last axis (population variance, `eps` inside the
    /// square root), then applies `gamma`/`beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f32) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let n = *shape.last().expect("non-empty shape");
        for p in [gamma, beta] {
            if self.value(p).numel() != n {
                return Err(Error::Dimension {
                    op: "layer_norm",
                    lhs: shape.clone(),
                    rhs: self.shape(p).to_vec(),
                });
            }
        }
        let (g, b) = (self.value(gamma).data(), self.value(beta).data());
        let src = self.value(x).data();
        let rows = src.len() / n;
        let mut normed = vec![T::zero(); src.len()];
        let mut rstd = vec![T::zero(); rows];
        let mut out = vec![T::zero(); src.len()];
        let (eps, count) = (T::of(eps as f64), T::of(n as f64));
        for r in 0..rows {
            let row = &src[r * n..(r + 1) * n];
            let mean = row.iter().copied().sum::<T>() / count;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / count;
            let inv = T::one() / (var + eps).sqrt();
            rstd[r] = inv;
            for j in 0..n {
                let xh = (row[j] - mean) * inv;
                normed[r * n + j] = xh;
                out[r * n + j] = xh * g[j] + b[j];
            }
        }
        self.record("layer_norm", shape, out, Op::LayerNorm { x, gamma, beta, normed, rstd }, &[x, gamma, beta])
    }

    /// Inverted dropout. In eval mode (or with `p == 0`) this returns `x`
    /// itself; in train mode survivors are scaled by `1/(1-p)`.
    pub fn dropout<R: RngCore + ?Sized>(&mut self, x: Var, p: f64, train: bool, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::config("dropout", format!("probability {p} outside [0, 1)")));
        }
        if !train || p == 0.0 {
            return Ok(x);
        }
        let keep = T::of((1.0 / (1.0 - p)) as f32 as f64);
        let mask: Vec<T> = (0..self.value(x).numel())
            .map(|_| if rng.random::<f64>() >= p { keep } else { T::zero() })
            .collect();
        let data = self.value(x).data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
        self.record("dropout", self.shape(x).to_vec(), data, Op::Dropout { x, mask }, &[x])
    }

    /// 2-D cross-correlation of `x[c_in×h×w]` with `kernel[c_out×c_in×kh×kw]`.
    pub fn conv2d(&mut self, x: Var, kernel: Var, bias: Option<Var>, stride: usize, pad: usize) -> Result<Var> {
        let dim_err = || Error::Dimension {
            op: "conv2d",
            lhs: self.shape(x).to_vec(),
            rhs: self.shape(kernel).to_vec(),
        };
        let (&[c_in, h, w], &[c_out, kc, kh, kw]) = (self.shape(x), self.shape(kernel)) else {
            return Err(dim_err());
        };
        if kc != c_in || stride == 0 || kh > h + 2 * pad || kw > w + 2 * pad {
            return Err(dim_err());
        }
        if let Some(b) = bias {
            if self.value(b).numel() != c_out {
                return Err(Error::Dimension {
                    op: "conv2d bias",
                    lhs: vec![c_out],
                    rhs: self.shape(b).to_vec(),
                });
            }
        }
        let geom = ConvGeom {
            c_in,
            h,
            w,
            c_out,
            kh,
            kw,
            stride,
            pad,
            oh: (h + 2 * pad - kh) / stride + 1,
            ow: (w + 2 * pad - kw) / stride + 1,
        };
        let data = kernels::conv2d(
            self.value(x).data(),
            self.value(kernel).data(),
            bias.map(|b| self.value(b).data()),
            &geom,
        );
        let mut inputs = vec![x, kernel];
        inputs.extend(bias);
        self.record("conv2d", vec![c_out, geom.oh, geom.ow], data, Op::Conv2d { x, kernel, bias, geom }, &inputs)
    }

    pub fn max_pool2d(&mut self, x: Var, size: usize, stride: usize) -> Result<Var> {
        let &[c, h, w] = self.shape(x) else {
            return Err(Error::Shape(format!("max_pool2d expects c×h×w, got {:?}", self.shape(x))));
        };
        if size == 0 || stride == 0 || size > h || size > w {
            return Err(Error::Dimension {
                op: "max_pool2d",
                lhs: vec![c, h, w],
                rhs: vec![size, size],
            });
        }
        let (data, argmax, oh, ow) = kernels::max_pool2d(self.value(x).data(), c, h, w, size, stride);
        self.record("max_pool2d", vec![c, oh, ow], data, Op::MaxPool2d { x, argmax }, &[x])
    }

    /// Adaptive average pooling to a 1×1 target: `c×h×w → c×1×1`.
    pub fn adaptive_avg_pool2d(&mut self, x: Var) -> Result<Var> {
        let &[c, h, w] = self.shape(x) else {
            return Err(Error::Shape(format!("adaptive_avg_pool2d expects c×h×w, got {:?}", self.shape(x))));
        };
        let spatial = h * w;
        let count = T::of(spatial as f64);
        let data = self.value(x).data().chunks(spatial).map(|ch| ch.iter().copied().sum::<T>() / count).collect();
        self.record("adaptive_avg_pool2d", vec![c, 1, 1], data, Op::GlobalAvgPool { x, spatial }, &[x])
    }

    /// Concatenates along `axis`; all other extents must agree.
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = parts.first().ok_or_else(|| Error::Shape("concat of zero tensors".into()))?;
        let base = self.shape(*first).to_vec();
        if axis >= base.len() {
            return Err(Error::Shape(format!("concat axis {axis} out of range for {base:?}")));
        }
        let mut total = 0;
        for &p in parts {
            let s = self.shape(p);
            let compatible = s.len() == base.len() && s.iter().zip(&base).enumerate().all(|(i, (a, b))| i == axis || a == b);
            if !compatible {
                return Err(Error::Dimension {
                    op: "concat",
                    lhs: base.clone(),
                    rhs: s.to_vec(),
                });
            }
            total += s[axis];
        }
        let (outer, _, inner) = split_axis(&base, axis);
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &p in parts {
                let len = self.shape(p)[axis];
                let src = self.value(p).data();
                data.extend_from_slice(&src[o * len * inner..(o + 1) * len * inner]);
            }
        }
        let mut shape = base;
        shape[axis] = total;
        let spec = parts.iter().map(|&p| (p, self.shape(p)[axis])).collect();
        self.record("concat", shape, data, Op::Concat { parts: spec, outer, inner }, parts)
    }

    /// Row gather: `table[v×e]` indexed by `indices` gives `len×e`.
    pub fn embedding_lookup(&mut self, table: Var, indices: &[usize]) -> Result<Var> {
        let (rows, e) = self.dims2("embedding_lookup", table)?;
        if indices.is_empty() {
            return Err(Error::Shape("embedding_lookup with no indices".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= rows) {
            return Err(Error::Shape(format!("index {bad} out of range for table of {rows} rows")));
        }
        let src = self.value(table).data();
        let data = indices.iter().flat_map(|&i| src[i * e..(i + 1) * e].iter().copied()).collect();
        self.record("embedding_lookup", vec![indices.len(), e], data, Op::Gather { table, indices: indices.to_vec() }, &[table])
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let (m, n) = self.dims2("transpose", x)?;
        let src = self.value(x).data();
        let mut data = vec![T::zero(); m * n];
        for i in 0..m {
            for j in 0..n {
                data[j * m + i] = src[i * n + j];
            }
        }
        self.record("transpose", vec![n, m], data, Op::Transpose(x), &[x])
    }

    /// Columns `start..end` of a 2-D tensor.
    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let (m, n) = self.dims2("slice_cols", x)?;
        if start >= end || end > n {
            return Err(Error::Shape(format!("column range {start}..{end} invalid for width {n}")));
        }
        let src = self.value(x).data();
        let data = src.chunks(n).flat_map(|row| row[start..end].iter().copied()).collect();
        self.record("slice_cols", vec![m, end - start], data, Op::SliceCols { x, start }, &[x])
    }

    pub fn reshape(&mut self, x: Var, shape: impl Into<Vec<usize>>) -> Result<Var> {
        let shape = shape.into();
        let data = self.value(x).data().to_vec();
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::Dimension {
                op: "reshape",
                lhs: self.shape(x).to_vec(),
                rhs: shape,
            });
        }
        self.record("reshape", shape, data, Op::Reshape(x), &[x])
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).data().iter().copied().sum::<T>();
        self.record("sum", vec![1], vec![s], Op::Sum(x), &[x])
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let n = T::of(self.value(x).numel() as f64);
        let s = self.value(x).data().iter().copied().sum::<T>() / n;
        self.record("mean", vec![1], vec![s], Op::Mean(x), &[x])
    }

    /// Mean binary cross-entropy over logits, in the overflow-free form
    /// `max(z,0) - z·y + ln(1 + e^{-|z|})`.
    pub fn bce_with_logits(&mut self, logits: Var, targets: &[f32]) -> Result<Var> {
        let targets: Vec<T> = targets.iter().map(|&t| T::of(t as f64)).collect();
        let z = self.value(logits).data();
        if z.len() != targets.len() {
            return Err(Error::Dimension {
                op: "bce_with_logits",
                lhs: self.shape(logits).to_vec(),
                rhs: vec![targets.len()],
            });
        }
        if let Some(t) = targets.iter().find(|&&t| t != T::zero() && t != T::one()) {
            return Err(Error::Contract(format!("BCE target must be 0 or 1, got {t:?}")));
        }
        let loss = bce_sum(z, &targets) / T::of(z.len() as f64);
        self.record("bce_with_logits", vec![1], vec![loss], Op::BceWithLogits { logits, targets }, &[logits])
    }

    /// Backpropagates from a one-element `loss`.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if !self.value(loss).is_scalar() {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        self.backward_from(loss, vec![T::one()])
    }

    /// Backpropagates an arbitrary upstream gradient `seed` from `output`
    /// (a vector-Jacobian product).
    pub fn backward_from(&mut self, output: Var, seed: Vec<T>) -> Result<()> {
        if seed.len() != self.value(output).numel() {
            return Err(Error::Dimension {
                op: "backward",
                lhs: self.shape(output).to_vec(),
                rhs: vec![seed.len()],
            });
        }
        let nodes = &self.nodes;
        let mut grads: Vec<Option<Vec<T>>> = vec![None; nodes.len()];
        grads[output.0] = Some(seed);
        for i in (0..=output.0).rev() {
            let node = &nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            backprop_node(nodes, &mut grads, node, &g);
            grads[i] = Some(g);
        }
        for (slot, node) in grads.iter_mut().zip(nodes) {
            if !node.requires_grad {
                *slot = None;
            }
        }
        self.grads = grads;
        Ok(())
    }
}

pub(crate) fn bce_sum<T: Scalar>(z: &[T], y: &[T]) -> T {
    z.iter().zip(y).map(|(&z, &y)| z.max(T::zero()) - z * y + (-z.abs()).exp().ln_1p()).sum()
}

fn backprop_node<T: Scalar>(nodes: &[Node<T>], grads: &mut [Option<Vec<T>>], node: &Node<T>, g: &[T]) {
    let val = |v: Var| nodes[v.0].value.data();
    let wants = |v: Var| nodes[v.0].requires_grad;
    let shape = |v: Var| nodes[v.0].value.shape();
    match &node.op {
        Op::Leaf => {}
        Op::MatMul(a, b) => {
            let (m, k) = (shape(*a)[0], shape(*a)[1]);
            let n = shape(*b)[1];
            if wants(*a) {
                let da = kernels::matmul_bt(g, val(*b), m, n, k);
                accumulate(grads, *a, &da);
            }
            if wants(*b) {
                let db = kernels::matmul_at(val(*a), g, m, k, n);
                accumulate(grads, *b, &db);
            }
        }
        Op::Add(a, b) => {
            for v in [*a, *b] {
                if wants(v) {
                    accumulate(grads, v, g);
                }
            }
        }
        Op::AddBias(x, bias) => {
            if wants(*x) {
                accumulate(grads, *x, g);
            }
            if wants(*bias) {
                let n = val(*bias).len();
                let mut db = vec![T::zero(); n];
                for row in g.chunks(n) {
                    for (d, &r) in db.iter_mut().zip(row) {
                        *d += r;
                    }
                }
                accumulate(grads, *bias, &db);
            }
        }
        Op::Mul(a, b) => {
            if wants(*a) {
                let da: Vec<T> = g.iter().zip(val(*b)).map(|(&g, &y)| g * y).collect();
                accumulate(grads, *a, &da);
            }
            if wants(*b) {
                let db: Vec<T> = g.iter().zip(val(*a)).map(|(&g, &x)| g * x).collect();
                accumulate(grads, *b, &db);
            }
        }
        Op::Scale(x, f) => {
            let dx: Vec<T> = g.iter().map(|&g| g * *f).collect();
            accumulate(grads, *x, &dx);
        }
        Op::Relu(x) => {
            let dx: Vec<T> = g.iter().zip(val(*x)).map(|(&g, &v)| if v > T::zero() { g } else { T::zero() }).collect();
            accumulate(grads, *x, &dx);
        }
        Op::Sigmoid(x) => {
            let y = node.value.data();
            let dx: Vec<T> = g.iter().zip(y).map(|(&g, &s)| g * s * (T::one() - s)).collect();
            accumulate(grads, *x, &dx);
        }
        Op::Softmax { x, outer, len, inner } => {
            let y = node.value.data();
            let mut dx = vec![T::zero(); y.len()];
            for o in 0..*outer {
                for i in 0..*inner {
                    let idx = |j: usize| (o * len + j) * inner + i;
                    let dot: T = (0..*len).map(|j| g[idx(j)] * y[idx(j)]).sum();
                    for j in 0..*len {
                        dx[idx(j)] = y[idx(j)] * (g[idx(j)] - dot);
                    }
                }
            }
            accumulate(grads, *x, &dx);
        }
        Op::LayerNorm { x, gamma, beta, normed, rstd } => {
            let n = val(*gamma).len();
            let count = T::of(n as f64);
            let gam = val(*gamma);
            if wants(*x) {
                let mut dx = vec![T::zero(); g.len()];
                for (r, &inv) in rstd.iter().enumerate() {
                    let range = r * n..(r + 1) * n;
                    let (gr, xh) = (&g[range.clone()], &normed[range.clone()]);
                    let gh: Vec<T> = gr.iter().zip(gam).map(|(&a, &b)| a * b).collect();
                    let mean_gh = gh.iter().copied().sum::<T>() / count;
                    let mean_ghx = gh.iter().zip(xh).map(|(&a, &b)| a * b).sum::<T>() / count;
                    for j in 0..n {
                        dx[r * n + j] = inv * (gh[j] - mean_gh - xh[j] * mean_ghx);
                    }
                }
                accumulate(grads, *x, &dx);
            }
            if wants(*gamma) {
                let mut dg = vec![T::zero(); n];
                for (row_g, row_x) in g.chunks(n).zip(normed.chunks(n)) {
                    for j in 0..n {
                        dg[j] += row_g[j] * row_x[j];
                    }
                }
                accumulate(grads, *gamma, &dg);
            }
            if wants(*beta) {
                let mut db = vec![T::zero(); n];
                for row in g.chunks(n) {
                    for (d, &r) in db.iter_mut().zip(row) {
                        *d += r;
                    }
                }
                accumulate(grads, *beta, &db);
            }
        }
        Op::Dropout { x, mask } => {
            let dx: Vec<T> = g.iter().zip(mask).map(|(&g, &m)| g * m).collect();
            accumulate(grads, *x, &dx);
        }
        Op::Conv2d { x, kernel, bias, geom } => {
            let (dx, dk, db) = kernels::conv2d_backward(val(*x), val(*kernel), g, geom);
            if wants(*x) {
                accumulate(grads, *x, &dx);
            }
            if wants(*kernel) {
                accumulate(grads, *kernel, &dk);
            }
            if let Some(b) = bias {
                if wants(*b) {
                    accumulate(grads, *b, &db);
                }
            }
        }
        Op::MaxPool2d { x, argmax } => {
            let mut dx = vec![T::zero(); val(*x).len()];
            for (&gv, &src) in g.iter().zip(argmax) {
                dx[src] += gv;
            }
            accumulate(grads, *x, &dx);
        }
        Op::GlobalAvgPool { x, spatial } => {
            let count = T::of(*spatial as f64);
            let dx: Vec<T> = g.iter().flat_map(|&gv| std::iter::repeat_n(gv / count, *spatial)).collect();
            accumulate(grads, *x, &dx);
        }
        Op::Concat { parts, outer, inner } => {
            let total: usize = parts.iter().map(|(_, len)| len).sum();
            let mut offset = 0;
            for &(p, len) in parts {
                if wants(p) {
                    let mut dp = Vec::with_capacity(outer * len * inner);
                    for o in 0..*outer {
                        let start = (o * total + offset) * inner;
                        dp.extend_from_slice(&g[start..start + len * inner]);
                    }
                    accumulate(grads, p, &dp);
                }
                offset += len;
            }
        }
        Op::Gather { table, indices } => {
            let e = shape(*table)[1];
            let mut dt = vec![T::zero(); val(*table).len()];
            for (row, &i) in indices.iter().enumerate() {
                for j in 0..e {
                    dt[i * e + j] += g[row * e + j];
                }
            }
            accumulate(grads, *table, &dt);
        }
        Op::Transpose(x) => {
            let (m, n) = (shape(*x)[0], shape(*x)[1]);
            let mut dx = vec![T::zero(); m * n];
            for i in 0..m {
                for j in 0..n {
                    dx[i * n + j] = g[j * m + i];
                }
            }
            accumulate(grads, *x, &dx);
        }
        Op::SliceCols { x, start } => {
            let n = shape(*x)[1];
            let w = node.value.shape()[1];
            let mut dx = vec![T::zero(); val(*x).len()];
            for (r, row) in g.chunks(w).enumerate() {
                dx[r * n + start..r * n + start + w].copy_from_slice(row);
            }
            accumulate(grads, *x, &dx);
        }
        Op::Reshape(x) => accumulate(grads, *x, g),
        Op::Sum(x) => {
            let dx = vec![g[0]; val(*x).len()];
            accumulate(grads, *x, &dx);
        }
        Op::Mean(x) => {
            let n = val(*x).len();
            let dx = vec![g[0] / T::of(n as f64); n];
            accumulate(grads, *x, &dx);
        }
        Op::BceWithLogits { logits, targets } => {
            let n = T::of(targets.len() as f64);
            let dz: Vec<T> = val(*logits).iter().zip(targets).map(|(&z, &y)| g[0] * (sigmoid(z) - y) / n).collect();
            accumulate(grads, *logits, &dz);
        }
    }
}
