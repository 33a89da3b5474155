//! Tape-based reverse-mode differentiation over [`Tensor`] values.
//!
//! Every operation appends a node holding its forward value and the ids of
//! its operands. [`Graph::backward`] walks the tape in reverse and
//! accumulates vector-Jacobian products into the operands that require a
//! gradient. Parameters are bound by reference, so building a graph does not
//! copy weights.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::conv::{self, conv_out_size, ConvGeom};
use super::params::{ParamGrads, ParamId, ParamSet};
use super::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Stride and zero padding of a convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub stride: usize,
    pub pad: usize,
}

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    MatVec { w: NodeId, x: NodeId },
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, T),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Relu(NodeId),
    Concat(Vec<NodeId>),
    Slice { x: NodeId, start: usize },
    Reshape(NodeId),
    Conv2d { x: NodeId, w: NodeId, b: NodeId, geom: ConvGeom },
    ConvTranspose2d { x: NodeId, w: NodeId, b: NodeId, geom: ConvGeom },
    Sum(NodeId),
    SumSquares(NodeId),
    MeanPairNorm(NodeId),
}

enum Value<'a, T> {
    Owned(Tensor<T>),
    Borrowed(&'a Tensor<T>),
}

impl<T> Value<'_, T> {
    #[inline]
    fn get(&self) -> &Tensor<T> {
        match self {
            Value::Owned(t) => t,
            Value::Borrowed(t) => t,
        }
    }
}

struct Node<'a, T> {
    value: Value<'a, T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Graph nodes of every tensor in a [`ParamSet`], indexed by [`ParamId`].
#[derive(Debug, Clone)]
pub struct Bound {
    nodes: Vec<NodeId>,
}

impl Bound {
    #[inline]
    pub fn node(&self, id: ParamId) -> NodeId {
        self.nodes[id.index()]
    }
}

/// Recorded computation.
pub struct Graph<'a, T> {
    nodes: Vec<Node<'a, T>>,
    dropout_rng: Option<ChaCha8Rng>,
}

impl<T: Scalar> Default for Graph<'_, T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'a, T: Scalar> Graph<'a, T> {
    /// Evaluation-mode graph: dropout is the identity.
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            dropout_rng: None,
        }
    }

    /// Training-mode graph with seeded dropout masks.
    pub fn training(seed: u64) -> Self {
        Self {
            nodes: Vec::new(),
            dropout_rng: Some(ChaCha8Rng::seed_from_u64(seed)),
        }
    }

    pub fn is_training(&self) -> bool {
        self.dropout_rng.is_some()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[inline]
    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        self.nodes[id.0].value.get()
    }

    /// First element of a node's value.
    pub fn scalar(&self, id: NodeId) -> T {
        self.value(id).data()[0]
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value: Value::Owned(value),
            op,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    #[inline]
    fn rg(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    /// Input that receives no gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> NodeId {
        self.push(value, Op::Leaf, false)
    }

    /// Input whose gradient is tracked.
    pub fn variable(&mut self, value: Tensor<T>) -> NodeId {
        self.push(value, Op::Leaf, true)
    }

    /// Copy of `id` with the gradient path cut.
    pub fn detach(&mut self, id: NodeId) -> NodeId {
        let v = self.value(id).clone();
        self.constant(v)
    }

    /// Bind every tensor of `params` by reference. Frozen tensors are bound
    /// as constants.
    pub fn bind(&mut self, params: &'a ParamSet<T>) -> Bound {
        let nodes = params
            .entries()
            .iter()
            .map(|e| {
                self.nodes.push(Node {
                    value: Value::Borrowed(&e.tensor),
                    op: Op::Leaf,
                    requires_grad: e.trainable,
                });
                NodeId(self.nodes.len() - 1)
            })
            .collect();
        Bound { nodes }
    }

    /// `w · x` for `w` of shape `[m, n]` and `x` of length `n`.
    pub fn matvec(&mut self, w: NodeId, x: NodeId) -> Result<NodeId> {
        let (wv, xv) = (self.value(w), self.value(x));
        let &[m, n] = wv.shape() else {
            return Err(Error::shape(format!("matvec weight must be 2-D, got {:?}", wv.shape())));
        };
        if xv.len() != n {
            return Err(Error::shape(format!("matvec: weight {m}x{n} vs input {}", xv.len())));
        }
        let wd = wv.data();
        let xd = xv.data();
        let out: Vec<T> = (0..m).map(|r| dot(&wd[r * n..(r + 1) * n], xd)).collect();
        let rg = self.rg(w) || self.rg(x);
        Ok(self.push(Tensor::vector(out), Op::MatVec { w, x }, rg))
    }

    fn same_len(&self, a: NodeId, b: NodeId, what: &str) -> Result<()> {
        let (la, lb) = (self.value(a).len(), self.value(b).len());
        if la != lb {
            return Err(Error::shape(format!("{what}: lengths {la} and {lb}")));
        }
        Ok(())
    }

    fn zip_map(&mut self, a: NodeId, b: NodeId, op: Op<T>, f: impl Fn(T, T) -> T) -> NodeId {
        let av = self.value(a);
        let data = av
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let value = Tensor::from_vec(av.shape(), data).expect("shape preserved");
        let rg = self.rg(a) || self.rg(b);
        self.push(value, op, rg)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_len(a, b, "add")?;
        Ok(self.zip_map(a, b, Op::Add(a, b), |x, y| x + y))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_len(a, b, "sub")?;
        Ok(self.zip_map(a, b, Op::Sub(a, b), |x, y| x - y))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_len(a, b, "mul")?;
        Ok(self.zip_map(a, b, Op::Mul(a, b), |x, y| x * y))
    }

    fn map(&mut self, a: NodeId, op: Op<T>, f: impl Fn(T) -> T) -> NodeId {
        let av = self.value(a);
        let data = av.data().iter().map(|&x| f(x)).collect();
        let value = Tensor::from_vec(av.shape(), data).expect("shape preserved");
        let rg = self.rg(a);
        self.push(value, op, rg)
    }

    pub fn scale(&mut self, a: NodeId, factor: T) -> NodeId {
        self.map(a, Op::Scale(a, factor), |x| x * factor)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        self.map(a, Op::Sigmoid(a), sigmoid)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        self.map(a, Op::Tanh(a), |x| x.tanh())
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        self.map(a, Op::Relu(a), |x| if x > T::zero() { x } else { T::zero() })
    }

    /// Inverted dropout with drop probability `rate`; identity in
    /// evaluation mode.
    pub fn dropout(&mut self, a: NodeId, rate: f64) -> Result<NodeId> {
        if self.dropout_rng.is_none() || rate <= 0.0 {
            return Ok(a);
        }
        let keep = T::c(1.0 / (1.0 - rate));
        let n = self.value(a).len();
        let rng = self.dropout_rng.as_mut().expect("training graph");
        let mask: Vec<T> = (0..n)
            .map(|_| if rng.random::<f64>() < rate { T::zero() } else { keep })
            .collect();
        let m = self.constant(Tensor::vector(mask));
        self.mul(a, m)
    }

    /// Concatenate flattened operands.
    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        let mut data = Vec::with_capacity(parts.iter().map(|&p| self.value(p).len()).sum());
        for &p in parts {
            data.extend_from_slice(self.value(p).data());
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        self.push(Tensor::vector(data), Op::Concat(parts.to_vec()), rg)
    }

    /// Flat sub-range `[start, start + len)`.
    pub fn slice(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let xv = self.value(x);
        if len == 0 || start + len > xv.len() {
            return Err(Error::shape(format!(
                "slice [{start}, {}) of length {}",
                start + len,
                xv.len()
            )));
        }
        let data = xv.data()[start..start + len].to_vec();
        let rg = self.rg(x);
        Ok(self.push(Tensor::vector(data), Op::Slice { x, start }, rg))
    }

    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId> {
        let value = self.value(x).reshaped(shape)?;
        let rg = self.rg(x);
        Ok(self.push(value, Op::Reshape(x), rg))
    }

    fn conv_geom(&self, x: NodeId, w: NodeId, spec: ConvSpec) -> Result<ConvGeom> {
        let xs = self.value(x).shape();
        let ws = self.value(w).shape();
        let (&[c_in, h_in, w_in], &[c_out, wc, k, k2]) = (xs, ws) else {
            return Err(Error::shape(format!("conv2d: input {xs:?}, kernel {ws:?}")));
        };
        if wc != c_in || k != k2 {
            return Err(Error::shape(format!("conv2d: input {xs:?}, kernel {ws:?}")));
        }
        let (Some(h_out), Some(w_out)) = (
            conv_out_size(h_in, k, spec.stride, spec.pad),
            conv_out_size(w_in, k, spec.stride, spec.pad),
        ) else {
            return Err(Error::shape(format!("conv2d: kernel {k} larger than input {xs:?}")));
        };
        Ok(ConvGeom {
            c_in,
            h_in,
            w_in,
            c_out,
            k,
            stride: spec.stride,
            pad: spec.pad,
            h_out,
            w_out,
        })
    }

    /// Cross-correlation of `x: [C, H, W]` with `w: [O, C, k, k]` plus bias
    /// `b: [O]`.
    pub fn conv2d(&mut self, x: NodeId, w: NodeId, b: NodeId, spec: ConvSpec) -> Result<NodeId> {
        let geom = self.conv_geom(x, w, spec)?;
        let bv = self.value(b);
        if bv.len() != geom.c_out {
            return Err(Error::shape(format!("conv2d bias {} vs {} channels", bv.len(), geom.c_out)));
        }
        let plane = geom.h_out * geom.w_out;
        let mut out = Vec::with_capacity(geom.c_out * plane);
        for &bias in bv.data() {
            out.extend(std::iter::repeat_n(bias, plane));
        }
        conv::forward_acc(&geom, self.value(x).data(), self.value(w).data(), &mut out);
        let value = Tensor::from_vec(&[geom.c_out, geom.h_out, geom.w_out], out)?;
        let rg = self.rg(x) || self.rg(w) || self.rg(b);
        Ok(self.push(value, Op::Conv2d { x, w, b, geom }, rg))
    }

    /// Transposed convolution sharing the kernel layout of [`Graph::conv2d`]:
    /// maps `x: [O, h, w]` to `[C, out_h, out_w]` where a convolution with
    /// `w: [O, C, k, k]` maps `[C, out_h, out_w]` to `[O, h, w]`. Bias `b`
    /// has length `C`.
    pub fn conv_transpose2d(
        &mut self,
        x: NodeId,
        w: NodeId,
        b: NodeId,
        spec: ConvSpec,
        out_hw: (usize, usize),
    ) -> Result<NodeId> {
        let xs = self.value(x).shape().to_vec();
        let ws = self.value(w).shape().to_vec();
        let (&[c_out, h_x, w_x], &[wo, c_in, k, _]) = (xs.as_slice(), ws.as_slice()) else {
            return Err(Error::shape(format!("conv_transpose2d: input {xs:?}, kernel {ws:?}")));
        };
        if wo != c_out {
            return Err(Error::shape(format!("conv_transpose2d: input {xs:?}, kernel {ws:?}")));
        }
        let geom = ConvGeom {
            c_in,
            h_in: out_hw.0,
            w_in: out_hw.1,
            c_out,
            k,
            stride: spec.stride,
            pad: spec.pad,
            h_out: h_x,
            w_out: w_x,
        };
        if conv_out_size(out_hw.0, k, spec.stride, spec.pad) != Some(h_x)
            || conv_out_size(out_hw.1, k, spec.stride, spec.pad) != Some(w_x)
        {
            return Err(Error::shape(format!(
                "conv_transpose2d: output {out_hw:?} is not compatible with input {xs:?}"
            )));
        }
        let bv = self.value(b);
        if bv.len() != c_in {
            return Err(Error::shape(format!("conv_transpose2d bias {} vs {c_in} channels", bv.len())));
        }
        let plane = out_hw.0 * out_hw.1;
        let mut out = Vec::with_capacity(c_in * plane);
        for &bias in bv.data() {
            out.extend(std::iter::repeat_n(bias, plane));
        }
        conv::input_grad_acc(&geom, self.value(x).data(), self.value(w).data(), &mut out);
        let value = Tensor::from_vec(&[c_in, out_hw.0, out_hw.1], out)?;
        let rg = self.rg(x) || self.rg(w) || self.rg(b);
        Ok(self.push(value, Op::ConvTranspose2d { x, w, b, geom }, rg))
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let s = self.value(a).data().iter().copied().sum();
        let rg = self.rg(a);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    pub fn sum_squares(&mut self, a: NodeId) -> NodeId {
        let s = self.value(a).data().iter().map(|&v| v * v).sum();
        let rg = self.rg(a);
        self.push(Tensor::scalar(s), Op::SumSquares(a), rg)
    }

    /// Mean Euclidean norm of consecutive `(x, y)` pairs of a flat vector.
    pub fn mean_pair_norm(&mut self, a: NodeId) -> Result<NodeId> {
        let d = self.value(a).data();
        if d.is_empty() || !d.len().is_multiple_of(2) {
            return Err(Error::shape(format!("mean_pair_norm of length {}", d.len())));
        }
        let pairs = d.len() / 2;
        let total: T = d.chunks_exact(2).map(|p| p[0].hypot(p[1])).sum();
        let rg = self.rg(a);
        Ok(self.push(
            Tensor::scalar(total / T::from_usize_lossy(pairs)),
            Op::MeanPairNorm(a),
            rg,
        ))
    }

    /// Reverse sweep from the scalar node `loss`.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients<T>> {
        if loss.0 >= self.nodes.len() {
            return Err(Error::NotRecorded(loss.0));
        }
        if self.value(loss).len() != 1 {
            return Err(Error::shape("backward requires a scalar output"));
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![T::one()]);

        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else {
                continue;
            };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, i: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let node = &self.nodes[i];
        let out = node.value.get().data();
        match &node.op {
            Op::Leaf => {}
            Op::MatVec { w, x } => {
                let wv = self.value(*w);
                let n = wv.shape()[1];
                let xd = self.value(*x).data();
                if self.rg(*w) {
                    let dw = slot(grads, *w, wv.len());
                    for (r, &gr) in g.iter().enumerate() {
                        axpy(&mut dw[r * n..(r + 1) * n], xd, gr);
                    }
                }
                if self.rg(*x) {
                    let dx = slot(grads, *x, n);
                    let wd = wv.data();
                    for (r, &gr) in g.iter().enumerate() {
                        axpy(dx, &wd[r * n..(r + 1) * n], gr);
                    }
                }
            }
            Op::Add(a, b) => {
                for p in [*a, *b] {
                    if self.rg(p) {
                        slot(grads, p, g.len()).iter_mut().zip(g).for_each(|(d, &v)| *d += v);
                    }
                }
            }
            Op::Sub(a, b) => {
                if self.rg(*a) {
                    slot(grads, *a, g.len()).iter_mut().zip(g).for_each(|(d, &v)| *d += v);
                }
                if self.rg(*b) {
                    slot(grads, *b, g.len()).iter_mut().zip(g).for_each(|(d, &v)| *d -= v);
                }
            }
            Op::Mul(a, b) => {
                let (ad, bd) = (self.value(*a).data(), self.value(*b).data());
                if self.rg(*a) {
                    let da = slot(grads, *a, g.len());
                    for k in 0..g.len() {
                        da[k] += g[k] * bd[k];
                    }
                }
                if self.rg(*b) {
                    let db = slot(grads, *b, g.len());
                    for k in 0..g.len() {
                        db[k] += g[k] * ad[k];
                    }
                }
            }
            Op::Scale(a, f) => {
                slot(grads, *a, g.len()).iter_mut().zip(g).for_each(|(d, &v)| *d += v * *f);
            }
            Op::Sigmoid(a) => {
                let da = slot(grads, *a, g.len());
                for k in 0..g.len() {
                    da[k] += g[k] * out[k] * (T::one() - out[k]);
                }
            }
            Op::Tanh(a) => {
                let da = slot(grads, *a, g.len());
                for k in 0..g.len() {
                    da[k] += g[k] * (T::one() - out[k] * out[k]);
                }
            }
            Op::Relu(a) => {
                let da = slot(grads, *a, g.len());
                for k in 0..g.len() {
                    if out[k] > T::zero() {
                        da[k] += g[k];
                    }
                }
            }
            Op::Concat(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let n = self.value(p).len();
                    if self.rg(p) {
                        slot(grads, p, n)
                            .iter_mut()
                            .zip(&g[offset..offset + n])
                            .for_each(|(d, &v)| *d += v);
                    }
                    offset += n;
                }
            }
            Op::Slice { x, start } => {
                let n = self.value(*x).len();
                slot(grads, *x, n)[*start..*start + g.len()]
                    .iter_mut()
                    .zip(g)
                    .for_each(|(d, &v)| *d += v);
            }
            Op::Reshape(x) => {
                slot(grads, *x, g.len()).iter_mut().zip(g).for_each(|(d, &v)| *d += v);
            }
            Op::Conv2d { x, w, b, geom } => {
                if self.rg(*x) {
                    let n = self.value(*x).len();
                    conv::input_grad_acc(geom, g, self.value(*w).data(), slot(grads, *x, n));
                }
                if self.rg(*w) {
                    let n = self.value(*w).len();
                    conv::weight_grad_acc(geom, self.value(*x).data(), g, slot(grads, *w, n));
                }
                if self.rg(*b) {
                    let plane = geom.h_out * geom.w_out;
                    let db = slot(grads, *b, geom.c_out);
                    for (o, d) in db.iter_mut().enumerate() {
                        *d += g[o * plane..(o + 1) * plane].iter().copied().sum::<T>();
                    }
                }
            }
            Op::ConvTranspose2d { x, w, b, geom } => {
                // Here `g` lives on the convolution's input side.
                if self.rg(*x) {
                    let n = self.value(*x).len();
                    conv::forward_acc(geom, g, self.value(*w).data(), slot(grads, *x, n));
                }
                if self.rg(*w) {
                    let n = self.value(*w).len();
                    conv::weight_grad_acc(geom, g, self.value(*x).data(), slot(grads, *w, n));
                }
                if self.rg(*b) {
                    let plane = geom.h_in * geom.w_in;
                    let db = slot(grads, *b, geom.c_in);
                    for (c, d) in db.iter_mut().enumerate() {
                        *d += g[c * plane..(c + 1) * plane].iter().copied().sum::<T>();
                    }
                }
            }
            Op::Sum(a) => {
                let n = self.value(*a).len();
                slot(grads, *a, n).iter_mut().for_each(|d| *d += g[0]);
            }
            Op::SumSquares(a) => {
                let ad = self.value(*a).data();
                let two = T::c(2.0);
                let da = slot(grads, *a, ad.len());
                for k in 0..ad.len() {
                    da[k] += two * ad[k] * g[0];
                }
            }
            Op::MeanPairNorm(a) => {
                let ad = self.value(*a).data();
                let pairs = T::from_usize_lossy(ad.len() / 2);
                let da = slot(grads, *a, ad.len());
                for k in (0..ad.len()).step_by(2) {
                    let n = ad[k].hypot(ad[k + 1]);
                    if n > T::zero() {
                        let s = g[0] / (pairs * n);
                        da[k] += s * ad[k];
                        da[k + 1] += s * ad[k + 1];
                    }
                }
            }
        }
    }
}

/// Result of a reverse sweep: one gradient buffer per reached node.
pub struct Gradients<T> {
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient of the loss with respect to `id`, if `id` was reached.
    pub fn get(&self, id: NodeId) -> Option<&[T]> {
        self.grads.get(id.0).and_then(|g| g.as_deref())
    }

    /// Gradients of every trainable tensor bound through `bound`.
    pub fn params(&self, bound: &Bound, params: &ParamSet<T>) -> ParamGrads<T> {
        let grads = params
            .ids()
            .map(|pid| {
                let e = params.entry(pid);
                e.trainable.then(|| {
                    self.get(bound.node(pid))
                        .map(<[T]>::to_vec)
                        .unwrap_or_else(|| vec![T::zero(); e.tensor.len()])
                })
            })
            .collect();
        ParamGrads { grads }
    }
}

#[inline]
fn slot<T: Scalar>(grads: &mut [Option<Vec<T>>], id: NodeId, len: usize) -> &mut [T] {
    grads[id.0].get_or_insert_with(|| vec![T::zero(); len])
}

#[inline]
pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// Dot product with four independent accumulators.
#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += *x * *y;
    }
    s
}

#[inline]
fn axpy<T: Scalar>(y: &mut [T], x: &[T], a: T) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_of_single_parameter_has_unit_gradient() {
        let mut g = Graph::<f64>::new();
        let p = g.variable(Tensor::scalar(3.5));
        let loss = g.sum(p);
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.get(p).unwrap(), &[1.0]);
    }

    #[test]
    fn sum_of_matvec_gives_input_rows() {
        let mut g = Graph::<f64>::new();
        let w = g.variable(Tensor::from_vec(&[3, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
        let x = g.constant(Tensor::vector(vec![0.5, -1.5]));
        let y = g.matvec(w, x).unwrap();
        let loss = g.sum(y);
        let grads = g.backward(loss).unwrap();
        let dw = grads.get(w).unwrap();
        for row in dw.chunks(2) {
            assert_eq!(row, &[0.5, -1.5]);
        }
        assert!(grads.get(x).is_none());
    }

    #[test]
    fn backward_on_unrecorded_node_fails() {
        let mut other = Graph::<f64>::new();
        let a = other.variable(Tensor::scalar(1.0));
        let b = other.sum(a);
        let g = Graph::<f64>::new();
        assert!(matches!(g.backward(b), Err(Error::NotRecorded(_))));
    }

    #[test]
    fn detach_blocks_gradient() {
        let mut g = Graph::<f64>::new();
        let a = g.variable(Tensor::vector(vec![1.0, 2.0]));
        let b = g.scale(a, 3.0);
        let c = g.detach(b);
        let d = g.add(b, c).unwrap();
        let loss = g.sum_squares(d);
        let grads = g.backward(loss).unwrap();
        // loss = Σ (3a + 3a_const)^2 ; d/da = 2 (6a) * 3
        assert_eq!(grads.get(a).unwrap(), &[36.0, 72.0]);
        assert!(grads.get(c).is_none());
    }

    #[test]
    fn dropout_is_identity_in_eval_mode() {
        let mut g = Graph::<f64>::new();
        let a = g.constant(Tensor::vector(vec![1.0, 2.0, 3.0]));
        let b = g.dropout(a, 0.2).unwrap();
        assert_eq!(a, b);

        let mut t = Graph::<f64>::training(1);
        let a = t.constant(Tensor::vector(vec![1.0; 1000]));
        let b = t.dropout(a, 0.2).unwrap();
        let zeros = t.value(b).data().iter().filter(|&&v| v == 0.0).count();
        assert!((120..280).contains(&zeros), "{zeros}");
        assert!(t.value(b).data().iter().all(|&v| v == 0.0 || (v - 1.25).abs() < 1e-15));
    }

    #[test]
    fn shape_errors_are_reported() {
        let mut g = Graph::<f64>::new();
        let w = g.constant(Tensor::zeros(&[2, 3]));
        let x = g.constant(Tensor::zeros(&[2]));
        assert!(g.matvec(w, x).is_err());
        assert!(g.add(w, x).is_err());
        assert!(g.slice(x, 1, 2).is_err());
        let odd = g.constant(Tensor::zeros(&[3]));
        assert!(g.mean_pair_norm(odd).is_err());
    }

    #[test]
    fn transposed_conv_is_adjoint_of_conv() {
        // <conv(x), y> == <x, convT(y)> with zero biases.
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Tensor::<f64>::uniform(&[2, 9, 9], 1.0, &mut rng);
        let w = Tensor::<f64>::uniform(&[3, 2, 3, 3], 1.0, &mut rng);
        let y = Tensor::<f64>::uniform(&[3, 4, 4], 1.0, &mut rng);
        let mut g = Graph::new();
        let (xn, wn, yn) = (g.constant(x.clone()), g.constant(w), g.constant(y.clone()));
        let b3 = g.constant(Tensor::zeros(&[3]));
        let b2 = g.constant(Tensor::zeros(&[2]));
        let spec = ConvSpec { stride: 2, pad: 0 };
        let cx = g.conv2d(xn, wn, b3, spec).unwrap();
        let ty = g.conv_transpose2d(yn, wn, b2, spec, (9, 9)).unwrap();
        let lhs: f64 = g.value(cx).data().iter().zip(y.data()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data().iter().zip(g.value(ty).data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
    }
}
