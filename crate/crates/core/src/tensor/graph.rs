use std::sync::Arc;

use super::kernels::{self, ConvGeom, UpConvGeom};
use super::{Real, Tensor};
use crate::error::{Error, Result};

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Operation tag of a node, exposed for inspection and tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    Leaf,
    Conv2d,
    UpConv2d,
    UpsampleZero,
    FullyConnected,
    LeakyRelu,
    Tanh,
    Sigmoid,
    Concat,
    ConcatChannels,
    Reshape,
    SliceChannels,
    Add,
    Sub,
    Scale,
    Sum,
    SumSquares,
    SumAbs,
    BceWithLogits,
}

enum Op<T> {
    Leaf,
    Conv2d { x: Var, w: Var, b: Var, geom: ConvGeom, col: Vec<T> },
    UpConv2d { x: Var, w: Var, b: Var, geom: UpConvGeom, cols: Vec<Vec<T>> },
    UpsampleZero { x: Var },
    FullyConnected { x: Var, w: Var, b: Var },
    LeakyRelu { x: Var, slope: T },
    Tanh { x: Var },
    Sigmoid { x: Var },
    Concat { a: Var, b: Var },
    ConcatChannels { a: Var, b: Var },
    Reshape { x: Var },
    SliceChannels { x: Var, start: usize },
    Add { a: Var, b: Var },
    Sub { a: Var, b: Var },
    Scale { x: Var, c: T },
    Sum { x: Var },
    SumSquares { x: Var },
    SumAbs { x: Var },
    BceWithLogits { x: Var, target: T },
}

impl<T> Op<T> {
    fn kind(&self) -> OpKind {
        match self {
            Op::Leaf => OpKind::Leaf,
            Op::Conv2d { .. } => OpKind::Conv2d,
            Op::UpConv2d { .. } => OpKind::UpConv2d,
            Op::UpsampleZero { .. } => OpKind::UpsampleZero,
            Op::FullyConnected { .. } => OpKind::FullyConnected,
            Op::LeakyRelu { .. } => OpKind::LeakyRelu,
            Op::Tanh { .. } => OpKind::Tanh,
            Op::Sigmoid { .. } => OpKind::Sigmoid,
            Op::Concat { .. } => OpKind::Concat,
            Op::ConcatChannels { .. } => OpKind::ConcatChannels,
            Op::Reshape { .. } => OpKind::Reshape,
            Op::SliceChannels { .. } => OpKind::SliceChannels,
            Op::Add { .. } => OpKind::Add,
            Op::Sub { .. } => OpKind::Sub,
            Op::Scale { .. } => OpKind::Scale,
            Op::Sum { .. } => OpKind::Sum,
            Op::SumSquares { .. } => OpKind::SumSquares,
            Op::SumAbs { .. } => OpKind::SumAbs,
            Op::BceWithLogits { .. } => OpKind::BceWithLogits,
        }
    }

    fn inputs(&self) -> Vec<Var> {
        match *self {
            Op::Leaf => vec![],
            Op::Conv2d { x, w, b, .. } | Op::UpConv2d { x, w, b, .. } | Op::FullyConnected { x, w, b } => {
                vec![x, w, b]
            }
            Op::Concat { a, b } | Op::ConcatChannels { a, b } | Op::Add { a, b } | Op::Sub { a, b } => {
                vec![a, b]
            }
            Op::UpsampleZero { x }
            | Op::LeakyRelu { x, .. }
            | Op::Tanh { x }
            | Op::Sigmoid { x }
            | Op::Reshape { x }
            | Op::SliceChannels { x, .. }
            | Op::Scale { x, .. }
            | Op::Sum { x }
            | Op::SumSquares { x }
            | Op::SumAbs { x }
            | Op::BceWithLogits { x, .. } => vec![x],
        }
    }
}

struct Node<T> {
    op: Op<T>,
    value: Arc<Tensor<T>>,
}

/// Tape of operations in insertion order.
///
/// Nodes can only reference earlier nodes, so insertion order is a
/// topological order and [`Graph::backward`] walks it in reverse.
pub struct Graph<T: Real = f32> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

#[inline]
fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

fn shape_str(s: &[usize]) -> String {
    format!("{s:?}")
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

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

    pub fn op_kind(&self, v: Var) -> OpKind {
        self.nodes[v.0].op.kind()
    }

    pub fn inputs(&self, v: Var) -> Vec<Var> {
        self.nodes[v.0].op.inputs()
    }

    fn push(&mut self, op: Op<T>, value: Tensor<T>) -> Var {
        self.nodes.push(Node {
            op,
            value: Arc::new(value),
        });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, t: Tensor<T>) -> Var {
        self.push(Op::Leaf, t)
    }

    /// Leaf sharing storage with the caller, e.g. a parameter value.
    pub fn leaf_shared(&mut self, t: Arc<Tensor<T>>) -> Var {
        self.nodes.push(Node { op: Op::Leaf, value: t });
        Var(self.nodes.len() - 1)
    }

    /// Cross-correlation of `x[C_in,H,W]` with `w[C_out,C_in,k,k]` plus bias.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Var, stride: usize, pad: usize) -> Result<Var> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        if xs.len() != 3 {
            return Err(Error::shape("conv2d", format!("input must be [C,H,W], got {}", shape_str(xs))));
        }
        if ws.len() != 4 {
            return Err(Error::shape("conv2d", format!("weight must be [C_out,C_in,k,k], got {}", shape_str(ws))));
        }
        if ws[1] != xs[0] {
            return Err(Error::shape(
                "conv2d",
                format!("input channels: input has {} but weight expects {}", xs[0], ws[1]),
            ));
        }
        if ws[2] != ws[3] || ws[2] % 2 == 0 {
            return Err(Error::shape("conv2d", format!("kernel must be square and odd, got {}x{}", ws[2], ws[3])));
        }
        if bs != [ws[0]] {
            return Err(Error::shape("conv2d", format!("bias length {} != output channels {}", shape_str(bs), ws[0])));
        }
        if pad != (ws[2] - 1) / 2 {
            return Err(Error::shape("conv2d", format!("pad {} must be (k-1)/2 = {}", pad, (ws[2] - 1) / 2)));
        }
        if stride == 0 || xs[1] % stride != 0 || xs[2] % stride != 0 {
            return Err(Error::shape(
                "conv2d",
                format!("height {} / width {} not divisible by stride {}", xs[1], xs[2], stride),
            ));
        }
        let geom = ConvGeom {
            cin: xs[0],
            h: xs[1],
            w: xs[2],
            cout: ws[0],
            k: ws[2],
            stride,
            pad,
        };
        let (out, col) = kernels::conv2d_forward(
            self.value(x).data(),
            self.value(w).data(),
            self.value(b).data(),
            &geom,
        );
        let value = Tensor::new([geom.cout, geom.out_h(), geom.out_w()], out)?;
        Ok(self.push(Op::Conv2d { x, w, b, geom, col }, value))
    }

    /// Zero-insertion 2× upsampling: each pixel becomes a 2×2 block holding
    /// the original value in its top-left corner.
    pub fn upsample_zero(&mut self, x: Var) -> Result<Var> {
        let xs = self.shape(x);
        if xs.len() != 3 {
            return Err(Error::shape("upsample_zero", format!("input must be [C,H,W], got {}", shape_str(xs))));
        }
        let (c, h, w) = (xs[0], xs[1], xs[2]);
        let out = kernels::upsample_zero(self.value(x).data(), c, h, w);
        let value = Tensor::new([c, 2 * h, 2 * w], out)?;
        Ok(self.push(Op::UpsampleZero { x }, value))
    }

    /// Up-convolution: [`Graph::upsample_zero`] followed by a stride-1
    /// [`Graph::conv2d`], evaluated without multiplying the inserted zeros.
    pub fn upconv2d(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        if xs.len() != 3 || ws.len() != 4 {
            return Err(Error::shape(
                "upconv2d",
                format!("expected [C,H,W] input and 4-d weight, got {} and {}", shape_str(xs), shape_str(ws)),
            ));
        }
        if ws[1] != xs[0] {
            return Err(Error::shape(
                "upconv2d",
                format!("input channels: input has {} but weight expects {}", xs[0], ws[1]),
            ));
        }
        if ws[2] != ws[3] || ws[2] % 2 == 0 {
            return Err(Error::shape("upconv2d", format!("kernel must be square and odd, got {}x{}", ws[2], ws[3])));
        }
        if bs != [ws[0]] {
            return Err(Error::shape("upconv2d", format!("bias length {} != output channels {}", shape_str(bs), ws[0])));
        }
        let geom = UpConvGeom {
            cin: xs[0],
            h: xs[1],
            w: xs[2],
            cout: ws[0],
            k: ws[2],
        };
        let (out, cols) = kernels::upconv_forward(
            self.value(x).data(),
            self.value(w).data(),
            self.value(b).data(),
            &geom,
        );
        let value = Tensor::new([geom.cout, 2 * geom.h, 2 * geom.w], out)?;
        Ok(self.push(Op::UpConv2d { x, w, b, geom, cols }, value))
    }

    /// `y = w·x + b` for `x[N]`, `w[M,N]`, `b[M]`.
    pub fn fully_connected(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        if xs.len() != 1 {
            return Err(Error::shape("fully_connected", format!("input must be rank 1, got {}", shape_str(xs))));
        }
        if ws.len() != 2 || ws[1] != xs[0] {
            return Err(Error::shape(
                "fully_connected",
                format!("input length {} does not match weight {}", xs[0], shape_str(ws)),
            ));
        }
        if bs != [ws[0]] {
            return Err(Error::shape(
                "fully_connected",
                format!("bias {} does not match output length {}", shape_str(bs), ws[0]),
            ));
        }
        let (m, n) = (ws[0], ws[1]);
        let (xd, wd, bd) = (self.value(x).data(), self.value(w).data(), self.value(b).data());
        let out: Vec<T> = (0..m).map(|i| bd[i] + kernels::dot(&wd[i * n..(i + 1) * n], xd)).collect();
        Ok(self.push(Op::FullyConnected { x, w, b }, Tensor::vector(out)))
    }

    /// `max(x, slope·x)`; at exactly zero the positive branch is taken.
    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let s = T::from_f64(slope);
        let value = self.value(x).map(|v| if v >= T::zero() { v } else { s * v });
        self.push(Op::LeakyRelu { x, slope: s }, value)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| v.tanh());
        self.push(Op::Tanh { x }, value)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let value = self.value(x).map(sigmoid);
        self.push(Op::Sigmoid { x }, value)
    }

    /// Concatenate two rank-1 tensors.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 1 || sb.len() != 1 {
            return Err(Error::shape(
                "concat",
                format!("both operands must be rank 1, got {} and {}", shape_str(sa), shape_str(sb)),
            ));
        }
        let mut data = self.value(a).data().to_vec();
        data.extend_from_slice(self.value(b).data());
        Ok(self.push(Op::Concat { a, b }, Tensor::vector(data)))
    }

    /// Stack `[Ca,H,W]` and `[Cb,H,W]` into `[Ca+Cb,H,W]`.
    pub fn concat_channels(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != 3 || sb.len() != 3 || sa[1..] != sb[1..] {
            return Err(Error::shape(
                "concat_channels",
                format!("spatial sizes differ: {} vs {}", shape_str(&sa), shape_str(&sb)),
            ));
        }
        let mut data = self.value(a).data().to_vec();
        data.extend_from_slice(self.value(b).data());
        let value = Tensor::new([sa[0] + sb[0], sa[1], sa[2]], data)?;
        Ok(self.push(Op::ConcatChannels { a, b }, value))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = Tensor::new(shape.to_vec(), self.value(x).data().to_vec())
            .map_err(|_| Error::shape("reshape", format!("{} -> {}", shape_str(self.shape(x)), shape_str(shape))))?;
        Ok(self.push(Op::Reshape { x }, value))
    }

    /// Take `len` entries along the first axis starting at `start`.
    pub fn slice_channels(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        if xs.is_empty() || start + len > xs[0] {
            return Err(Error::shape(
                "slice_channels",
                format!("range {}..{} out of bounds for first axis of {}", start, start + len, shape_str(&xs)),
            ));
        }
        let inner: usize = xs[1..].iter().product();
        let data = self.value(x).data()[start * inner..(start + len) * inner].to_vec();
        let mut shape = xs.clone();
        shape[0] = len;
        let value = Tensor::new(shape, data)?;
        Ok(self.push(Op::SliceChannels { x, start }, value))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(
                op,
                format!("{} vs {}", shape_str(self.shape(a)), shape_str(self.shape(b))),
            ));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let (va, vb) = (self.value(a), self.value(b));
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| x + y).collect();
        let value = Tensor::new(va.shape().to_vec(), data)?;
        Ok(self.push(Op::Add { a, b }, value))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let (va, vb) = (self.value(a), self.value(b));
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| x - y).collect();
        let value = Tensor::new(va.shape().to_vec(), data)?;
        Ok(self.push(Op::Sub { a, b }, value))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let c = T::from_f64(c);
        let value = self.value(x).map(|v| v * c);
        self.push(Op::Scale { x, c }, value)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().fold(T::zero(), |s, &v| s + v);
        self.push(Op::Sum { x }, Tensor::scalar(s))
    }

    /// `Σ x²`
    pub fn sum_squares(&mut self, x: Var) -> Var {
        let d = self.value(x).data();
        let s = kernels::dot(d, d);
        self.push(Op::SumSquares { x }, Tensor::scalar(s))
    }

    /// `Σ |x|`; the subgradient at zero is zero.
    pub fn sum_abs(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().fold(T::zero(), |s, &v| s + v.abs());
        self.push(Op::SumAbs { x }, Tensor::scalar(s))
    }

    /// Binary cross-entropy of `sigmoid(x)` against a constant label,
    /// summed over elements: `−Σ [t·ln σ(x) + (1−t)·ln(1−σ(x))]`.
    pub fn bce_with_logits(&mut self, x: Var, target: f64) -> Var {
        let t = T::from_f64(target);
        let s = self.value(x).data().iter().fold(T::zero(), |s, &v| {
            // max(v,0) − v·t + ln(1 + e^{−|v|})
            s + v.max(T::zero()) - v * t + (T::one() + (-v.abs()).exp()).ln()
        });
        self.push(Op::BceWithLogits { x, target: t }, Tensor::scalar(s))
    }

    /// Reverse-mode sweep from a scalar node.
    pub fn backward(&self, loss: Var) -> Result<Grads<T>> {
        if self.value(loss).len() != 1 {
            return Err(Error::shape(
                "backward",
                format!("loss must be scalar, got shape {}", shape_str(self.shape(loss))),
            ));
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![T::one()]);

        for i in (0..=loss.0).rev() {
            let Some(gout) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            self.propagate(node, &gout, &mut grads);
            grads[i] = Some(gout);
        }
        Ok(Grads { grads })
    }

    fn slot<'g>(&self, grads: &'g mut [Option<Vec<T>>], v: Var) -> &'g mut Vec<T> {
        let n = self.nodes[v.0].value.len();
        grads[v.0].get_or_insert_with(|| vec![T::zero(); n])
    }

    fn propagate(&self, node: &Node<T>, gout: &[T], grads: &mut [Option<Vec<T>>]) {
        macro_rules! acc {
            ($v:expr) => {
                self.slot(grads, $v)
            };
        }
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d { x, w, b, geom, col } => {
                let wd = self.value(*w).data();
                let mut dx = vec![T::zero(); self.value(*x).len()];
                let mut dw = vec![T::zero(); self.value(*w).len()];
                let mut db = vec![T::zero(); self.value(*b).len()];
                kernels::conv2d_backward(gout, wd, col, geom, Some(&mut dx), Some(&mut dw), Some(&mut db));
                add_into(acc!(*x), &dx);
                add_into(acc!(*w), &dw);
                add_into(acc!(*b), &db);
            }
            Op::UpConv2d { x, w, b, geom, cols } => {
                let wd = self.value(*w).data();
                let mut dx = vec![T::zero(); self.value(*x).len()];
                let mut dw = vec![T::zero(); self.value(*w).len()];
                let mut db = vec![T::zero(); self.value(*b).len()];
                kernels::upconv_backward(gout, wd, cols, geom, Some(&mut dx), Some(&mut dw), Some(&mut db));
                add_into(acc!(*x), &dx);
                add_into(acc!(*w), &dw);
                add_into(acc!(*b), &db);
            }
            Op::UpsampleZero { x } => {
                let s = self.shape(*x);
                let dx = kernels::upsample_zero_backward(gout, s[0], s[1], s[2]);
                add_into(acc!(*x), &dx);
            }
            Op::FullyConnected { x, w, b } => {
                let ws = self.shape(*w);
                let (m, n) = (ws[0], ws[1]);
                let (xd, wd) = (self.value(*x).data(), self.value(*w).data());
                let mut dx = vec![T::zero(); n];
                let mut dw = vec![T::zero(); m * n];
                for r in 0..m {
                    let g = gout[r];
                    let wrow = &wd[r * n..(r + 1) * n];
                    for (d, &wv) in dx.iter_mut().zip(wrow) {
                        *d = *d + g * wv;
                    }
                    for (d, &xv) in dw[r * n..(r + 1) * n].iter_mut().zip(xd) {
                        *d = *d + g * xv;
                    }
                }
                add_into(acc!(*x), &dx);
                add_into(acc!(*w), &dw);
                add_into(acc!(*b), gout);
            }
            Op::LeakyRelu { x, slope } => {
                let xd = self.value(*x).data();
                let dst = acc!(*x);
                for ((d, &g), &v) in dst.iter_mut().zip(gout).zip(xd) {
                    *d = *d + if v >= T::zero() { g } else { g * *slope };
                }
            }
            Op::Tanh { x } => {
                let y = node.value.data();
                let dst = acc!(*x);
                for ((d, &g), &t) in dst.iter_mut().zip(gout).zip(y) {
                    *d = *d + g * (T::one() - t * t);
                }
            }
            Op::Sigmoid { x } => {
                let y = node.value.data();
                let dst = acc!(*x);
                for ((d, &g), &s) in dst.iter_mut().zip(gout).zip(y) {
                    *d = *d + g * s * (T::one() - s);
                }
            }
            Op::Concat { a, b } | Op::ConcatChannels { a, b } => {
                let na = self.value(*a).len();
                add_into(acc!(*a), &gout[..na]);
                add_into(acc!(*b), &gout[na..]);
            }
            Op::Reshape { x } => add_into(acc!(*x), gout),
            Op::SliceChannels { x, start } => {
                let inner: usize = self.shape(*x)[1..].iter().product();
                let off = start * inner;
                let dst = acc!(*x);
                add_into(&mut dst[off..off + gout.len()], gout);
            }
            Op::Add { a, b } => {
                add_into(acc!(*a), gout);
                add_into(acc!(*b), gout);
            }
            Op::Sub { a, b } => {
                add_into(acc!(*a), gout);
                let dst = acc!(*b);
                for (d, &g) in dst.iter_mut().zip(gout) {
                    *d = *d - g;
                }
            }
            Op::Scale { x, c } => {
                let dst = acc!(*x);
                for (d, &g) in dst.iter_mut().zip(gout) {
                    *d = *d + g * *c;
                }
            }
            Op::Sum { x } => {
                let g = gout[0];
                for d in acc!(*x).iter_mut() {
                    *d = *d + g;
                }
            }
            Op::SumSquares { x } => {
                let g = gout[0] + gout[0];
                let xd = self.value(*x).data();
                let dst = acc!(*x);
                for (d, &v) in dst.iter_mut().zip(xd) {
                    *d = *d + g * v;
                }
            }
            Op::SumAbs { x } => {
                let g = gout[0];
                let xd = self.value(*x).data();
                let dst = acc!(*x);
                for (d, &v) in dst.iter_mut().zip(xd) {
                    let s = if v > T::zero() {
                        T::one()
                    } else if v < T::zero() {
                        -T::one()
                    } else {
                        T::zero()
                    };
                    *d = *d + g * s;
                }
            }
            Op::BceWithLogits { x, target } => {
                let g = gout[0];
                let xd = self.value(*x).data();
                let dst = acc!(*x);
                for (d, &v) in dst.iter_mut().zip(xd) {
                    *d = *d + g * (sigmoid(v) - *target);
                }
            }
        }
    }
}

#[inline]
fn add_into<T: Real>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = *d + s;
    }
}

/// Gradients of one backward sweep, indexed by node.
#[derive(Debug)]
pub struct Grads<T: Real = f32> {
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Real> Grads<T> {
    /// `None` when the node does not influence the loss.
    pub fn get(&self, v: Var) -> Option<&[T]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Gradient as a tensor shaped like the node, zeros if unreached.
    pub fn tensor(&self, graph: &Graph<T>, v: Var) -> Tensor<T> {
        let shape = graph.shape(v).to_vec();
        match self.get(v) {
            Some(g) => Tensor::new(shape, g.to_vec()).expect("gradient length matches node"),
            None => Tensor::zeros(shape),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: Vec<f32>) -> Tensor<f32> {
        Tensor::new(shape.to_vec(), data).unwrap()
    }

    fn ones_conv(g: &mut Graph<f32>, stride: usize) -> Var {
        let x = g.leaf(Tensor::full([1, 4, 4], 1.0));
        let w = g.leaf(Tensor::full([1, 1, 3, 3], 1.0));
        let b = g.leaf(Tensor::zeros([1]));
        g.conv2d(x, w, b, stride, 1).unwrap()
    }

    #[test]
    fn conv_of_ones() {
        let mut g = Graph::new();
        let y = ones_conv(&mut g, 1);
        let v = g.value(y);
        assert_eq!(v.shape(), &[1, 4, 4]);
        for i in 1..3 {
            for j in 1..3 {
                assert_eq!(v.at(&[0, i, j]), 9.0);
            }
        }
        assert_eq!(v.at(&[0, 0, 0]), 4.0);
        assert_eq!(v.at(&[0, 0, 1]), 6.0);
    }

    #[test]
    fn conv_stride_two_halves() {
        let mut g = Graph::new();
        let y = ones_conv(&mut g, 2);
        assert_eq!(g.shape(y), &[1, 2, 2]);
    }

    #[test]
    fn conv_shape_errors_name_dimension() {
        let mut g = Graph::<f32>::new();
        let x = g.leaf(Tensor::zeros([2, 4, 4]));
        let w = g.leaf(Tensor::zeros([1, 3, 3, 3]));
        let b = g.leaf(Tensor::zeros([1]));
        let err = g.conv2d(x, w, b, 1, 1).unwrap_err().to_string();
        assert!(err.contains("input channels"), "{err}");

        let x = g.leaf(Tensor::zeros([1, 5, 4]));
        let w = g.leaf(Tensor::zeros([1, 1, 3, 3]));
        let err = g.conv2d(x, w, b, 2, 1).unwrap_err().to_string();
        assert!(err.contains("height 5"), "{err}");
    }

    #[test]
    fn upsample_zero_layout() {
        let mut g = Graph::new();
        let x = g.leaf(t(&[1, 1, 1], vec![7.5]));
        let y = g.upsample_zero(x).unwrap();
        assert_eq!(g.value(y).data(), &[7.5, 0.0, 0.0, 0.0]);

        let x = g.leaf(t(&[1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]));
        let y = g.upsample_zero(x).unwrap();
        #[rustfmt::skip]
        let expect = [
            1.0, 0.0, 2.0, 0.0,
            0.0, 0.0, 0.0, 0.0,
            3.0, 0.0, 4.0, 0.0,
            0.0, 0.0, 0.0, 0.0,
        ];
        assert_eq!(g.value(y).data(), &expect);

        let s = g.sum(y);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(x).unwrap(), &[1.0; 4]);
    }

    #[test]
    fn fully_connected_cases() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::vector(vec![0.5, -1.0, 2.0]));
        let eye = g.leaf(t(&[3, 3], vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]));
        let zero = g.leaf(Tensor::zeros([3]));
        let y = g.fully_connected(x, eye, zero).unwrap();
        assert_eq!(g.value(y).data(), &[0.5, -1.0, 2.0]);

        let x0 = g.leaf(Tensor::zeros([3]));
        let w = g.leaf(t(&[2, 3], vec![0.3, -0.7, 1.1, 2.0, 0.25, -0.5]));
        let b = g.leaf(Tensor::vector(vec![0.125, -3.0]));
        let y = g.fully_connected(x0, w, b).unwrap();
        assert_eq!(g.value(y).data(), &[0.125, -3.0]);

        let y = g.fully_connected(x, w, b).unwrap();
        let hand: [f64; 2] = [
            0.3 * 0.5 + -0.7 * -1.0 + 1.1 * 2.0 + 0.125,
            2.0 * 0.5 + 0.25 * -1.0 + -0.5 * 2.0 - 3.0,
        ];
        for (a, e) in g.value(y).data().iter().zip(hand) {
            assert!((a - e as f32).abs() < 1e-6);
        }
        let bad = g.leaf(Tensor::zeros([4]));
        assert!(g.fully_connected(bad, w, b).is_err());
    }

    #[test]
    fn leaky_relu_branches() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::vector(vec![1.0, -1.0, 0.0]));
        let y = g.leaky_relu(x, 0.2);
        assert_eq!(g.value(y).data(), &[1.0, -0.2, 0.0]);
        let s = g.sum(y);
        let grads = g.backward(s).unwrap();
        // Exact zero takes the positive branch.
        assert_eq!(grads.get(x).unwrap(), &[1.0, 0.2, 1.0]);
    }

    #[test]
    fn tanh_values_and_slope() {
        let mut g = Graph::<f32>::new();
        let x = g.leaf(Tensor::vector(vec![0.0, 20.0]));
        let y = g.tanh(x);
        assert_eq!(g.value(y).data()[0], 0.0);
        assert!((g.value(y).data()[1] - 1.0).abs() < 1e-6);
        let s = g.sum(y);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(x).unwrap()[0], 1.0);
    }

    #[test]
    fn concat_forward_backward() {
        let mut g = Graph::new();
        let a = g.leaf(Tensor::vector(vec![1.0]));
        let b = g.leaf(Tensor::vector(vec![2.0]));
        let c = g.concat(a, b).unwrap();
        assert_eq!(g.value(c).data(), &[1.0, 2.0]);

        let e = g.leaf(Tensor::vector(vec![]));
        let c2 = g.concat(e, b).unwrap();
        assert_eq!(g.value(c2).data(), &[2.0]);

        let p = g.leaf(Tensor::vector(vec![1.0, 2.0]));
        let q = g.leaf(Tensor::vector(vec![3.0, 4.0, 5.0]));
        let pq = g.concat(p, q).unwrap();
        let w = g.leaf(Tensor::vector(vec![10.0, 20.0, 30.0, 40.0, 50.0]));
        let prod = g.sub(pq, w).unwrap();
        let loss = g.sum_squares(prod);
        let grads = g.backward(loss).unwrap();
        let full: Vec<f32> = [1.0f32, 2.0, 3.0, 4.0, 5.0]
            .iter()
            .zip([10.0f32, 20.0, 30.0, 40.0, 50.0])
            .map(|(x, y)| 2.0 * (x - y))
            .collect();
        assert_eq!(grads.get(p).unwrap(), &full[..2]);
        assert_eq!(grads.get(q).unwrap(), &full[2..]);

        let m = g.leaf(Tensor::zeros([1, 2]));
        assert!(g.concat(m, a).is_err());
    }

    #[test]
    fn backward_basics() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::from_fn([2, 3, 2], |i| i as f32 - 4.0));
        let unused = g.leaf(Tensor::vector(vec![3.0, 4.0]));
        let s = g.sum(x);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(x).unwrap(), &[1.0; 12]);
        assert!(grads.get(unused).is_none());
        assert_eq!(grads.tensor(&g, unused).data(), &[0.0, 0.0]);

        let err = g.backward(x).unwrap_err().to_string();
        assert!(err.contains("scalar"), "{err}");
    }

    #[test]
    fn sum_abs_subgradient_at_zero() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::vector(vec![-2.0, 0.0, 3.0]));
        let s = g.sum_abs(x);
        assert_eq!(g.value(s).data(), &[5.0]);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(x).unwrap(), &[-1.0, 0.0, 1.0]);
    }

    #[test]
    fn bce_at_half() {
        let mut g = Graph::<f64>::new();
        let x = g.leaf(Tensor::vector(vec![0.0, 0.0]));
        let real = g.bce_with_logits(x, 1.0);
        let fake = g.bce_with_logits(x, 0.0);
        let ln2 = std::f64::consts::LN_2;
        assert!((g.value(real).data()[0] - 2.0 * ln2).abs() < 1e-15);
        assert!((g.value(fake).data()[0] - 2.0 * ln2).abs() < 1e-15);
        let s = g.sigmoid(x);
        assert_eq!(g.value(s).data(), &[0.5, 0.5]);
    }

    #[test]
    fn slice_and_reshape() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::from_fn([4, 2, 2], |i| i as f32));
        let s = g.slice_channels(x, 3, 1).unwrap();
        assert_eq!(g.value(s).data(), &[12.0, 13.0, 14.0, 15.0]);
        assert!(g.slice_channels(x, 3, 2).is_err());
        let r = g.reshape(s, &[4]).unwrap();
        let loss = g.sum(r);
        let grads = g.backward(loss).unwrap();
        let gx = grads.get(x).unwrap();
        assert_eq!(&gx[..12], &[0.0; 12]);
        assert_eq!(&gx[12..], &[1.0; 4]);
        assert!(g.reshape(x, &[3, 5]).is_err());
    }
}
