//! Eager tape with reverse-mode differentiation.
//!
//! Every op evaluates its forward value immediately and appends a node to the
//! tape. Node ids are assigned in creation order, so iterating the tape
//! backwards visits nodes in reverse topological order.

use crate::error::{mismatch, Result, TensorError};
use crate::scalar::{gemm, Layout, Scalar};
use crate::tensor::{split_axis, Tensor};

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatMul {
        a: Var,
        b: Var,
        batch: usize,
        m: usize,
        k: usize,
        n: usize,
    },
    Add {
        a: Var,
        b: Var,
    },
    Sub {
        a: Var,
        b: Var,
    },
    Mul {
        a: Var,
        b: Var,
    },
    Scale {
        a: Var,
        c: T,
    },
    AddScalar {
        a: Var,
    },
    Relu {
        a: Var,
    },
    Gelu {
        a: Var,
    },
    Abs {
        a: Var,
    },
    Softmax {
        a: Var,
        outer: usize,
        len: usize,
        inner: usize,
    },
    LayerNorm {
        a: Var,
        outer: usize,
        len: usize,
        inner: usize,
        inv_std: Vec<T>,
    },
    Reshape {
        a: Var,
    },
    Permute {
        a: Var,
        axes: Vec<usize>,
    },
    Concat {
        inputs: Vec<Var>,
        outer: usize,
        chunks: Vec<usize>,
    },
    Sum {
        a: Var,
        outer: usize,
        len: usize,
        inner: usize,
        mean: bool,
    },
    Slice {
        a: Var,
        outer: usize,
        len: usize,
        inner: usize,
        start: usize,
        end: usize,
    },
    Im2col {
        a: Var,
        h: usize,
        w: usize,
        c: usize,
        k: usize,
    },
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// A single-owner computation tape.
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            grads: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Trainable leaf; receives a gradient on [`backward`](Self::backward).
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Untracked leaf (inputs, targets, masks).
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Gradient of the last [`backward`](Self::backward) loss w.r.t. `v`.
    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    fn unary(&mut self, a: Var, data: Vec<T>, op: Op<T>) -> Var {
        let shape = self.shape(a).to_vec();
        let rg = self.rg(a);
        let value = Tensor::new(shape, data).expect("unary keeps shape");
        self.push(value, op, rg)
    }

    // ------------------------------------------------------------------ ops

    /// Matrix product.
    ///
    /// * `a: [.., m, k]`, `b: [k, n]` → `[.., m, n]` (leading dims of `a` are rows)
    /// * `a: [B, m, k]`, `b: [B, k, n]` → `[B, m, n]`
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let sa = self.shape(a).to_vec();
        let sb = self.shape(b).to_vec();
        let (batch, m, k, n, out_shape) = match (sa.len(), sb.len()) {
            (ra, 2) if ra >= 2 => {
                let k = sa[ra - 1];
                if k != sb[0] {
                    return Err(mismatch("matmul", format!("{sa:?} x {sb:?}")));
                }
                let m: usize = sa[..ra - 1].iter().product();
                let mut out = sa[..ra - 1].to_vec();
                out.push(sb[1]);
                (1, m, k, sb[1], out)
            }
            (3, 3) => {
                if sa[0] != sb[0] || sa[2] != sb[1] {
                    return Err(mismatch("matmul", format!("{sa:?} x {sb:?}")));
                }
                (sa[0], sa[1], sa[2], sb[2], vec![sa[0], sa[1], sb[2]])
            }
            _ => return Err(mismatch("matmul", format!("{sa:?} x {sb:?}"))),
        };
        let mut out = vec![T::zero(); batch * m * n];
        {
            let av = self.value(a).data();
            let bv = self.value(b).data();
            for bi in 0..batch {
                gemm(
                    m,
                    k,
                    n,
                    &av[bi * m * k..],
                    Layout::Normal,
                    &bv[bi * k * n..],
                    Layout::Normal,
                    T::zero(),
                    &mut out[bi * m * n..],
                );
            }
        }
        let rg = self.rg(a) || self.rg(b);
        let value = Tensor::new(out_shape, out)?;
        Ok(self.push(
            value,
            Op::MatMul {
                a,
                b,
                batch,
                m,
                k,
                n,
            },
            rg,
        ))
    }

    /// `b` must equal `a` in shape or match its trailing dimensions
    /// (leading-batch expansion).
    fn check_broadcast(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let sa = self.shape(a);
        let sb = self.shape(b);
        let ok = sb.len() <= sa.len() && sa[sa.len() - sb.len()..] == *sb;
        if ok {
            Ok(())
        } else {
            Err(mismatch(op, format!("{sa:?} with {sb:?}")))
        }
    }

    fn binary(
        &mut self,
        op_name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(T, T) -> T,
    ) -> Result<Vec<T>> {
        self.check_broadcast(op_name, a, b)?;
        let av = self.value(a).data();
        let bv = self.value(b).data();
        let mut out = Vec::with_capacity(av.len());
        for chunk in av.chunks_exact(bv.len()) {
            out.extend(chunk.iter().zip(bv).map(|(&x, &y)| f(x, y)));
        }
        Ok(out)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let data = self.binary("add", a, b, |x, y| x + y)?;
        let rg = self.rg(a) || self.rg(b);
        let shape = self.shape(a).to_vec();
        Ok(self.push(Tensor::new(shape, data)?, Op::Add { a, b }, rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let data = self.binary("sub", a, b, |x, y| x - y)?;
        let rg = self.rg(a) || self.rg(b);
        let shape = self.shape(a).to_vec();
        Ok(self.push(Tensor::new(shape, data)?, Op::Sub { a, b }, rg))
    }

    /// Elementwise product (same broadcasting rule as [`add`](Self::add)).
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let data = self.binary("mul", a, b, |x, y| x * y)?;
        let rg = self.rg(a) || self.rg(b);
        let shape = self.shape(a).to_vec();
        Ok(self.push(Tensor::new(shape, data)?, Op::Mul { a, b }, rg))
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        let data = self.value(a).data().iter().map(|&x| x * c).collect();
        self.unary(a, data, Op::Scale { a, c })
    }

    pub fn add_scalar(&mut self, a: Var, c: T) -> Var {
        let data = self.value(a).data().iter().map(|&x| x + c).collect();
        self.unary(a, data, Op::AddScalar { a })
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let data = self
            .value(a)
            .data()
            .iter()
            .map(|&x| if x > T::zero() { x } else { T::zero() })
            .collect();
        self.unary(a, data, Op::Relu { a })
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, a: Var) -> Var {
        let c = T::from_f64_lossy(GELU_C);
        let k = T::from_f64_lossy(GELU_A);
        let half = T::from_f64_lossy(0.5);
        let data = self
            .value(a)
            .data()
            .iter()
            .map(|&x| half * x * (T::one() + (c * (x + k * x * x * x)).tanh()))
            .collect();
        self.unary(a, data, Op::Gelu { a })
    }

    /// |x|, subgradient 0 at 0.
    pub fn abs(&mut self, a: Var) -> Var {
        let data = self.value(a).data().iter().map(|&x| x.abs()).collect();
        self.unary(a, data, Op::Abs { a })
    }

    fn axis(&self, a: Var, axis: usize) -> Result<(usize, usize, usize)> {
        let shape = self.shape(a);
        if axis >= shape.len() {
            return Err(TensorError::InvalidAxis {
                axis,
                rank: shape.len(),
            });
        }
        Ok(split_axis(shape, axis))
    }

    pub fn softmax(&mut self, a: Var, axis: usize) -> Result<Var> {
        let (outer, len, inner) = self.axis(a, axis)?;
        let x = self.value(a).data();
        let mut y = vec![T::zero(); x.len()];
        if inner == 1 {
            for (xr, yr) in x.chunks_exact(len).zip(y.chunks_exact_mut(len)) {
                let mx = xr.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
                yr.iter_mut().zip(xr).for_each(|(o, &v)| *o = v - mx);
                T::exp_in_place(yr);
                let inv = T::one() / lane_sum(yr);
                yr.iter_mut().for_each(|v| *v *= inv);
            }
        } else {
            for o in 0..outer {
                for i in 0..inner {
                    let base = o * len * inner + i;
                    let mut mx = T::neg_infinity();
                    for j in 0..len {
                        mx = mx.max(x[base + j * inner]);
                    }
                    let mut sum = T::zero();
                    for j in 0..len {
                        let e = (x[base + j * inner] - mx).exp();
                        y[base + j * inner] = e;
                        sum += e;
                    }
                    let inv = T::one() / sum;
                    for j in 0..len {
                        y[base + j * inner] *= inv;
                    }
                }
            }
        }
        Ok(self.unary(
            a,
            y,
            Op::Softmax {
                a,
                outer,
                len,
                inner,
            },
        ))
    }

    /// Normalizes to zero mean and unit variance along `axis` (no affine).
    pub fn layer_norm(&mut self, a: Var, axis: usize, eps: T) -> Result<Var> {
        let (outer, len, inner) = self.axis(a, axis)?;
        let x = self.value(a).data();
        let mut y = vec![T::zero(); x.len()];
        let mut inv_std = vec![T::zero(); outer * inner];
        let nl = T::from_usize(len).expect("len fits");
        for o in 0..outer {
            for i in 0..inner {
                let base = o * len * inner + i;
                let mut mean = T::zero();
                for j in 0..len {
                    mean += x[base + j * inner];
                }
                mean = mean / nl;
                let mut var = T::zero();
                for j in 0..len {
                    let d = x[base + j * inner] - mean;
                    var += d * d;
                }
                var = var / nl;
                let is = T::one() / (var + eps).sqrt();
                inv_std[o * inner + i] = is;
                for j in 0..len {
                    y[base + j * inner] = (x[base + j * inner] - mean) * is;
                }
            }
        }
        Ok(self.unary(
            a,
            y,
            Op::LayerNorm {
                a,
                outer,
                len,
                inner,
                inv_std,
            },
        ))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let n: usize = shape.iter().product();
        if n != self.value(a).len() {
            return Err(mismatch(
                "reshape",
                format!("{:?} -> {shape:?}", self.shape(a)),
            ));
        }
        let data = self.value(a).data().to_vec();
        let rg = self.rg(a);
        Ok(self.push(Tensor::new(shape.to_vec(), data)?, Op::Reshape { a }, rg))
    }

    /// General axis permutation; output axis `i` is input axis `axes[i]`.
    pub fn permute(&mut self, a: Var, axes: &[usize]) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        let rank = shape.len();
        let mut seen = vec![false; rank];
        if axes.len() != rank
            || axes
                .iter()
                .any(|&ax| ax >= rank || std::mem::replace(&mut seen[ax], true))
        {
            return Err(mismatch(
                "permute",
                format!("axes {axes:?} for shape {shape:?}"),
            ));
        }
        let out_shape: Vec<usize> = axes.iter().map(|&ax| shape[ax]).collect();
        let src_strides = permuted_strides(&shape, axes);
        let x = self.value(a).data();
        let mut y = Vec::with_capacity(x.len());
        for_each_row(&out_shape, &src_strides, |base, ext, st| {
            y.extend((0..ext).map(|j| x[base + j * st]));
        });
        let rg = self.rg(a);
        Ok(self.push(
            Tensor::new(out_shape, y)?,
            Op::Permute {
                a,
                axes: axes.to_vec(),
            },
            rg,
        ))
    }

    /// Swaps two axes.
    pub fn transpose(&mut self, a: Var, ax0: usize, ax1: usize) -> Result<Var> {
        let rank = self.shape(a).len();
        if ax0 >= rank || ax1 >= rank {
            return Err(TensorError::InvalidAxis {
                axis: ax0.max(ax1),
                rank,
            });
        }
        let mut axes: Vec<usize> = (0..rank).collect();
        axes.swap(ax0, ax1);
        self.permute(a, &axes)
    }

    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = *inputs
            .first()
            .ok_or_else(|| mismatch("concat", "no inputs"))?;
        let base = self.shape(first).to_vec();
        if axis >= base.len() {
            return Err(TensorError::InvalidAxis {
                axis,
                rank: base.len(),
            });
        }
        let mut total = 0;
        for &v in inputs {
            let s = self.shape(v);
            let compatible = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(i, (x, y))| i == axis || x == y);
            if !compatible {
                return Err(mismatch(
                    "concat",
                    format!("{base:?} with {s:?} on axis {axis}"),
                ));
            }
            total += s[axis];
        }
        let (outer, _, inner) = split_axis(&base, axis);
        let chunks: Vec<usize> = inputs
            .iter()
            .map(|&v| self.shape(v)[axis] * inner)
            .collect();
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for (&v, &c) in inputs.iter().zip(&chunks) {
                out.extend_from_slice(&self.value(v).data()[o * c..(o + 1) * c]);
            }
        }
        let mut shape = base;
        shape[axis] = total;
        let rg = inputs.iter().any(|&v| self.rg(v));
        Ok(self.push(
            Tensor::new(shape, out)?,
            Op::Concat {
                inputs: inputs.to_vec(),
                outer,
                chunks,
            },
            rg,
        ))
    }

    fn reduce(&mut self, a: Var, axis: usize, mean: bool) -> Result<Var> {
        let (outer, len, inner) = self.axis(a, axis)?;
        let x = self.value(a).data();
        let mut y = vec![T::zero(); outer * inner];
        if inner == 1 {
            for (acc, row) in y.iter_mut().zip(x.chunks_exact(len)) {
                *acc = lane_sum(row);
            }
        } else {
            for o in 0..outer {
                for j in 0..len {
                    let row = &x[(o * len + j) * inner..(o * len + j + 1) * inner];
                    for (acc, &v) in y[o * inner..(o + 1) * inner].iter_mut().zip(row) {
                        *acc += v;
                    }
                }
            }
        }
        if mean {
            let inv = T::one() / T::from_usize(len).expect("len fits");
            y.iter_mut().for_each(|v| *v *= inv);
        }
        let mut shape = self.shape(a).to_vec();
        shape.remove(axis);
        if shape.is_empty() {
            shape.push(1);
        }
        let rg = self.rg(a);
        Ok(self.push(
            Tensor::new(shape, y)?,
            Op::Sum {
                a,
                outer,
                len,
                inner,
                mean,
            },
            rg,
        ))
    }

    /// Sums out `axis` (removed from the shape).
    pub fn sum(&mut self, a: Var, axis: usize) -> Result<Var> {
        self.reduce(a, axis, false)
    }

    /// Averages out `axis` (removed from the shape).
    pub fn mean(&mut self, a: Var, axis: usize) -> Result<Var> {
        self.reduce(a, axis, true)
    }

    /// Sum of all elements as a `[1]` tensor.
    pub fn sum_all(&mut self, a: Var) -> Var {
        let n = self.value(a).len();
        let flat = self.reshape(a, &[n]).expect("flatten");
        self.reduce(flat, 0, false).expect("axis 0 exists")
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let n = self.value(a).len();
        let flat = self.reshape(a, &[n]).expect("flatten");
        self.reduce(flat, 0, true).expect("axis 0 exists")
    }

    /// Half-open range `start..end` along `axis`.
    pub fn slice(&mut self, a: Var, axis: usize, start: usize, end: usize) -> Result<Var> {
        let (outer, len, inner) = self.axis(a, axis)?;
        if start >= end || end > len {
            return Err(mismatch("slice", format!("{start}..{end} of extent {len}")));
        }
        let x = self.value(a).data();
        let width = (end - start) * inner;
        let mut y = Vec::with_capacity(outer * width);
        for o in 0..outer {
            let from = (o * len + start) * inner;
            y.extend_from_slice(&x[from..from + width]);
        }
        let mut shape = self.shape(a).to_vec();
        shape[axis] = end - start;
        let rg = self.rg(a);
        Ok(self.push(
            Tensor::new(shape, y)?,
            Op::Slice {
                a,
                outer,
                len,
                inner,
                start,
                end,
            },
            rg,
        ))
    }

    /// Unfolds `[h, w, c]` into `[h*w, k*k*c]` patches for a stride-1,
    /// zero-padded `k x k` convolution. Patch layout is `(dy, dx, channel)`.
    pub fn im2col(&mut self, a: Var, k: usize) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        if shape.len() != 3 || k % 2 == 0 {
            return Err(mismatch("im2col", format!("shape {shape:?}, kernel {k}")));
        }
        let (h, w, c) = (shape[0], shape[1], shape[2]);
        let pad = (k / 2) as isize;
        let x = self.value(a).data();
        let row = k * k * c;
        let mut y = vec![T::zero(); h * w * row];
        for yy in 0..h {
            for xx in 0..w {
                let dst = (yy * w + xx) * row;
                for dy in 0..k {
                    let sy = yy as isize + dy as isize - pad;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    for dx in 0..k {
                        let sx = xx as isize + dx as isize - pad;
                        if sx < 0 || sx >= w as isize {
                            continue;
                        }
                        let src = (sy as usize * w + sx as usize) * c;
                        let d = dst + (dy * k + dx) * c;
                        y[d..d + c].copy_from_slice(&x[src..src + c]);
                    }
                }
            }
        }
        let rg = self.rg(a);
        Ok(self.push(
            Tensor::new(vec![h * w, row], y)?,
            Op::Im2col { a, h, w, c, k },
            rg,
        ))
    }

    // ------------------------------------------------------------- backward

    /// Accumulates d(loss)/d(node) into every node that requires a gradient.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(TensorError::NotScalar(self.shape(loss).to_vec()));
        }
        self.grads = (0..self.nodes.len()).map(|_| None).collect();
        if !self.rg(loss) {
            return Ok(());
        }
        self.grads[loss.0] = Some(vec![T::one()]);
        for id in (0..=loss.0).rev() {
            let Some(gy) = self.grads[id].take() else {
                continue;
            };
            self.backprop_node(id, &gy);
            self.grads[id] = Some(gy);
        }
        Ok(())
    }

    fn backprop_node(&mut self, id: usize, gy: &[T]) {
        let nodes = &self.nodes;
        let grads = &mut self.grads;
        let node = &nodes[id];
        let needs = |v: Var| nodes[v.0].requires_grad;
        match &node.op {
            Op::Leaf => {}
            &Op::MatMul {
                a,
                b,
                batch,
                m,
                k,
                n,
            } => {
                let av = nodes[a.0].value.data();
                let bv = nodes[b.0].value.data();
                if needs(a) {
                    let ga = acc(grads, a, av.len());
                    for bi in 0..batch {
                        // dA = dC · Bᵀ
                        gemm(
                            m,
                            n,
                            k,
                            &gy[bi * m * n..],
                            Layout::Normal,
                            &bv[bi * k * n..],
                            Layout::Transposed,
                            T::one(),
                            &mut ga[bi * m * k..],
                        );
                    }
                }
                if needs(b) {
                    let gb = acc(grads, b, bv.len());
                    for bi in 0..batch {
                        // dB = Aᵀ · dC
                        gemm(
                            k,
                            m,
                            n,
                            &av[bi * m * k..],
                            Layout::Transposed,
                            &gy[bi * m * n..],
                            Layout::Normal,
                            T::one(),
                            &mut gb[bi * k * n..],
                        );
                    }
                }
            }
            &Op::Add { a, b } | &Op::Sub { a, b } => {
                let sign = if matches!(node.op, Op::Sub { .. }) {
                    -T::one()
                } else {
                    T::one()
                };
                if needs(a) {
                    let ga = acc(grads, a, gy.len());
                    ga.iter_mut().zip(gy).for_each(|(g, &d)| *g += d);
                }
                if needs(b) {
                    let nb = nodes[b.0].value.len();
                    let gb = acc(grads, b, nb);
                    for chunk in gy.chunks(nb) {
                        gb.iter_mut().zip(chunk).for_each(|(g, &d)| *g += sign * d);
                    }
                }
            }
            &Op::Mul { a, b } => {
                let av = nodes[a.0].value.data();
                let bv = nodes[b.0].value.data();
                let nb = bv.len();
                if needs(a) {
                    let ga = acc(grads, a, av.len());
                    for (gchunk, dchunk) in ga.chunks_mut(nb).zip(gy.chunks(nb)) {
                        for ((g, &d), &y) in gchunk.iter_mut().zip(dchunk).zip(bv) {
                            *g += d * y;
                        }
                    }
                }
                if needs(b) {
                    let gb = acc(grads, b, nb);
                    for (dchunk, achunk) in gy.chunks(nb).zip(av.chunks(nb)) {
                        for ((g, &d), &x) in gb.iter_mut().zip(dchunk).zip(achunk) {
                            *g += d * x;
                        }
                    }
                }
            }
            &Op::Scale { a, c } => {
                if needs(a) {
                    let ga = acc(grads, a, gy.len());
                    ga.iter_mut().zip(gy).for_each(|(g, &d)| *g += c * d);
                }
            }
            &Op::AddScalar { a } | &Op::Reshape { a } => {
                if needs(a) {
                    let ga = acc(grads, a, gy.len());
                    ga.iter_mut().zip(gy).for_each(|(g, &d)| *g += d);
                }
            }
            &Op::Relu { a } => {
                if needs(a) {
                    let x = nodes[a.0].value.data();
                    let ga = acc(grads, a, gy.len());
                    for ((g, &d), &xv) in ga.iter_mut().zip(gy).zip(x) {
                        if xv > T::zero() {
                            *g += d;
                        }
                    }
                }
            }
            &Op::Gelu { a } => {
                if needs(a) {
                    let c = T::from_f64_lossy(GELU_C);
                    let k = T::from_f64_lossy(GELU_A);
                    let half = T::from_f64_lossy(0.5);
                    let three = T::from_f64_lossy(3.0);
                    let x = nodes[a.0].value.data();
                    let ga = acc(grads, a, gy.len());
                    for ((g, &d), &xv) in ga.iter_mut().zip(gy).zip(x) {
                        let t = (c * (xv + k * xv * xv * xv)).tanh();
                        let dt = (T::one() - t * t) * c * (T::one() + three * k * xv * xv);
                        *g += d * (half * (T::one() + t) + half * xv * dt);
                    }
                }
            }
            &Op::Abs { a } => {
                if needs(a) {
                    let x = nodes[a.0].value.data();
                    let ga = acc(grads, a, gy.len());
                    for ((g, &d), &xv) in ga.iter_mut().zip(gy).zip(x) {
                        if xv > T::zero() {
                            *g += d;
                        } else if xv < T::zero() {
                            *g -= d;
                        }
                    }
                }
            }
            &Op::Softmax {
                a,
                outer,
                len,
                inner,
            } => {
                if needs(a) {
                    let y = node.value.data();
                    let ga = acc(grads, a, y.len());
                    if inner == 1 {
                        for ((gr, yr), dr) in ga
                            .chunks_exact_mut(len)
                            .zip(y.chunks_exact(len))
                            .zip(gy.chunks_exact(len))
                        {
                            let dot = lane_dot(yr, dr);
                            for ((g, &yv), &d) in gr.iter_mut().zip(yr).zip(dr) {
                                *g += yv * (d - dot);
                            }
                        }
                    } else {
                        for o in 0..outer {
                            for i in 0..inner {
                                let base = o * len * inner + i;
                                let mut dot = T::zero();
                                for j in 0..len {
                                    let idx = base + j * inner;
                                    dot += gy[idx] * y[idx];
                                }
                                for j in 0..len {
                                    let idx = base + j * inner;
                                    ga[idx] += y[idx] * (gy[idx] - dot);
                                }
                            }
                        }
                    }
                }
            }
            Op::LayerNorm {
                a,
                outer,
                len,
                inner,
                inv_std,
            } => {
                let (a, outer, len, inner) = (*a, *outer, *len, *inner);
                if needs(a) {
                    let y = node.value.data();
                    let ga = acc(grads, a, y.len());
                    let nl = T::from_usize(len).expect("len fits");
                    for o in 0..outer {
                        for i in 0..inner {
                            let base = o * len * inner + i;
                            let mut mean_g = T::zero();
                            let mut mean_gy = T::zero();
                            for j in 0..len {
                                let idx = base + j * inner;
                                mean_g += gy[idx];
                                mean_gy += gy[idx] * y[idx];
                            }
                            mean_g = mean_g / nl;
                            mean_gy = mean_gy / nl;
                            let is = inv_std[o * inner + i];
                            for j in 0..len {
                                let idx = base + j * inner;
                                ga[idx] += is * (gy[idx] - mean_g - y[idx] * mean_gy);
                            }
                        }
                    }
                }
            }
            Op::Permute { a, axes } => {
                let a = *a;
                if needs(a) {
                    let in_shape = nodes[a.0].value.shape();
                    let out_shape = node.value.shape();
                    let src_strides = permuted_strides(in_shape, axes);
                    let ga = acc(grads, a, gy.len());
                    let mut rows = gy.chunks_exact(*out_shape.last().expect("rank >= 1"));
                    for_each_row(out_shape, &src_strides, |base, _, st| {
                        let row = rows.next().expect("same length");
                        for (j, &d) in row.iter().enumerate() {
                            ga[base + j * st] += d;
                        }
                    });
                }
            }
            Op::Concat {
                inputs,
                outer,
                chunks,
            } => {
                let total: usize = chunks.iter().sum();
                let mut start = 0;
                for (&v, &c) in inputs.iter().zip(chunks) {
                    if needs(v) {
                        let gv = acc(grads, v, outer * c);
                        for o in 0..*outer {
                            let src = &gy[o * total + start..o * total + start + c];
                            gv[o * c..(o + 1) * c]
                                .iter_mut()
                                .zip(src)
                                .for_each(|(g, &d)| *g += d);
                        }
                    }
                    start += c;
                }
            }
            &Op::Sum {
                a,
                outer,
                len,
                inner,
                mean,
            } => {
                if needs(a) {
                    let f = if mean {
                        T::one() / T::from_usize(len).expect("len fits")
                    } else {
                        T::one()
                    };
                    let ga = acc(grads, a, outer * len * inner);
                    for o in 0..outer {
                        let src = &gy[o * inner..(o + 1) * inner];
                        for j in 0..len {
                            let dst = &mut ga[(o * len + j) * inner..(o * len + j + 1) * inner];
                            dst.iter_mut().zip(src).for_each(|(g, &d)| *g += f * d);
                        }
                    }
                }
            }
            &Op::Slice {
                a,
                outer,
                len,
                inner,
                start,
                end,
            } => {
                if needs(a) {
                    let width = (end - start) * inner;
                    let ga = acc(grads, a, outer * len * inner);
                    for o in 0..outer {
                        let dst = (o * len + start) * inner;
                        ga[dst..dst + width]
                            .iter_mut()
                            .zip(&gy[o * width..(o + 1) * width])
                            .for_each(|(g, &d)| *g += d);
                    }
                }
            }
            &Op::Im2col { a, h, w, c, k } => {
                if needs(a) {
                    let pad = (k / 2) as isize;
                    let row = k * k * c;
                    let ga = acc(grads, a, h * w * c);
                    for yy in 0..h {
                        for xx in 0..w {
                            let src = (yy * w + xx) * row;
                            for dy in 0..k {
                                let sy = yy as isize + dy as isize - pad;
                                if sy < 0 || sy >= h as isize {
                                    continue;
                                }
                                for dx in 0..k {
                                    let sx = xx as isize + dx as isize - pad;
                                    if sx < 0 || sx >= w as isize {
                                        continue;
                                    }
                                    let dst = (sy as usize * w + sx as usize) * c;
                                    let s = src + (dy * k + dx) * c;
                                    ga[dst..dst + c]
                                        .iter_mut()
                                        .zip(&gy[s..s + c])
                                        .for_each(|(g, &d)| *g += d);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

fn acc<T: Scalar>(grads: &mut [Option<Vec<T>>], v: Var, len: usize) -> &mut Vec<T> {
    grads[v.0].get_or_insert_with(|| vec![T::zero(); len])
}

/// Input strides reordered to follow the output axes of a permutation.
fn permuted_strides(in_shape: &[usize], axes: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; in_shape.len()];
    for i in (0..in_shape.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * in_shape[i + 1];
    }
    axes.iter().map(|&ax| strides[ax]).collect()
}

/// `Σ xs` with eight interleaved accumulators.
fn lane_sum<T: Scalar>(xs: &[T]) -> T {
    let mut lanes = [T::zero(); 8];
    let mut chunks = xs.chunks_exact(8);
    for c in &mut chunks {
        for (l, &v) in lanes.iter_mut().zip(c) {
            *l += v;
        }
    }
    let tail = chunks.remainder().iter().fold(T::zero(), |s, &v| s + v);
    lanes.iter().fold(T::zero(), |s, &v| s + v) + tail
}

fn lane_dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut lanes = [T::zero(); 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for ((l, &u), &v) in lanes.iter_mut().zip(x).zip(y) {
            *l += u * v;
        }
    }
    let tail = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .fold(T::zero(), |s, (&u, &v)| s + u * v);
    lanes.iter().fold(T::zero(), |s, &v| s + v) + tail
}

/// Visits rows of the last axis of `shape` in row-major order as
/// `(source base offset, row length, source stride)`.
fn for_each_row(shape: &[usize], strides: &[usize], mut f: impl FnMut(usize, usize, usize)) {
    let rank = shape.len();
    let total: usize = shape.iter().product();
    if total == 0 {
        return;
    }
    let inner_ext = shape[rank - 1];
    let inner_stride = strides[rank - 1];
    let mut idx = vec![0usize; rank];
    let mut base = 0usize;
    for _ in 0..total / inner_ext {
        f(base, inner_ext, inner_stride);
        // advance the outer multi-index (everything but the last axis)
        let mut ax = rank - 1;
        while ax > 0 {
            ax -= 1;
            idx[ax] += 1;
            base += strides[ax];
            if idx[ax] < shape[ax] {
                break;
            }
            base -= strides[ax] * shape[ax];
            idx[ax] = 0;
        }
    }
}
