//! Reverse-mode autodiff over a linear tape of tensor operations.
//!
//! A [`Graph`] records every forward op in execution order; [`Graph::backward`]
//! walks the tape once in reverse and writes parameter gradients into a
//! [`ParamStore`]. Parameters are pulled in by name and memoized, so a parameter
//! used several times accumulates all of its contributions.

use std::collections::HashMap;

use super::ops::{self, ConvGeometry};
use super::params::ParamStore;
use super::real::{gemm, MatRef, Real};
use super::tensor::Tensor;
use crate::error::{shape_err, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op<T> {
    Leaf,
    Param(String),
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Silu(Var),
    Relu(Var),
    Square(Var),
    Sum(Var),
    Mean(Var),
    Softmax(Var),
    LayerNorm { x: Var, gamma: Var, beta: Var, xhat: Vec<T>, inv_std: Vec<T> },
    Conv2d { x: Var, k: Var, bias: Var, geom: ConvGeometry, cols: Vec<T> },
    AttnPool { fmap: Var, w: Var, bias: Var, alpha: Vec<T>, dims: (usize, usize, usize) },
    Concat { parts: Vec<Var>, widths: Vec<usize> },
    Slice { x: Var, start: usize, len: usize },
    Reshape(Var),
    RowDot(Var, Var),
    MulCol(Var, Var),
    Mse(Var, Var),
}

struct Node<T> {
    shape: Vec<usize>,
    value: Vec<T>,
    op: Op<T>,
    requires_grad: bool,
}

pub struct Graph<T: Real = f32> {
    nodes: Vec<Node<T>>,
    params: HashMap<String, Var>,
    backward_done: bool,
}

impl<T: Real> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new(), params: HashMap::new(), backward_done: false }
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<T>, op: Op<T>, requires_grad: bool) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        self.nodes.push(Node { shape, value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn data(&self, v: Var) -> &[T] {
        &self.nodes[v.0].value
    }

    pub fn value(&self, v: Var) -> Tensor<T> {
        Tensor::new(&self.nodes[v.0].shape, self.nodes[v.0].value.clone()).expect("node shape")
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Constant input; never receives a gradient.
    pub fn input(&mut self, t: Tensor<T>) -> Var {
        let shape = t.shape().to_vec();
        self.push(shape, t.into_data(), Op::Leaf, false)
    }

    pub fn constant(&mut self, shape: &[usize], data: Vec<T>) -> Result<Var> {
        Ok(self.input(Tensor::new(shape, data)?))
    }

    pub fn zeros(&mut self, shape: &[usize]) -> Var {
        self.input(Tensor::zeros(shape))
    }

    /// Trainable leaf bound to `store[name]`.
    pub fn param(&mut self, store: &ParamStore<T>, name: &str) -> Result<Var> {
        if let Some(v) = self.params.get(name) {
            return Ok(*v);
        }
        let t = store.get(name).ok_or_else(|| Error::MissingRecord(name.to_string()))?;
        let v = self.push(t.shape().to_vec(), t.data().to_vec(), Op::Param(name.to_string()), true);
        self.params.insert(name.to_string(), v);
        Ok(v)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(shape_err("matmul", &sa, &sb));
        }
        let mut out = vec![T::zero(); sa[0] * sb[1]];
        gemm(
            MatRef::new(self.data(a), sa[0], sa[1]),
            MatRef::new(self.data(b), sb[0], sb[1]),
            T::zero(),
            &mut out,
        );
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(vec![sa[0], sb[1]], out, Op::MatMul(a, b), rg))
    }

    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let n = *self.shape(x).last().unwrap_or(&1);
        if self.shape(b).iter().product::<usize>() != n {
            return Err(shape_err("add_bias", self.shape(x), self.shape(b)));
        }
        let bias = self.data(b).to_vec();
        let mut out = self.data(x).to_vec();
        for row in out.chunks_mut(n) {
            row.iter_mut().zip(&bias).for_each(|(v, b)| *v += *b);
        }
        let rg = self.rg(x) || self.rg(b);
        Ok(self.push(self.shape(x).to_vec(), out, Op::AddBias(x, b), rg))
    }

    /// `x·w + b` with `w[I,O]`, `b[O]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let y = self.matmul(x, w)?;
        self.add_bias(y, b)
    }

    fn zip_op(&mut self, a: Var, b: Var, name: &'static str, f: impl Fn(T, T) -> T, op: Op<T>) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err(name, self.shape(a), self.shape(b)));
        }
        let out = self.data(a).iter().zip(self.data(b)).map(|(x, y)| f(*x, *y)).collect();
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(self.shape(a).to_vec(), out, op, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_op(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_op(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_op(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    fn map_op(&mut self, x: Var, f: impl Fn(T) -> T, op: Op<T>) -> Var {
        let out = self.data(x).iter().map(|v| f(*v)).collect();
        let rg = self.rg(x);
        self.push(self.shape(x).to_vec(), out, op, rg)
    }

    pub fn scale(&mut self, x: Var, c: T) -> Var {
        self.map_op(x, |v| v * c, Op::Scale(x, c))
    }

    pub fn silu(&mut self, x: Var) -> Var {
        self.map_op(x, |v| v * ops::sigmoid(v), Op::Silu(x))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.map_op(x, |v| v.max(T::zero()), Op::Relu(x))
    }

    pub fn square(&mut self, x: Var) -> Var {
        self.map_op(x, |v| v * v, Op::Square(x))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = ops::compensated_sum(self.data(x).iter().copied());
        let rg = self.rg(x);
        self.push(vec![], vec![s], Op::Sum(x), rg)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let n = T::from_f64(self.data(x).len() as f64);
        let s = ops::compensated_sum(self.data(x).iter().copied()) / n;
        let rg = self.rg(x);
        self.push(vec![], vec![s], Op::Mean(x), rg)
    }

    /// Mean squared error over all elements, as a scalar.
    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var> {
        if self.shape(pred) != self.shape(target) {
            return Err(shape_err("mse", self.shape(pred), self.shape(target)));
        }
        let n = T::from_f64(self.data(pred).len() as f64);
        let s = ops::compensated_sum(
            self.data(pred).iter().zip(self.data(target)).map(|(a, b)| (*a - *b) * (*a - *b)),
        ) / n;
        let rg = self.rg(pred) || self.rg(target);
        Ok(self.push(vec![], vec![s], Op::Mse(pred, target), rg))
    }

    /// Softmax along the last axis.
    pub fn softmax(&mut self, x: Var) -> Var {
        let n = *self.shape(x).last().unwrap_or(&1);
        let mut out = self.data(x).to_vec();
        ops::softmax_rows(&mut out, n);
        let rg = self.rg(x);
        self.push(self.shape(x).to_vec(), out, Op::Softmax(x), rg)
    }

    /// Layer normalization over the last axis with affine `gamma`, `beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let n = *self.shape(x).last().unwrap_or(&1);
        if self.shape(gamma).iter().product::<usize>() != n || self.shape(beta).iter().product::<usize>() != n {
            return Err(shape_err("layer_norm", self.shape(x), self.shape(gamma)));
        }
        let eps = T::from_f64(1e-5);
        let nn = T::from_f64(n as f64);
        let (g, b) = (self.data(gamma).to_vec(), self.data(beta).to_vec());
        let mut xhat = self.data(x).to_vec();
        let mut inv_std = Vec::with_capacity(xhat.len() / n);
        let mut out = vec![T::zero(); xhat.len()];
        for (row, orow) in xhat.chunks_mut(n).zip(out.chunks_mut(n)) {
            let mu = row.iter().copied().sum::<T>() / nn;
            let var = row.iter().map(|v| (*v - mu) * (*v - mu)).sum::<T>() / nn;
            let is = T::one() / (var + eps).sqrt();
            inv_std.push(is);
            for i in 0..n {
                row[i] = (row[i] - mu) * is;
                orow[i] = row[i] * g[i] + b[i];
            }
        }
        let rg = self.rg(x) || self.rg(gamma) || self.rg(beta);
        Ok(self.push(self.shape(x).to_vec(), out, Op::LayerNorm { x, gamma, beta, xhat, inv_std }, rg))
    }

    /// 2-D convolution `x[B,C,H,W] * k[O,C,kh,kw] + bias[O]`.
    pub fn conv2d(&mut self, x: Var, k: Var, bias: Var, stride: usize, pad: usize) -> Result<Var> {
        let geom = ConvGeometry::new(self.shape(x), self.shape(k), stride, pad)?;
        if self.shape(bias).iter().product::<usize>() != geom.out_ch {
            return Err(shape_err("conv2d", self.shape(k), self.shape(bias)));
        }
        let (y, cols) = ops::conv2d_with_cols(self.data(x), self.data(k), Some(self.data(bias)), &geom);
        let rg = self.rg(x) || self.rg(k) || self.rg(bias);
        Ok(self.push(geom.out_shape().to_vec(), y, Op::Conv2d { x, k, bias, geom, cols }, rg))
    }

    /// Spatial attention pooling `[B,C,H,W]` → `[B,C]`.
    pub fn attention_pool(&mut self, fmap: Var, w: Var, bias: Var) -> Result<Var> {
        let s = self.shape(fmap).to_vec();
        if s.len() != 4 || self.shape(w).iter().product::<usize>() != s[1] || self.data(bias).len() != 1 {
            return Err(shape_err("attention_pool", &s, self.shape(w)));
        }
        let (b, c, p) = (s[0], s[1], s[2] * s[3]);
        let (out, alpha) = ops::attention_pool_raw(self.data(fmap), b, c, p, self.data(w), self.data(bias)[0]);
        let rg = self.rg(fmap) || self.rg(w) || self.rg(bias);
        Ok(self.push(vec![b, c], out, Op::AttnPool { fmap, w, bias, alpha, dims: (b, c, p) }, rg))
    }

    /// Concatenate along the last axis; leading dims must agree.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = self.shape(parts[0]).to_vec();
        let lead = &first[..first.len() - 1];
        let rows: usize = lead.iter().product();
        let mut widths = Vec::with_capacity(parts.len());
        for p in parts {
            let s = self.shape(*p);
            if s.len() != first.len() || &s[..s.len() - 1] != lead {
                return Err(shape_err("concat", &first, s));
            }
            widths.push(*s.last().unwrap());
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (p, w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.data(*p)[r * w..(r + 1) * w]);
            }
        }
        let mut shape = lead.to_vec();
        shape.push(total);
        let rg = parts.iter().any(|p| self.rg(*p));
        Ok(self.push(shape, out, Op::Concat { parts: parts.to_vec(), widths }, rg))
    }

    /// Columns `[start, start+len)` of the last axis.
    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let s = self.shape(x).to_vec();
        let n = *s.last().unwrap_or(&1);
        if start + len > n {
            return Err(shape_err("slice", &s, &[start, len]));
        }
        let out: Vec<T> = self.data(x).chunks(n).flat_map(|r| r[start..start + len].iter().copied()).collect();
        let mut shape = s.clone();
        *shape.last_mut().unwrap() = len;
        let rg = self.rg(x);
        Ok(self.push(shape, out, Op::Slice { x, start, len }, rg))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        if shape.iter().product::<usize>() != self.data(x).len() {
            return Err(shape_err("reshape", self.shape(x), shape));
        }
        let out = self.data(x).to_vec();
        let rg = self.rg(x);
        Ok(self.push(shape.to_vec(), out, Op::Reshape(x), rg))
    }

    /// Row-wise dot product `[B,D]·[B,D]` → `[B,1]`.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let s = self.shape(a).to_vec();
        if s.len() != 2 || self.shape(b) != s.as_slice() {
            return Err(shape_err("row_dot", &s, self.shape(b)));
        }
        let d = s[1];
        let out = self
            .data(a)
            .chunks(d)
            .zip(self.data(b).chunks(d))
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| *p * *q).sum())
            .collect();
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(vec![s[0], 1], out, Op::RowDot(a, b), rg))
    }

    /// Scale each row of `x[B,D]` by `c[B,1]`.
    pub fn mul_col(&mut self, x: Var, c: Var) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 2 || self.shape(c) != [s[0], 1] {
            return Err(shape_err("mul_col", &s, self.shape(c)));
        }
        let d = s[1];
        let cv = self.data(c).to_vec();
        let mut out = self.data(x).to_vec();
        for (row, k) in out.chunks_mut(d).zip(cv) {
            row.iter_mut().for_each(|v| *v *= k);
        }
        let rg = self.rg(x) || self.rg(c);
        Ok(self.push(s, out, Op::MulCol(x, c), rg))
    }

    /// Reverse pass from a scalar `loss`; writes `∂loss/∂param` into every
    /// parameter of `store` (zero for parameters the loss does not reach).
    pub fn backward(&mut self, loss: Var, store: &mut ParamStore<T>) -> Result<()> {
        if self.backward_done {
            return Err(Error::BackwardTwice);
        }
        if self.data(loss).len() != 1 {
            return Err(shape_err("backward", self.shape(loss), &[]));
        }
        self.backward_done = true;
        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![T::one()]);
        for i in (0..=loss.0).rev() {
            let Some(gy) = grads[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            if let Op::Param(name) = &self.nodes[i].op {
                if let Some(t) = store.get_mut(name) {
                    t.grad = Some(gy.clone());
                }
                grads[i] = Some(gy);
                continue;
            }
            self.propagate(i, &gy, &mut grads);
        }
        for (name, t) in store.iter_mut() {
            if !self.params.contains_key(name) || grads[self.params[name].0].is_none() {
                t.zero_grad();
            }
        }
        Ok(())
    }

    /// Allow another backward pass on the same tape.
    pub fn reset_backward(&mut self) {
        self.backward_done = false;
    }

    fn acc(&self, grads: &mut [Option<Vec<T>>], v: Var, f: impl FnOnce(&mut [T])) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        let g = grads[v.0].get_or_insert_with(|| vec![T::zero(); self.nodes[v.0].value.len()]);
        f(g);
    }

    fn propagate(&self, i: usize, gy: &[T], grads: &mut [Option<Vec<T>>]) {
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (sa, sb) = (self.shape(*a), self.shape(*b));
                let (m, k, n) = (sa[0], sa[1], sb[1]);
                let gym = MatRef::new(gy, m, n);
                self.acc(grads, *a, |ga| gemm(gym, MatRef::new(self.data(*b), k, n).t(), T::one(), ga));
                self.acc(grads, *b, |gb| gemm(MatRef::new(self.data(*a), m, k).t(), gym, T::one(), gb));
            }
            Op::AddBias(x, b) => {
                self.acc(grads, *x, |gx| gx.iter_mut().zip(gy).for_each(|(g, d)| *g += *d));
                let n = self.data(*b).len();
                self.acc(grads, *b, |gb| {
                    for row in gy.chunks(n) {
                        gb.iter_mut().zip(row).for_each(|(g, d)| *g += *d);
                    }
                });
            }
            Op::Add(a, b) => {
                self.acc(grads, *a, |g| g.iter_mut().zip(gy).for_each(|(g, d)| *g += *d));
                self.acc(grads, *b, |g| g.iter_mut().zip(gy).for_each(|(g, d)| *g += *d));
            }
            Op::Sub(a, b) => {
                self.acc(grads, *a, |g| g.iter_mut().zip(gy).for_each(|(g, d)| *g += *d));
                self.acc(grads, *b, |g| g.iter_mut().zip(gy).for_each(|(g, d)| *g -= *d));
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.data(*a), self.data(*b));
                self.acc(grads, *a, |g| {
                    for ((g, d), y) in g.iter_mut().zip(gy).zip(bv) {
                        *g += *d * *y;
                    }
                });
                self.acc(grads, *b, |g| {
                    for ((g, d), x) in g.iter_mut().zip(gy).zip(av) {
                        *g += *d * *x;
                    }
                });
            }
            Op::Scale(x, c) => {
                self.acc(grads, *x, |g| g.iter_mut().zip(gy).for_each(|(g, d)| *g += *d * *c));
            }
            Op::Silu(x) => {
                let xv = self.data(*x);
                self.acc(grads, *x, |g| {
                    for ((g, d), v) in g.iter_mut().zip(gy).zip(xv) {
                        let s = ops::sigmoid(*v);
                        *g += *d * s * (T::one() + *v * (T::one() - s));
                    }
                });
            }
            Op::Relu(x) => {
                let xv = self.data(*x);
                self.acc(grads, *x, |g| {
                    for ((g, d), v) in g.iter_mut().zip(gy).zip(xv) {
                        if *v > T::zero() {
                            *g += *d;
                        }
                    }
                });
            }
            Op::Square(x) => {
                let xv = self.data(*x);
                let two = T::from_f64(2.0);
                self.acc(grads, *x, |g| {
                    for ((g, d), v) in g.iter_mut().zip(gy).zip(xv) {
                        *g += two * *d * *v;
                    }
                });
            }
            Op::Sum(x) => {
                self.acc(grads, *x, |g| g.iter_mut().for_each(|g| *g += gy[0]));
            }
            Op::Mean(x) => {
                let s = gy[0] / T::from_f64(self.data(*x).len() as f64);
                self.acc(grads, *x, |g| g.iter_mut().for_each(|g| *g += s));
            }
            Op::Mse(p, t) => {
                let n = T::from_f64(self.data(*p).len() as f64);
                let k = T::from_f64(2.0) * gy[0] / n;
                let (pv, tv) = (self.data(*p), self.data(*t));
                self.acc(grads, *p, |g| {
                    for ((g, a), b) in g.iter_mut().zip(pv).zip(tv) {
                        *g += k * (*a - *b);
                    }
                });
                self.acc(grads, *t, |g| {
                    for ((g, a), b) in g.iter_mut().zip(pv).zip(tv) {
                        *g -= k * (*a - *b);
                    }
                });
            }
            Op::Softmax(x) => {
                let n = *node.shape.last().unwrap_or(&1);
                let y = &node.value;
                self.acc(grads, *x, |g| {
                    for ((g, d), y) in g.chunks_mut(n).zip(gy.chunks(n)).zip(y.chunks(n)) {
                        let dot: T = d.iter().zip(y).map(|(a, b)| *a * *b).sum();
                        for j in 0..n {
                            g[j] += y[j] * (d[j] - dot);
                        }
                    }
                });
            }
            Op::LayerNorm { x, gamma, beta, xhat, inv_std } => {
                let n = *node.shape.last().unwrap_or(&1);
                let gv = self.data(*gamma);
                let nn = T::from_f64(n as f64);
                self.acc(grads, *x, |g| {
                    for (r, ((g, d), xh)) in g.chunks_mut(n).zip(gy.chunks(n)).zip(xhat.chunks(n)).enumerate() {
                        let dxh: Vec<T> = d.iter().zip(gv).map(|(a, b)| *a * *b).collect();
                        let m1 = dxh.iter().copied().sum::<T>() / nn;
                        let m2 = dxh.iter().zip(xh).map(|(a, b)| *a * *b).sum::<T>() / nn;
                        for j in 0..n {
                            g[j] += inv_std[r] * (dxh[j] - m1 - xh[j] * m2);
                        }
                    }
                });
                self.acc(grads, *gamma, |g| {
                    for (d, xh) in gy.chunks(n).zip(xhat.chunks(n)) {
                        for j in 0..n {
                            g[j] += d[j] * xh[j];
                        }
                    }
                });
                self.acc(grads, *beta, |g| {
                    for d in gy.chunks(n) {
                        g.iter_mut().zip(d).for_each(|(g, d)| *g += *d);
                    }
                });
            }
            Op::Conv2d { x, k, bias, geom, cols } => {
                let bp = geom.batch * geom.positions();
                let dm = ops::batch_major_to_channel_major(gy, geom);
                let dmr = MatRef::new(&dm, geom.out_ch, bp);
                self.acc(grads, *k, |gk| gemm(dmr, MatRef::new(cols, geom.patch_len(), bp).t(), T::one(), gk));
                self.acc(grads, *bias, |gb| {
                    for (o, g) in gb.iter_mut().enumerate() {
                        *g += dm[o * bp..(o + 1) * bp].iter().copied().sum::<T>();
                    }
                });
                if self.rg(*x) {
                    let mut dcols = vec![T::zero(); geom.patch_len() * bp];
                    gemm(MatRef::new(self.data(*k), geom.out_ch, geom.patch_len()).t(), dmr, T::zero(), &mut dcols);
                    self.acc(grads, *x, |gx| ops::col2im(&dcols, geom, gx));
                }
            }
            Op::AttnPool { fmap, w, bias, alpha, dims: (b, c, p) } => {
                let (b, c, p) = (*b, *c, *p);
                let f = self.data(*fmap);
                let wv = self.data(*w);
                // ds[b,p] = α(dα − Σ α·dα), dα[b,p] = Σ_c gy[b,c] f[b,c,p]
                let mut ds = vec![T::zero(); b * p];
                for bi in 0..b {
                    let a = &alpha[bi * p..][..p];
                    let mut da = vec![T::zero(); p];
                    for ci in 0..c {
                        let gyc = gy[bi * c + ci];
                        for (d, fv) in da.iter_mut().zip(&f[(bi * c + ci) * p..][..p]) {
                            *d += gyc * *fv;
                        }
                    }
                    let dot: T = a.iter().zip(&da).map(|(x, y)| *x * *y).sum();
                    for q in 0..p {
                        ds[bi * p + q] = a[q] * (da[q] - dot);
                    }
                }
                self.acc(grads, *fmap, |gf| {
                    for bi in 0..b {
                        for ci in 0..c {
                            let gyc = gy[bi * c + ci];
                            let wc = wv[ci];
                            let row = &mut gf[(bi * c + ci) * p..][..p];
                            for q in 0..p {
                                row[q] += alpha[bi * p + q] * gyc + ds[bi * p + q] * wc;
                            }
                        }
                    }
                });
                self.acc(grads, *w, |gw| {
                    for bi in 0..b {
                        for ci in 0..c {
                            let row = &f[(bi * c + ci) * p..][..p];
                            gw[ci] += row.iter().zip(&ds[bi * p..][..p]).map(|(x, y)| *x * *y).sum::<T>();
                        }
                    }
                });
                self.acc(grads, *bias, |gb| gb[0] += ds.iter().copied().sum::<T>());
            }
            Op::Concat { parts, widths } => {
                let total: usize = widths.iter().sum();
                let mut off = 0;
                for (p, w) in parts.iter().zip(widths) {
                    let (off_now, w) = (off, *w);
                    self.acc(grads, *p, |g| {
                        for (gr, dr) in g.chunks_mut(w).zip(gy.chunks(total)) {
                            gr.iter_mut().zip(&dr[off_now..off_now + w]).for_each(|(a, b)| *a += *b);
                        }
                    });
                    off += w;
                }
            }
            Op::Slice { x, start, len } => {
                let n = *self.shape(*x).last().unwrap_or(&1);
                self.acc(grads, *x, |g| {
                    for (gr, dr) in g.chunks_mut(n).zip(gy.chunks(*len)) {
                        gr[*start..*start + *len].iter_mut().zip(dr).for_each(|(a, b)| *a += *b);
                    }
                });
            }
            Op::Reshape(x) => {
                self.acc(grads, *x, |g| g.iter_mut().zip(gy).for_each(|(a, b)| *a += *b));
            }
            Op::RowDot(a, b) => {
                let d = self.shape(*a)[1];
                let (av, bv) = (self.data(*a), self.data(*b));
                self.acc(grads, *a, |g| {
                    for ((gr, br), s) in g.chunks_mut(d).zip(bv.chunks(d)).zip(gy) {
                        gr.iter_mut().zip(br).for_each(|(x, y)| *x += *s * *y);
                    }
                });
                self.acc(grads, *b, |g| {
                    for ((gr, ar), s) in g.chunks_mut(d).zip(av.chunks(d)).zip(gy) {
                        gr.iter_mut().zip(ar).for_each(|(x, y)| *x += *s * *y);
                    }
                });
            }
            Op::MulCol(x, c) => {
                let d = self.shape(*x)[1];
                let (xv, cv) = (self.data(*x), self.data(*c));
                self.acc(grads, *x, |g| {
                    for ((gr, dr), k) in g.chunks_mut(d).zip(gy.chunks(d)).zip(cv) {
                        gr.iter_mut().zip(dr).for_each(|(a, b)| *a += *b * *k);
                    }
                });
                self.acc(grads, *c, |g| {
                    for ((gv, dr), xr) in g.iter_mut().zip(gy.chunks(d)).zip(xv.chunks(d)) {
                        *gv += dr.iter().zip(xr).map(|(a, b)| *a * *b).sum::<T>();
                    }
                });
            }
        }
    }
}
