//! Forward kernels shared by the autodiff tape and by direct (graph-free) callers.

use super::real::{gemm, MatRef, Real};
use super::tensor::Tensor;
use crate::error::{shape_err, Error, Result};

/// `y[b,o] = Σ_i x[b,i]·w[i,o] + bias[o]`.
pub fn linear_forward<T: Real>(x: &Tensor<T>, w: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    if x.rank() != 2 || w.rank() != 2 || x.shape()[1] != w.shape()[0] {
        return Err(shape_err("linear_forward", x.shape(), w.shape()));
    }
    let (rows, out) = (x.shape()[0], w.shape()[1]);
    if bias.len() != out {
        return Err(shape_err("linear_forward", w.shape(), bias.shape()));
    }
    let mut y = Vec::with_capacity(rows * out);
    for _ in 0..rows {
        y.extend_from_slice(bias.data());
    }
    gemm(
        MatRef::new(x.data(), rows, x.shape()[1]),
        MatRef::new(w.data(), w.shape()[0], out),
        T::one(),
        &mut y,
    );
    Tensor::new(&[rows, out], y)
}

/// Static description of one 2-D convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub batch: usize,
    pub in_ch: usize,
    pub height: usize,
    pub width: usize,
    pub out_ch: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeometry {
    pub fn new(x_shape: &[usize], k_shape: &[usize], stride: usize, pad: usize) -> Result<Self> {
        if x_shape.len() != 4 || k_shape.len() != 4 || x_shape[1] != k_shape[1] {
            return Err(shape_err("conv2d_forward", x_shape, k_shape));
        }
        let (batch, in_ch, height, width) = (x_shape[0], x_shape[1], x_shape[2], x_shape[3]);
        let (out_ch, kh, kw) = (k_shape[0], k_shape[2], k_shape[3]);
        if stride == 0 {
            return Err(Error::Config("conv stride must be positive".into()));
        }
        let (ph, pw) = (height + 2 * pad, width + 2 * pad);
        if kh > ph || kw > pw {
            return Err(Error::Config(format!(
                "kernel {kh}x{kw} exceeds padded input {ph}x{pw}"
            )));
        }
        if (ph - kh) % stride != 0 || (pw - kw) % stride != 0 {
            return Err(Error::Config(format!(
                "non-integral conv output extent: ({ph}-{kh})/{stride}, ({pw}-{kw})/{stride}"
            )));
        }
        Ok(Self {
            batch,
            in_ch,
            height,
            width,
            out_ch,
            kh,
            kw,
            stride,
            pad,
            out_h: (ph - kh) / stride + 1,
            out_w: (pw - kw) / stride + 1,
        })
    }

    pub fn patch_len(&self) -> usize {
        self.in_ch * self.kh * self.kw
    }

    pub fn positions(&self) -> usize {
        self.out_h * self.out_w
    }

    pub fn out_shape(&self) -> [usize; 4] {
        [self.batch, self.out_ch, self.out_h, self.out_w]
    }
}

/// Unfold `x` into a `[C·kh·kw, B·Ho·Wo]` row-major column matrix.
pub(crate) fn im2col<T: Real>(x: &[T], g: &ConvGeometry) -> Vec<T> {
    let cols_w = g.batch * g.positions();
    let mut cols = vec![T::zero(); g.patch_len() * cols_w];
    let (h, w, s, p) = (g.height as isize, g.width as isize, g.stride as isize, g.pad as isize);
    for c in 0..g.in_ch {
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (c * g.kh + ki) * g.kw + kj;
                let row_buf = &mut cols[row * cols_w..(row + 1) * cols_w];
                for b in 0..g.batch {
                    let plane = &x[(b * g.in_ch + c) * g.height * g.width..][..g.height * g.width];
                    for oy in 0..g.out_h {
                        let iy = oy as isize * s + ki as isize - p;
                        if iy < 0 || iy >= h {
                            continue;
                        }
                        let src = &plane[iy as usize * g.width..][..g.width];
                        let dst = &mut row_buf[b * g.positions() + oy * g.out_w..][..g.out_w];
                        for (ox, d) in dst.iter_mut().enumerate() {
                            let ix = ox as isize * s + kj as isize - p;
                            if ix >= 0 && ix < w {
                                *d = src[ix as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Scatter-add a column matrix back onto an input-shaped buffer (adjoint of [`im2col`]).
pub(crate) fn col2im<T: Real>(cols: &[T], g: &ConvGeometry, dx: &mut [T]) {
    let cols_w = g.batch * g.positions();
    let (h, w, s, p) = (g.height as isize, g.width as isize, g.stride as isize, g.pad as isize);
    for c in 0..g.in_ch {
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (c * g.kh + ki) * g.kw + kj;
                let row_buf = &cols[row * cols_w..(row + 1) * cols_w];
                for b in 0..g.batch {
                    let plane =
                        &mut dx[(b * g.in_ch + c) * g.height * g.width..][..g.height * g.width];
                    for oy in 0..g.out_h {
                        let iy = oy as isize * s + ki as isize - p;
                        if iy < 0 || iy >= h {
                            continue;
                        }
                        let src = &row_buf[b * g.positions() + oy * g.out_w..][..g.out_w];
                        let dst = &mut plane[iy as usize * g.width..][..g.width];
                        for (ox, v) in src.iter().enumerate() {
                            let ix = ox as isize * s + kj as isize - p;
                            if ix >= 0 && ix < w {
                                dst[ix as usize] += *v;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// `[O, B·P]` → `[B, O, P]`.
pub(crate) fn channel_major_to_batch_major<T: Real>(m: &[T], g: &ConvGeometry) -> Vec<T> {
    let p = g.positions();
    let mut out = vec![T::zero(); m.len()];
    for o in 0..g.out_ch {
        for b in 0..g.batch {
            out[(b * g.out_ch + o) * p..][..p].copy_from_slice(&m[o * g.batch * p + b * p..][..p]);
        }
    }
    out
}

/// `[B, O, P]` → `[O, B·P]`.
pub(crate) fn batch_major_to_channel_major<T: Real>(y: &[T], g: &ConvGeometry) -> Vec<T> {
    let p = g.positions();
    let mut out = vec![T::zero(); y.len()];
    for b in 0..g.batch {
        for o in 0..g.out_ch {
            out[o * g.batch * p + b * p..][..p].copy_from_slice(&y[(b * g.out_ch + o) * p..][..p]);
        }
    }
    out
}

/// Convolution forward returning the output and the unfolded input (kept for backward).
pub(crate) fn conv2d_with_cols<T: Real>(
    x: &[T],
    k: &[T],
    bias: Option<&[T]>,
    g: &ConvGeometry,
) -> (Vec<T>, Vec<T>) {
    let cols = im2col(x, g);
    let bp = g.batch * g.positions();
    let mut m = vec![T::zero(); g.out_ch * bp];
    gemm(
        MatRef::new(k, g.out_ch, g.patch_len()),
        MatRef::new(&cols, g.patch_len(), bp),
        T::zero(),
        &mut m,
    );
    let mut y = channel_major_to_batch_major(&m, g);
    if let Some(bias) = bias {
        let p = g.positions();
        for b in 0..g.batch {
            for (o, bv) in bias.iter().enumerate() {
                y[(b * g.out_ch + o) * p..][..p].iter_mut().for_each(|v| *v += *bv);
            }
        }
    }
    (y, cols)
}

/// Cross-correlation of `x[B,C,H,W]` with `k[O,C,kh,kw]`, zero padding `pad`.
pub fn conv2d_forward<T: Real>(
    x: &Tensor<T>,
    k: &Tensor<T>,
    stride: usize,
    pad: usize,
) -> Result<Tensor<T>> {
    let g = ConvGeometry::new(x.shape(), k.shape(), stride, pad)?;
    let (y, _) = conv2d_with_cols(x.data(), k.data(), None, &g);
    Tensor::new(&g.out_shape(), y)
}

/// In-place numerically stable softmax over consecutive rows of length `n`.
pub(crate) fn softmax_rows<T: Real>(data: &mut [T], n: usize) {
    for row in data.chunks_mut(n) {
        let m = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v = *v / sum;
        }
    }
}

/// Softmax along the last axis, computed with max subtraction.
pub fn softmax<T: Real>(z: &Tensor<T>) -> Tensor<T> {
    let mut out = z.clone();
    out.grad = None;
    let n = z.last_dim();
    softmax_rows(out.data_mut(), n);
    out
}

/// Attention pooling forward: returns pooled `[B,C]` values and the `[B,P]` weights.
pub(crate) fn attention_pool_raw<T: Real>(
    fmap: &[T],
    b: usize,
    c: usize,
    p: usize,
    w: &[T],
    bias: T,
) -> (Vec<T>, Vec<T>) {
    let mut alpha = vec![bias; b * p];
    for bi in 0..b {
        let a = &mut alpha[bi * p..][..p];
        for ci in 0..c {
            let f = &fmap[(bi * c + ci) * p..][..p];
            let wc = w[ci];
            for (av, fv) in a.iter_mut().zip(f) {
                *av += wc * *fv;
            }
        }
    }
    softmax_rows(&mut alpha, p);
    let mut out = vec![T::zero(); b * c];
    for bi in 0..b {
        let a = &alpha[bi * p..][..p];
        for ci in 0..c {
            let f = &fmap[(bi * c + ci) * p..][..p];
            out[bi * c + ci] = a.iter().zip(f).map(|(x, y)| *x * *y).sum();
        }
    }
    (out, alpha)
}

/// Spatial attention pooling: a learned per-position scorer (`w[C]`, `bias[1]`)
/// produces scores over the `H·W` positions; the output is the softmax-weighted
/// sum of the feature vectors.
pub fn attention_pool<T: Real>(fmap: &Tensor<T>, w: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    if fmap.rank() != 4 || w.len() != fmap.shape()[1] || bias.len() != 1 {
        return Err(shape_err("attention_pool", fmap.shape(), w.shape()));
    }
    let (b, c) = (fmap.shape()[0], fmap.shape()[1]);
    let p = fmap.shape()[2] * fmap.shape()[3];
    if p == 0 {
        return Err(shape_err("attention_pool", fmap.shape(), &[1]));
    }
    let (out, _) = attention_pool_raw(fmap.data(), b, c, p, w.data(), bias.item());
    Tensor::new(&[b, c], out)
}

pub(crate) fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// Neumaier-compensated sum.
pub fn compensated_sum<T: Real>(values: impl IntoIterator<Item = T>) -> T {
    let mut sum = T::zero();
    let mut comp = T::zero();
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f32> {
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn linear_identity_and_scalar() {
        let x = Tensor::new(&[1, 2], vec![1.0f32, 2.0]).unwrap();
        let w = Tensor::new(&[2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let b = Tensor::zeros(&[2]);
        assert_eq!(linear_forward(&x, &w, &b).unwrap().data(), &[1.0, 2.0]);

        let x = Tensor::new(&[1, 1], vec![3.0f32]).unwrap();
        let w = Tensor::new(&[1, 1], vec![2.0]).unwrap();
        let b = Tensor::new(&[1], vec![1.0]).unwrap();
        assert_eq!(linear_forward(&x, &w, &b).unwrap().data(), &[7.0]);
    }

    #[test]
    fn linear_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = rand_tensor(&[4, 5], &mut rng);
        let w = rand_tensor(&[5, 3], &mut rng);
        let b = rand_tensor(&[3], &mut rng);
        let y = linear_forward(&x, &w, &b).unwrap();
        for r in 0..4 {
            for o in 0..3 {
                let mut acc = b.data()[o] as f64;
                for i in 0..5 {
                    acc += x.data()[r * 5 + i] as f64 * w.data()[i * 3 + o] as f64;
                }
                assert!((y.data()[r * 3 + o] as f64 - acc).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn linear_shape_mismatch_names_both_shapes() {
        let x = Tensor::<f32>::zeros(&[2, 3]);
        let w = Tensor::<f32>::zeros(&[4, 2]);
        let err = linear_forward(&x, &w, &Tensor::zeros(&[2])).unwrap_err().to_string();
        assert!(err.contains("[2, 3]") && err.contains("[4, 2]"), "{err}");
    }

    #[test]
    fn conv_scaling_and_delta_kernels() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = rand_tensor(&[2, 1, 5, 5], &mut rng);
        let k = Tensor::new(&[1, 1, 1, 1], vec![2.0f32]).unwrap();
        let y = conv2d_forward(&x, &k, 1, 0).unwrap();
        for (a, b) in y.data().iter().zip(x.data()) {
            assert_eq!(*a, 2.0 * b);
        }
        let mut delta = vec![0.0f32; 9];
        delta[4] = 1.0;
        let k = Tensor::new(&[1, 1, 3, 3], delta).unwrap();
        let y = conv2d_forward(&x, &k, 1, 1).unwrap();
        assert_eq!(y.shape(), x.shape());
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn conv_matches_naive_six_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = rand_tensor(&[1, 2, 6, 6], &mut rng);
        let k = rand_tensor(&[3, 2, 3, 3], &mut rng);
        for (stride, pad) in [(1, 0), (1, 1), (3, 0)] {
            let y = conv2d_forward(&x, &k, stride, pad).unwrap();
            let ho = (6 + 2 * pad - 3) / stride + 1;
            for o in 0..3 {
                for oy in 0..ho {
                    for ox in 0..ho {
                        let mut acc = 0.0f64;
                        for c in 0..2 {
                            for i in 0..3 {
                                for j in 0..3 {
                                    let iy = (oy * stride + i) as isize - pad as isize;
                                    let ix = (ox * stride + j) as isize - pad as isize;
                                    if iy < 0 || ix < 0 || iy >= 6 || ix >= 6 {
                                        continue;
                                    }
                                    acc += x.data()[(c * 6 + iy as usize) * 6 + ix as usize] as f64
                                        * k.data()[((o * 2 + c) * 3 + i) * 3 + j] as f64;
                                }
                            }
                        }
                        let got = y.data()[(o * ho + oy) * ho + ox] as f64;
                        assert!((got - acc).abs() < 1e-5, "{got} vs {acc}");
                    }
                }
            }
        }
    }

    #[test]
    fn conv_rejects_non_integral_extent() {
        let x = Tensor::<f32>::zeros(&[1, 1, 32, 32]);
        let k = Tensor::<f32>::zeros(&[1, 1, 3, 3]);
        assert!(matches!(conv2d_forward(&x, &k, 2, 1), Err(Error::Config(_))));
        let k = Tensor::<f32>::zeros(&[1, 1, 4, 4]);
        assert_eq!(conv2d_forward(&x, &k, 2, 1).unwrap().shape(), &[1, 1, 16, 16]);
    }

    #[test]
    fn softmax_examples() {
        let s = softmax(&Tensor::new(&[3], vec![1.0f64, 1.0, 1.0]).unwrap());
        for v in s.data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
        let s = softmax(&Tensor::new(&[2], vec![0.0f64, 2f64.ln()]).unwrap());
        assert!((s.data()[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((s.data()[1] - 2.0 / 3.0).abs() < 1e-12);
        let s = softmax(&Tensor::new(&[2], vec![0.0f64, 100.0]).unwrap());
        assert!(s.data()[0] < 1e-10 && (s.data()[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn attention_pool_uniform_and_selection() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = rand_tensor(&[2, 3, 2, 2], &mut rng);
        let out = attention_pool(&f, &Tensor::zeros(&[3]), &Tensor::zeros(&[1])).unwrap();
        for b in 0..2 {
            for c in 0..3 {
                let mean: f32 = f.data()[(b * 3 + c) * 4..][..4].iter().sum::<f32>() / 4.0;
                assert!((out.data()[b * 3 + c] - mean).abs() < 1e-6);
            }
        }
        // a single channel that is huge only at position 2 forces one-hot scores there
        let mut data = vec![0.0f32; 12];
        data[2] = 1.0;
        data[4..8].copy_from_slice(&[0.3, -0.2, 0.9, 0.1]);
        data[8..12].copy_from_slice(&[0.5, 0.6, -0.7, 0.8]);
        let f = Tensor::new(&[1, 3, 2, 2], data).unwrap();
        let w = Tensor::new(&[3], vec![1000.0f32, 0.0, 0.0]).unwrap();
        let out = attention_pool(&f, &w, &Tensor::zeros(&[1])).unwrap();
        assert!((out.data()[1] - 0.9).abs() < 1e-6);
        assert!((out.data()[2] + 0.7).abs() < 1e-6);
    }

    #[test]
    fn attention_pool_matches_two_pass_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = rand_tensor(&[2, 4, 3, 3], &mut rng).cast::<f64>();
        let w = rand_tensor(&[4], &mut rng).cast::<f64>();
        let b = rand_tensor(&[1], &mut rng).cast::<f64>();
        let out = attention_pool(&f, &w, &b).unwrap();
        for bi in 0..2 {
            let scores: Vec<f64> = (0..9)
                .map(|p| b.data()[0] + (0..4).map(|c| w.data()[c] * f.data()[(bi * 4 + c) * 9 + p]).sum::<f64>())
                .collect();
            let probs = softmax(&Tensor::new(&[9], scores).unwrap());
            for c in 0..4 {
                let want: f64 = (0..9).map(|p| probs.data()[p] * f.data()[(bi * 4 + c) * 9 + p]).sum();
                assert!((out.data()[bi * 4 + c] - want).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let vals = [1.0e8f32, 1.0, -1.0e8, 1.0];
        assert_eq!(compensated_sum(vals), 2.0);
    }
}
