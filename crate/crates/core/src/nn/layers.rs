//! Feedforward layer kernels: dense, ReLU, 1-D convolution, max pooling, softmax.
//!
//! Activations are row-major with the feature dimensions last. Convolution and
//! pooling work on `[rows, length, channels]` (channels last), so flattening a
//! conv output orders values position-major.

use crate::error::{Error, Result};
use crate::numerics::tensor::{gemm_dytx, gemm_dyw, gemm_xwt};
use crate::numerics::Tensor;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
}

/// `f(W x + b)` applied to every row of `input` (last dimension = `W` columns).
pub fn dense_forward<T: Scalar>(
    w: &Tensor<T>,
    b: &Tensor<T>,
    input: &Tensor<T>,
    activation: Activation,
) -> Result<Tensor<T>> {
    let (out, inp) = w.dims2()?;
    if b.len() != out || input.last_dim() != inp {
        return Err(Error::Shape(format!(
            "dense {out}x{inp} with bias {} cannot take input {:?}",
            b.len(),
            input.shape()
        )));
    }
    let rows = input.len() / inp;
    let mut y = vec![T::zero(); rows * out];
    dense_rows(w.data(), b.data(), input.data(), rows, inp, out, &mut y);
    if activation == Activation::Relu {
        relu_in_place(&mut y);
    }
    let mut shape = input.shape().to_vec();
    *shape.last_mut().unwrap() = out;
    Tensor::new(shape, y)
}

pub(crate) fn dense_rows<T: Scalar>(
    w: &[T],
    b: &[T],
    x: &[T],
    rows: usize,
    inp: usize,
    out: usize,
    y: &mut [T],
) {
    for row in y.chunks_exact_mut(out) {
        row.copy_from_slice(b);
    }
    gemm_xwt(rows, inp, out, x, w, y, true);
}

/// Accumulates `dW`, `db` and optionally writes `dx` for a dense layer.
#[allow(clippy::too_many_arguments)]
pub(crate) fn dense_backward<T: Scalar>(
    w: &[T],
    x: &[T],
    dy: &[T],
    rows: usize,
    inp: usize,
    out: usize,
    dw: &mut [T],
    db: &mut [T],
    dx: Option<&mut [T]>,
) {
    gemm_dytx(rows, out, inp, dy, x, dw);
    for row in dy.chunks_exact(out) {
        for (g, &v) in db.iter_mut().zip(row) {
            *g += v;
        }
    }
    if let Some(dx) = dx {
        gemm_dyw(rows, out, inp, dy, w, dx, false);
    }
}

pub(crate) fn relu_in_place<T: Scalar>(v: &mut [T]) {
    for x in v {
        if !(*x > T::zero()) {
            *x = T::zero();
        }
    }
}

/// Gradient through ReLU given its output.
pub(crate) fn relu_backward<T: Scalar>(y: &[T], dy: &mut [T]) {
    for (g, &out) in dy.iter_mut().zip(y) {
        if !(out > T::zero()) {
            *g = T::zero();
        }
    }
}

/// Row-wise softmax over the last dimension with max subtraction.
pub fn softmax<T: Scalar>(z: &Tensor<T>) -> Tensor<T> {
    let mut out = z.clone();
    softmax_rows(out.data_mut(), z.last_dim());
    out
}

pub(crate) fn softmax_rows<T: Scalar>(v: &mut [T], width: usize) {
    for row in v.chunks_exact_mut(width) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            sum += *x;
        }
        for x in row.iter_mut() {
            *x /= sum;
        }
    }
}

/// Zero padding `(left, right)` that keeps the length under stride 1.
pub fn same_padding(kernel: usize) -> (usize, usize) {
    let total = kernel.saturating_sub(1);
    (total / 2, total - total / 2)
}

/// Geometry of one conv layer applied to `rows` independent signals.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvDims {
    pub rows: usize,
    pub len: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: usize,
}

impl ConvDims {
    fn patch(&self) -> usize {
        self.c_in * self.kernel
    }
}

/// `col[(r, t), (c, j)] = x[r, t + j - left, c]`, zero outside the signal.
pub(crate) fn im2col<T: Scalar>(x: &[T], d: ConvDims, col: &mut [T]) {
    let (left, _) = same_padding(d.kernel);
    let patch = d.patch();
    for r in 0..d.rows {
        let sig = &x[r * d.len * d.c_in..(r + 1) * d.len * d.c_in];
        for t in 0..d.len {
            let dst = &mut col[(r * d.len + t) * patch..(r * d.len + t + 1) * patch];
            for c in 0..d.c_in {
                for j in 0..d.kernel {
                    let src = (t + j).checked_sub(left).filter(|&s| s < d.len);
                    dst[c * d.kernel + j] = src.map_or(T::zero(), |s| sig[s * d.c_in + c]);
                }
            }
        }
    }
}

fn col2im_add<T: Scalar>(dcol: &[T], d: ConvDims, dx: &mut [T]) {
    let (left, _) = same_padding(d.kernel);
    let patch = d.patch();
    for r in 0..d.rows {
        let sig = &mut dx[r * d.len * d.c_in..(r + 1) * d.len * d.c_in];
        for t in 0..d.len {
            let src = &dcol[(r * d.len + t) * patch..(r * d.len + t + 1) * patch];
            for c in 0..d.c_in {
                for j in 0..d.kernel {
                    if let Some(s) = (t + j).checked_sub(left).filter(|&s| s < d.len) {
                        sig[s * d.c_in + c] += src[c * d.kernel + j];
                    }
                }
            }
        }
    }
}

/// Convolution output `[rows, len, c_out]` before activation; returns the im2col buffer.
pub(crate) fn conv_rows<T: Scalar>(w: &[T], b: &[T], x: &[T], d: ConvDims, y: &mut [T]) -> Vec<T> {
    let mut col = vec![T::zero(); d.rows * d.len * d.patch()];
    im2col(x, d, &mut col);
    dense_rows(w, b, &col, d.rows * d.len, d.patch(), d.c_out, y);
    col
}

pub(crate) fn conv_backward<T: Scalar>(
    w: &[T],
    col: &[T],
    dy: &[T],
    d: ConvDims,
    dw: &mut [T],
    db: &mut [T],
    dx: Option<&mut [T]>,
) {
    let rows = d.rows * d.len;
    match dx {
        Some(dx) => {
            let mut dcol = vec![T::zero(); rows * d.patch()];
            dense_backward(w, col, dy, rows, d.patch(), d.c_out, dw, db, Some(&mut dcol));
            dx.fill(T::zero());
            col2im_add(&dcol, d, dx);
        }
        None => dense_backward(w, col, dy, rows, d.patch(), d.c_out, dw, db, None),
    }
}

/// Stride-1 cross-correlation with "same" zero padding.
///
/// `filters` is `[c_out, c_in, k]`, `input` is `[..., len, c_in]` and the
/// result is `[..., len, c_out]`. For even `k` the extra zero goes on the right.
pub fn conv1d_forward<T: Scalar>(
    filters: &Tensor<T>,
    biases: &Tensor<T>,
    input: &Tensor<T>,
    activation: Activation,
) -> Result<Tensor<T>> {
    let fs = filters.shape();
    if fs.len() != 3 || biases.len() != fs[0] || input.rank() < 2 || input.last_dim() != fs[1] {
        return Err(Error::Shape(format!(
            "conv filters {:?}, biases {:?}, input {:?}",
            fs,
            biases.shape(),
            input.shape()
        )));
    }
    let is = input.shape();
    let len = is[is.len() - 2];
    let d = ConvDims {
        rows: input.len() / (len * fs[1]),
        len,
        c_in: fs[1],
        c_out: fs[0],
        kernel: fs[2],
    };
    let mut y = vec![T::zero(); d.rows * len * d.c_out];
    conv_rows(filters.data(), biases.data(), input.data(), d, &mut y);
    if activation == Activation::Relu {
        relu_in_place(&mut y);
    }
    let mut shape = is.to_vec();
    *shape.last_mut().unwrap() = d.c_out;
    Tensor::new(shape, y)
}

/// Output length of non-overlapping pooling; the remainder is dropped.
pub fn pooled_len(len: usize, pool: usize) -> usize {
    len / pool
}

/// Max pooling over `[rows, len, channels]`; also returns the winning input index per output.
pub(crate) fn maxpool_rows<T: Scalar>(
    x: &[T],
    rows: usize,
    len: usize,
    ch: usize,
    pool: usize,
) -> (Vec<T>, Vec<usize>) {
    let out_len = pooled_len(len, pool);
    let mut y = Vec::with_capacity(rows * out_len * ch);
    let mut arg = Vec::with_capacity(rows * out_len * ch);
    for r in 0..rows {
        for t in 0..out_len {
            for c in 0..ch {
                let mut best = (r * len + t * pool) * ch + c;
                for j in 1..pool {
                    let idx = (r * len + t * pool + j) * ch + c;
                    if x[idx] > x[best] {
                        best = idx;
                    }
                }
                y.push(x[best]);
                arg.push(best);
            }
        }
    }
    (y, arg)
}

/// Max pooling along the second-to-last axis of `[..., len, channels]`.
pub fn maxpool1d<T: Scalar>(input: &Tensor<T>, pool: usize) -> Result<Tensor<T>> {
    if pool == 0 || input.rank() < 2 {
        return Err(Error::Shape(format!("pool {pool} on {:?}", input.shape())));
    }
    let is = input.shape();
    let (len, ch) = (is[is.len() - 2], is[is.len() - 1]);
    if len < pool {
        return Err(Error::Shape(format!("pool {pool} longer than input length {len}")));
    }
    let rows = input.len() / (len * ch);
    let (y, _) = maxpool_rows(input.data(), rows, len, ch, pool);
    let mut shape = is.to_vec();
    let n = shape.len();
    shape[n - 2] = pooled_len(len, pool);
    Tensor::new(shape, y)
}
