//! Layers, networks and the five detector architectures.
//!
//! A network maps a batch `[S, N, F]` (steps, sequences, features) to PMFs
//! `[S, N, 2]`. Feedforward layers treat the `S * N` leading positions as
//! independent rows; recurrent layers run along `S` for each of the `N`
//! sequences. Symbol-by-symbol detectors use `S = 1`.

pub mod arch;
mod init;
pub mod layers;
pub mod loss;
pub mod lstm;

use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::scalar::Scalar;

pub use arch::{build_architecture, build_with_widths, Architecture, InputKind, Widths, CNN_TRUNK_LAYERS};
pub use layers::{conv1d_forward, dense_forward, maxpool1d, same_padding, softmax, Activation};
pub use loss::{kl_divergence, loss_sequence, loss_symbol, OneHot, PROB_FLOOR};
pub use lstm::{lstm_step, LstmParams};

use layers::{
    conv_backward, conv_rows, dense_backward, dense_rows, maxpool_rows, pooled_len,
    relu_backward, relu_in_place, softmax_rows, ConvDims,
};
use lstm::{lstm_backward, lstm_forward, LstmCache};

#[derive(Clone, Debug, PartialEq)]
pub enum Layer<T> {
    /// `w: [out, in]`, `b: [out]`.
    Dense { w: Tensor<T>, b: Tensor<T> },
    Relu,
    /// `w: [c_out, c_in, k]`, `b: [c_out]`; stride 1, "same" padding.
    Conv1d { w: Tensor<T>, b: Tensor<T> },
    MaxPool1d { pool: usize },
    Flatten,
    Lstm(LstmParams<T>),
    /// Forward- and backward-in-time cells; outputs are concatenated `[fwd, bwd]`.
    BiLstm {
        fwd: LstmParams<T>,
        bwd: LstmParams<T>,
    },
    Softmax,
}

enum Cache<T> {
    Dense { x: Vec<T> },
    Relu { y: Vec<T> },
    Conv { col: Vec<T>, dims: ConvDims },
    Pool { arg: Vec<usize>, in_len: usize },
    Reshape,
    Lstm(LstmCache<T>),
    BiLstm(LstmCache<T>, LstmCache<T>),
}

fn steps_batch(shape: &[usize]) -> (usize, usize) {
    (shape[0], shape[1])
}

impl<T: Scalar> Layer<T> {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Dense { .. } => "dense",
            Layer::Relu => "relu",
            Layer::Conv1d { .. } => "conv1d",
            Layer::MaxPool1d { .. } => "maxpool1d",
            Layer::Flatten => "flatten",
            Layer::Lstm(_) => "lstm",
            Layer::BiLstm { .. } => "bilstm",
            Layer::Softmax => "softmax",
        }
    }

    pub fn tensors(&self) -> Vec<&Tensor<T>> {
        match self {
            Layer::Dense { w, b } | Layer::Conv1d { w, b } => vec![w, b],
            Layer::Lstm(p) => p.tensors().to_vec(),
            Layer::BiLstm { fwd, bwd } => fwd.tensors().into_iter().chain(bwd.tensors()).collect(),
            _ => Vec::new(),
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        match self {
            Layer::Dense { w, b } | Layer::Conv1d { w, b } => vec![w, b],
            Layer::Lstm(p) => p.tensors_mut().into_iter().collect(),
            Layer::BiLstm { fwd, bwd } => fwd
                .tensors_mut()
                .into_iter()
                .chain(bwd.tensors_mut())
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Output shape for an input of shape `s` (`[S, N, ...]`).
    pub fn output_shape(&self, s: &[usize]) -> Result<Vec<usize>> {
        let bad = || Error::Shape(format!("{} layer cannot take input {s:?}", self.kind()));
        let mut out = s.to_vec();
        match self {
            Layer::Dense { w, .. } => {
                if s.len() != 3 || s[2] != w.shape()[1] {
                    return Err(bad());
                }
                out[2] = w.shape()[0];
            }
            Layer::Conv1d { w, .. } => {
                if s.len() != 4 || s[3] != w.shape()[1] {
                    return Err(bad());
                }
                out[3] = w.shape()[0];
            }
            Layer::MaxPool1d { pool } => {
                if s.len() != 4 || s[2] < *pool {
                    return Err(bad());
                }
                out[2] = pooled_len(s[2], *pool);
            }
            Layer::Flatten => {
                if s.len() < 3 {
                    return Err(bad());
                }
                out = vec![s[0], s[1], s[2..].iter().product()];
            }
            Layer::Lstm(p) => {
                if s.len() != 3 || s[2] != p.input() {
                    return Err(bad());
                }
                out[2] = p.hidden();
            }
            Layer::BiLstm { fwd, bwd } => {
                if s.len() != 3 || s[2] != fwd.input() || s[2] != bwd.input() {
                    return Err(bad());
                }
                out[2] = fwd.hidden() + bwd.hidden();
            }
            Layer::Relu | Layer::Softmax => {}
        }
        Ok(out)
    }

    fn forward_cached(&self, x: Tensor<T>) -> Result<(Tensor<T>, Cache<T>)> {
        let out_shape = self.output_shape(x.shape())?;
        let s = x.shape().to_vec();
        let (steps, batch) = steps_batch(&s);
        let mut y = vec![T::zero(); out_shape.iter().product()];
        let cache = match self {
            Layer::Dense { w, b } => {
                let (o, i) = (w.shape()[0], w.shape()[1]);
                dense_rows(w.data(), b.data(), x.data(), x.len() / i, i, o, &mut y);
                Cache::Dense { x: x.into_data() }
            }
            Layer::Relu => {
                y.copy_from_slice(x.data());
                relu_in_place(&mut y);
                Cache::Relu { y: y.clone() }
            }
            Layer::Conv1d { w, b } => {
                let ws = w.shape();
                let dims = ConvDims {
                    rows: steps * batch,
                    len: s[2],
                    c_in: ws[1],
                    c_out: ws[0],
                    kernel: ws[2],
                };
                let col = conv_rows(w.data(), b.data(), x.data(), dims, &mut y);
                Cache::Conv { col, dims }
            }
            Layer::MaxPool1d { pool } => {
                let (v, arg) = maxpool_rows(x.data(), steps * batch, s[2], s[3], *pool);
                y = v;
                Cache::Pool { arg, in_len: x.len() }
            }
            Layer::Flatten => {
                y = x.into_data();
                Cache::Reshape
            }
            Layer::Lstm(p) => {
                let (v, c) = lstm_forward(p, x.data(), steps, batch, false);
                y = v;
                Cache::Lstm(c)
            }
            Layer::BiLstm { fwd, bwd } => {
                let (vf, cf) = lstm_forward(fwd, x.data(), steps, batch, false);
                let (vb, cb) = lstm_forward(bwd, x.data(), steps, batch, true);
                interleave(&vf, &vb, fwd.hidden(), bwd.hidden(), &mut y);
                Cache::BiLstm(cf, cb)
            }
            Layer::Softmax => {
                y.copy_from_slice(x.data());
                softmax_rows(&mut y, s[s.len() - 1]);
                Cache::Reshape
            }
        };
        Ok((Tensor::new(out_shape, y)?, cache))
    }

    /// Forward pass without keeping intermediate values.
    pub fn forward(&self, x: Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward_cached(x)?.0)
    }

    /// Accumulates parameter gradients into `grads`; returns `dx` if requested.
    fn backward(
        &self,
        cache: Cache<T>,
        in_shape: &[usize],
        dy: Vec<T>,
        grads: &mut [Tensor<T>],
        need_dx: bool,
    ) -> Result<Option<Vec<T>>> {
        let in_len: usize = in_shape.iter().product();
        let dx = match (self, cache) {
            (Layer::Dense { w, .. }, Cache::Dense { x }) => {
                let (o, i) = (w.shape()[0], w.shape()[1]);
                let rows = x.len() / i;
                let (gw, gb) = grads.split_at_mut(1);
                let mut dx = need_dx.then(|| vec![T::zero(); in_len]);
                dense_backward(
                    w.data(),
                    &x,
                    &dy,
                    rows,
                    i,
                    o,
                    gw[0].data_mut(),
                    gb[0].data_mut(),
                    dx.as_deref_mut(),
                );
                dx
            }
            (Layer::Relu, Cache::Relu { y }) => {
                let mut dy = dy;
                relu_backward(&y, &mut dy);
                Some(dy)
            }
            (Layer::Conv1d { w, .. }, Cache::Conv { col, dims }) => {
                let (gw, gb) = grads.split_at_mut(1);
                let mut dx = need_dx.then(|| vec![T::zero(); in_len]);
                conv_backward(
                    w.data(),
                    &col,
                    &dy,
                    dims,
                    gw[0].data_mut(),
                    gb[0].data_mut(),
                    dx.as_deref_mut(),
                );
                dx
            }
            (Layer::MaxPool1d { .. }, Cache::Pool { arg, in_len }) => {
                let mut dx = vec![T::zero(); in_len];
                for (&src, &g) in arg.iter().zip(&dy) {
                    dx[src] += g;
                }
                Some(dx)
            }
            (Layer::Flatten, Cache::Reshape) => Some(dy),
            (Layer::Lstm(p), Cache::Lstm(c)) => lstm_backward(p, &c, &dy, grads, need_dx),
            (Layer::BiLstm { fwd, bwd }, Cache::BiLstm(cf, cb)) => {
                let (hf, hb) = (fwd.hidden(), bwd.hidden());
                let rows = dy.len() / (hf + hb);
                let mut dyf = Vec::with_capacity(rows * hf);
                let mut dyb = Vec::with_capacity(rows * hb);
                for row in dy.chunks_exact(hf + hb) {
                    dyf.extend_from_slice(&row[..hf]);
                    dyb.extend_from_slice(&row[hf..]);
                }
                let (gf, gb) = grads.split_at_mut(5);
                let dxf = lstm_backward(fwd, &cf, &dyf, gf, need_dx);
                let dxb = lstm_backward(bwd, &cb, &dyb, gb, need_dx);
                match (dxf, dxb) {
                    (Some(mut a), Some(b)) => {
                        for (x, y) in a.iter_mut().zip(&b) {
                            *x += *y;
                        }
                        Some(a)
                    }
                    _ => None,
                }
            }
            _ => {
                return Err(Error::Shape(format!(
                    "{} layer: cache does not match layer",
                    self.kind()
                )))
            }
        };
        Ok(if need_dx { dx } else { None })
    }
}

fn interleave<T: Copy>(a: &[T], b: &[T], wa: usize, wb: usize, out: &mut [T]) {
    for ((row, ra), rb) in out
        .chunks_exact_mut(wa + wb)
        .zip(a.chunks_exact(wa))
        .zip(b.chunks_exact(wb))
    {
        row[..wa].copy_from_slice(ra);
        row[wa..].copy_from_slice(rb);
    }
}

/// Per-feature affine map applied to raw inputs: `(x - shift) / scale`.
#[derive(Clone, Debug, PartialEq)]
pub struct InputNorm<T> {
    pub shift: Vec<T>,
    pub scale: Vec<T>,
}

impl<T: Scalar> InputNorm<T> {
    pub fn identity(width: usize) -> Self {
        InputNorm {
            shift: vec![T::zero(); width],
            scale: vec![T::one(); width],
        }
    }

    /// Per-feature mean and standard deviation of `rows` (features last).
    /// Features with (near) zero spread keep scale 1.
    pub fn fit(rows: &[T], width: usize) -> Result<Self> {
        if width == 0 || rows.is_empty() || rows.len() % width != 0 {
            return Err(Error::Shape(format!(
                "{} values do not form rows of width {width}",
                rows.len()
            )));
        }
        let n = (rows.len() / width) as f64;
        let mut mean = vec![0.0f64; width];
        for row in rows.chunks_exact(width) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v.as_f64();
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0f64; width];
        for row in rows.chunks_exact(width) {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v.as_f64() - m).powi(2);
            }
        }
        Ok(InputNorm {
            shift: mean.iter().map(|&m| T::lit(m)).collect(),
            scale: var
                .iter()
                .map(|&s| {
                    let sd = (s / n).sqrt();
                    T::lit(if sd > 1e-12 { sd } else { 1.0 })
                })
                .collect(),
        })
    }

    pub fn width(&self) -> usize {
        self.shift.len()
    }

    pub fn apply(&self, data: &mut [T]) {
        for row in data.chunks_exact_mut(self.width()) {
            for ((v, &s), &k) in row.iter_mut().zip(&self.shift).zip(&self.scale) {
                *v = (*v - s) / k;
            }
        }
    }
}

/// How a network was trained; all zero for an untrained network.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TrainMeta {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub fine_tuned_trunk: bool,
}

/// Ordered layer stack plus the metadata needed to rebuild and feed it.
#[derive(Clone, Debug, PartialEq)]
pub struct Network<T> {
    pub arch: Architecture,
    pub widths: Widths,
    pub layers: Vec<Layer<T>>,
    /// Leading layers that form a pretrained feature trunk (0 if none).
    pub trunk_len: usize,
    /// Bins per symbol window fed to this network.
    pub bins: usize,
    /// Training sequence length (1 for symbol-by-symbol networks).
    pub seq_len: usize,
    pub input_norm: InputNorm<T>,
    pub meta: TrainMeta,
}

impl<T: Scalar> Network<T> {
    /// Raw per-step feature width.
    pub fn input_width(&self) -> usize {
        self.input_norm.width()
    }

    /// Per-step input shape seen by the first layer.
    pub fn feature_shape(&self) -> Vec<usize> {
        match self.arch.input_kind() {
            InputKind::Features => vec![self.input_width()],
            InputKind::Bins => vec![self.input_width(), 1],
        }
    }

    pub fn params(&self) -> Vec<&Tensor<T>> {
        self.layers.iter().flat_map(Layer::tensors).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.layers.iter_mut().flat_map(Layer::tensors_mut).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    /// Index of the first parameter tensor belonging to layer `layer`.
    pub fn first_param_of(&self, layer: usize) -> usize {
        self.layers[..layer].iter().map(|l| l.tensors().len()).sum()
    }

    fn prepare_input(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let s = x.shape();
        if s.len() != 3 || s[2] != self.input_width() {
            return Err(Error::Shape(format!(
                "{} expects input [steps, batch, {}], got {s:?}",
                self.arch.name(),
                self.input_width()
            )));
        }
        let mut data = x.data().to_vec();
        self.input_norm.apply(&mut data);
        let mut shape = vec![s[0], s[1]];
        shape.extend(self.feature_shape());
        Tensor::new(shape, data)
    }

    /// PMFs `[S, N, 2]` for raw inputs `[S, N, F]`.
    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.forward_range(x, 0, self.layers.len())
    }

    /// Runs layers `start..end`. With `start == 0`, `x` is a raw input and is
    /// normalized first; otherwise it must be the output of layer `start - 1`.
    pub fn forward_range(&self, x: &Tensor<T>, start: usize, end: usize) -> Result<Tensor<T>> {
        let mut h = if start == 0 {
            self.prepare_input(x)?
        } else {
            x.clone()
        };
        for layer in &self.layers[start..end] {
            h = layer.forward(h)?;
        }
        Ok(h)
    }

    /// Mean over the batch of the summed per-step cross-entropy, and its gradient.
    ///
    /// `x` is the input of layer `start` (raw input when `start == 0`) and
    /// `bits` holds the `S * N` targets in step-major order. Gradients are
    /// returned for every parameter tensor; tensors of layers before `start`
    /// get zeros.
    pub fn loss_and_grad(&self, x: &Tensor<T>, bits: &[u8], start: usize) -> Result<(T, Vec<Tensor<T>>)> {
        let last = self.layers.len() - 1;
        if !matches!(self.layers[last], Layer::Softmax) {
            return Err(Error::Shape("network does not end in softmax".into()));
        }
        let mut h = if start == 0 {
            self.prepare_input(x)?
        } else {
            x.clone()
        };
        let batch = h.shape()[1];
        let mut caches = Vec::with_capacity(last - start);
        for layer in &self.layers[start..last] {
            let in_shape = h.shape().to_vec();
            let (y, c) = layer.forward_cached(h)?;
            caches.push((c, in_shape));
            h = y;
        }
        let width = h.last_dim();
        if h.len() != bits.len() * width {
            return Err(Error::LengthMismatch {
                left: h.len() / width,
                right: bits.len(),
            });
        }
        let mut p = h.into_data();
        softmax_rows(&mut p, width);
        let inv_n = T::one() / T::lit(batch as f64);
        let mut loss = T::zero();
        for (row, &bit) in p.chunks_exact_mut(width).zip(bits) {
            let t = usize::from(bit);
            loss += loss_symbol(OneHot { index: t }, row);
            row[t] -= T::one();
            for v in row.iter_mut() {
                *v *= inv_n;
            }
        }
        loss *= inv_n;

        let mut grads: Vec<Tensor<T>> = self
            .params()
            .iter()
            .map(|t| Tensor::zeros(t.shape()))
            .collect();
        let mut dy = p;
        for (l, (cache, in_shape)) in (start..last).zip(caches).rev() {
            let first = self.first_param_of(l);
            let count = self.layers[l].tensors().len();
            let need_dx = l > start;
            match self.layers[l].backward(
                cache,
                &in_shape,
                dy,
                &mut grads[first..first + count],
                need_dx,
            )? {
                Some(dx) => dy = dx,
                None => break,
            }
        }
        Ok((loss, grads))
    }
}
