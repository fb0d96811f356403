//! LSTM cell with peephole connections, unrolled over a sequence.
//!
//! Per step, with input `y`, previous output `a` and previous cell state `c`:
//!
//! ```text
//! i  = sigma(W_yi y + W_ai a + W_ci c      + b_i)
//! f  = sigma(W_yf y + W_af a + W_cf c      + b_f)
//! c' = f * c + i * tanh(W_yc y + W_ac a    + b_c)
//! u  = sigma(W_yu y + W_au a + W_cu c'     + b_u)
//! a' = u * tanh(c')
//! ```
//!
//! The input and recurrent matrices of the four gates are stacked row-wise in
//! the order `i, f, c, u`; the `i` and `f` peephole matrices are stacked too.

use std::borrow::Cow;

use crate::error::{Error, Result};
use crate::numerics::tensor::{gemm_dytx, gemm_dyw, gemm_xwt};
use crate::numerics::{PrngState, Tensor};
use crate::scalar::Scalar;

use super::init::glorot_fill;

#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams<T> {
    /// `[4H, F]`: `W_yi, W_yf, W_yc, W_yu`.
    pub wy: Tensor<T>,
    /// `[4H, H]`: `W_ai, W_af, W_ac, W_au`.
    pub wa: Tensor<T>,
    /// `[2H, H]`: `W_ci, W_cf`.
    pub wc_if: Tensor<T>,
    /// `[H, H]`: `W_cu`.
    pub wc_u: Tensor<T>,
    /// `[4H]`: `b_i, b_f, b_c, b_u`.
    pub b: Tensor<T>,
}

impl<T: Scalar> LstmParams<T> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmParams {
            wy: Tensor::zeros(&[4 * hidden, input]),
            wa: Tensor::zeros(&[4 * hidden, hidden]),
            wc_if: Tensor::zeros(&[2 * hidden, hidden]),
            wc_u: Tensor::zeros(&[hidden, hidden]),
            b: Tensor::zeros(&[4 * hidden]),
        }
    }

    /// Glorot-uniform init of every per-gate matrix; zero biases.
    pub fn init(input: usize, hidden: usize, prng: &mut PrngState) -> Self {
        let mut p = Self::zeros(input, hidden);
        let h = hidden;
        for blk in p.wy.data_mut().chunks_exact_mut(h * input) {
            glorot_fill(blk, input, h, prng);
        }
        for blk in p.wa.data_mut().chunks_exact_mut(h * h) {
            glorot_fill(blk, h, h, prng);
        }
        for blk in p.wc_if.data_mut().chunks_exact_mut(h * h) {
            glorot_fill(blk, h, h, prng);
        }
        glorot_fill(p.wc_u.data_mut(), h, h, prng);
        p
    }

    pub fn hidden(&self) -> usize {
        self.wc_u.shape()[0]
    }

    pub fn input(&self) -> usize {
        self.wy.shape()[1]
    }

    pub fn tensors(&self) -> [&Tensor<T>; 5] {
        [&self.wy, &self.wa, &self.wc_if, &self.wc_u, &self.b]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor<T>; 5] {
        [
            &mut self.wy,
            &mut self.wa,
            &mut self.wc_if,
            &mut self.wc_u,
            &mut self.b,
        ]
    }

    fn check(&self) -> Result<()> {
        let (h, f) = (self.hidden(), self.input());
        let ok = self.wy.shape() == [4 * h, f]
            && self.wa.shape() == [4 * h, h]
            && self.wc_if.shape() == [2 * h, h]
            && self.wc_u.shape() == [h, h]
            && self.b.shape() == [4 * h];
        if ok {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "inconsistent LSTM parameters: {:?} {:?} {:?} {:?} {:?}",
                self.wy.shape(),
                self.wa.shape(),
                self.wc_if.shape(),
                self.wc_u.shape(),
                self.b.shape()
            )))
        }
    }
}

#[inline]
fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// One cell update for a batch: `y` is `[N, F]` (or `[F]`), `a_prev` and `c_prev` are `[N, H]`.
pub fn lstm_step<T: Scalar>(
    params: &LstmParams<T>,
    y: &Tensor<T>,
    a_prev: &Tensor<T>,
    c_prev: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    params.check()?;
    let (h, f) = (params.hidden(), params.input());
    if y.last_dim() != f || y.len() % f != 0 {
        return Err(Error::Shape(format!("LSTM input {:?} needs width {f}", y.shape())));
    }
    let n = y.len() / f;
    if a_prev.len() != n * h || c_prev.len() != n * h {
        return Err(Error::Shape(format!(
            "LSTM state {:?}/{:?} does not match batch {n} x {h}",
            a_prev.shape(),
            c_prev.shape()
        )));
    }
    let mut z = vec![T::zero(); n * 4 * h];
    let mut c = vec![T::zero(); n * h];
    let mut tanh_c = vec![T::zero(); n * h];
    let mut a = vec![T::zero(); n * h];
    for row in z.chunks_exact_mut(4 * h) {
        row.copy_from_slice(params.b.data());
    }
    gemm_xwt(n, f, 4 * h, y.data(), params.wy.data(), &mut z, true);
    cell_step(
        params,
        n,
        &mut z,
        a_prev.data(),
        c_prev.data(),
        &mut c,
        &mut tanh_c,
        &mut a,
    );
    let shape = if y.rank() == 1 { vec![h] } else { vec![n, h] };
    Ok((Tensor::new(shape.clone(), a)?, Tensor::new(shape, c)?))
}

/// Completes one step given `z = W_y y + b` for the batch; leaves activated gates in `z`.
#[allow(clippy::too_many_arguments)]
fn cell_step<T: Scalar>(
    p: &LstmParams<T>,
    n: usize,
    z: &mut [T],
    a_prev: &[T],
    c_prev: &[T],
    c: &mut [T],
    tanh_c: &mut [T],
    a: &mut [T],
) {
    let h = p.hidden();
    let h4 = 4 * h;
    gemm_xwt(n, h, h4, a_prev, p.wa.data(), z, true);
    // z[:, 0..2H] += c_prev * wc_if^T
    T::gemm(
        n,
        h,
        2 * h,
        T::one(),
        c_prev,
        h as isize,
        1,
        p.wc_if.data(),
        1,
        h as isize,
        T::one(),
        z,
        h4 as isize,
        1,
    );
    for r in 0..n {
        let zr = &mut z[r * h4..(r + 1) * h4];
        for j in 0..h {
            let i = sigmoid(zr[j]);
            let f = sigmoid(zr[h + j]);
            let g = zr[2 * h + j].tanh();
            zr[j] = i;
            zr[h + j] = f;
            zr[2 * h + j] = g;
            c[r * h + j] = f * c_prev[r * h + j] + i * g;
        }
    }
    // z[:, 3H..4H] += c * wc_u^T
    T::gemm(
        n,
        h,
        h,
        T::one(),
        c,
        h as isize,
        1,
        p.wc_u.data(),
        1,
        h as isize,
        T::one(),
        &mut z[3 * h..],
        h4 as isize,
        1,
    );
    for r in 0..n {
        for j in 0..h {
            let u = sigmoid(z[r * h4 + 3 * h + j]);
            z[r * h4 + 3 * h + j] = u;
            let tc = c[r * h + j].tanh();
            tanh_c[r * h + j] = tc;
            a[r * h + j] = u * tc;
        }
    }
}

/// Everything backward needs from one unrolled pass.
#[derive(Clone, Debug)]
pub(crate) struct LstmCache<T> {
    steps: usize,
    batch: usize,
    reverse: bool,
    /// Inputs in processing order, `[S, N, F]`.
    input: Vec<T>,
    /// Activated gates in processing order, `[S, N, 4H]`.
    gates: Vec<T>,
    /// Cell states `c_0 .. c_S`, `[(S + 1), N, H]`.
    c: Vec<T>,
    /// Outputs `a_0 .. a_S`.
    a: Vec<T>,
    tanh_c: Vec<T>,
}

fn reversed_steps<T: Copy>(x: &[T], steps: usize) -> Vec<T> {
    let block = x.len() / steps;
    x.chunks_exact(block).rev().flatten().copied().collect()
}

/// Unrolls over `x = [S, N, F]` from zero state; output `[S, N, H]` in time order.
/// With `reverse` the sequence is processed from the last step to the first.
pub(crate) fn lstm_forward<T: Scalar>(
    p: &LstmParams<T>,
    x: &[T],
    steps: usize,
    batch: usize,
    reverse: bool,
) -> (Vec<T>, LstmCache<T>) {
    let (h, f) = (p.hidden(), p.input());
    let nh = batch * h;
    let input: Vec<T> = if reverse {
        reversed_steps(x, steps)
    } else {
        x.to_vec()
    };
    let mut gates = vec![T::zero(); steps * batch * 4 * h];
    for row in gates.chunks_exact_mut(4 * h) {
        row.copy_from_slice(p.b.data());
    }
    gemm_xwt(steps * batch, f, 4 * h, &input, p.wy.data(), &mut gates, true);
    let mut c = vec![T::zero(); (steps + 1) * nh];
    let mut a = vec![T::zero(); (steps + 1) * nh];
    let mut tanh_c = vec![T::zero(); steps * nh];
    for j in 0..steps {
        let (c_done, c_rest) = c.split_at_mut((j + 1) * nh);
        let (a_done, a_rest) = a.split_at_mut((j + 1) * nh);
        cell_step(
            p,
            batch,
            &mut gates[j * batch * 4 * h..(j + 1) * batch * 4 * h],
            &a_done[j * nh..],
            &c_done[j * nh..],
            &mut c_rest[..nh],
            &mut tanh_c[j * nh..(j + 1) * nh],
            &mut a_rest[..nh],
        );
    }
    let out = if reverse {
        reversed_steps(&a[nh..], steps)
    } else {
        a[nh..].to_vec()
    };
    (
        out,
        LstmCache {
            steps,
            batch,
            reverse,
            input,
            gates,
            c,
            a,
            tanh_c,
        },
    )
}

/// Backpropagation through time. `dy` is the gradient w.r.t. the output in
/// time order; parameter gradients are accumulated into `grads` (same order
/// as [`LstmParams::tensors`]). Returns the input gradient when asked.
pub(crate) fn lstm_backward<T: Scalar>(
    p: &LstmParams<T>,
    cache: &LstmCache<T>,
    dy: &[T],
    grads: &mut [Tensor<T>],
    need_dx: bool,
) -> Option<Vec<T>> {
    let (h, f) = (p.hidden(), p.input());
    let h4 = 4 * h;
    let (steps, n) = (cache.steps, cache.batch);
    let nh = n * h;
    let dy: Cow<[T]> = if cache.reverse {
        Cow::Owned(reversed_steps(dy, steps))
    } else {
        Cow::Borrowed(dy)
    };
    let mut dz = vec![T::zero(); steps * n * h4];
    let mut da_next = vec![T::zero(); nh];
    let mut dc_next = vec![T::zero(); nh];
    let mut dc = vec![T::zero(); nh];
    let one = T::one();
    for j in (0..steps).rev() {
        let g = &cache.gates[j * n * h4..(j + 1) * n * h4];
        let dzj = &mut dz[j * n * h4..(j + 1) * n * h4];
        let tc = &cache.tanh_c[j * nh..(j + 1) * nh];
        let dyj = &dy[j * nh..(j + 1) * nh];
        for r in 0..n {
            for q in 0..h {
                let da = dyj[r * h + q] + da_next[r * h + q];
                let u = g[r * h4 + 3 * h + q];
                let t = tc[r * h + q];
                dzj[r * h4 + 3 * h + q] = da * t * u * (one - u);
                dc[r * h + q] = dc_next[r * h + q] + da * u * (one - t * t);
            }
        }
        // dc += dz_u * wc_u
        T::gemm(
            n,
            h,
            h,
            one,
            &dzj[3 * h..],
            h4 as isize,
            1,
            p.wc_u.data(),
            h as isize,
            1,
            one,
            &mut dc,
            h as isize,
            1,
        );
        let c_prev = &cache.c[j * nh..(j + 1) * nh];
        for r in 0..n {
            for q in 0..h {
                let i = g[r * h4 + q];
                let fg = g[r * h4 + h + q];
                let cand = g[r * h4 + 2 * h + q];
                let d = dc[r * h + q];
                dzj[r * h4 + q] = d * cand * i * (one - i);
                dzj[r * h4 + h + q] = d * c_prev[r * h + q] * fg * (one - fg);
                dzj[r * h4 + 2 * h + q] = d * i * (one - cand * cand);
                dc_next[r * h + q] = d * fg;
            }
        }
        // dc_prev += dz_{i,f} * wc_if
        T::gemm(
            n,
            2 * h,
            h,
            one,
            dzj,
            h4 as isize,
            1,
            p.wc_if.data(),
            h as isize,
            1,
            one,
            &mut dc_next,
            h as isize,
            1,
        );
        gemm_dyw(n, h4, h, dzj, p.wa.data(), &mut da_next, false);
    }

    let rows = steps * n;
    gemm_dytx(rows, h4, f, &dz, &cache.input, grads[0].data_mut());
    gemm_dytx(rows, h4, h, &dz, &cache.a[..rows * h], grads[1].data_mut());
    // d wc_if += dz_{i,f}^T c_prev ; d wc_u += dz_u^T c
    T::gemm(
        2 * h,
        rows,
        h,
        one,
        &dz,
        1,
        h4 as isize,
        &cache.c[..rows * h],
        h as isize,
        1,
        one,
        grads[2].data_mut(),
        h as isize,
        1,
    );
    T::gemm(
        h,
        rows,
        h,
        one,
        &dz[3 * h..],
        1,
        h4 as isize,
        &cache.c[nh..],
        h as isize,
        1,
        one,
        grads[3].data_mut(),
        h as isize,
        1,
    );
    let db = grads[4].data_mut();
    for row in dz.chunks_exact(h4) {
        for (g, &v) in db.iter_mut().zip(row) {
            *g += v;
        }
    }
    if !need_dx {
        return None;
    }
    let mut dx = vec![T::zero(); rows * f];
    gemm_dyw(rows, h4, f, &dz, p.wy.data(), &mut dx, false);
    Some(if cache.reverse {
        reversed_steps(&dx, steps)
    } else {
        dx
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::seed_stream;

    #[test]
    fn zero_cell_stays_zero() {
        let p = LstmParams::<f64>::zeros(3, 2);
        let y = Tensor::from_f64(&[3], &[0.4, -1.0, 2.0]).unwrap();
        let (a, c) = lstm_step(&p, &y, &Tensor::zeros(&[2]), &Tensor::zeros(&[2])).unwrap();
        assert!(a.data().iter().chain(c.data()).all(|&v| v == 0.0));
    }

    #[test]
    fn forget_gate_decay() {
        let mut p = LstmParams::<f64>::zeros(2, 3);
        let beta = 0.7;
        for j in 3..6 {
            p.b.data_mut()[j] = beta;
        }
        let c_prev = Tensor::from_f64(&[3], &[1.0, -2.0, 0.5]).unwrap();
        let a_prev = Tensor::from_f64(&[3], &[0.3, 0.1, -0.9]).unwrap();
        let y = Tensor::from_f64(&[2], &[5.0, -5.0]).unwrap();
        let (_, c) = lstm_step(&p, &y, &a_prev, &c_prev).unwrap();
        let s = 1.0 / (1.0 + (-beta as f64).exp());
        for (got, want) in c.data().iter().zip(c_prev.data()) {
            assert_eq!(*got, s * want);
        }
    }

    #[test]
    fn reverse_pass_matches_reversed_input() {
        let mut prng = seed_stream(4, 4);
        let p = LstmParams::<f64>::init(2, 3, &mut prng);
        let x: Vec<f64> = (0..5 * 2 * 2).map(|_| prng.uniform_range(-1.0, 1.0)).collect();
        let (fwd_rev, _) = lstm_forward(&p, &x, 5, 2, true);
        let xr = reversed_steps(&x, 5);
        let (plain, _) = lstm_forward(&p, &xr, 5, 2, false);
        assert_eq!(fwd_rev, reversed_steps(&plain, 5));
    }

    #[test]
    fn shape_errors() {
        let p = LstmParams::<f64>::zeros(3, 2);
        let bad = Tensor::<f64>::zeros(&[4]);
        assert!(lstm_step(&p, &bad, &Tensor::zeros(&[2]), &Tensor::zeros(&[2])).is_err());
        let y = Tensor::<f64>::zeros(&[3]);
        assert!(lstm_step(&p, &y, &Tensor::zeros(&[3]), &Tensor::zeros(&[2])).is_err());
    }
}
