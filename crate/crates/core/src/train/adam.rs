//! Adam with bias-corrected moments.

use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
    /// Steps taken so far.
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub learning_rate: f64,
}

impl<T: Scalar> AdamState<T> {
    /// Zero moments shaped like `params`, default hyperparameters.
    pub fn new<'a>(params: impl IntoIterator<Item = &'a Tensor<T>>) -> Self {
        let m: Vec<Tensor<T>> = params.into_iter().map(|p| Tensor::zeros(p.shape())).collect();
        AdamState {
            v: m.clone(),
            m,
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            learning_rate: 1e-3,
        }
    }
}

/// One Adam update of every tensor in `params`.
///
/// `m <- b1 m + (1 - b1) g`, `v <- b2 v + (1 - b2) g^2`, then
/// `p <- p - lr * m_hat / (sqrt(v_hat) + eps)` with
/// `m_hat = m / (1 - b1^t)` and `v_hat = v / (1 - b2^t)`.
pub fn adam_step<T: Scalar>(
    params: &mut [&mut Tensor<T>],
    grads: &[Tensor<T>],
    state: &mut AdamState<T>,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Shape(format!(
            "adam: {} parameter tensors, {} gradients, {} moment slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for ((p, g), m) in params.iter().zip(grads).zip(&state.m) {
        p.check_same(g)?;
        p.check_same(m)?;
    }
    state.t += 1;
    let t = state.t as i32;
    let b1 = T::lit(state.beta1);
    let b2 = T::lit(state.beta2);
    let c1 = T::one() - b1;
    let c2 = T::one() - b2;
    let inv_bc1 = T::lit(1.0 / (1.0 - state.beta1.powi(t)));
    let inv_bc2 = T::lit(1.0 / (1.0 - state.beta2.powi(t)));
    let lr = T::lit(state.learning_rate);
    let eps = T::lit(state.epsilon);
    for (((p, g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        for (((p, &g), m), v) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *m = b1 * *m + c1 * g;
            *v = b2 * *v + c2 * g * g;
            let m_hat = *m * inv_bc1;
            let v_hat = *v * inv_bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
