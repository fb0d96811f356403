//! Cross-entropy losses over two-symbol PMFs.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Probabilities below this are clamped before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// Number of symbols: bit 0 and bit 1.
pub const SYMBOLS: usize = 2;

/// Indicator vector of the transmitted symbol.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OneHot {
    pub index: usize,
}

impl OneHot {
    pub fn for_bit(bit: u8) -> Self {
        OneHot {
            index: usize::from(bit),
        }
    }

    pub fn to_vec<T: Scalar>(self) -> Vec<T> {
        (0..SYMBOLS)
            .map(|i| if i == self.index { T::one() } else { T::zero() })
            .collect()
    }
}

/// Checks the PMF contract: nonnegative entries summing to one within `tol`.
pub fn is_pmf<T: Scalar>(p: &[T], tol: f64) -> bool {
    p.iter().all(|v| v.as_f64() >= 0.0)
        && (p.iter().map(|v| v.as_f64()).sum::<f64>() - 1.0).abs() <= tol
}

/// `-ln p[true symbol]`, with `p` clamped at [`PROB_FLOOR`].
pub fn loss_symbol<T: Scalar>(target: OneHot, pmf: &[T]) -> T {
    -pmf[target.index].max(T::lit(PROB_FLOOR)).ln()
}

/// Sum of per-step symbol losses.
pub fn loss_sequence<T: Scalar>(targets: &[OneHot], pmfs: &[Vec<T>]) -> Result<T> {
    if targets.len() != pmfs.len() {
        return Err(Error::LengthMismatch {
            left: targets.len(),
            right: pmfs.len(),
        });
    }
    Ok(targets
        .iter()
        .zip(pmfs)
        .map(|(&t, p)| loss_symbol(t, p))
        .sum())
}

/// `sum_i p_i ln(p_i / q_i)` with `0 ln 0 = 0`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi / qi.max(PROB_FLOOR)).ln())
        .sum()
}
