use crate::numerics::PrngState;
use crate::scalar::Scalar;

/// Uniform in `[-l, l]` with `l = sqrt(6 / (fan_in + fan_out))`.
pub(crate) fn glorot_fill<T: Scalar>(dst: &mut [T], fan_in: usize, fan_out: usize, prng: &mut PrngState) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in dst {
        *v = T::lit(prng.uniform_range(-limit, limit));
    }
}
