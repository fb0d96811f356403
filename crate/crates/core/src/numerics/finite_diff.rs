//! Central-difference gradient oracle.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `(f(x + h e_i) - f(x - h e_i)) / 2h` for every coordinate `i`.
///
/// `x` is restored before returning. Any non-finite evaluation is an error.
pub fn finite_diff_gradient<T, F>(mut f: F, x: &mut [T], h: T) -> Result<Vec<T>>
where
    T: Scalar,
    F: FnMut(&[T]) -> T,
{
    if !(h > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "step must be positive, got {h}"
        )));
    }
    let two_h = h + h;
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + h;
        let plus = f(x);
        x[i] = orig - h;
        let minus = f(x);
        x[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!(
                "objective at coordinate {i}: f(x+h)={plus}, f(x-h)={minus}"
            )));
        }
        grad.push((plus - minus) / two_h);
    }
    Ok(grad)
}

/// `|a - b| / max(|a|, |b|, floor)`; the floor keeps near-zero pairs from
/// reporting huge ratios caused by rounding alone.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_squares() {
        let mut x = [1.0f64, 2.0];
        let g = finite_diff_gradient(|v| v.iter().map(|a| a * a).sum(), &mut x, 1e-5).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-8);
        assert!((g[1] - 4.0).abs() < 1e-8);
        assert_eq!(x, [1.0, 2.0]);
    }

    #[test]
    fn constant_function() {
        let mut x = [0.3f64, -7.0, 11.0];
        let g = finite_diff_gradient(|_| 3.5, &mut x, 1e-5).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn softmax_cross_entropy_against_closed_form() {
        // loss = -log softmax(z)[1]; d/dz = softmax(z) - onehot(1)
        let ce = |z: &[f64]| {
            let m = z.iter().cloned().fold(f64::MIN, f64::max);
            let s: f64 = z.iter().map(|v| (v - m).exp()).sum();
            -((z[1] - m) - s.ln())
        };
        let mut z = [0.4f64, -1.3, 2.2];
        let g = finite_diff_gradient(ce, &mut z, 1e-5).unwrap();
        let m = 2.2f64;
        let s: f64 = z.iter().map(|v| (v - m).exp()).sum();
        for i in 0..3 {
            let p = (z[i] - m).exp() / s;
            let exact = p - if i == 1 { 1.0 } else { 0.0 };
            assert!(
                relative_error(g[i], exact, 1e-12) < 1e-6,
                "{i}: {} vs {exact}",
                g[i]
            );
        }
    }

    #[test]
    fn error_decays_quadratically() {
        // f(x) = x^3 + 2x^4; f'(x) = 3x^2 + 8x^3
        let f = |v: &[f64]| v[0].powi(3) + 2.0 * v[0].powi(4);
        let x0 = 0.7f64;
        let exact = 3.0 * x0 * x0 + 8.0 * x0.powi(3);
        let err = |h: f64| {
            let mut x = [x0];
            (finite_diff_gradient(f, &mut x, h).unwrap()[0] - exact).abs()
        };
        for h in [1e-2, 4e-3] {
            let ratio = err(h) / err(h / 2.0);
            assert!((3.5..=4.5).contains(&ratio), "h={h} ratio={ratio}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut x = [1.0f64];
        assert!(finite_diff_gradient(|v| v[0], &mut x, 0.0).is_err());
        assert!(matches!(
            finite_diff_gradient(|v| v[0].ln(), &mut x, 1.0),
            Err(Error::NonFinite(_))
        ));
    }
}
