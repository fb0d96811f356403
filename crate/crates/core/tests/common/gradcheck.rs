//! Central-difference check of `loss_and_grad` at toy widths.

use phdetect::nn::{build_with_widths, Architecture, Layer, Network, Widths};
use phdetect::numerics::{finite_diff_gradient, relative_error, seed_stream};
use phdetect::numerics::Tensor;

pub const STEP: f64 = 1e-5;
/// Gradients smaller than this are compared in absolute terms.
pub const FLOOR: f64 = 1e-6;

pub const TOY: Widths = Widths {
    dense: 4,
    filters: 2,
    lstm: 3,
    depth: 3,
};

/// Bias vectors are drawn away from zero: with all-zero biases some ReLU inputs
/// sit exactly on the kink, where a finite difference is meaningless.
fn randomize_biases(net: &mut Network<f64>, prng: &mut phdetect::numerics::PrngState) {
    for layer in &mut net.layers {
        let bias = match layer {
            Layer::Dense { b, .. } | Layer::Conv1d { b, .. } => vec![b],
            Layer::Lstm(p) => vec![&mut p.b],
            Layer::BiLstm { fwd, bwd } => vec![&mut fwd.b, &mut bwd.b],
            _ => vec![],
        };
        for t in bias {
            for v in t.data_mut() {
                *v = prng.uniform_range(-0.1, 0.1);
            }
        }
    }
}

/// Worst relative error over every parameter of one randomly initialized network.
pub fn worst_error(arch: Architecture, seed: u64) -> f64 {
    let mut prng = seed_stream(seed, 77);
    let mut net: Network<f64> = build_with_widths(arch, TOY, &mut prng).unwrap();
    randomize_biases(&mut net, &mut prng);
    let (s, n) = if arch.is_sequence() { (4, 3) } else { (1, 3) };
    let f = net.input_width();
    let x: Vec<f64> = (0..s * n * f).map(|_| prng.uniform_range(-1.0, 1.0)).collect();
    let x = Tensor::from_f64(&[s, n, f], &x).unwrap();
    let bits: Vec<u8> = (0..s * n).map(|_| prng.next_bit()).collect();
    let (_, grads) = net.loss_and_grad(&x, &bits, 0).unwrap();

    let mut worst = 0.0f64;
    for (pi, analytic) in grads.iter().enumerate() {
        let mut flat = net.params()[pi].data().to_vec();
        let numeric = finite_diff_gradient(
            |v: &[f64]| {
                let mut m = net.clone();
                m.params_mut()[pi].data_mut().copy_from_slice(v);
                m.loss_and_grad(&x, &bits, 0).unwrap().0
            },
            &mut flat,
            STEP,
        )
        .unwrap();
        for (a, b) in analytic.data().iter().zip(&numeric) {
            worst = worst.max(relative_error(*a, *b, FLOOR));
        }
    }
    worst
}
