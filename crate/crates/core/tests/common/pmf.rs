//! Randomized PMF and loss identities; returns the number of failed checks.

use phdetect::nn::loss::is_pmf;
use phdetect::nn::{kl_divergence, loss_sequence, loss_symbol, softmax, OneHot};
use phdetect::numerics::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pmf_of(a: f64, b: f64) -> Vec<f64> {
    softmax(&Tensor::new(vec![2], vec![a, b]).unwrap()).into_data()
}

/// Runs `rounds` rounds of the four identities (so `4 * rounds` checks).
pub fn failures(rounds: usize, seed: u64) -> usize {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut failed = 0;
    for _ in 0..rounds {
        let (a, b) = (r.gen_range(-40.0..40.0), r.gen_range(-40.0..40.0));
        let p = pmf_of(a, b);
        failed += usize::from(!is_pmf(&p, 1e-9));

        let c = r.gen_range(-100.0..100.0);
        let q = pmf_of(a + c, b + c);
        failed += usize::from(p.iter().zip(&q).any(|(x, y)| (x - y).abs() > 1e-12));

        let t = OneHot::for_bit(r.gen_range(0..2));
        let (a, b) = (r.gen_range(-10.0..10.0), r.gen_range(-10.0..10.0));
        let q = pmf_of(a, b);
        failed += usize::from((loss_symbol(t, &q) - kl_divergence(&t.to_vec::<f64>(), &q)).abs() > 1e-12);

        let k = r.gen_range(1..30);
        let pmfs: Vec<Vec<f64>> = (0..k).map(|_| pmf_of(r.gen_range(-8.0..8.0), r.gen_range(-8.0..8.0))).collect();
        let targets: Vec<OneHot> = (0..k).map(|_| OneHot::for_bit(r.gen_range(0..2))).collect();
        let parts: f64 = targets.iter().zip(&pmfs).map(|(&t, p)| loss_symbol(t, p)).sum();
        let total = loss_sequence(&targets, &pmfs).unwrap();
        failed += usize::from((total - parts).abs() > 1e-9 * (1.0 + parts));
    }
    failed
}
