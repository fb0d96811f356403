// Baseline grid search and Adam checked against direct scalar recomputation.

use phdetect::baseline::fit_grid;
use phdetect::framing::FramedRecord;
use phdetect::numerics::Tensor;
use phdetect::train::{adam_step, AdamState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Mean of each of `bins` contiguous runs; the first `n % bins` runs get one extra sample.
fn bins_of(w: &[f64], bins: usize) -> Vec<f64> {
    let (q, r) = (w.len() / bins, w.len() % bins);
    let mut out = Vec::new();
    let mut at = 0;
    for i in 0..bins {
        let len = q + usize::from(i < r);
        out.push(w[at..at + len].iter().sum::<f64>() / len as f64);
        at += len;
    }
    out
}

fn random_records(r: &mut ChaCha8Rng) -> Vec<FramedRecord> {
    let n_rec = r.gen_range(1..4);
    (0..n_rec)
        .map(|id| {
            let k = r.gen_range(3..12);
            let len = r.gen_range(8..30);
            let bits: Vec<u8> = (0..k).map(|_| r.gen_range(0..2)).collect();
            let windows = bits
                .iter()
                .map(|&b| {
                    let slope = if b == 1 { 0.05 } else { -0.05 };
                    (0..len)
                        .map(|t| slope * t as f64 + r.gen_range(-0.6..0.6))
                        .collect()
                })
                .collect();
            FramedRecord {
                id,
                interval_ms: 250,
                bits,
                windows,
            }
        })
        .collect()
}

#[test]
fn baseline_grid_matches_brute_force() {
    for case in 0..60 {
        let mut r = ChaCha8Rng::seed_from_u64(case);
        let recs = random_records(&mut r);
        let shortest = recs.iter().flat_map(|x| x.windows.iter().map(Vec::len)).min().unwrap();
        let range: Vec<usize> = (2..=shortest.min(12)).collect();

        // Scan in ascending (B, gamma) order and keep strict improvements only.
        let mut best: Option<(usize, usize, usize)> = None;
        for &b in &range {
            for g in 1..b {
                let mut errors = 0;
                for rec in &recs {
                    for (w, &bit) in rec.windows.iter().zip(&rec.bits) {
                        let v = bins_of(w, b);
                        let decided = u8::from(v[g] - v[g - 1] > 0.0);
                        errors += usize::from(decided != bit);
                    }
                }
                if best.map_or(true, |(_, _, e)| errors < e) {
                    best = Some((b, g, errors));
                }
            }
        }
        let (b, g, e) = best.unwrap();
        let fit = fit_grid(&recs, &range).unwrap();
        assert_eq!((fit.params.bins, fit.params.gamma, fit.errors), (b, g, e), "case {case}");
        let symbols: usize = recs.iter().map(|x| x.bits.len()).sum();
        assert_eq!(fit.symbols, symbols);
    }
}

#[test]
fn adam_matches_scalar_reference() {
    let mut r = ChaCha8Rng::seed_from_u64(99);
    let n = 7;
    let mut p = Tensor::new(vec![n], (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()).unwrap();
    let mut state = AdamState::new([&p]);

    let mut rp: Vec<f64> = p.data().to_vec();
    let (mut rm, mut rv) = (vec![0.0; n], vec![0.0; n]);
    let (b1, b2, lr, eps) = (0.9f64, 0.999f64, 1e-3, 1e-8);

    for step in 1..=100 {
        let g: Vec<f64> = (0..n).map(|_| r.gen_range(-2.0..2.0)).collect();
        adam_step(&mut [&mut p], &[Tensor::new(vec![n], g.clone()).unwrap()], &mut state).unwrap();
        for i in 0..n {
            rm[i] = b1 * rm[i] + (1.0 - b1) * g[i];
            rv[i] = b2 * rv[i] + (1.0 - b2) * g[i] * g[i];
            let mh = rm[i] / (1.0 - b1.powi(step));
            let vh = rv[i] / (1.0 - b2.powi(step));
            rp[i] -= lr * mh / (vh.sqrt() + eps);
        }
        for (a, b) in p.data().iter().zip(&rp) {
            assert!((a - b).abs() < 1e-12, "step {step}: {a} vs {b}");
        }
    }
}
