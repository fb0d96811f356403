//! Nested-loop transcriptions of each layer's defining formula, and the
//! worst absolute gap to the library over 100 random cases per family.

use phdetect::nn::{
    conv1d_forward, dense_forward, lstm_step, maxpool1d, Activation, Layer, LstmParams,
};
use phdetect::numerics::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CASES: u64 = 100;

pub fn rng(tag: u64, case: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(tag * 1_000 + case)
}

fn rand_vec(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.gen_range(-1.5..1.5)).collect()
}

pub fn rand_tensor(r: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), rand_vec(r, n)).unwrap()
}

/// Largest elementwise gap; a length mismatch counts as infinite.
fn gap(got: &[f64], want: &[f64]) -> f64 {
    if got.len() != want.len() {
        return f64::INFINITY;
    }
    got.iter().zip(want).map(|(g, w)| (g - w).abs()).fold(0.0, f64::max)
}

fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn dense() -> f64 {
    let mut worst = 0.0f64;
    for case in 0..CASES {
        let mut r = rng(1, case);
        let (rows, inp, out) = (r.gen_range(1..6), r.gen_range(1..9), r.gen_range(1..7));
        let w = rand_tensor(&mut r, &[out, inp]);
        let b = rand_tensor(&mut r, &[out]);
        let x = rand_tensor(&mut r, &[rows, inp]);
        let act = if case % 2 == 0 { Activation::Relu } else { Activation::Identity };

        let mut want = Vec::new();
        for row in 0..rows {
            for o in 0..out {
                let mut s = b.data()[o];
                for i in 0..inp {
                    s += w.data()[o * inp + i] * x.data()[row * inp + i];
                }
                want.push(if act == Activation::Relu { relu(s) } else { s });
            }
        }
        let got = dense_forward(&w, &b, &x, act).unwrap();
        let bad_shape = got.shape() != [rows, out];
        worst = worst.max(if bad_shape { f64::INFINITY } else { gap(got.data(), &want) });
    }
    worst
}

pub fn conv1d() -> f64 {
    let mut worst = 0.0f64;
    for case in 0..CASES {
        let mut r = rng(2, case);
        let rows = r.gen_range(1..4);
        let len = r.gen_range(1..20);
        let c_in = r.gen_range(1..4);
        let c_out = r.gen_range(1..5);
        let k = r.gen_range(1..8);
        let w = rand_tensor(&mut r, &[c_out, c_in, k]);
        let b = rand_tensor(&mut r, &[c_out]);
        let x = rand_tensor(&mut r, &[rows, len, c_in]);

        // Left pad is floor((k - 1) / 2); taps outside the signal read zero.
        let left = (k - 1) / 2;
        let mut want = Vec::new();
        for row in 0..rows {
            for t in 0..len {
                for o in 0..c_out {
                    let mut s = b.data()[o];
                    for j in 0..k {
                        let pos = t as isize + j as isize - left as isize;
                        if pos < 0 || pos >= len as isize {
                            continue;
                        }
                        for c in 0..c_in {
                            let xv = x.data()[(row * len + pos as usize) * c_in + c];
                            s += w.data()[(o * c_in + c) * k + j] * xv;
                        }
                    }
                    want.push(relu(s));
                }
            }
        }
        let got = conv1d_forward(&w, &b, &x, Activation::Relu).unwrap();
        let bad_shape = got.shape() != [rows, len, c_out];
        worst = worst.max(if bad_shape { f64::INFINITY } else { gap(got.data(), &want) });
    }
    worst
}

pub fn maxpool() -> f64 {
    let mut worst = 0.0f64;
    for case in 0..CASES {
        let mut r = rng(3, case);
        let rows = r.gen_range(1..4);
        let pool = r.gen_range(1..5);
        let len = pool * r.gen_range(1..6) + r.gen_range(0..pool);
        let ch = r.gen_range(1..4);
        // Coarse values so that ties inside a pool actually happen.
        let data: Vec<f64> = (0..rows * len * ch).map(|_| f64::from(r.gen_range(-3..4))).collect();
        let x = Tensor::new(vec![rows, len, ch], data).unwrap();

        let out_len = len / pool;
        let mut want = Vec::new();
        for row in 0..rows {
            for t in 0..out_len {
                for c in 0..ch {
                    let mut m = f64::NEG_INFINITY;
                    for j in 0..pool {
                        m = m.max(x.data()[(row * len + t * pool + j) * ch + c]);
                    }
                    want.push(m);
                }
            }
        }
        let got = maxpool1d(&x, pool).unwrap();
        let bad_shape = got.shape() != [rows, out_len, ch];
        worst = worst.max(if bad_shape { f64::INFINITY } else { gap(got.data(), &want) });
    }
    worst
}

/// Random cell with every parameter block drawn, biases included.
pub fn rand_lstm(r: &mut ChaCha8Rng, f: usize, h: usize) -> LstmParams<f64> {
    LstmParams {
        wy: rand_tensor(r, &[4 * h, f]),
        wa: rand_tensor(r, &[4 * h, h]),
        wc_if: rand_tensor(r, &[2 * h, h]),
        wc_u: rand_tensor(r, &[h, h]),
        b: rand_tensor(r, &[4 * h]),
    }
}

/// Row `g * h + j` of a gate-stacked matrix, dotted with `v`.
fn dot_row(m: &Tensor<f64>, row: usize, v: &[f64]) -> f64 {
    let cols = m.shape()[1];
    (0..cols).map(|q| m.data()[row * cols + q] * v[q]).sum()
}

/// One peephole cell step for a single sequence, written unit by unit.
pub fn oracle_step(p: &LstmParams<f64>, y: &[f64], a: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let h = a.len();
    let b = p.b.data();
    let mut c_new = vec![0.0; h];
    for j in 0..h {
        let i = sig(dot_row(&p.wy, j, y) + dot_row(&p.wa, j, a) + dot_row(&p.wc_if, j, c) + b[j]);
        let f = sig(
            dot_row(&p.wy, h + j, y)
                + dot_row(&p.wa, h + j, a)
                + dot_row(&p.wc_if, h + j, c)
                + b[h + j],
        );
        let cand = (dot_row(&p.wy, 2 * h + j, y) + dot_row(&p.wa, 2 * h + j, a) + b[2 * h + j]).tanh();
        c_new[j] = f * c[j] + i * cand;
    }
    let mut a_new = vec![0.0; h];
    for j in 0..h {
        let u = sig(
            dot_row(&p.wy, 3 * h + j, y)
                + dot_row(&p.wa, 3 * h + j, a)
                + dot_row(&p.wc_u, j, &c_new)
                + b[3 * h + j],
        );
        a_new[j] = u * c_new[j].tanh();
    }
    (a_new, c_new)
}

pub fn lstm_step_family() -> f64 {
    let mut worst = 0.0f64;
    for case in 0..CASES {
        let mut r = rng(4, case);
        let (n, f, h) = (r.gen_range(1..4), r.gen_range(1..6), r.gen_range(1..6));
        let p = rand_lstm(&mut r, f, h);
        let y = rand_tensor(&mut r, &[n, f]);
        let a = rand_tensor(&mut r, &[n, h]);
        let c = rand_tensor(&mut r, &[n, h]);

        let (mut want_a, mut want_c) = (Vec::new(), Vec::new());
        for s in 0..n {
            let (a1, c1) = oracle_step(
                &p,
                &y.data()[s * f..(s + 1) * f],
                &a.data()[s * h..(s + 1) * h],
                &c.data()[s * h..(s + 1) * h],
            );
            want_a.extend(a1);
            want_c.extend(c1);
        }
        let (got_a, got_c) = lstm_step(&p, &y, &a, &c).unwrap();
        worst = worst.max(gap(got_a.data(), &want_a)).max(gap(got_c.data(), &want_c));
    }
    worst
}

/// Unrolls a cell over `[S, N, F]` from zero state; `reverse` runs time backwards.
/// Output rows stay aligned with input time steps.
pub fn oracle_unroll(p: &LstmParams<f64>, x: &Tensor<f64>, reverse: bool) -> Vec<f64> {
    let (s_len, n, f) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let h = p.hidden();
    let mut out = vec![0.0; s_len * n * h];
    for seq in 0..n {
        let (mut a, mut c) = (vec![0.0; h], vec![0.0; h]);
        let order: Vec<usize> = if reverse {
            (0..s_len).rev().collect()
        } else {
            (0..s_len).collect()
        };
        for t in order {
            let y = &x.data()[(t * n + seq) * f..(t * n + seq + 1) * f];
            (a, c) = oracle_step(p, y, &a, &c);
            out[(t * n + seq) * h..(t * n + seq + 1) * h].copy_from_slice(&a);
        }
    }
    out
}

pub fn lstm_sequence() -> f64 {
    let mut worst = 0.0f64;
    for case in 0..CASES {
        let mut r = rng(5, case);
        let (s, n, f, h) = (r.gen_range(1..9), r.gen_range(1..4), r.gen_range(1..5), r.gen_range(1..5));
        let p = rand_lstm(&mut r, f, h);
        let x = rand_tensor(&mut r, &[s, n, f]);
        let want = oracle_unroll(&p, &x, false);
        let got = Layer::Lstm(p).forward(x).unwrap();
        let bad_shape = got.shape() != [s, n, h];
        worst = worst.max(if bad_shape { f64::INFINITY } else { gap(got.data(), &want) });
    }
    worst
}

pub fn bilstm_sequence() -> f64 {
    let mut worst = 0.0f64;
    for case in 0..CASES {
        let mut r = rng(6, case);
        let (s, n, f, h) = (r.gen_range(1..9), r.gen_range(1..4), r.gen_range(1..5), r.gen_range(1..5));
        let fwd = rand_lstm(&mut r, f, h);
        let bwd = rand_lstm(&mut r, f, h);
        let x = rand_tensor(&mut r, &[s, n, f]);
        let of = oracle_unroll(&fwd, &x, false);
        let ob = oracle_unroll(&bwd, &x, true);
        let mut want = Vec::new();
        for row in 0..s * n {
            want.extend_from_slice(&of[row * h..(row + 1) * h]);
            want.extend_from_slice(&ob[row * h..(row + 1) * h]);
        }
        let got = Layer::BiLstm { fwd, bwd }.forward(x).unwrap();
        let bad_shape = got.shape() != [s, n, 2 * h];
        worst = worst.max(if bad_shape { f64::INFINITY } else { gap(got.data(), &want) });
    }
    worst
}

/// Every family with its worst gap, in a fixed order.
pub fn all_families() -> Vec<(&'static str, f64)> {
    vec![
        ("dense", dense()),
        ("conv1d", conv1d()),
        ("maxpool", maxpool()),
        ("lstm_step", lstm_step_family()),
        ("lstm_sequence", lstm_sequence()),
        ("bilstm_sequence", bilstm_sequence()),
    ]
}
