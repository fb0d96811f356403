//! BER versus training window length for the recurrent detectors.

use std::fmt::Write as _;

use crate::channel::{Dataset, Split};
use crate::error::{Error, Result};
use crate::nn::Architecture;
use crate::scalar::Scalar;
use crate::train::{fit_framed, frame_partition, TrainConfig};

use super::report::dataset_metadata;
use super::{bit_errors, predict_bits};

pub const DEFAULT_SWEEP_LENGTHS: [usize; 4] = [4, 8, 16, 32];

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub arch: Architecture,
    pub length: usize,
    pub seed: u64,
    pub bit_errors: usize,
    pub total_bits: usize,
    pub ber: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub metadata: Vec<(String, String)>,
}

impl SweepResult {
    /// Seed-averaged BER of one (architecture, length) cell.
    pub fn mean_ber(&self, arch: Architecture, length: usize) -> Option<f64> {
        let v: Vec<f64> = self
            .points
            .iter()
            .filter(|p| p.arch == arch && p.length == length)
            .map(|p| p.ber)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// Lengths present for `arch`, ascending.
    pub fn lengths(&self, arch: Architecture) -> Vec<usize> {
        let mut l: Vec<usize> = self
            .points
            .iter()
            .filter(|p| p.arch == arch)
            .map(|p| p.length)
            .collect();
        l.sort_unstable();
        l.dedup();
        l
    }

    /// Long-format CSV: one row per trained model, then one `mean` row per
    /// (architecture, length).
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(s, "# {k}={v}");
        }
        s.push_str("arch,length,seed,bit_errors,total_bits,ber\n");
        for p in &self.points {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                p.arch, p.length, p.seed, p.bit_errors, p.total_bits, p.ber
            );
        }
        let mut archs: Vec<Architecture> = self.points.iter().map(|p| p.arch).collect();
        archs.dedup();
        for arch in archs {
            for length in self.lengths(arch) {
                let (e, b) = self
                    .points
                    .iter()
                    .filter(|p| p.arch == arch && p.length == length)
                    .fold((0, 0), |(e, b), p| (e + p.bit_errors, b + p.total_bits));
                let mean = self.mean_ber(arch, length).expect("cell exists");
                let _ = writeln!(s, "{arch},{length},mean,{e},{b},{mean}");
            }
        }
        s
    }
}

/// Trains one model per (seed, architecture, length) on the training
/// partition and scores it on the test partition, pooled over intervals.
///
/// `base` supplies epochs, batch size, widths and sync settings; its
/// architecture, window length and seed are overridden per model.
pub fn sweep_seq_len<T: Scalar>(
    archs: &[Architecture],
    dataset: &Dataset,
    lengths: &[usize],
    seeds: &[u64],
    base: &TrainConfig,
) -> Result<SweepResult> {
    if archs.is_empty() || lengths.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidArgument(
            "sweep needs at least one architecture, length and seed".into(),
        ));
    }
    if let Some(a) = archs.iter().find(|a| !a.is_sequence()) {
        return Err(Error::InvalidArgument(format!(
            "{a} has no window length to sweep"
        )));
    }
    let train = frame_partition(dataset, Split::Train, &base.sync)?;
    let test = frame_partition(dataset, Split::Test, &base.sync)?;
    let shortest = train.iter().map(|r| r.bits.len()).min().unwrap_or(0);
    if let Some(&bad) = lengths.iter().find(|&&l| l == 0 || l > shortest) {
        return Err(Error::InvalidArgument(format!(
            "window length {bad} outside 1..={shortest}"
        )));
    }
    let mut points = Vec::new();
    for &seed in seeds {
        for &arch in archs {
            for &length in lengths {
                let cfg = TrainConfig {
                    arch,
                    tau: length,
                    seed,
                    ..base.clone()
                };
                let net = fit_framed::<T>(&train, &cfg, None)?.network;
                let predicted = predict_bits(&net, &test)?;
                let (mut errors, mut bits) = (0, 0);
                for (rec, p) in test.iter().zip(&predicted) {
                    errors += bit_errors(p, &rec.bits)?;
                    bits += rec.bits.len();
                }
                points.push(SweepPoint {
                    arch,
                    length,
                    seed,
                    bit_errors: errors,
                    total_bits: bits,
                    ber: errors as f64 / bits as f64,
                });
            }
        }
    }
    let mut metadata = dataset_metadata(dataset);
    metadata.push((
        "training".into(),
        format!(
            "epochs={} batch={} widths={}/{}/{}/{} scalar={}",
            base.epochs,
            base.batch_size,
            base.widths.dense,
            base.widths.filters,
            base.widths.lstm,
            base.widths.depth,
            T::NAME
        ),
    ));
    let seed_list: Vec<String> = seeds.iter().map(u64::to_string).collect();
    metadata.push(("seeds".into(), seed_list.join(",")));
    Ok(SweepResult { points, metadata })
}

/// Ranks starting at 1; tied values share their average rank.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation (Pearson correlation of average ranks).
/// Returns 0 when either input is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument("rank correlation needs two points".into()));
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok(sxy / (sxx * syy).sqrt())
}
