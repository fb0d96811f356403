//! Per-detector, per-interval BER tables.

use std::fmt::Write as _;

use crate::baseline::BaselineDetector;
use crate::channel::{Dataset, Split};
use crate::error::{Error, Result};
use crate::framing::{FramedRecord, SyncConfig};
use crate::nn::{Architecture, Network};
use crate::numerics::rng::ALGORITHM_ID;
use crate::scalar::Scalar;
use crate::train::frame_partition;

use super::{bit_errors, predict_bits};

/// Anything that turns a framed record into bit decisions.
#[derive(Clone, Debug)]
pub enum Detector<T> {
    Baseline(BaselineDetector),
    Network(Network<T>),
}

/// Table name of a network: `Dense-Net`, `CNN-Net`, `LSTM3-Net120`, ...
/// Recurrent names carry the training window length.
pub fn detector_label<T>(net: &Network<T>) -> String {
    match net.arch {
        Architecture::Dense => "Dense-Net".into(),
        Architecture::Cnn => "CNN-Net".into(),
        Architecture::Lstm3 => format!("LSTM3-Net{}", net.seq_len),
        Architecture::BiLstm3 => format!("BiLSTM3-Net{}", net.seq_len),
        Architecture::CnnLstm3 => format!("CNN-LSTM3-Net{}", net.seq_len),
    }
}

impl<T: Scalar> Detector<T> {
    pub fn label(&self) -> String {
        match self {
            Detector::Baseline(_) => "Baseline".into(),
            Detector::Network(n) => detector_label(n),
        }
    }

    /// One-line description for report metadata.
    pub fn describe(&self) -> String {
        match self {
            Detector::Baseline(b) => match b.pooled {
                Some(fit) => format!("pooled B={} gamma={}", fit.params.bins, fit.params.gamma),
                None => b
                    .per_interval
                    .iter()
                    .map(|(iv, fit)| format!("{iv}ms:B={},gamma={}", fit.params.bins, fit.params.gamma))
                    .collect::<Vec<_>>()
                    .join(" "),
            },
            Detector::Network(n) => format!(
                "arch={} tau={} bins={} epochs={} batch={} seed={} fine_tuned_trunk={}",
                n.arch, n.seq_len, n.bins, n.meta.epochs, n.meta.batch_size, n.meta.seed, n.meta.fine_tuned_trunk
            ),
        }
    }

    pub fn predict(&self, records: &[FramedRecord]) -> Result<Vec<Vec<u8>>> {
        match self {
            Detector::Baseline(b) => records.iter().map(|r| b.predict(r)).collect(),
            Detector::Network(n) => predict_bits(n, records),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BerRow {
    pub detector: String,
    pub interval_ms: u32,
    pub bit_errors: usize,
    pub total_bits: usize,
    pub ber: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BerReport {
    pub rows: Vec<BerRow>,
    /// Ordered `key, value` pairs describing data, seeds and detectors.
    pub metadata: Vec<(String, String)>,
}

impl BerReport {
    /// Distinct detector labels in row order.
    pub fn detectors(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.detector) {
                out.push(r.detector.clone());
            }
        }
        out
    }

    pub fn intervals(&self) -> Vec<u32> {
        let mut out: Vec<u32> = self.rows.iter().map(|r| r.interval_ms).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn ber(&self, detector: &str, interval_ms: u32) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.detector == detector && r.interval_ms == interval_ms)
            .map(|r| r.ber)
    }

    /// Unweighted mean of a detector's per-interval BERs.
    pub fn mean_ber(&self, detector: &str) -> Option<f64> {
        let v: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.detector == detector)
            .map(|r| r.ber)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// Metadata comment block, the long table, then an interval-by-detector grid.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(s, "# {k}: {v}");
        }
        let w = self
            .rows
            .iter()
            .map(|r| r.detector.len())
            .chain(["detector".len()])
            .max()
            .unwrap_or(8);
        let _ = writeln!(
            s,
            "{:<w$}  {:>11}  {:>10}  {:>10}  {:>8}",
            "detector", "interval_ms", "bit_errors", "total_bits", "ber"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<w$}  {:>11}  {:>10}  {:>10}  {:>8.4}",
                r.detector, r.interval_ms, r.bit_errors, r.total_bits, r.ber
            );
        }
        s.push('\n');
        let names = self.detectors();
        let _ = write!(s, "{:>11}", "interval_ms");
        for n in &names {
            let _ = write!(s, "  {:>w2$}", n, w2 = n.len().max(6));
        }
        s.push('\n');
        for iv in self.intervals() {
            let _ = write!(s, "{iv:>11}");
            for n in &names {
                let cell = self.ber(n, iv).map_or("-".to_string(), |b| format!("{b:.4}"));
                let _ = write!(s, "  {:>w2$}", cell, w2 = n.len().max(6));
            }
            s.push('\n');
        }
        s
    }

    /// `# key=value` metadata lines, then
    /// `detector,interval_ms,bit_errors,total_bits,ber` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(s, "# {k}={v}");
        }
        s.push_str("detector,interval_ms,bit_errors,total_bits,ber\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.detector, r.interval_ms, r.bit_errors, r.total_bits, r.ber
            );
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut metadata = Vec::new();
        let mut rows = Vec::new();
        let mut header_seen = false;
        for (n, line) in text.lines().enumerate() {
            let bad = || Error::MalformedHeader(format!("report line {}: {line:?}", n + 1));
            if let Some(rest) = line.strip_prefix("# ") {
                let (k, v) = rest.split_once('=').ok_or_else(bad)?;
                metadata.push((k.to_string(), v.to_string()));
            } else if !header_seen {
                if line != "detector,interval_ms,bit_errors,total_bits,ber" {
                    return Err(bad());
                }
                header_seen = true;
            } else {
                let f: Vec<&str> = line.split(',').collect();
                if f.len() != 5 {
                    return Err(bad());
                }
                rows.push(BerRow {
                    detector: f[0].to_string(),
                    interval_ms: f[1].parse().map_err(|_| bad())?,
                    bit_errors: f[2].parse().map_err(|_| bad())?,
                    total_bits: f[3].parse().map_err(|_| bad())?,
                    ber: f[4].parse().map_err(|_| bad())?,
                });
            }
        }
        if !header_seen {
            return Err(Error::Truncated("report has no table header".into()));
        }
        Ok(BerReport { rows, metadata })
    }
}

/// Dataset facts shared by every report and sweep.
pub(crate) fn dataset_metadata(dataset: &Dataset) -> Vec<(String, String)> {
    let m = &dataset.model;
    let intervals: Vec<String> = dataset.intervals().iter().map(u32::to_string).collect();
    let test = dataset.partition(Split::Test).count();
    let train = dataset.partition(Split::Train).count();
    [
        ("dataset_seed", dataset.master_seed.to_string()),
        ("prng", ALGORITHM_ID.to_string()),
        ("intervals", intervals.join(",")),
        ("sequences_per_interval", dataset.n_sequences.to_string()),
        ("bits_per_sequence", dataset.seq_len.to_string()),
        ("train_records", train.to_string()),
        ("test_records", test.to_string()),
        (
            "channel",
            format!(
                "ph_baseline={} amplitude={} decay_tau_ms={} nonlinearity_scale={} noise_std={} jitter_ms={} response_stages={} response_tau_ms={}",
                m.ph_baseline,
                m.injection_amplitude,
                m.decay_tau_ms,
                m.nonlinearity_scale,
                m.noise_std,
                m.jitter_ms,
                m.response_stages,
                m.response_tau_ms
            ),
        ),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// Scores every detector on the test records of every interval.
///
/// Rows come detector by detector in the given order, intervals ascending.
pub fn report_table<T: Scalar>(
    detectors: &[Detector<T>],
    dataset: &Dataset,
    sync: &SyncConfig,
) -> Result<BerReport> {
    if detectors.is_empty() {
        return Err(Error::InvalidArgument("no detectors to report".into()));
    }
    let framed = frame_partition(dataset, Split::Test, sync)?;
    let mut intervals = dataset.intervals();
    intervals.sort_unstable();
    for iv in &intervals {
        if !framed.iter().any(|r| r.interval_ms == *iv) {
            return Err(Error::EmptyDataset(format!("no test records at {iv} ms")));
        }
    }
    let mut metadata = dataset_metadata(dataset);
    let mut rows = Vec::with_capacity(detectors.len() * intervals.len());
    for det in detectors {
        let label = det.label();
        metadata.push((format!("detector.{label}"), det.describe()));
        let predictions = det.predict(&framed)?;
        for &iv in &intervals {
            let (mut errors, mut bits) = (0, 0);
            for (rec, pred) in framed.iter().zip(&predictions) {
                if rec.interval_ms == iv {
                    errors += bit_errors(pred, &rec.bits)?;
                    bits += rec.bits.len();
                }
            }
            rows.push(BerRow {
                detector: label.clone(),
                interval_ms: iv,
                bit_errors: errors,
                total_bits: bits,
                ber: errors as f64 / bits as f64,
            });
        }
    }
    Ok(BerReport { rows, metadata })
}
