//! Bit decisions, error rates, report tables, sweeps and trace dumps.

mod report;
mod sweep;
mod trace;

pub use report::{detector_label, report_table, BerReport, BerRow, Detector};
pub use sweep::{spearman, sweep_seq_len, SweepPoint, SweepResult, DEFAULT_SWEEP_LENGTHS};
pub use trace::{dump_trace, read_trace_csv, write_trace_csv, TraceDump};

use crate::error::{Error, Result};
use crate::framing::FramedRecord;
use crate::nn::Network;
use crate::numerics::Tensor;
use crate::scalar::Scalar;
use crate::train::encode_record;

/// Index of the larger mass; equal masses give bit 0.
pub fn decide_bit<T: Scalar>(pmf: &[T]) -> u8 {
    u8::from(pmf[1] > pmf[0])
}

/// PMFs for every symbol of one record, `K x 2` row-major.
///
/// Feedforward networks score each symbol on its own. Recurrent networks run
/// over consecutive windows of `network.seq_len` symbols with a fresh state
/// per window, as in training; a shorter final window is run as is.
pub fn predict_pmfs<T: Scalar>(network: &Network<T>, record: &FramedRecord) -> Result<Vec<T>> {
    let width = network.input_width();
    let rows: Vec<T> = encode_record(network.arch, record)?
        .into_iter()
        .map(T::lit)
        .collect();
    let k = rows.len() / width;
    if !network.arch.is_sequence() {
        return Ok(network.forward(&Tensor::new(vec![1, k, width], rows)?)?.into_data());
    }
    let tau = network.seq_len.max(1);
    let mut out = Vec::with_capacity(2 * k);
    for chunk in rows.chunks(tau * width) {
        let x = Tensor::new(vec![chunk.len() / width, 1, width], chunk.to_vec())?;
        out.extend(network.forward(&x)?.into_data());
    }
    Ok(out)
}

/// Hard decisions for every symbol of every record.
pub fn predict_bits<T: Scalar>(network: &Network<T>, records: &[FramedRecord]) -> Result<Vec<Vec<u8>>> {
    records
        .iter()
        .map(|r| Ok(predict_pmfs(network, r)?.chunks_exact(2).map(decide_bit).collect()))
        .collect()
}

/// Number of positions where the two bit sequences differ.
pub fn bit_errors(predicted: &[u8], truth: &[u8]) -> Result<usize> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: truth.len(),
        });
    }
    Ok(predicted.iter().zip(truth).filter(|(a, b)| a != b).count())
}

/// Hamming distance over length.
pub fn compute_ber(predicted: &[u8], truth: &[u8]) -> Result<f64> {
    let errors = bit_errors(predicted, truth)?;
    if truth.is_empty() {
        return Err(Error::InvalidArgument("no bits to compare".into()));
    }
    Ok(errors as f64 / truth.len() as f64)
}
