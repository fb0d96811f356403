//! Per-symbol network inputs built from framed windows.

use crate::channel::{Dataset, Split};
use crate::error::{Error, Result};
use crate::framing::{bin_average, extract_features, frame_records, FramedRecord, SyncConfig};
use crate::nn::{Architecture, InputKind};

/// Input rows for every symbol window of `record`, `K x F` row-major,
/// where `F = arch.input_width()`.
pub fn encode_record(arch: Architecture, record: &FramedRecord) -> Result<Vec<f64>> {
    let width = arch.input_width();
    let mut rows = Vec::with_capacity(record.windows.len() * width);
    for k in 0..record.windows.len() {
        let b = bin_average(&record.window(k), arch.bins())?;
        match arch.input_kind() {
            InputKind::Features => rows.extend(extract_features(&b, record.interval_ms)?.values),
            InputKind::Bins => rows.extend(b.values),
        }
    }
    Ok(rows)
}

/// Syncs and segments every record of one partition.
pub fn frame_partition(dataset: &Dataset, split: Split, sync: &SyncConfig) -> Result<Vec<FramedRecord>> {
    let framed = frame_records(dataset.partition(split), &dataset.schemes, sync)?;
    if framed.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no {} records (has the dataset been split?)",
            split.as_str()
        )));
    }
    Ok(framed)
}
