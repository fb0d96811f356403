//! Train/test assignment of whole records.

use crate::channel::{Dataset, Split};
use crate::error::{Error, Result};
use crate::numerics::rng::{seed_stream, stream_id};

/// Share of records per interval used for training by default.
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.84;

pub(crate) const DOMAIN_SPLIT: u16 = 4;

/// Tags every record `train` or `test`.
///
/// Records of each interval are permuted with a stream derived from `seed`
/// and the interval's position in `dataset.schemes`; the first
/// `round(fraction * n)` of the permutation become training records.
pub fn split_dataset(dataset: &Dataset, train_fraction: f64, seed: u64) -> Result<Dataset> {
    if dataset.records.is_empty() {
        return Err(Error::EmptyDataset("nothing to split".into()));
    }
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(Error::InvalidArgument(format!(
            "train fraction {train_fraction} outside [0, 1]"
        )));
    }
    let mut out = dataset.clone();
    for (s, interval) in dataset.intervals().into_iter().enumerate() {
        let mut members: Vec<usize> = (0..out.records.len())
            .filter(|&i| out.records[i].interval_ms == interval)
            .collect();
        let n_train = (train_fraction * members.len() as f64).round() as usize;
        let mut prng = seed_stream(seed, stream_id(DOMAIN_SPLIT, s as u16, 0, 0));
        prng.shuffle(&mut members);
        for (rank, &i) in members.iter().enumerate() {
            out.records[i].split = if rank < n_train {
                Split::Train
            } else {
                Split::Test
            };
        }
    }
    Ok(out)
}
