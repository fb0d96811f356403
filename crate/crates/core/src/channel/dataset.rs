//! Labelled transmissions and dataset generation.

use super::model::{simulate_trace, ChannelModel, PhTrace};
use super::scheme::{modulate, ModulationScheme};
use crate::error::{Error, Result};
use crate::numerics::rng::{seed_stream, stream_id};

/// Stream domain for per-record bit and channel draws.
pub(crate) const DOMAIN_DATASET: u16 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Split {
    #[default]
    Unassigned,
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Unassigned => "none",
            Split::Train => "train",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(Split::Unassigned),
            "train" => Some(Split::Train),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

/// One transmitted frame and what the electrode recorded.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceRecord {
    pub id: u64,
    pub bits: Vec<u8>,
    pub interval_ms: u32,
    pub split: Split,
    pub trace: PhTrace,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub schemes: Vec<ModulationScheme>,
    pub model: ChannelModel,
    pub n_sequences: usize,
    pub seq_len: usize,
    pub master_seed: u64,
    pub records: Vec<SequenceRecord>,
}

impl Dataset {
    pub fn intervals(&self) -> Vec<u32> {
        self.schemes
            .iter()
            .map(|s| s.symbol_interval_ms())
            .collect()
    }

    pub fn scheme_for(&self, interval_ms: u32) -> Result<&ModulationScheme> {
        self.schemes
            .iter()
            .find(|s| s.symbol_interval_ms() == interval_ms)
            .ok_or_else(|| Error::Validation(format!("no scheme with interval {interval_ms} ms")))
    }

    pub fn record(&self, id: u64) -> Result<&SequenceRecord> {
        self.records
            .iter()
            .find(|r| r.id == id)
            .ok_or(Error::UnknownRecord(id))
    }

    pub fn partition(&self, split: Split) -> impl Iterator<Item = &SequenceRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn with_interval(&self, interval_ms: u32) -> impl Iterator<Item = &SequenceRecord> {
        self.records
            .iter()
            .filter(move |r| r.interval_ms == interval_ms)
    }

    /// Copy restricted to the given intervals.
    pub fn restrict_intervals(&self, intervals: &[u32]) -> Dataset {
        Dataset {
            schemes: self
                .schemes
                .iter()
                .filter(|s| intervals.contains(&s.symbol_interval_ms()))
                .copied()
                .collect(),
            records: self
                .records
                .iter()
                .filter(|r| intervals.contains(&r.interval_ms))
                .cloned()
                .collect(),
            ..self.clone_meta()
        }
    }

    fn clone_meta(&self) -> Dataset {
        Dataset {
            schemes: self.schemes.clone(),
            model: self.model,
            n_sequences: self.n_sequences,
            seq_len: self.seq_len,
            master_seed: self.master_seed,
            records: Vec::new(),
        }
    }

    /// Checks every record against its scheme: bit values, bit count vs trace length.
    pub fn validate(&self) -> Result<()> {
        for r in &self.records {
            let scheme = self.scheme_for(r.interval_ms)?;
            if r.bits.iter().any(|&b| b > 1) {
                return Err(Error::Validation(format!(
                    "record {}: non-binary bit",
                    r.id
                )));
            }
            let expected = scheme.frame_samples(r.bits.len());
            if r.trace.samples.len() != expected {
                return Err(Error::Validation(format!(
                    "record {}: {} bits at {} ms need {expected} samples, trace has {}",
                    r.id,
                    r.bits.len(),
                    r.interval_ms,
                    r.trace.samples.len()
                )));
            }
            if r.trace.samples.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!(
                    "record {}: non-finite sample",
                    r.id
                )));
            }
        }
        Ok(())
    }
}

/// `n_sequences` frames of `seq_len` uniform bits per scheme.
///
/// Record `i` of scheme `s` gets id `s * n_sequences + i` and its own PRNG
/// stream, so any record can be regenerated in isolation.
pub fn generate_dataset(
    schemes: &[ModulationScheme],
    model: &ChannelModel,
    n_sequences: usize,
    seq_len: usize,
    master_seed: u64,
) -> Result<Dataset> {
    if schemes.is_empty() {
        return Err(Error::InvalidArgument("no modulation schemes".into()));
    }
    if n_sequences < 2 || seq_len < 1 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 sequences of at least 1 bit, got {n_sequences} x {seq_len}"
        )));
    }
    if schemes.len() > usize::from(u16::MAX) || n_sequences > usize::from(u16::MAX) {
        return Err(Error::InvalidArgument(
            "too many schemes or sequences".into(),
        ));
    }
    model.validate()?;
    let mut records = Vec::with_capacity(schemes.len() * n_sequences);
    for (s, scheme) in schemes.iter().enumerate() {
        scheme.validate()?;
        for i in 0..n_sequences {
            let mut prng = seed_stream(
                master_seed,
                stream_id(DOMAIN_DATASET, s as u16, i as u16, 0),
            );
            let bits: Vec<u8> = (0..seq_len).map(|_| prng.next_bit()).collect();
            let events = modulate(&bits, scheme)?;
            let id = (s * n_sequences + i) as u64;
            let mut trace = simulate_trace(&events, model, scheme, &mut prng)?;
            trace.sequence_id = id;
            records.push(SequenceRecord {
                id,
                bits,
                interval_ms: scheme.symbol_interval_ms(),
                split: Split::Unassigned,
                trace,
            });
        }
    }
    Ok(Dataset {
        schemes: schemes.to_vec(),
        model: *model,
        n_sequences,
        seq_len,
        master_seed,
        records,
    })
}
