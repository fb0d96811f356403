//! Bit-to-injection modulation.

use crate::error::{Error, Result};

/// Timing of the on-off acid/base keying.
///
/// All durations are whole milliseconds so symbol boundaries land on exact
/// sample indices after integer arithmetic.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModulationScheme {
    pub injection_ms: u32,
    pub pause_ms: u32,
    pub sync_pulse_ms: u32,
    pub sync_silence_ms: u32,
    pub sample_rate_hz: u32,
}

/// Pause lengths of the four default schemes (intervals 250, 334, 380, 500 ms).
pub const DEFAULT_PAUSES_MS: [u32; 4] = [220, 304, 350, 470];

/// Smallest number of samples a symbol window must hold (largest bin count used).
pub const MIN_SAMPLES_PER_SYMBOL: u32 = 30;

impl Default for ModulationScheme {
    fn default() -> Self {
        ModulationScheme {
            injection_ms: 30,
            pause_ms: 220,
            sync_pulse_ms: 100,
            sync_silence_ms: 900,
            sample_rate_hz: 200,
        }
    }
}

impl ModulationScheme {
    pub fn with_pause(pause_ms: u32) -> Self {
        ModulationScheme {
            pause_ms,
            ..Default::default()
        }
    }

    /// Scheme whose symbol interval is `interval_ms`, keeping the default injection length.
    pub fn with_interval(interval_ms: u32) -> Result<Self> {
        let base = Self::default();
        if interval_ms <= base.injection_ms {
            return Err(Error::InvalidArgument(format!(
                "interval {interval_ms} ms does not exceed the {} ms injection",
                base.injection_ms
            )));
        }
        let s = Self::with_pause(interval_ms - base.injection_ms);
        s.validate()?;
        Ok(s)
    }

    /// The four schemes used throughout: pauses 220, 304, 350 and 470 ms.
    pub fn defaults() -> Vec<Self> {
        DEFAULT_PAUSES_MS
            .iter()
            .map(|&p| Self::with_pause(p))
            .collect()
    }

    pub fn symbol_interval_ms(&self) -> u32 {
        self.injection_ms + self.pause_ms
    }

    /// Sync pulse plus the silence after it.
    pub fn preamble_ms(&self) -> u32 {
        self.sync_pulse_ms + self.sync_silence_ms
    }

    /// Nominal start of symbol `k`, in ms from the start of the sync pulse.
    pub fn symbol_start_ms(&self, k: usize) -> u64 {
        u64::from(self.preamble_ms()) + k as u64 * u64::from(self.symbol_interval_ms())
    }

    /// Sample offset of the first sample of symbol `k` relative to the sync pulse.
    pub fn symbol_start_sample(&self, k: usize) -> usize {
        (self.symbol_start_ms(k) * u64::from(self.sample_rate_hz) / 1000) as usize
    }

    /// Total duration of a frame carrying `n_bits` bits.
    pub fn frame_duration_ms(&self, n_bits: usize) -> u64 {
        self.symbol_start_ms(n_bits)
    }

    /// `ceil(duration * rate / 1000)`.
    pub fn samples_for_duration(&self, duration_ms: u64) -> usize {
        (duration_ms * u64::from(self.sample_rate_hz)).div_ceil(1000) as usize
    }

    /// Trace length of a frame carrying `n_bits` bits.
    pub fn frame_samples(&self, n_bits: usize) -> usize {
        self.samples_for_duration(self.frame_duration_ms(n_bits))
    }

    pub fn samples_per_symbol(&self) -> f64 {
        f64::from(self.sample_rate_hz) * f64::from(self.symbol_interval_ms()) / 1000.0
    }

    pub fn validate(&self) -> Result<()> {
        let ModulationScheme {
            injection_ms,
            pause_ms,
            sync_pulse_ms,
            sync_silence_ms,
            sample_rate_hz,
        } = *self;
        if injection_ms == 0
            || pause_ms == 0
            || sync_pulse_ms == 0
            || sync_silence_ms == 0
            || sample_rate_hz == 0
        {
            return Err(Error::InvalidArgument(format!(
                "all scheme durations must be positive: {self:?}"
            )));
        }
        // Shortest window must still fit the largest bin count.
        let min_window = u64::from(sample_rate_hz) * u64::from(self.symbol_interval_ms()) / 1000;
        if min_window < u64::from(MIN_SAMPLES_PER_SYMBOL) {
            return Err(Error::InvalidArgument(format!(
                "{} Hz x {} ms gives {min_window} samples per symbol, need {MIN_SAMPLES_PER_SYMBOL}",
                sample_rate_hz,
                self.symbol_interval_ms()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Polarity {
    Acid,
    Base,
}

impl Polarity {
    /// +1 for acid (raises excess acid concentration), -1 for base.
    pub fn sign(self) -> f64 {
        match self {
            Polarity::Acid => 1.0,
            Polarity::Base => -1.0,
        }
    }

    pub fn for_bit(bit: u8) -> Self {
        if bit == 0 {
            Polarity::Acid
        } else {
            Polarity::Base
        }
    }
}

/// One pump activation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InjectionEvent {
    pub start_ms: f64,
    pub duration_ms: f64,
    pub polarity: Polarity,
    /// Bit index carried by this event; `None` for the sync pulse.
    pub symbol: Option<usize>,
}

impl InjectionEvent {
    pub fn end_ms(&self) -> f64 {
        self.start_ms + self.duration_ms
    }
}

/// Sync pulse followed by one acid (bit 0) or base (bit 1) injection per bit.
pub fn modulate(bits: &[u8], scheme: &ModulationScheme) -> Result<Vec<InjectionEvent>> {
    if let Some(pos) = bits.iter().position(|&b| b > 1) {
        return Err(Error::InvalidArgument(format!(
            "bit {pos} has value {}, expected 0 or 1",
            bits[pos]
        )));
    }
    let mut events = Vec::with_capacity(bits.len() + 1);
    events.push(InjectionEvent {
        start_ms: 0.0,
        duration_ms: f64::from(scheme.sync_pulse_ms),
        polarity: Polarity::Acid,
        symbol: None,
    });
    events.extend(bits.iter().enumerate().map(|(k, &b)| InjectionEvent {
        start_ms: scheme.symbol_start_ms(k) as f64,
        duration_ms: f64::from(scheme.injection_ms),
        polarity: Polarity::for_bit(b),
        symbol: Some(k),
    }));
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_intervals() {
        let iv: Vec<u32> = ModulationScheme::defaults()
            .iter()
            .map(|s| s.symbol_interval_ms())
            .collect();
        assert_eq!(iv, vec![250, 334, 380, 500]);
        for s in ModulationScheme::defaults() {
            s.validate().unwrap();
        }
    }

    #[test]
    fn empty_frame_is_sync_only() {
        let ev = modulate(&[], &ModulationScheme::default()).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].polarity, Polarity::Acid);
        assert_eq!(ev[0].start_ms, 0.0);
        assert_eq!(ev[0].duration_ms, 100.0);
    }

    #[test]
    fn single_zero() {
        let ev = modulate(&[0], &ModulationScheme::with_pause(220)).unwrap();
        assert_eq!(ev.len(), 2);
        assert_eq!((ev[1].start_ms, ev[1].duration_ms), (1000.0, 30.0));
        assert_eq!(ev[1].polarity, Polarity::Acid);
    }

    #[test]
    fn one_zero_schedule() {
        let ev = modulate(&[1, 0], &ModulationScheme::with_pause(220)).unwrap();
        assert_eq!(ev[1].polarity, Polarity::Base);
        assert_eq!(ev[1].start_ms, 1000.0);
        assert_eq!(ev[2].polarity, Polarity::Acid);
        assert_eq!(ev[2].start_ms, 1250.0);
        assert!(ev.iter().skip(1).all(|e| e.duration_ms == 30.0));
    }

    #[test]
    fn rejects_non_bits() {
        assert!(modulate(&[0, 2], &ModulationScheme::default()).is_err());
    }

    #[test]
    fn sample_arithmetic() {
        let s = ModulationScheme::with_pause(304);
        assert_eq!(s.symbol_start_sample(0), 200);
        // 334 ms at 200 Hz is 66.8 samples: boundaries floor to whole samples.
        assert_eq!(s.symbol_start_sample(1), 266);
        assert_eq!(s.symbol_start_sample(5), 534);
        assert_eq!(s.frame_samples(120), (1000 + 120 * 334) * 200 / 1000);
        assert!(ModulationScheme::with_interval(100).is_err());
        assert!(ModulationScheme {
            pause_ms: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
