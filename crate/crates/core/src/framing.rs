//! Receiver front end: synchronization, symbol windows, bins and features.

use crate::channel::{ModulationScheme, PhTrace, SequenceRecord};
use crate::error::{Error, Result};

/// Interval used to normalize the duration indicator.
pub const DURATION_NORM_MS: f64 = 500.0;

/// Parameters of the sync-pulse detector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyncConfig {
    /// Required pH drop over `slope_span_ms` (positive number).
    pub threshold_ph: f64,
    pub slope_span_ms: u32,
    /// Width of the trailing moving average applied before differencing.
    pub smoothing_ms: u32,
    /// How long the drop must persist; `None` means half the sync pulse.
    pub sustain_ms: Option<u32>,
}

impl Default for SyncConfig {
    fn default() -> Self {
        SyncConfig {
            threshold_ph: 0.25,
            slope_span_ms: 100,
            smoothing_ms: 100,
            sustain_ms: None,
        }
    }
}

fn ms_to_samples(ms: u32, rate_hz: u32) -> usize {
    ((u64::from(ms) * u64::from(rate_hz)) / 1000).max(1) as usize
}

/// Finds the first sample of the sync pulse using the default [`SyncConfig`].
pub fn detect_sync(trace: &PhTrace, scheme: &ModulationScheme) -> Result<usize> {
    detect_sync_with(trace, scheme, &SyncConfig::default())
}

/// Sync detection in two passes.
///
/// Coarse: the trace is smoothed by a trailing moving average and differenced
/// over `slope_span_ms`; the trigger is the earliest sample from which that
/// difference stays at or below `-threshold_ph` for the sustain time.
///
/// Fine: around the trigger, a centered moving average locates the level
/// before the drop and the bottom of the dip. The first crossing of the level
/// halfway between them marks the middle of the received pulse, and the
/// returned index sits half a pulse duration earlier. The received pulse is
/// steepest at mid depth, so additive noise moves that crossing least. On a
/// channel that smears the pulse the index follows the received pulse rather
/// than the transmitted one.
pub fn detect_sync_with(
    trace: &PhTrace,
    scheme: &ModulationScheme,
    cfg: &SyncConfig,
) -> Result<usize> {
    let p = &trace.samples;
    let rate = trace.sample_rate_hz;
    let min_len = ms_to_samples(scheme.preamble_ms(), rate);
    if p.len() <= min_len {
        return Err(Error::InvalidArgument(format!(
            "trace of {} samples is shorter than the {min_len}-sample preamble",
            p.len()
        )));
    }
    if !(cfg.threshold_ph > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sync threshold must be positive, got {}",
            cfg.threshold_ph
        )));
    }
    let smooth = ms_to_samples(cfg.smoothing_ms, rate);
    let span = ms_to_samples(cfg.slope_span_ms, rate);
    let sustain = ms_to_samples(cfg.sustain_ms.unwrap_or(scheme.sync_pulse_ms / 2), rate);

    let mut prefix = Vec::with_capacity(p.len() + 1);
    prefix.push(0.0f64);
    for &v in p {
        prefix.push(prefix.last().unwrap() + v);
    }
    let mean = |lo: usize, hi: usize| (prefix[hi + 1] - prefix[lo]) / (hi + 1 - lo) as f64;
    let trailing = |n: usize| mean((n + 1).saturating_sub(smooth), n);

    let mut run = 0usize;
    let mut trigger = None;
    for n in 0..p.len() {
        if trailing(n) - trailing(n.saturating_sub(span)) <= -cfg.threshold_ph {
            run += 1;
            if run == sustain {
                trigger = Some(n + 1 - sustain);
                break;
            }
        } else {
            run = 0;
        }
    }
    let t = trigger.ok_or(Error::NoSyncFound)?;

    let half = smooth / 4;
    let centered = |n: usize| mean(n.saturating_sub(half), (n + half).min(p.len() - 1));
    let lo = t.saturating_sub(2 * (smooth + span));
    let hi = (t + ms_to_samples(scheme.sync_silence_ms / 2, rate)).min(p.len() - 1);
    let (mut top_at, mut top) = (lo, f64::NEG_INFINITY);
    for n in lo..=t {
        let v = centered(n);
        if v > top {
            (top_at, top) = (n, v);
        }
    }
    let bottom = (t..=hi).map(centered).fold(f64::INFINITY, f64::min);
    let mid = 0.5 * (top + bottom);
    let crossing = (top_at..=hi).find(|&n| centered(n) < mid).unwrap_or(t);
    Ok(crossing.saturating_sub(ms_to_samples(scheme.sync_pulse_ms / 2, rate)))
}

/// Samples belonging to one symbol interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymbolWindow<'a> {
    pub samples: &'a [f64],
    pub interval_ms: u32,
}

/// Cuts `count` consecutive symbol windows starting one preamble after `sync_index`.
///
/// Window boundaries are `sync_index + floor((preamble + k * interval) * rate / 1000)`,
/// so windows tile the trace without gaps even when an interval is not a
/// whole number of samples.
pub fn segment<'a>(
    trace: &'a PhTrace,
    sync_index: usize,
    scheme: &ModulationScheme,
    count: usize,
) -> Result<Vec<SymbolWindow<'a>>> {
    let len = trace.samples.len();
    let bound = |k: usize| sync_index + scheme.symbol_start_sample(k);
    if bound(count) > len {
        let available = (0..count).take_while(|&k| bound(k + 1) <= len).count();
        return Err(Error::TruncatedTrace {
            requested: count,
            available,
        });
    }
    Ok((0..count)
        .map(|k| SymbolWindow {
            samples: &trace.samples[bound(k)..bound(k + 1)],
            interval_ms: scheme.symbol_interval_ms(),
        })
        .collect())
}

/// Sync detection plus segmentation of a whole record, one sample vector per bit.
///
/// The trace of a frame ends with the last nominal symbol interval. When the
/// detected sync lies later than the first sample (a channel that delays the
/// received pulse), the final windows would run past the end of the trace;
/// the missing tail is filled with the last recorded sample.
pub fn frame_record(
    record: &SequenceRecord,
    scheme: &ModulationScheme,
    cfg: &SyncConfig,
) -> Result<Vec<Vec<f64>>> {
    let count = record.bits.len();
    let sync = detect_sync_with(&record.trace, scheme, cfg)?;
    let samples = &record.trace.samples;
    let needed = sync + scheme.symbol_start_sample(count);
    let padded;
    let trace = if needed > samples.len() {
        let mut ext = record.trace.clone();
        let last = *samples
            .last()
            .ok_or_else(|| Error::InvalidArgument("empty trace".into()))?;
        ext.samples.resize(needed, last);
        padded = ext;
        &padded
    } else {
        &record.trace
    };
    Ok(segment(trace, sync, scheme, count)?
        .into_iter()
        .map(|w| w.samples.to_vec())
        .collect())
}

/// A record after sync and segmentation.
#[derive(Clone, Debug, PartialEq)]
pub struct FramedRecord {
    pub id: u64,
    pub interval_ms: u32,
    pub bits: Vec<u8>,
    pub windows: Vec<Vec<f64>>,
}

impl FramedRecord {
    pub fn window(&self, k: usize) -> SymbolWindow<'_> {
        SymbolWindow {
            samples: &self.windows[k],
            interval_ms: self.interval_ms,
        }
    }
}

/// Frames every record, looking up each record's scheme by its interval.
pub fn frame_records<'a>(
    records: impl IntoIterator<Item = &'a SequenceRecord>,
    schemes: &[ModulationScheme],
    cfg: &SyncConfig,
) -> Result<Vec<FramedRecord>> {
    records
        .into_iter()
        .map(|r| {
            let scheme = schemes
                .iter()
                .find(|s| s.symbol_interval_ms() == r.interval_ms)
                .ok_or_else(|| {
                    Error::Validation(format!(
                        "record {}: no scheme for {} ms",
                        r.id, r.interval_ms
                    ))
                })?;
            Ok(FramedRecord {
                id: r.id,
                interval_ms: r.interval_ms,
                bits: r.bits.clone(),
                windows: frame_record(r, scheme, cfg)?,
            })
        })
        .collect()
}

/// Per-bin mean pH of one symbol window.
#[derive(Clone, Debug, PartialEq)]
pub struct BinVector {
    pub values: Vec<f64>,
}

impl BinVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Lengths of the `bins` contiguous runs a window of `n` samples is cut into:
/// they differ by at most one, longer runs first.
pub fn bin_lengths(n: usize, bins: usize) -> Result<Vec<usize>> {
    if bins == 0 || bins > n {
        return Err(Error::InsufficientSamples { samples: n, bins });
    }
    let (q, r) = (n / bins, n % bins);
    Ok((0..bins).map(|i| q + usize::from(i < r)).collect())
}

pub fn bin_average(window: &SymbolWindow<'_>, bins: usize) -> Result<BinVector> {
    let lengths = bin_lengths(window.samples.len(), bins)?;
    let mut values = Vec::with_capacity(bins);
    let mut start = 0;
    for len in lengths {
        let run = &window.samples[start..start + len];
        values.push(run.iter().sum::<f64>() / len as f64);
        start += len;
    }
    Ok(BinVector { values })
}

/// `d_i = b_{i+1} - b_i`.
pub fn bin_diff(b: &BinVector) -> Vec<f64> {
    b.values.windows(2).map(|w| w[1] - w[0]).collect()
}

/// `[b_1, b_B, d_1 .. d_{B-1}, interval / 500]`, length `B + 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

pub fn extract_features(b: &BinVector, interval_ms: u32) -> Result<FeatureVector> {
    if b.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "feature extraction needs at least 2 bins, got {}",
            b.len()
        )));
    }
    let mut values = Vec::with_capacity(b.len() + 2);
    values.push(b.values[0]);
    values.push(b.values[b.len() - 1]);
    values.extend(bin_diff(b));
    values.push(f64::from(interval_ms) / DURATION_NORM_MS);
    Ok(FeatureVector { values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_dataset, modulate, simulate_trace, ChannelModel};
    use crate::numerics::seed_stream;
    use proptest::prelude::*;

    fn window(samples: &[f64]) -> SymbolWindow<'_> {
        SymbolWindow {
            samples,
            interval_ms: 250,
        }
    }

    fn clean_trace(bits: &[u8], model: &ChannelModel) -> PhTrace {
        let scheme = ModulationScheme::default();
        let ev = modulate(bits, &scheme).unwrap();
        simulate_trace(&ev, &model.noiseless(), &scheme, &mut seed_stream(0, 0)).unwrap()
    }

    #[test]
    fn sync_at_origin() {
        // Without lag stages the received pulse starts with the injection.
        let scheme = ModulationScheme::default();
        let tr = clean_trace(&[0, 1, 1, 0, 1], &ChannelModel::default().direct());
        let idx = detect_sync(&tr, &scheme).unwrap();
        assert!(idx <= 1, "{idx}");
    }

    #[test]
    fn noisy_sync_stays_near_clean_estimate() {
        let scheme = ModulationScheme::default();
        let model = ChannelModel::default();
        let clean = detect_sync(&clean_trace(&[0, 1], &model), &scheme).unwrap() as i64;
        let d = generate_dataset(&[scheme], &model, 100, 4, 11).unwrap();
        let offsets: Vec<i64> = d
            .records
            .iter()
            .map(|r| detect_sync(&r.trace, &scheme).unwrap() as i64 - clean)
            .collect();
        // never off by half of the shortest symbol, usually within 75 ms
        assert!(offsets.iter().all(|o| o.abs() <= 25), "{offsets:?}");
        assert!(offsets.iter().filter(|o| o.abs() <= 15).count() >= 90, "{offsets:?}");
        let mean = offsets.iter().sum::<i64>() as f64 / offsets.len() as f64;
        assert!(mean.abs() < 3.0, "{mean}");
    }

    #[test]
    fn framing_pads_delayed_tail() {
        let scheme = ModulationScheme::default();
        let d =
            generate_dataset(&[scheme], &ChannelModel::default().noiseless(), 2, 12, 2).unwrap();
        let r = &d.records[0];
        let ws = frame_record(r, &scheme, &SyncConfig::default()).unwrap();
        assert_eq!(ws.len(), 12);
        assert!(ws.iter().all(|w| w.len() == 50));
        let last = *r.trace.samples.last().unwrap();
        assert_eq!(*ws[11].last().unwrap(), last);
        for (w, &bit) in ws.iter().zip(&r.bits) {
            let b = bin_average(&window(w), 9).unwrap();
            assert_eq!(bin_diff(&b)[0] < 0.0, bit == 0);
        }
    }

    #[test]
    fn sync_shift_equivariant() {
        let scheme = ModulationScheme::default();
        for model in [ChannelModel::default(), ChannelModel::default().direct()] {
            // A short lead-in keeps the reference estimate clear of the clamp at zero.
            let mut tr = clean_trace(&[1, 0, 0, 1], &model);
            tr.samples.splice(0..0, [7.0; 5]);
            let base = detect_sync(&tr, &scheme).unwrap();
            assert!(base >= 1, "{base}");
            for w in [1usize, 7, 50] {
                let mut shifted = tr.clone();
                let mut samples = vec![7.0; w];
                samples.extend_from_slice(&tr.samples);
                shifted.samples = samples;
                assert_eq!(detect_sync(&shifted, &scheme).unwrap(), base + w);
            }
        }
    }

    #[test]
    fn flat_trace_has_no_sync() {
        let scheme = ModulationScheme::default();
        let tr = PhTrace {
            sample_rate_hz: 200,
            samples: vec![7.0; 1000],
            symbol_interval_ms: 250,
            sequence_id: 0,
        };
        assert!(matches!(detect_sync(&tr, &scheme), Err(Error::NoSyncFound)));
    }

    #[test]
    fn segment_counts_and_tiling() {
        let d = generate_dataset(
            &[ModulationScheme::default()],
            &ChannelModel::default(),
            2,
            120,
            4,
        )
        .unwrap();
        let tr = &d.records[0].trace;
        let scheme = ModulationScheme::default();
        let ws = segment(tr, 0, &scheme, 120).unwrap();
        assert_eq!(ws.len(), 120);
        assert!(ws.iter().all(|w| w.samples.len() == 50));
        for pair in ws.windows(2) {
            let end = pair[0].samples.as_ptr_range().end;
            assert_eq!(end, pair[1].samples.as_ptr());
        }
        match segment(tr, 0, &scheme, 121) {
            Err(Error::TruncatedTrace {
                requested: 121,
                available: 120,
            }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn uneven_interval_windows() {
        let scheme = ModulationScheme::with_pause(304);
        let d = generate_dataset(&[scheme], &ChannelModel::default(), 2, 10, 4).unwrap();
        let ws = segment(&d.records[0].trace, 0, &scheme, 10).unwrap();
        let lens: Vec<usize> = ws.iter().map(|w| w.samples.len()).collect();
        assert!(lens.iter().all(|&l| l == 66 || l == 67));
        assert_eq!(lens.iter().sum::<usize>(), (10 * 334 * 200) / 1000);
    }

    #[test]
    fn binning_examples() {
        let c = [7.0; 12];
        assert_eq!(bin_average(&window(&c), 4).unwrap().values, vec![7.0; 4]);
        let s: Vec<f64> = (1..=8).map(f64::from).collect();
        assert_eq!(
            bin_average(&window(&s), 4).unwrap().values,
            vec![1.5, 3.5, 5.5, 7.5]
        );
        let mut expected = vec![2usize; 20];
        expected.extend(vec![1usize; 10]);
        assert_eq!(bin_lengths(50, 30).unwrap(), expected);
        assert!(matches!(
            bin_average(&window(&s), 9),
            Err(Error::InsufficientSamples {
                samples: 8,
                bins: 9
            })
        ));
    }

    #[test]
    fn diff_and_features() {
        let b = BinVector {
            values: vec![7.0, 7.0, 7.0],
        };
        assert_eq!(bin_diff(&b), vec![0.0, 0.0]);
        let b = BinVector {
            values: vec![1.5, 3.5, 5.5, 7.5],
        };
        assert_eq!(bin_diff(&b), vec![2.0, 2.0, 2.0]);
        let f = extract_features(
            &BinVector {
                values: vec![7.0, 7.0],
            },
            500,
        )
        .unwrap();
        assert_eq!(f.values, vec![7.0, 7.0, 0.0, 1.0]);
        let f = extract_features(
            &BinVector {
                values: vec![6.0, 8.0],
            },
            250,
        )
        .unwrap();
        assert_eq!(f.values, vec![6.0, 8.0, 2.0, 0.5]);
        for bins in [8usize, 9, 30] {
            let b = BinVector {
                values: (0..bins).map(|i| i as f64).collect(),
            };
            assert_eq!(extract_features(&b, 334).unwrap().values.len(), bins + 2);
        }
        assert!(extract_features(&BinVector { values: vec![1.0] }, 250).is_err());
    }

    proptest! {
        #[test]
        fn diff_telescopes(b in prop::collection::vec(-10.0f64..10.0, 2..40)) {
            let bv = BinVector { values: b.clone() };
            let s: f64 = bin_diff(&bv).iter().sum();
            prop_assert!((s - (b[b.len() - 1] - b[0])).abs() < 1e-9);
        }

        #[test]
        fn binning_preserves_mean(
            xs in prop::collection::vec(-5.0f64..5.0, 2..120),
            bins in 2usize..30,
        ) {
            prop_assume!(bins <= xs.len());
            let b = bin_average(&window(&xs), bins).unwrap();
            let lens = bin_lengths(xs.len(), bins).unwrap();
            let weighted: f64 = b.values.iter().zip(&lens).map(|(v, &l)| v * l as f64).sum();
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            prop_assert!((weighted / xs.len() as f64 - mean).abs() < 1e-9);
            prop_assert!(lens.windows(2).all(|w| w[0] >= w[1] && w[0] - w[1] <= 1));
        }
    }
}
