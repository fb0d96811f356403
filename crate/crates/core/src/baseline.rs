//! Threshold detector on a single bin difference.
//!
//! A window is cut into `B` bins, and bit 0 is declared when the `gamma`-th
//! difference `d_gamma = b_{gamma+1} - b_gamma` is not positive. `(B, gamma)`
//! are picked by exhaustive search on training windows.

use std::collections::BTreeMap;

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::framing::{bin_average, bin_diff, FramedRecord, SymbolWindow};

/// Largest bin count searched by default.
pub const MAX_BINS: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BaselineParams {
    pub bins: usize,
    /// 1-based index into the difference vector.
    pub gamma: usize,
    pub fitted_per_interval: bool,
}

impl BaselineParams {
    pub fn validate(&self) -> Result<()> {
        if self.bins < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 bins, got {}",
                self.bins
            )));
        }
        if self.gamma == 0 || self.gamma >= self.bins {
            return Err(Error::IndexOutOfRange {
                index: self.gamma,
                max: self.bins - 1,
            });
        }
        Ok(())
    }

    pub fn detect_window(&self, window: &SymbolWindow<'_>) -> Result<u8> {
        let b = bin_average(window, self.bins)?;
        detect_bit(&bin_diff(&b), self.gamma)
    }
}

/// 0 iff `d[gamma] <= 0` (1-based `gamma`).
pub fn detect_bit(d: &[f64], gamma: usize) -> Result<u8> {
    if gamma == 0 || gamma > d.len() {
        return Err(Error::IndexOutOfRange {
            index: gamma,
            max: d.len(),
        });
    }
    Ok(u8::from(d[gamma - 1] > 0.0))
}

/// Outcome of a grid search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridFit {
    pub params: BaselineParams,
    pub errors: usize,
    pub symbols: usize,
}

impl GridFit {
    pub fn train_ber(&self) -> f64 {
        self.errors as f64 / self.symbols as f64
    }
}

/// Default search range `2..=min(30, shortest window)`.
pub fn default_bin_range(records: &[FramedRecord]) -> Vec<usize> {
    let shortest = records
        .iter()
        .flat_map(|r| r.windows.iter().map(Vec::len))
        .min()
        .unwrap_or(0);
    (2..=MAX_BINS.min(shortest)).collect()
}

/// Exhaustive search over `bin_range` x `1..B`, minimizing training errors.
/// Ties go to the smaller `B`, then the smaller `gamma`.
pub fn fit_grid(train: &[FramedRecord], bin_range: &[usize]) -> Result<GridFit> {
    let symbols: usize = train.iter().map(|r| r.windows.len()).sum();
    if symbols == 0 {
        return Err(Error::EmptyDataset(
            "no training symbols for the baseline".into(),
        ));
    }
    if bin_range.is_empty() {
        return Err(Error::InvalidArgument("empty bin range".into()));
    }
    let mut sorted = bin_range.to_vec();
    sorted.sort_unstable();
    sorted.dedup();

    let mut best: Option<GridFit> = None;
    for &bins in &sorted {
        if bins < 2 {
            return Err(Error::InvalidArgument(format!("bin count {bins} below 2")));
        }
        // errors[g] counts mistakes for gamma = g + 1
        let mut errors = vec![0usize; bins - 1];
        for r in train {
            for (k, &bit) in r.bits.iter().enumerate() {
                let d = bin_diff(&bin_average(&r.window(k), bins)?);
                for (e, &dv) in errors.iter_mut().zip(&d) {
                    if u8::from(dv > 0.0) != bit {
                        *e += 1;
                    }
                }
            }
        }
        for (g, &e) in errors.iter().enumerate() {
            if best.map_or(true, |b| e < b.errors) {
                best = Some(GridFit {
                    params: BaselineParams {
                        bins,
                        gamma: g + 1,
                        fitted_per_interval: false,
                    },
                    errors: e,
                    symbols,
                });
            }
        }
    }
    Ok(best.expect("non-empty grid"))
}

/// Baseline with either one parameter pair per symbol interval or one pooled pair.
#[derive(Clone, Debug, PartialEq)]
pub struct BaselineDetector {
    pub per_interval: BTreeMap<u32, GridFit>,
    pub pooled: Option<GridFit>,
}

impl BaselineDetector {
    /// Fits on `train`. `bin_range = None` uses [`default_bin_range`] per fit.
    pub fn fit(train: &[FramedRecord], bin_range: Option<&[usize]>, pooled: bool) -> Result<Self> {
        let range_for = |recs: &[FramedRecord]| -> Vec<usize> {
            bin_range.map_or_else(|| default_bin_range(recs), <[usize]>::to_vec)
        };
        if pooled {
            return Ok(BaselineDetector {
                per_interval: BTreeMap::new(),
                pooled: Some(fit_grid(train, &range_for(train))?),
            });
        }
        let mut groups: BTreeMap<u32, Vec<FramedRecord>> = BTreeMap::new();
        for r in train {
            groups.entry(r.interval_ms).or_default().push(r.clone());
        }
        if groups.is_empty() {
            return Err(Error::EmptyDataset(
                "no training records for the baseline".into(),
            ));
        }
        let mut per_interval = BTreeMap::new();
        for (iv, recs) in groups {
            let mut fit = fit_grid(&recs, &range_for(&recs))?;
            fit.params.fitted_per_interval = true;
            per_interval.insert(iv, fit);
        }
        Ok(BaselineDetector {
            per_interval,
            pooled: None,
        })
    }

    pub fn params_for(&self, interval_ms: u32) -> Result<BaselineParams> {
        if let Some(p) = self.pooled {
            return Ok(p.params);
        }
        self.per_interval
            .get(&interval_ms)
            .map(|f| f.params)
            .ok_or_else(|| Error::Validation(format!("baseline not fitted for {interval_ms} ms")))
    }

    pub fn predict(&self, record: &FramedRecord) -> Result<Vec<u8>> {
        let params = self.params_for(record.interval_ms)?;
        (0..record.windows.len())
            .map(|k| params.detect_window(&record.window(k)))
            .collect()
    }
}

pub const PARAMS_FORMAT: &str = "phdetect-baseline";
pub const PARAMS_VERSION: u32 = 1;

impl BaselineDetector {
    /// Text form:
    ///
    /// ```text
    /// format=phdetect-baseline
    /// format_version=1
    /// mode=per_interval
    /// interval_ms=250 bins=3 gamma=1 train_errors=1512 train_symbols=10080
    /// ...one line per interval...
    /// end
    /// ```
    ///
    /// With `mode=pooled` there is a single line whose `interval_ms` is `all`.
    pub fn to_text(&self) -> String {
        let mode = if self.pooled.is_some() { "pooled" } else { "per_interval" };
        let mut s = format!("format={PARAMS_FORMAT}\nformat_version={PARAMS_VERSION}\nmode={mode}\n");
        let fits: Vec<(String, &GridFit)> = match &self.pooled {
            Some(f) => vec![("all".into(), f)],
            None => self.per_interval.iter().map(|(iv, f)| (iv.to_string(), f)).collect(),
        };
        for (iv, f) in fits {
            let _ = writeln!(
                s,
                "interval_ms={iv} bins={} gamma={} train_errors={} train_symbols={}",
                f.params.bins, f.params.gamma, f.errors, f.symbols
            );
        }
        s.push_str("end\n");
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let mut expect = |key: &str| -> Result<String> {
            let line = lines
                .next()
                .ok_or_else(|| Error::Truncated(format!("baseline file ends before {key}")))?;
            line.strip_prefix(key)
                .and_then(|r| r.strip_prefix('='))
                .map(str::to_string)
                .ok_or_else(|| Error::MalformedHeader(format!("expected {key}=..., got {line:?}")))
        };
        if expect("format")? != PARAMS_FORMAT {
            return Err(Error::MalformedHeader("not a baseline parameter file".into()));
        }
        let version = expect("format_version")?;
        if version != PARAMS_VERSION.to_string() {
            return Err(Error::UnsupportedVersion {
                found: version,
                expected: PARAMS_VERSION.to_string(),
            });
        }
        let pooled = match expect("mode")?.as_str() {
            "pooled" => true,
            "per_interval" => false,
            m => return Err(Error::MalformedHeader(format!("unknown mode {m:?}"))),
        };
        let mut det = BaselineDetector {
            per_interval: BTreeMap::new(),
            pooled: None,
        };
        let mut ended = false;
        for line in lines {
            if line == "end" {
                ended = true;
                break;
            }
            let bad = || Error::MalformedHeader(format!("bad baseline line {line:?}"));
            let mut fields = BTreeMap::new();
            for kv in line.split(' ') {
                let (k, v) = kv.split_once('=').ok_or_else(bad)?;
                fields.insert(k, v);
            }
            let num = |k: &str| -> Result<usize> {
                fields.get(k).and_then(|v| v.parse().ok()).ok_or_else(bad)
            };
            let fit = GridFit {
                params: BaselineParams {
                    bins: num("bins")?,
                    gamma: num("gamma")?,
                    fitted_per_interval: !pooled,
                },
                errors: num("train_errors")?,
                symbols: num("train_symbols")?,
            };
            fit.params.validate()?;
            let iv = *fields.get("interval_ms").ok_or_else(bad)?;
            match (pooled, iv) {
                (true, "all") if det.pooled.is_none() => det.pooled = Some(fit),
                (false, iv) => {
                    let iv: u32 = iv.parse().map_err(|_| bad())?;
                    if det.per_interval.insert(iv, fit).is_some() {
                        return Err(Error::Validation(format!("interval {iv} listed twice")));
                    }
                }
                _ => return Err(bad()),
            }
        }
        if !ended {
            return Err(Error::Truncated("baseline file has no end line".into()));
        }
        if det.pooled.is_none() && det.per_interval.is_empty() {
            return Err(Error::Validation("baseline file lists no parameters".into()));
        }
        Ok(det)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_text(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}
