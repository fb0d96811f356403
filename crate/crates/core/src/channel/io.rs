//! Text format for datasets.
//!
//! ```text
//! format=phdetect-dataset
//! format_version=1
//! sample_rate_hz=200
//! injection_ms=30
//! sync_pulse_ms=100
//! sync_silence_ms=900
//! intervals=250,334,380,500
//! n=100
//! seq_len=120
//! seed=42
//! prng=chacha8
//! ph_baseline=7
//! injection_amplitude=1
//! decay_tau_ms=400
//! nonlinearity_scale=1
//! noise_std=0.6
//! jitter_ms=10
//! response_stages=3
//! response_tau_ms=100
//! records=400
//! end_header
//! id=0
//! interval_ms=250
//! split=train
//! bits=0110...
//! samples=7,6.9981,...
//! ...one five-line block per record...
//! end_records
//! ```
//!
//! Every line is `key=value` in the order shown. Header keys are all
//! required. Floats use Rust's shortest round-trip formatting, so a read
//! returns bit-identical values. `split` is one of `none`, `train`, `test`.
//! A file without the `end_records` line is reported as truncated.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::dataset::{Dataset, SequenceRecord, Split};
use super::model::{ChannelModel, PhTrace};
use super::scheme::ModulationScheme;
use crate::error::{Error, Result};
use crate::numerics::rng::ALGORITHM_ID;

pub const FORMAT_NAME: &str = "phdetect-dataset";
pub const FORMAT_VERSION: u32 = 1;

const HEADER_KEYS: [&str; 20] = [
    "format",
    "format_version",
    "sample_rate_hz",
    "injection_ms",
    "sync_pulse_ms",
    "sync_silence_ms",
    "intervals",
    "n",
    "seq_len",
    "seed",
    "prng",
    "ph_baseline",
    "injection_amplitude",
    "decay_tau_ms",
    "nonlinearity_scale",
    "noise_std",
    "jitter_ms",
    "response_stages",
    "response_tau_ms",
    "records",
];

pub fn write_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_to(dataset, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_to(dataset: &Dataset, w: &mut impl Write) -> std::io::Result<()> {
    let first = dataset.schemes.first().copied().unwrap_or_default();
    let m = &dataset.model;
    let intervals: Vec<String> = dataset.intervals().iter().map(u32::to_string).collect();
    writeln!(w, "format={FORMAT_NAME}")?;
    writeln!(w, "format_version={FORMAT_VERSION}")?;
    writeln!(w, "sample_rate_hz={}", first.sample_rate_hz)?;
    writeln!(w, "injection_ms={}", first.injection_ms)?;
    writeln!(w, "sync_pulse_ms={}", first.sync_pulse_ms)?;
    writeln!(w, "sync_silence_ms={}", first.sync_silence_ms)?;
    writeln!(w, "intervals={}", intervals.join(","))?;
    writeln!(w, "n={}", dataset.n_sequences)?;
    writeln!(w, "seq_len={}", dataset.seq_len)?;
    writeln!(w, "seed={}", dataset.master_seed)?;
    writeln!(w, "prng={ALGORITHM_ID}")?;
    writeln!(w, "ph_baseline={}", m.ph_baseline)?;
    writeln!(w, "injection_amplitude={}", m.injection_amplitude)?;
    writeln!(w, "decay_tau_ms={}", m.decay_tau_ms)?;
    writeln!(w, "nonlinearity_scale={}", m.nonlinearity_scale)?;
    writeln!(w, "noise_std={}", m.noise_std)?;
    writeln!(w, "jitter_ms={}", m.jitter_ms)?;
    writeln!(w, "response_stages={}", m.response_stages)?;
    writeln!(w, "response_tau_ms={}", m.response_tau_ms)?;
    writeln!(w, "records={}", dataset.records.len())?;
    writeln!(w, "end_header")?;
    for r in &dataset.records {
        writeln!(w, "id={}", r.id)?;
        writeln!(w, "interval_ms={}", r.interval_ms)?;
        writeln!(w, "split={}", r.split.as_str())?;
        let bits: String = r
            .bits
            .iter()
            .map(|&b| if b == 0 { '0' } else { '1' })
            .collect();
        writeln!(w, "bits={bits}")?;
        write!(w, "samples=")?;
        for (i, v) in r.trace.samples.iter().enumerate() {
            if i > 0 {
                w.write_all(b",")?;
            }
            write!(w, "{v}")?;
        }
        writeln!(w)?;
    }
    writeln!(w, "end_records")
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_from(BufReader::new(file))
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line_no: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_line(&mut self) -> Result<Option<String>> {
        match self.inner.next() {
            None => Ok(None),
            Some(Ok(l)) => {
                self.line_no += 1;
                Ok(Some(l))
            }
            Some(Err(e)) => Err(Error::io("<dataset>", e)),
        }
    }

    /// Next `key=value` line inside the record section.
    fn record_field(&mut self, key: &str) -> Result<String> {
        let line = self
            .next_line()?
            .ok_or_else(|| Error::Truncated(format!("end of file while expecting `{key}=`")))?;
        match line.split_once('=') {
            Some((k, v)) if k == key => Ok(v.to_string()),
            _ => Err(Error::Validation(format!(
                "line {}: expected `{key}=...`, found {:?}",
                self.line_no,
                truncate(&line)
            ))),
        }
    }
}

fn truncate(s: &str) -> &str {
    match s.char_indices().nth(40) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

fn header_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::MalformedHeader(format!("{key}: cannot parse {value:?}")))
}

pub fn read_from(reader: impl BufRead) -> Result<Dataset> {
    let mut lines = Lines {
        inner: reader.lines(),
        line_no: 0,
    };

    let mut header: Vec<(String, String)> = Vec::new();
    loop {
        let Some(line) = lines.next_line()? else {
            return Err(Error::MalformedHeader("missing end_header".into()));
        };
        if line == "end_header" {
            break;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::MalformedHeader(format!(
                "line {}: not key=value: {:?}",
                lines.line_no,
                truncate(&line)
            )));
        };
        header.push((k.to_string(), v.to_string()));
    }
    let get = |key: &str| -> Result<&str> {
        header
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::MalformedHeader(format!("missing key {key}")))
    };
    if get("format")? != FORMAT_NAME {
        return Err(Error::MalformedHeader(format!(
            "format is {:?}",
            get("format")?
        )));
    }
    let version = get("format_version")?;
    if version != FORMAT_VERSION.to_string() {
        return Err(Error::UnsupportedVersion {
            found: version.to_string(),
            expected: FORMAT_VERSION.to_string(),
        });
    }
    if let Some((k, _)) = header
        .iter()
        .find(|(k, _)| !HEADER_KEYS.contains(&k.as_str()))
    {
        return Err(Error::MalformedHeader(format!("unknown key {k}")));
    }
    if get("prng")? != ALGORITHM_ID {
        return Err(Error::MalformedHeader(format!(
            "unknown prng {:?}",
            get("prng")?
        )));
    }

    let base = ModulationScheme {
        injection_ms: header_num("injection_ms", get("injection_ms")?)?,
        pause_ms: 1,
        sync_pulse_ms: header_num("sync_pulse_ms", get("sync_pulse_ms")?)?,
        sync_silence_ms: header_num("sync_silence_ms", get("sync_silence_ms")?)?,
        sample_rate_hz: header_num("sample_rate_hz", get("sample_rate_hz")?)?,
    };
    let mut schemes = Vec::new();
    for iv in get("intervals")?.split(',') {
        let iv: u32 = header_num("intervals", iv)?;
        if iv <= base.injection_ms {
            return Err(Error::MalformedHeader(format!("interval {iv} too short")));
        }
        let s = ModulationScheme {
            pause_ms: iv - base.injection_ms,
            ..base
        };
        s.validate()
            .map_err(|e| Error::MalformedHeader(e.to_string()))?;
        schemes.push(s);
    }
    let model = ChannelModel {
        ph_baseline: header_num("ph_baseline", get("ph_baseline")?)?,
        injection_amplitude: header_num("injection_amplitude", get("injection_amplitude")?)?,
        decay_tau_ms: header_num("decay_tau_ms", get("decay_tau_ms")?)?,
        nonlinearity_scale: header_num("nonlinearity_scale", get("nonlinearity_scale")?)?,
        noise_std: header_num("noise_std", get("noise_std")?)?,
        jitter_ms: header_num("jitter_ms", get("jitter_ms")?)?,
        response_stages: header_num("response_stages", get("response_stages")?)?,
        response_tau_ms: header_num("response_tau_ms", get("response_tau_ms")?)?,
    };
    model
        .validate()
        .map_err(|e| Error::MalformedHeader(e.to_string()))?;
    let n_records: usize = header_num("records", get("records")?)?;

    let mut records = Vec::with_capacity(n_records);
    for _ in 0..n_records {
        let id: u64 = lines
            .record_field("id")?
            .parse()
            .map_err(|_| Error::Validation(format!("line {}: bad id", lines.line_no)))?;
        let interval_ms: u32 = lines
            .record_field("interval_ms")?
            .parse()
            .map_err(|_| Error::Validation(format!("line {}: bad interval", lines.line_no)))?;
        let split_s = lines.record_field("split")?;
        let split = Split::parse(&split_s)
            .ok_or_else(|| Error::Validation(format!("record {id}: bad split {split_s:?}")))?;
        let bits = lines
            .record_field("bits")?
            .bytes()
            .map(|c| match c {
                b'0' => Ok(0u8),
                b'1' => Ok(1u8),
                _ => Err(Error::Validation(format!(
                    "record {id}: bad bit {:?}",
                    c as char
                ))),
            })
            .collect::<Result<Vec<u8>>>()?;
        let samples_s = lines.record_field("samples")?;
        let samples = if samples_s.is_empty() {
            Vec::new()
        } else {
            samples_s
                .split(',')
                .map(|v| {
                    v.parse::<f64>().map_err(|_| {
                        Error::Truncated(format!(
                            "record {id}: unparsable sample {:?}",
                            truncate(v)
                        ))
                    })
                })
                .collect::<Result<Vec<f64>>>()?
        };
        let sample_rate_hz = base.sample_rate_hz;
        records.push(SequenceRecord {
            id,
            bits,
            interval_ms,
            split,
            trace: PhTrace {
                sample_rate_hz,
                samples,
                symbol_interval_ms: interval_ms,
                sequence_id: id,
            },
        });
    }
    match lines.next_line()? {
        Some(l) if l == "end_records" => {}
        Some(l) => {
            return Err(Error::Validation(format!(
                "line {}: expected end_records, found {:?}",
                lines.line_no,
                truncate(&l)
            )))
        }
        None => return Err(Error::Truncated("missing end_records".into())),
    }

    let dataset = Dataset {
        schemes,
        model,
        n_sequences: header_num("n", get("n")?)?,
        seq_len: header_num("seq_len", get("seq_len")?)?,
        master_seed: header_num("seed", get("seed")?)?,
        records,
    };
    dataset.validate()?;
    Ok(dataset)
}
