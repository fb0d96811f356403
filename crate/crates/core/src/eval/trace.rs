//! Columnar export of one received trace for plotting.
//!
//! ```text
//! # record=17 interval_ms=250 bits=120 detected_sync=34
//! sample,time_ms,ph,event
//! 0,0,7.0132,sync
//! 1,5,6.9871,
//! ...
//! 200,1000,7.1043,bit0=1
//! ```
//!
//! One row per trace sample. `event` marks the start of the sync pulse and
//! the nominal start of every symbol (with its transmitted bit), both as
//! scheduled by the transmitter. `detected_sync` is the receiver's estimate,
//! or `none`.

use std::fmt::Write as _;

use crate::channel::Dataset;
use crate::error::{Error, Result};
use crate::framing::{detect_sync_with, SyncConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct TraceDump {
    pub id: u64,
    pub interval_ms: u32,
    pub bits: usize,
    pub detected_sync: Option<usize>,
    pub time_ms: Vec<f64>,
    pub ph: Vec<f64>,
    /// `(sample index, label)` in ascending sample order.
    pub events: Vec<(usize, String)>,
}

pub fn dump_trace(dataset: &Dataset, id: u64, sync: &SyncConfig) -> Result<TraceDump> {
    let rec = dataset.record(id)?;
    let scheme = dataset.scheme_for(rec.interval_ms)?;
    let trace = &rec.trace;
    let mut events = vec![(0, "sync".to_string())];
    for (k, bit) in rec.bits.iter().enumerate() {
        events.push((scheme.symbol_start_sample(k), format!("bit{k}={bit}")));
    }
    if let Some((i, _)) = events.iter().find(|(i, _)| *i >= trace.len()) {
        return Err(Error::Validation(format!(
            "record {id}: event at sample {i} beyond trace of {}",
            trace.len()
        )));
    }
    Ok(TraceDump {
        id,
        interval_ms: rec.interval_ms,
        bits: rec.bits.len(),
        detected_sync: detect_sync_with(trace, scheme, sync).ok(),
        time_ms: (0..trace.len()).map(|i| trace.time_ms(i)).collect(),
        ph: trace.samples.clone(),
        events,
    })
}

pub fn write_trace_csv(dump: &TraceDump) -> String {
    let mut s = String::new();
    let sync = dump
        .detected_sync
        .map_or_else(|| "none".to_string(), |v| v.to_string());
    let _ = writeln!(
        s,
        "# record={} interval_ms={} bits={} detected_sync={sync}",
        dump.id, dump.interval_ms, dump.bits
    );
    s.push_str("sample,time_ms,ph,event\n");
    let mut ev = dump.events.iter().peekable();
    for (i, (t, p)) in dump.time_ms.iter().zip(&dump.ph).enumerate() {
        let mut label = "";
        if let Some((_, l)) = ev.next_if(|(j, _)| *j == i) {
            label = l;
        }
        let _ = writeln!(s, "{i},{t},{p},{label}");
    }
    s
}

pub fn read_trace_csv(text: &str) -> Result<TraceDump> {
    let mut lines = text.lines();
    let bad = |what: &str| Error::MalformedHeader(format!("trace file: {what}"));
    let meta = lines
        .next()
        .and_then(|l| l.strip_prefix("# "))
        .ok_or_else(|| bad("missing metadata line"))?;
    let field = |key: &str| -> Result<String> {
        meta.split(' ')
            .find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
            .map(str::to_string)
            .ok_or_else(|| bad(&format!("missing {key}")))
    };
    let id = field("record")?.parse().map_err(|_| bad("record"))?;
    let interval_ms = field("interval_ms")?.parse().map_err(|_| bad("interval_ms"))?;
    let bits = field("bits")?.parse().map_err(|_| bad("bits"))?;
    let detected_sync = match field("detected_sync")?.as_str() {
        "none" => None,
        v => Some(v.parse().map_err(|_| bad("detected_sync"))?),
    };
    if lines.next() != Some("sample,time_ms,ph,event") {
        return Err(bad("missing column header"));
    }
    let mut dump = TraceDump {
        id,
        interval_ms,
        bits,
        detected_sync,
        time_ms: Vec::new(),
        ph: Vec::new(),
        events: Vec::new(),
    };
    for (n, line) in lines.enumerate() {
        let f: Vec<&str> = line.splitn(4, ',').collect();
        let row_err = || bad(&format!("row {n}: {line:?}"));
        if f.len() != 4 || f[0].parse::<usize>().map_err(|_| row_err())? != n {
            return Err(row_err());
        }
        dump.time_ms.push(f[1].parse().map_err(|_| row_err())?);
        dump.ph.push(f[2].parse().map_err(|_| row_err())?);
        if !f[3].is_empty() {
            dump.events.push((n, f[3].to_string()));
        }
    }
    Ok(dump)
}
