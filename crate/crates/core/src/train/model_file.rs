//! Binary model files.
//!
//! All integers are little-endian. Strings are a `u32` byte count followed by
//! UTF-8 bytes.
//!
//! ```text
//! magic          8 bytes  "PHDMODEL"
//! version        u32      1
//! arch           string   dense | cnn | lstm3 | cnn_lstm3 | bilstm3
//! tau            u32      training window length (1 for feedforward nets)
//! bins           u32      bins per symbol window
//! widths         4 x u32  dense, filters, lstm, depth
//! trunk_len      u32      pretrained leading layers (0 if none)
//! training       u32 epochs, u32 batch size, u64 seed, u8 trunk fine-tuned
//! input width F  u32
//! shift, scale   2F x f64 input normalization
//! layer count L  u32
//! L times:       kind string, pool size u32 (0 unless maxpool1d),
//!                tensor count u32, then per tensor: rank u32, rank x u32 dims
//! param count P  u64
//! params         P x f64, tensors in layer-table order, row-major
//! checksum       u64      CRC-64/XZ of every preceding byte
//! ```
//!
//! Reading checks the magic, then the version, then the checksum, and only
//! then parses the descriptor. The descriptor must match the layer table of
//! a freshly built network of the stated architecture and widths.

use std::path::Path;

use crc::{Crc, CRC_64_XZ};

use crate::error::{Error, Result};
use crate::nn::{build_with_widths, Architecture, InputNorm, Layer, Network, TrainMeta, Widths};
use crate::numerics::seed_stream;
use crate::scalar::Scalar;

pub const MODEL_MAGIC: &[u8; 8] = b"PHDMODEL";
pub const MODEL_VERSION: u32 = 1;

const CRC: Crc<u64> = Crc::<u64>::new(&CRC_64_XZ);

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn str(&mut self, s: &str) {
        self.u32(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }
}

fn pool_of<T>(layer: &Layer<T>) -> usize {
    match layer {
        Layer::MaxPool1d { pool } => *pool,
        _ => 0,
    }
}

pub fn model_to_bytes<T: Scalar>(net: &Network<T>) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MODEL_MAGIC);
    w.u32(MODEL_VERSION as usize);
    w.str(net.arch.name());
    w.u32(net.seq_len);
    w.u32(net.bins);
    for v in [net.widths.dense, net.widths.filters, net.widths.lstm, net.widths.depth] {
        w.u32(v);
    }
    w.u32(net.trunk_len);
    w.u32(net.meta.epochs);
    w.u32(net.meta.batch_size);
    w.0.extend_from_slice(&net.meta.seed.to_le_bytes());
    w.0.push(u8::from(net.meta.fine_tuned_trunk));
    w.u32(net.input_width());
    for v in net.input_norm.shift.iter().chain(&net.input_norm.scale) {
        w.f64(v.as_f64());
    }
    w.u32(net.layers.len());
    for layer in &net.layers {
        w.str(layer.kind());
        w.u32(pool_of(layer));
        let tensors = layer.tensors();
        w.u32(tensors.len());
        for t in tensors {
            w.u32(t.shape().len());
            for &d in t.shape() {
                w.u32(d);
            }
        }
    }
    w.0.extend_from_slice(&(net.param_count() as u64).to_le_bytes());
    for t in net.params() {
        for v in t.data() {
            w.f64(v.as_f64());
        }
    }
    let sum = CRC.checksum(&w.0);
    w.0.extend_from_slice(&sum.to_le_bytes());
    w.0
}

pub fn save_model<T: Scalar>(net: &Network<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, model_to_bytes(net)).map_err(|e| Error::io(path, e))
}

pub fn load_model<T: Scalar>(path: impl AsRef<Path>) -> Result<Network<T>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    model_from_bytes(&bytes)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

fn descriptor(msg: impl Into<String>) -> Error {
    Error::Descriptor(msg.into())
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| descriptor("layout runs past the end of the payload"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }

    fn str(&mut self) -> Result<String> {
        let n = self.u32()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| descriptor("string is not UTF-8"))
    }
}

pub fn model_from_bytes<T: Scalar>(bytes: &[u8]) -> Result<Network<T>> {
    let head = MODEL_MAGIC.len() + 4;
    if bytes.len() < head + 8 {
        return Err(Error::Truncated(format!("model file has only {} bytes", bytes.len())));
    }
    if &bytes[..MODEL_MAGIC.len()] != MODEL_MAGIC {
        return Err(Error::MalformedHeader("not a model file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != MODEL_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version.to_string(),
            expected: MODEL_VERSION.to_string(),
        });
    }
    let (payload, tail) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().expect("8 bytes"));
    let computed = CRC.checksum(payload);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }

    let mut r = Reader {
        buf: payload,
        pos: head,
    };
    let name = r.str()?;
    let arch: Architecture = name
        .parse()
        .map_err(|_| descriptor(format!("unknown architecture {name:?}")))?;
    let seq_len = r.u32()?;
    let bins = r.u32()?;
    let widths = Widths {
        dense: r.u32()?,
        filters: r.u32()?,
        lstm: r.u32()?,
        depth: r.u32()?,
    };
    let trunk_len = r.u32()?;
    let meta = TrainMeta {
        epochs: r.u32()?,
        batch_size: r.u32()?,
        seed: r.u64()?,
        fine_tuned_trunk: match r.take(1)?[0] {
            0 => false,
            1 => true,
            b => return Err(descriptor(format!("fine-tune flag {b}"))),
        },
    };
    let mut net: Network<T> = build_with_widths(arch, widths, &mut seed_stream(0, 0))
        .map_err(|e| descriptor(format!("cannot rebuild {arch}: {e}")))?;
    if bins != net.bins || trunk_len != net.trunk_len || seq_len == 0 {
        return Err(descriptor(format!(
            "{arch} with bins {bins}, trunk {trunk_len}, tau {seq_len} is inconsistent"
        )));
    }
    net.seq_len = seq_len;
    net.meta = meta;
    let width = r.u32()?;
    if width != net.input_width() {
        return Err(descriptor(format!(
            "input width {width}, {arch} takes {}",
            net.input_width()
        )));
    }
    let read_vec = |r: &mut Reader<'_>| -> Result<Vec<T>> {
        (0..width).map(|_| r.f64().map(T::lit)).collect()
    };
    let shift = read_vec(&mut r)?;
    let scale = read_vec(&mut r)?;
    net.input_norm = InputNorm { shift, scale };

    let layer_count = r.u32()?;
    if layer_count != net.layers.len() {
        return Err(descriptor(format!(
            "{layer_count} layers listed, {arch} has {}",
            net.layers.len()
        )));
    }
    for (i, layer) in net.layers.iter().enumerate() {
        let kind = r.str()?;
        let pool = r.u32()?;
        let n_tensors = r.u32()?;
        let expected = layer.tensors();
        if kind != layer.kind() || pool != pool_of(layer) || n_tensors != expected.len() {
            return Err(descriptor(format!(
                "layer {i}: file has {kind} (pool {pool}, {n_tensors} tensors), expected {}",
                layer.kind()
            )));
        }
        for t in expected {
            let rank = r.u32()?;
            let dims = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
            if dims != t.shape() {
                return Err(descriptor(format!(
                    "layer {i} ({kind}): shape {dims:?}, expected {:?}",
                    t.shape()
                )));
            }
        }
    }
    let count = r.u64()?;
    if count != net.param_count() as u64 {
        return Err(descriptor(format!(
            "{count} parameters listed, layer table implies {}",
            net.param_count()
        )));
    }
    for t in net.params_mut() {
        for v in t.data_mut() {
            *v = T::lit(r.f64()?);
        }
    }
    if r.pos != payload.len() {
        return Err(descriptor(format!(
            "{} unexpected trailing bytes",
            payload.len() - r.pos
        )));
    }
    Ok(net)
}
