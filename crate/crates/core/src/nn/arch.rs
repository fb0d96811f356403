//! The five detector architectures.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numerics::{PrngState, Tensor};
use crate::scalar::Scalar;

use super::init::glorot_fill;
use super::lstm::LstmParams;
use super::{InputNorm, Layer, Network, TrainMeta};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Architecture {
    Dense,
    Cnn,
    Lstm3,
    CnnLstm3,
    BiLstm3,
}

/// What a network consumes per symbol.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputKind {
    /// `[b_1, b_B, d_1 .. d_{B-1}, interval / 500]`.
    Features,
    /// The raw bin vector `b_1 .. b_B`.
    Bins,
}

impl Architecture {
    pub const ALL: [Architecture; 5] = [
        Architecture::Dense,
        Architecture::Cnn,
        Architecture::Lstm3,
        Architecture::CnnLstm3,
        Architecture::BiLstm3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::Dense => "dense",
            Architecture::Cnn => "cnn",
            Architecture::Lstm3 => "lstm3",
            Architecture::CnnLstm3 => "cnn_lstm3",
            Architecture::BiLstm3 => "bilstm3",
        }
    }

    /// Bins per symbol window.
    pub fn bins(self) -> usize {
        match self {
            Architecture::Dense => 9,
            Architecture::Cnn | Architecture::CnnLstm3 => 30,
            Architecture::Lstm3 | Architecture::BiLstm3 => 8,
        }
    }

    pub fn input_kind(self) -> InputKind {
        match self {
            Architecture::Cnn | Architecture::CnnLstm3 => InputKind::Bins,
            _ => InputKind::Features,
        }
    }

    pub fn input_width(self) -> usize {
        match self.input_kind() {
            InputKind::Features => self.bins() + 2,
            InputKind::Bins => self.bins(),
        }
    }

    /// True for detectors that decide a whole window of symbols jointly.
    pub fn is_sequence(self) -> bool {
        matches!(
            self,
            Architecture::Lstm3 | Architecture::CnnLstm3 | Architecture::BiLstm3
        )
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Architecture::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::UnknownArchitecture(s.to_string()))
    }
}

/// Layer widths; the defaults are the published sizes. Smaller values give
/// the same topology at toy scale.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Widths {
    pub dense: usize,
    pub filters: usize,
    pub lstm: usize,
    /// Number of dense or recurrent hidden layers.
    pub depth: usize,
}

impl Default for Widths {
    fn default() -> Self {
        Widths {
            dense: 80,
            filters: 16,
            lstm: 40,
            depth: 3,
        }
    }
}

fn dense<T: Scalar>(inp: usize, out: usize, prng: &mut PrngState) -> Layer<T> {
    let mut w = Tensor::zeros(&[out, inp]);
    glorot_fill(w.data_mut(), inp, out, prng);
    Layer::Dense {
        w,
        b: Tensor::zeros(&[out]),
    }
}

fn conv<T: Scalar>(c_in: usize, c_out: usize, k: usize, prng: &mut PrngState) -> Layer<T> {
    let mut w = Tensor::zeros(&[c_out, c_in, k]);
    glorot_fill(w.data_mut(), c_in * k, c_out * k, prng);
    Layer::Conv1d {
        w,
        b: Tensor::zeros(&[c_out]),
    }
}

/// Conv trunk: conv 2, conv 4, pool 2, conv 6, conv 8, pool 2, flatten.
/// Returns the layers and the flattened width.
fn cnn_trunk<T: Scalar>(bins: usize, filters: usize, prng: &mut PrngState) -> (Vec<Layer<T>>, usize) {
    let layers = vec![
        conv(1, filters, 2, prng),
        Layer::Relu,
        conv(filters, filters, 4, prng),
        Layer::Relu,
        Layer::MaxPool1d { pool: 2 },
        conv(filters, filters, 6, prng),
        Layer::Relu,
        conv(filters, filters, 8, prng),
        Layer::Relu,
        Layer::MaxPool1d { pool: 2 },
        Layer::Flatten,
    ];
    (layers, bins / 2 / 2 * filters)
}

/// Number of layers in the conv trunk.
pub const CNN_TRUNK_LAYERS: usize = 11;

/// Builds `arch` at the published widths.
pub fn build_architecture<T: Scalar>(arch: Architecture, prng: &mut PrngState) -> Network<T> {
    build_with_widths(arch, Widths::default(), prng).expect("default widths are valid")
}

pub fn build_with_widths<T: Scalar>(
    arch: Architecture,
    widths: Widths,
    prng: &mut PrngState,
) -> Result<Network<T>> {
    if widths.dense == 0 || widths.filters == 0 || widths.lstm == 0 || widths.depth == 0 {
        return Err(Error::InvalidArgument(format!("zero width in {widths:?}")));
    }
    let f = arch.input_width();
    let mut layers = Vec::new();
    let mut trunk_len = 0;
    let head_in = match arch {
        Architecture::Dense => {
            let mut inp = f;
            for _ in 0..widths.depth {
                layers.push(dense(inp, widths.dense, prng));
                layers.push(Layer::Relu);
                inp = widths.dense;
            }
            inp
        }
        Architecture::Cnn => {
            let (trunk, out) = cnn_trunk(arch.bins(), widths.filters, prng);
            layers.extend(trunk);
            out
        }
        Architecture::Lstm3 | Architecture::CnnLstm3 => {
            let mut inp = f;
            if arch == Architecture::CnnLstm3 {
                let (trunk, out) = cnn_trunk(arch.bins(), widths.filters, prng);
                trunk_len = trunk.len();
                layers.extend(trunk);
                inp = out;
            }
            for _ in 0..widths.depth {
                layers.push(Layer::Lstm(LstmParams::init(inp, widths.lstm, prng)));
                inp = widths.lstm;
            }
            inp
        }
        Architecture::BiLstm3 => {
            let mut inp = f;
            for _ in 0..widths.depth {
                layers.push(Layer::BiLstm {
                    fwd: LstmParams::init(inp, widths.lstm, prng),
                    bwd: LstmParams::init(inp, widths.lstm, prng),
                });
                inp = 2 * widths.lstm;
            }
            inp
        }
    };
    if head_in == 0 {
        return Err(Error::InvalidArgument(format!(
            "{} bins leave nothing after pooling",
            arch.bins()
        )));
    }
    layers.push(dense(head_in, 2, prng));
    layers.push(Layer::Softmax);
    Ok(Network {
        arch,
        widths,
        layers,
        trunk_len,
        bins: arch.bins(),
        seq_len: 1,
        input_norm: InputNorm::identity(f),
        meta: TrainMeta::default(),
    })
}
