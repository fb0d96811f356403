//! Minibatch training, dataset splitting and model files.
//!
//! Feedforward detectors see one symbol per sample and are shuffled per
//! symbol. Recurrent detectors see non-overlapping windows of `tau` symbols
//! cut from each record (a trailing remainder shorter than `tau` is dropped),
//! with the hidden state reset at every window, and are shuffled per window.
//! Gradients use full backpropagation through each window.

mod adam;
mod encode;
mod model_file;
mod split;

pub use adam::{adam_step, AdamState};
pub use encode::{encode_record, frame_partition};
pub use model_file::{load_model, model_from_bytes, model_to_bytes, save_model, MODEL_MAGIC, MODEL_VERSION};
pub use split::{split_dataset, DEFAULT_TRAIN_FRACTION};

use crate::channel::{Dataset, Split};
use crate::error::{Error, Result};
use crate::framing::{FramedRecord, SyncConfig};
use crate::nn::{build_with_widths, Architecture, InputNorm, Network, TrainMeta, Widths};
use crate::numerics::rng::{seed_stream, stream_id};
use crate::numerics::Tensor;
use crate::scalar::Scalar;

pub(crate) const DOMAIN_INIT: u16 = 2;
pub(crate) const DOMAIN_SHUFFLE: u16 = 3;

/// Rows per forward call when pushing whole datasets through a trunk.
const TRUNK_CHUNK: usize = 2048;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub arch: Architecture,
    pub epochs: usize,
    pub batch_size: usize,
    /// Window length for recurrent detectors; ignored by feedforward ones.
    pub tau: usize,
    pub seed: u64,
    pub widths: Widths,
    /// Lets gradients reach the pretrained conv trunk of `cnn_lstm3`.
    pub fine_tune_trunk: bool,
    pub sync: SyncConfig,
}

impl TrainConfig {
    /// 200 epochs, batch 10, `tau = 120`.
    pub fn new(arch: Architecture, seed: u64) -> Self {
        TrainConfig {
            arch,
            epochs: 200,
            batch_size: 10,
            tau: 120,
            seed,
            widths: Widths::default(),
            fine_tune_trunk: false,
            sync: SyncConfig::default(),
        }
    }

    /// Sequence-length sweep settings: 50 epochs, batch 32.
    pub fn sweep(arch: Architecture, tau: usize, seed: u64) -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 32,
            tau,
            ..TrainConfig::new(arch, seed)
        }
    }

    /// Symbols per training sample.
    pub fn unit_len(&self) -> usize {
        if self.arch.is_sequence() {
            self.tau
        } else {
            1
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.tau == 0 {
            return Err(Error::InvalidArgument(format!(
                "epochs, batch size and tau must be positive (got {}, {}, {})",
                self.epochs, self.batch_size, self.tau
            )));
        }
        Ok(())
    }
}

/// Trained weights and the mean per-symbol training loss of every epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome<T> {
    pub network: Network<T>,
    pub loss_history: Vec<f64>,
}

/// Fresh network for `config`, initialized from its own seed stream.
pub fn init_network<T: Scalar>(config: &TrainConfig) -> Result<Network<T>> {
    let idx = Architecture::ALL
        .iter()
        .position(|&a| a == config.arch)
        .expect("listed architecture") as u16;
    let mut prng = seed_stream(config.seed, stream_id(DOMAIN_INIT, idx, 0, 0));
    build_with_widths(config.arch, config.widths, &mut prng)
}

/// Copies the conv trunk and input normalization of a trained CNN into a
/// `cnn_lstm3` network.
pub fn install_trunk<T: Scalar>(target: &mut Network<T>, cnn: &Network<T>) -> Result<()> {
    if target.trunk_len == 0 || cnn.arch != Architecture::Cnn {
        return Err(Error::InvalidArgument(format!(
            "cannot move a {} trunk into {}",
            cnn.arch, target.arch
        )));
    }
    if cnn.widths.filters != target.widths.filters || cnn.bins != target.bins {
        return Err(Error::InvalidArgument(format!(
            "pretrained CNN has {} filters over {} bins, target needs {} over {}",
            cnn.widths.filters, cnn.bins, target.widths.filters, target.bins
        )));
    }
    let n = target.trunk_len;
    target.layers[..n].clone_from_slice(&cnn.layers[..n]);
    target.input_norm = cnn.input_norm.clone();
    Ok(())
}

/// Frames the training partition, builds the network and trains it.
///
/// `cnn_lstm3` takes its trunk from `pretrained`; without one, a CNN is
/// trained first with the same epochs, batch size and seed.
pub fn fit_detector<T: Scalar>(
    dataset: &Dataset,
    config: &TrainConfig,
    pretrained: Option<&Network<T>>,
) -> Result<TrainOutcome<T>> {
    let framed = frame_partition(dataset, Split::Train, &config.sync)?;
    fit_framed(&framed, config, pretrained)
}

/// [`fit_detector`] on records that are already framed.
pub fn fit_framed<T: Scalar>(
    framed: &[FramedRecord],
    config: &TrainConfig,
    pretrained: Option<&Network<T>>,
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    let mut net = init_network(config)?;
    if config.arch == Architecture::CnnLstm3 {
        let own;
        let cnn = match pretrained {
            Some(c) => c,
            None => {
                let cnn_cfg = TrainConfig {
                    arch: Architecture::Cnn,
                    ..config.clone()
                };
                own = train(init_network(&cnn_cfg)?, framed, &cnn_cfg)?.network;
                &own
            }
        };
        install_trunk(&mut net, cnn)?;
    }
    train(net, framed, config)
}

/// Encoded training data: one row block per record, as seen by layer `start`.
struct Prepared<T> {
    width: usize,
    start: usize,
    rows: Vec<Vec<T>>,
    bits: Vec<Vec<u8>>,
}

impl<T: Scalar> Prepared<T> {
    /// `[len, units.len(), width]` input and step-major targets.
    fn batch(&self, units: &[(usize, usize)], len: usize) -> Result<(Tensor<T>, Vec<u8>)> {
        let n = units.len();
        let mut x = Vec::with_capacity(len * n * self.width);
        let mut bits = Vec::with_capacity(len * n);
        for t in 0..len {
            for &(r, s) in units {
                let k = s + t;
                x.extend_from_slice(&self.rows[r][k * self.width..(k + 1) * self.width]);
                bits.push(self.bits[r][k]);
            }
        }
        Ok((Tensor::new(vec![len, n, self.width], x)?, bits))
    }
}

/// Pushes `rows` (`width` per step) through layers `0..end` as independent symbols.
fn run_prefix<T: Scalar>(net: &Network<T>, rows: &[T], width: usize, end: usize) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for chunk in rows.chunks(TRUNK_CHUNK * width) {
        let x = Tensor::new(vec![1, chunk.len() / width, width], chunk.to_vec())?;
        out.extend(net.forward_range(&x, 0, end)?.into_data());
    }
    Ok(out)
}

/// Trains `network` on framed records.
///
/// Networks without a pretrained trunk get their input normalization fitted
/// on `records` first. A frozen trunk is evaluated once up front and training
/// starts at the first layer after it.
pub fn train<T: Scalar>(
    mut network: Network<T>,
    records: &[FramedRecord],
    config: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    if network.arch != config.arch {
        return Err(Error::InvalidArgument(format!(
            "network is {} but the configuration asks for {}",
            network.arch, config.arch
        )));
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset("no training records".into()));
    }
    let unit_len = config.unit_len();
    let width = network.input_width();
    let mut rows = Vec::with_capacity(records.len());
    for r in records {
        let enc = encode_record(network.arch, r)?;
        if enc.len() != r.bits.len() * width {
            return Err(Error::LengthMismatch {
                left: enc.len() / width,
                right: r.bits.len(),
            });
        }
        rows.push(enc.into_iter().map(T::lit).collect::<Vec<T>>());
    }
    if network.trunk_len == 0 {
        network.input_norm = InputNorm::fit(&rows.concat(), width)?;
    }
    network.seq_len = unit_len;
    network.meta = TrainMeta {
        epochs: config.epochs,
        batch_size: config.batch_size,
        seed: config.seed,
        fine_tuned_trunk: network.trunk_len > 0 && config.fine_tune_trunk,
    };

    let mut data = Prepared {
        width,
        start: 0,
        rows,
        bits: records.iter().map(|r| r.bits.clone()).collect(),
    };
    if network.trunk_len > 0 && !config.fine_tune_trunk {
        let end = network.trunk_len;
        let mut feat_width = 0;
        for r in data.rows.iter_mut() {
            let out = run_prefix(&network, r, width, end)?;
            feat_width = out.len() / (r.len() / width);
            *r = out;
        }
        data.width = feat_width;
        data.start = end;
    }

    let mut units = Vec::new();
    for (i, b) in data.bits.iter().enumerate() {
        if b.len() < unit_len {
            return Err(Error::InvalidArgument(format!(
                "window length {unit_len} exceeds record {} with {} symbols",
                records[i].id,
                b.len()
            )));
        }
        for w in 0..b.len() / unit_len {
            units.push((i, w * unit_len));
        }
    }
    let symbols = (units.len() * unit_len) as f64;

    let first = network.first_param_of(data.start);
    let mut state = AdamState::new(network.params().into_iter().skip(first));
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let e = epoch as u64;
        let mut prng = seed_stream(
            config.seed,
            stream_id(DOMAIN_SHUFFLE, (e >> 32) as u16, (e >> 16) as u16, e as u16),
        );
        prng.shuffle(&mut units);
        let mut total = 0.0;
        for chunk in units.chunks(config.batch_size) {
            let (x, bits) = data.batch(chunk, unit_len)?;
            let (loss, grads) = network.loss_and_grad(&x, &bits, data.start)?;
            let loss = loss.as_f64();
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("training loss in epoch {}", epoch + 1)));
            }
            total += loss * chunk.len() as f64;
            let mut params: Vec<&mut Tensor<T>> = network.params_mut().into_iter().skip(first).collect();
            adam_step(&mut params, &grads[first..], &mut state)?;
        }
        history.push(total / symbols);
    }
    Ok(TrainOutcome {
        network,
        loss_history: history,
    })
}
