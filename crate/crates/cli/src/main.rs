//! `phdetect` command-line driver.
//!
//! Exit status: 0 on success, 2 for bad arguments or unreadable/malformed
//! input files, 3 when inputs parse but fail a check (empty partitions,
//! inconsistent records, non-finite training loss, ...).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use phdetect::baseline::BaselineDetector;
use phdetect::channel::{generate_dataset, read_dataset, write_dataset, ChannelModel, ModulationScheme, Split};
use phdetect::eval::{dump_trace, report_table, sweep_seq_len, write_trace_csv, Detector};
use phdetect::framing::SyncConfig;
use phdetect::nn::Architecture;
use phdetect::train::{
    fit_detector, frame_partition, load_model, save_model, split_dataset, TrainConfig,
    DEFAULT_TRAIN_FRACTION,
};
use phdetect::{Error, Network64, Result};

const EXIT_INPUT: u8 = 2;
const EXIT_VALIDATION: u8 = 3;

#[derive(Parser)]
#[command(name = "phdetect", version, about = "Detector workbench for simulated pH-keyed molecular links")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate transmissions and write a dataset file (split into train/test).
    Generate(GenerateArgs),
    /// Train one network on the training partition.
    Train(TrainArgs),
    /// Grid-fit the single-difference threshold detector.
    Baseline(BaselineArgs),
    /// Test-set BER of one model, per interval.
    Eval(EvalArgs),
    /// BER table for the baseline and a list of models.
    Report(ReportArgs),
    /// BER versus training window length for recurrent detectors.
    Sweep(SweepArgs),
    /// Write one received trace as CSV for plotting.
    DumpTrace(DumpArgs),
}

#[derive(Args)]
struct ChannelOverrides {
    #[arg(long)]
    ph_baseline: Option<f64>,
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    decay_tau_ms: Option<f64>,
    #[arg(long)]
    nonlinearity_scale: Option<f64>,
    #[arg(long)]
    noise_std: Option<f64>,
    #[arg(long)]
    jitter_ms: Option<f64>,
    #[arg(long)]
    response_stages: Option<u32>,
    #[arg(long)]
    response_tau_ms: Option<f64>,
}

impl ChannelOverrides {
    fn apply(&self, mut m: ChannelModel) -> ChannelModel {
        m.ph_baseline = self.ph_baseline.unwrap_or(m.ph_baseline);
        m.injection_amplitude = self.amplitude.unwrap_or(m.injection_amplitude);
        m.decay_tau_ms = self.decay_tau_ms.unwrap_or(m.decay_tau_ms);
        m.nonlinearity_scale = self.nonlinearity_scale.unwrap_or(m.nonlinearity_scale);
        m.noise_std = self.noise_std.unwrap_or(m.noise_std);
        m.jitter_ms = self.jitter_ms.unwrap_or(m.jitter_ms);
        m.response_stages = self.response_stages.unwrap_or(m.response_stages);
        m.response_tau_ms = self.response_tau_ms.unwrap_or(m.response_tau_ms);
        m
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_delimiter = ',', default_value = "250,334,380,500")]
    intervals: Vec<u32>,
    #[arg(long, default_value_t = 100)]
    n_seq: usize,
    #[arg(long, default_value_t = 120)]
    seq_len: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Share of records per interval tagged `train`.
    #[arg(long, default_value_t = DEFAULT_TRAIN_FRACTION)]
    train_fraction: f64,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    channel: ChannelOverrides,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    arch: String,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 10)]
    batch: usize,
    /// Training window length (recurrent architectures only).
    #[arg(long, default_value_t = 120)]
    tau: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Trained CNN whose conv trunk seeds `cnn_lstm3`; one is trained on the fly if omitted.
    #[arg(long)]
    pretrained: Option<PathBuf>,
    /// Keep training the pretrained trunk instead of freezing it.
    #[arg(long)]
    fine_tune_trunk: bool,
    /// Optional CSV of the per-epoch training loss.
    #[arg(long)]
    loss_out: Option<PathBuf>,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    data: PathBuf,
    /// One (B, gamma) pair for all intervals instead of one per interval.
    #[arg(long)]
    pooled: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Aligned text; the CSV form goes to the same path with `.csv` appended.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long, value_delimiter = ',')]
    models: Vec<PathBuf>,
    #[arg(long)]
    baseline: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Aligned text; the CSV form goes to the same path with `.csv` appended.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "lstm3,bilstm3")]
    archs: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "4,8,16,32")]
    lengths: Vec<usize>,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    /// Restrict training and testing to these intervals.
    #[arg(long, value_delimiter = ',')]
    intervals: Option<Vec<u32>>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DumpArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    id: u64,
    #[arg(long)]
    out: PathBuf,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_sibling(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".csv");
    PathBuf::from(s)
}

fn generate(a: GenerateArgs) -> Result<()> {
    let schemes = a
        .intervals
        .iter()
        .map(|&iv| ModulationScheme::with_interval(iv))
        .collect::<Result<Vec<_>>>()?;
    let model = a.channel.apply(ChannelModel::default());
    let raw = generate_dataset(&schemes, &model, a.n_seq, a.seq_len, a.seed)?;
    let dataset = split_dataset(&raw, a.train_fraction, a.seed)?;
    write_dataset(&dataset, &a.out)?;
    eprintln!(
        "wrote {} records ({} train) to {}",
        dataset.records.len(),
        dataset.partition(Split::Train).count(),
        a.out.display()
    );
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let arch: Architecture = a.arch.parse()?;
    let dataset = read_dataset(&a.data)?;
    let config = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch,
        tau: a.tau,
        fine_tune_trunk: a.fine_tune_trunk,
        ..TrainConfig::new(arch, a.seed)
    };
    let pretrained: Option<Network64> = a.pretrained.as_ref().map(load_model).transpose()?;
    if pretrained.is_some() && arch != Architecture::CnnLstm3 {
        return Err(Error::InvalidArgument(
            "--pretrained only applies to cnn_lstm3".into(),
        ));
    }
    let outcome = fit_detector(&dataset, &config, pretrained.as_ref())?;
    save_model(&outcome.network, &a.out)?;
    if let Some(path) = &a.loss_out {
        let mut csv = String::from("epoch,loss\n");
        for (i, l) in outcome.loss_history.iter().enumerate() {
            csv.push_str(&format!("{},{l}\n", i + 1));
        }
        write_text(path, &csv)?;
    }
    let first = outcome.loss_history.first().copied().unwrap_or(f64::NAN);
    let last = outcome.loss_history.last().copied().unwrap_or(f64::NAN);
    eprintln!(
        "{arch}: {} epochs, loss {first:.5} -> {last:.5}, wrote {}",
        a.epochs,
        a.out.display()
    );
    Ok(())
}

fn baseline(a: BaselineArgs) -> Result<()> {
    let dataset = read_dataset(&a.data)?;
    let framed = frame_partition(&dataset, Split::Train, &SyncConfig::default())?;
    let det = BaselineDetector::fit(&framed, None, a.pooled)?;
    det.save(&a.out)?;
    eprintln!("wrote baseline parameters to {}", a.out.display());
    Ok(())
}

fn emit_report(report: &phdetect::eval::BerReport, out: &Path) -> Result<()> {
    write_text(out, &report.to_text())?;
    write_text(&csv_sibling(out), &report.to_csv())?;
    eprintln!("wrote {} and {}", out.display(), csv_sibling(out).display());
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let net: Network64 = load_model(&a.model)?;
    let dataset = read_dataset(&a.data)?;
    let report = report_table(&[Detector::Network(net)], &dataset, &SyncConfig::default())?;
    emit_report(&report, &a.out)
}

fn report(a: ReportArgs) -> Result<()> {
    let dataset = read_dataset(&a.data)?;
    let mut detectors = vec![Detector::Baseline(BaselineDetector::load(&a.baseline)?)];
    for m in &a.models {
        detectors.push(Detector::Network(load_model(m)?));
    }
    let report = report_table::<f64>(&detectors, &dataset, &SyncConfig::default())?;
    emit_report(&report, &a.out)
}

fn sweep(a: SweepArgs) -> Result<()> {
    let archs = a
        .archs
        .iter()
        .map(|s| s.parse())
        .collect::<Result<Vec<Architecture>>>()?;
    let mut dataset = read_dataset(&a.data)?;
    if let Some(iv) = &a.intervals {
        dataset = dataset.restrict_intervals(iv);
    }
    let base = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch,
        ..TrainConfig::sweep(archs[0], 1, 0)
    };
    let result = sweep_seq_len::<f64>(&archs, &dataset, &a.lengths, &a.seeds, &base)?;
    write_text(&a.out, &result.to_csv())?;
    eprintln!("wrote {} sweep points to {}", result.points.len(), a.out.display());
    Ok(())
}

fn dump(a: DumpArgs) -> Result<()> {
    let dataset = read_dataset(&a.data)?;
    let d = dump_trace(&dataset, a.id, &SyncConfig::default())?;
    write_text(&a.out, &write_trace_csv(&d))?;
    eprintln!("wrote {} samples of record {} to {}", d.ph.len(), a.id, a.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Train(a) => train(a),
        Command::Baseline(a) => baseline(a),
        Command::Eval(a) => eval(a),
        Command::Report(a) => report(a),
        Command::Sweep(a) => sweep(a),
        Command::DumpTrace(a) => dump(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() {
                EXIT_INPUT
            } else {
                EXIT_VALIDATION
            })
        }
    }
}
