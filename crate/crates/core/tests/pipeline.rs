// End-to-end runs on a small dataset: generate, split, train, score, sweep.

use phdetect::baseline::BaselineDetector;
use phdetect::channel::{generate_dataset, read_dataset, write_dataset, ChannelModel, Dataset, ModulationScheme, Split};
use phdetect::eval::{compute_ber, report_table, sweep_seq_len, BerReport, Detector};
use phdetect::framing::SyncConfig;
use phdetect::nn::{Architecture, Widths};
use phdetect::numerics::seed_stream;
use phdetect::train::{fit_detector, frame_partition, model_to_bytes, split_dataset, TrainConfig, DEFAULT_TRAIN_FRACTION};

fn small_dataset(seed: u64) -> Dataset {
    let ds = generate_dataset(&ModulationScheme::defaults(), &ChannelModel::default(), 8, 24, seed).unwrap();
    split_dataset(&ds, DEFAULT_TRAIN_FRACTION, seed).unwrap()
}

fn quick(arch: Architecture, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 2,
        batch_size: 8,
        tau: 12,
        widths: Widths { dense: 6, filters: 2, lstm: 4, depth: 2 },
        ..TrainConfig::new(arch, seed)
    }
}

#[test]
fn coin_flips_score_about_one_half() {
    let ds = generate_dataset(&ModulationScheme::defaults(), &ChannelModel::default(), 20, 30, 4).unwrap();
    let mut prng = seed_stream(77, 0);
    let (mut guesses, mut truth) = (Vec::new(), Vec::new());
    for r in &ds.records {
        for &b in &r.bits {
            guesses.push(prng.next_bit());
            truth.push(b);
        }
    }
    assert!(truth.len() >= 1000);
    let ber = compute_ber(&guesses, &truth).unwrap();
    assert!((ber - 0.5).abs() <= 0.03, "ber {ber}");
}

#[test]
fn report_covers_every_detector_and_interval() {
    let ds = small_dataset(1);
    let train = frame_partition(&ds, Split::Train, &SyncConfig::default()).unwrap();
    let mut detectors = vec![Detector::Baseline(BaselineDetector::fit(&train, None, false).unwrap())];
    let mut cnn = None;
    for (arch, tau) in [
        (Architecture::Dense, 12),
        (Architecture::Cnn, 12),
        (Architecture::Lstm3, 6),
        (Architecture::BiLstm3, 6),
        (Architecture::Lstm3, 12),
        (Architecture::CnnLstm3, 12),
    ] {
        let cfg = TrainConfig { tau, ..quick(arch, 3) };
        let net = fit_detector::<f64>(&ds, &cfg, cnn.as_ref()).unwrap().network;
        if arch == Architecture::Cnn {
            cnn = Some(net.clone());
        }
        detectors.push(Detector::Network(net));
    }
    let report = report_table(&detectors, &ds, &SyncConfig::default()).unwrap();
    assert_eq!(report.rows.len(), 28);
    assert_eq!(
        report.detectors(),
        ["Baseline", "Dense-Net", "CNN-Net", "LSTM3-Net6", "BiLSTM3-Net6", "LSTM3-Net12", "CNN-LSTM3-Net12"]
    );
    assert_eq!(report.intervals(), [250, 334, 380, 500]);
    for row in &report.rows {
        assert!((0.0..=1.0).contains(&row.ber));
        assert_eq!(row.ber, row.bit_errors as f64 / row.total_bits as f64);
    }
    assert_eq!(BerReport::from_csv(&report.to_csv()).unwrap(), report);
}

#[test]
fn sweep_trains_one_model_per_cell() {
    let ds = small_dataset(2).restrict_intervals(&[250]);
    let archs = [Architecture::Lstm3, Architecture::BiLstm3];
    let lengths = [4, 8];
    let seeds = [0, 1];
    let res = sweep_seq_len::<f64>(&archs, &ds, &lengths, &seeds, &quick(Architecture::Lstm3, 0)).unwrap();
    assert_eq!(res.points.len(), archs.len() * lengths.len() * seeds.len());
    for a in archs {
        assert_eq!(res.lengths(a), lengths);
        assert!(res.mean_ber(a, 4).is_some());
    }
    assert!(sweep_seq_len::<f64>(&[Architecture::Dense], &ds, &lengths, &seeds, &quick(Architecture::Dense, 0)).is_err());
    assert!(sweep_seq_len::<f64>(&archs, &ds, &[1000], &seeds, &quick(Architecture::Lstm3, 0)).is_err());
}

#[test]
fn same_seeds_give_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for run in 0..2 {
        let ds = small_dataset(9);
        let path = dir.path().join(format!("d{run}.txt"));
        write_dataset(&ds, &path).unwrap();
        assert_eq!(read_dataset(&path).unwrap(), ds);
        let net = fit_detector::<f64>(&ds, &quick(Architecture::Lstm3, 5), None).unwrap().network;
        let report = report_table(&[Detector::Network(net.clone())], &ds, &SyncConfig::default()).unwrap();
        files.push((std::fs::read(&path).unwrap(), model_to_bytes(&net), report.to_text()));
    }
    assert_eq!(files[0], files[1]);
}
