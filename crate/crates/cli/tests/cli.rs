use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn phdetect(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phdetect"))
        .args(args)
        .output()
        .expect("spawn phdetect")
}

fn code(args: &[&str]) -> i32 {
    phdetect(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn tiny_data(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let out = dir.join(name);
    let mut args = vec!["generate", "--n-seq", "6", "--seq-len", "16", "--seed", "3", "--out", s(&out)];
    args.extend_from_slice(extra);
    let o = phdetect(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

/// Runs the whole chain into `dir` and returns the produced artifacts.
fn run_chain(dir: &Path) -> Vec<Vec<u8>> {
    let data = tiny_data(dir, "data.txt", &[]);
    let model = dir.join("lstm.model");
    let base = dir.join("base.txt");
    let report = dir.join("report.txt");
    let trace = dir.join("trace.csv");
    let sweep = dir.join("sweep.csv");
    for args in [
        vec!["train", "--arch", "lstm3", "--data", s(&data), "--epochs", "2", "--tau", "8", "--seed", "1", "--out", s(&model)],
        vec!["baseline", "--data", s(&data), "--out", s(&base)],
        vec!["report", "--models", s(&model), "--baseline", s(&base), "--data", s(&data), "--out", s(&report)],
        vec!["dump-trace", "--data", s(&data), "--id", "0", "--out", s(&trace)],
        vec![
            "sweep", "--data", s(&data), "--lengths", "4,8", "--seeds", "0", "--epochs", "1",
            "--intervals", "250", "--out", s(&sweep),
        ],
    ] {
        let o = phdetect(&args);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let csv = dir.join("report.txt.csv");
    [data, model, base, report, csv, trace, sweep]
        .iter()
        .map(|p| std::fs::read(p).unwrap())
        .collect()
}

#[test]
fn pipeline_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (x, y) = (run_chain(a.path()), run_chain(b.path()));
    for (i, (p, q)) in x.iter().zip(&y).enumerate() {
        assert!(!p.is_empty(), "artifact {i} is empty");
        assert!(p == q, "artifact {i} differs between runs");
    }
}

#[test]
fn bad_input_and_bad_content_exit_differently() {
    let dir = tempfile::tempdir().unwrap();
    let data = tiny_data(dir.path(), "data.txt", &[]);
    let missing = dir.path().join("nope.txt");
    let junk = dir.path().join("junk.model");
    std::fs::write(&junk, b"not a model at all, just text").unwrap();
    let out = dir.path().join("o");

    assert_eq!(code(&["train", "--arch", "gru3", "--data", s(&data), "--out", s(&out)]), 2);
    assert_eq!(code(&["baseline", "--data", s(&missing), "--out", s(&out)]), 2);
    assert_eq!(code(&["eval", "--model", s(&junk), "--data", s(&data), "--out", s(&out)]), 2);
    assert_eq!(code(&["dump-trace", "--data", s(&data), "--id", "99999", "--out", s(&out)]), 2);
    assert_eq!(code(&["frobnicate"]), 2);

    // Well-formed file, but nothing to train on.
    let unsplit = tiny_data(dir.path(), "unsplit.txt", &["--train-fraction", "0"]);
    assert_eq!(code(&["baseline", "--data", s(&unsplit), "--out", s(&out)]), 3);
}

#[test]
fn generate_rejects_bad_intervals() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.txt");
    let c = code(&["generate", "--intervals", "0", "--out", s(&out)]);
    assert_ne!(c, 0);
    assert!(!out.exists());
}
