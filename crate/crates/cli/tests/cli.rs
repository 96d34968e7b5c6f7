//! Binary-level behavior: exit codes, config precedence, import validation.

use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_lyrnet");

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(BIN).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn generate(dir: &Path, name: &str, per_quadrant: usize) -> String {
    let path = dir.join(name).to_str().unwrap().to_string();
    let (code, _, _) = run(&[
        "generate",
        "--out",
        &path,
        "--per-quadrant",
        &per_quadrant.to_string(),
        "--seed",
        "5",
    ]);
    assert_eq!(code, 0);
    path
}

#[test]
fn unknown_flag_exits_2() {
    let (code, _, _) = run(&["generate", "--no-such-flag"]);
    assert_eq!(code, 2);
}

#[test]
fn bad_lambdas_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate(dir.path(), "c.jsonl", 2);
    let out = dir.path().join("run");
    let (code, _, err) = run(&[
        "train",
        "--train-data",
        &corpus,
        "--out-dir",
        out.to_str().unwrap(),
        "--lambdas",
        "1,2",
    ]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("lambdas"));
}

#[test]
fn all_zero_lambdas_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate(dir.path(), "c.jsonl", 2);
    let out = dir.path().join("run");
    let (code, _, _) = run(&[
        "train",
        "--train-data",
        &corpus,
        "--out-dir",
        out.to_str().unwrap(),
        "--lambdas",
        "0,0,0",
    ]);
    assert_eq!(code, 2);
}

#[test]
fn missing_data_file_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let (code, _, _) = run(&[
        "train",
        "--train-data",
        "/nonexistent/corpus.jsonl",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 3);
}

#[test]
fn malformed_corpus_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "this is not json\n").unwrap();
    let out = dir.path().join("run");
    let (code, _, err) = run(&[
        "train",
        "--train-data",
        bad.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 3, "{err}");
    assert!(err.contains("line 1"));
}

#[test]
fn corrupt_checkpoint_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate(dir.path(), "c.jsonl", 2);
    let ckpt = dir.path().join("fake.ckpt");
    std::fs::write(&ckpt, "not a checkpoint").unwrap();
    let vocab = dir.path().join("vocab.json");
    std::fs::write(&vocab, r#"{"tokens":["<pad>","<unk>","la"]}"#).unwrap();
    let (code, _, _) = run(&[
        "evaluate",
        "--model",
        ckpt.to_str().unwrap(),
        "--vocab",
        vocab.to_str().unwrap(),
        "--data",
        &corpus,
    ]);
    assert_eq!(code, 3);
}

#[test]
fn exploding_learning_rate_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate(dir.path(), "c.jsonl", 4);
    let out = dir.path().join("run");
    let (code, _, err) = run(&[
        "train",
        "--train-data",
        &corpus,
        "--out-dir",
        out.to_str().unwrap(),
        "--learning-rate",
        "1e12",
        "--epochs",
        "5",
    ]);
    assert_eq!(code, 4, "{err}");
}

#[test]
fn gradcheck_corrupted_fixture_exits_5_and_names_op() {
    let (code, stdout, err) = run(&["gradcheck", "--include-corrupted-fixture"]);
    assert_eq!(code, 5);
    assert!(err.contains("corrupted_backward_fixture"));
    assert!(stdout.contains("\"all_passed\": false"));
}

#[test]
fn config_file_applies_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate(dir.path(), "c.jsonl", 2);
    let config = dir.path().join("settings.toml");
    std::fs::write(&config, "[train]\nepochs = 2\nlearning_rate = 0.0001\n").unwrap();

    let from_file = dir.path().join("from-file");
    let (code, _, _) = run(&[
        "train",
        "--config",
        config.to_str().unwrap(),
        "--train-data",
        &corpus,
        "--out-dir",
        from_file.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let log = std::fs::read_to_string(from_file.join("loss_log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 2);

    let from_flag = dir.path().join("from-flag");
    let (code, _, _) = run(&[
        "train",
        "--config",
        config.to_str().unwrap(),
        "--train-data",
        &corpus,
        "--out-dir",
        from_flag.to_str().unwrap(),
        "--epochs",
        "3",
    ]);
    assert_eq!(code, 0);
    let log = std::fs::read_to_string(from_flag.join("loss_log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 3);
}

#[test]
fn bad_config_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("settings.toml");
    std::fs::write(&config, "[train]\nunknown_knob = true\n").unwrap();
    let (code, _, _) = run(&["gradcheck", "--config", config.to_str().unwrap()]);
    assert_eq!(code, 2);
}

#[test]
fn import_csv_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("songs.csv");
    std::fs::write(
        &csv,
        "id,artist,title,lyrics,quadrant\n\
         s1,someone,a song,happy bright joy,Q1\n\
         s2,someone,another,dark heavy rage,Q2\n",
    )
    .unwrap();
    let out = dir.path().join("corpus.jsonl");
    let (code, _, err) = run(&[
        "import",
        "--input",
        csv.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.contains("\"quadrant\":\"Q1\""));
    // manifest written beside the artifact with a checksum
    let manifest = std::fs::read_to_string(dir.path().join("corpus.jsonl.manifest.json")).unwrap();
    assert!(manifest.contains("sha256"));
}

#[test]
fn import_rejects_inconsistent_labels() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("songs.csv");
    // Q1 is the positive/high quadrant; low arousal contradicts it
    std::fs::write(
        &csv,
        "id,lyrics,quadrant,valence,arousal\n\
         s1,some words,Q1,positive,low\n",
    )
    .unwrap();
    let out = dir.path().join("corpus.jsonl");
    let (code, _, err) = run(&[
        "import",
        "--input",
        csv.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 3);
    assert!(err.contains("inconsistent"), "{err}");
}

#[test]
fn predict_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate(dir.path(), "c.jsonl", 2);
    let out = dir.path().join("run");
    let (code, _, _) = run(&[
        "train",
        "--train-data",
        &corpus,
        "--out-dir",
        out.to_str().unwrap(),
        "--epochs",
        "1",
    ]);
    assert_eq!(code, 0);
    let ckpt = out.join("model.ckpt");
    let vocab = out.join("vocab.json");
    let args = [
        "predict",
        "--model",
        ckpt.to_str().unwrap(),
        "--vocab",
        vocab.to_str().unwrap(),
        "--text",
        "heart time world again",
    ];
    let (c1, first, _) = run(&args);
    let (c2, second, _) = run(&args);
    assert_eq!((c1, c2), (0, 0));
    assert_eq!(first, second);
    assert!(first.contains("\"agreement\""));
}
