use std::path::Path;
use std::process::{Command, Output};

fn emorec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emorec")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL: &str = r#"
[data]
manifest = "data/manifest.jsonl"
word_table = "data/glove.txt"
sentences_ref = "data/sent_ref.tsv"
sentences_asr = "data/sent_asr.tsv"

[model.tsb]
encoder_dim = 6
n_blocks = 1

[model.tab]
proj_dim = 6

[model.fusion]
hidden_dim = 6

[model.attention]
attn_hidden = 4

[train]
batch_size = 16
learning_rate = 0.005
max_epochs = 2
"#;

/// Writes a tiny synthetic corpus plus a small-model config into `dir`.
fn small_setup(dir: &Path) -> std::path::PathBuf {
    let out = emorec(&["synth", "--out", s(&dir.join("data")), "--dialogues", "5", "--seed", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cfg = dir.join("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    cfg
}

#[test]
fn negative_context_is_a_usage_error() {
    let out = emorec(&["cv", "--context", "-1,3", "--manifest", "m.jsonl", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--context"));
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[train]\nlr = 0.1\n").unwrap();
    let out = emorec(&["cv", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[UsageError]"));
}

#[test]
fn missing_manifest_is_reported_with_its_class() {
    let dir = tempfile::tempdir().unwrap();
    let out = emorec(&["cv", "--manifest", s(&dir.path().join("none.jsonl")), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error["));
}

#[test]
fn synth_writes_corpus_and_run_config() {
    let dir = tempfile::tempdir().unwrap();
    small_setup(dir.path());
    let data = dir.path().join("data");
    for f in ["manifest.jsonl", "glove.txt", "sent_ref.tsv", "sent_asr.tsv", "emorec.toml", "stamp.toml"] {
        assert!(data.join(f).is_file(), "{f} missing");
    }
    let lines = std::fs::read_to_string(data.join("manifest.jsonl")).unwrap().lines().count();
    assert_eq!(lines, 5 * 16);
}

#[test]
fn cv_smoke_run_is_reproducible_from_its_stamp() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_setup(dir.path());
    let first = dir.path().join("cv1");
    let out = emorec(&["cv", "--config", s(&cfg), "--context", "1,0", "--out", s(&first), "--emit-table"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("mean ± std"), "{stdout}");
    assert!(stdout.contains("context [-1,0]"), "{stdout}");
    for k in 1..=5 {
        assert!(first.join(format!("session{k}")).is_dir());
    }
    let stamp = std::fs::read_to_string(first.join("stamp.toml")).unwrap();
    assert!(stamp.contains("config_sha256") && stamp.contains("command = \"cv\""));

    let second = dir.path().join("cv2");
    let out = emorec(&["cv", "--config", s(&first.join("stamp.toml")), "--out", s(&second)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let a = std::fs::read_to_string(first.join("report.txt")).unwrap();
    let b = std::fs::read_to_string(second.join("report.txt")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn train_then_evaluate_one_fold() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_setup(dir.path());
    let tr = dir.path().join("tr");
    let out = emorec(&["train", "--config", s(&cfg), "--fold", "session2", "--features", "audio25,bert", "--out", s(&tr)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["checkpoint.emow", "history.csv", "model.toml", "stamp.toml"] {
        assert!(tr.join(f).is_file(), "{f} missing");
    }
    let ev = dir.path().join("ev");
    let ckpt = tr.join("checkpoint.emow");
    let out = emorec(&[
        "evaluate", "--config", s(&cfg), "--fold", "session2", "--features", "audio25,bert", "--checkpoint", s(&ckpt),
        "--out", s(&ev),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let preds = std::fs::read_to_string(ev.join("predictions.tsv")).unwrap();
    assert_eq!(preds.lines().count(), 1 + 16);
    assert!(preds.lines().skip(1).all(|l| l.starts_with("ses2_")));

    let out = emorec(&["train", "--config", s(&cfg), "--fold", "Ses01", "--out", s(&tr)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn extracted_features_feed_the_trainer() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_setup(dir.path());
    let feats = dir.path().join("feats");
    let out = emorec(&["extract-features", "--config", s(&cfg), "--out", s(&feats)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = emorec(&["embed-align", "--config", s(&cfg), "--feature-dir", s(&feats), "--out", s(&feats)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let n = std::fs::read_dir(&feats).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "emof")).count();
    assert_eq!(n, 3 * 80);
    let out = emorec(&["cv", "--config", s(&cfg), "--feature-dir", s(&feats), "--out", s(&dir.path().join("cv"))]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn gradcheck_passes_for_the_default_architecture() {
    let out = emorec(&["gradcheck", "--context", "2,1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("PASS"));
}
