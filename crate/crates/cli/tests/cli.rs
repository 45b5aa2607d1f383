use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = r#"
seeds = [0, 1]

[data]
source = "synthetic"
data_seed = 3

[data.spec]
window_len = 64
graph_size = 4
normal_count = 10

[window]
window_len = 64
graph_size = 4

[model]
input_dim = 64
graph_size = 4
hidden_dim = 16
latent_dim = 8

[train]
epochs = 3
batch_size = 2
"#;

fn small_config(dir: &Path, extra: &str) -> PathBuf {
    // two anomaly groups keep the run fast
    let anomalies = r#"
[[data.spec.anomalies]]
type = "harmonic"
freq_hz = 1850.0
magnitude = 3.0
count = 3

[[data.spec.anomalies]]
type = "noise_shift"
magnitude = 4.0
count = 3
"#;
    let path = dir.join("config.toml");
    fs::write(&path, format!("{SMALL}{extra}{anomalies}")).unwrap();
    path
}

fn gwspectra(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gwspectra")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Vec<PathBuf> {
    let out = gwspectra(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap().lines().map(PathBuf::from).collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn csv_rows(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count() - 1
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn synth_manifest_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let paths = ok(&["synth", "--config", s(&cfg), "--out", s(&a)]);
    assert_eq!(paths, vec![a.join("manifest.json")]);
    ok(&["synth", "--config", s(&cfg), "--out", s(&b)]);
    let ma = fs::read(a.join("manifest.json")).unwrap();
    assert_eq!(ma, fs::read(b.join("manifest.json")).unwrap());
    let m = json(&a.join("manifest.json"));
    assert_eq!(m["normal_count"], 10);
    assert_eq!(m["abnormal_count"], 6);

    let c = dir.path().join("c");
    ok(&["synth", "--config", s(&cfg), "--seed", "4", "--out", s(&c)]);
    assert_ne!(ma, fs::read(c.join("manifest.json")).unwrap());
}

#[test]
fn synth_default_spec_counts() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["synth", "--out", s(dir.path())]);
    let m = json(&dir.path().join("manifest.json"));
    assert_eq!(m["normal_count"], 100);
    assert_eq!(m["abnormal_count"], 160);
    assert_eq!(m["signals"].as_array().unwrap().len(), 260);
}

#[test]
fn synth_without_anomalies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    fs::write(&cfg, "[data]\nsource = \"synthetic\"\n[data.spec]\nnormal_count = 3\nanomalies = []\n").unwrap();
    ok(&["synth", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(json(&dir.path().join("manifest.json"))["abnormal_count"], 0);
}

#[test]
fn train_detect_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let run = dir.path().join("run");
    let paths = ok(&["train", "--config", s(&cfg), "--out", s(&run)]);
    for name in ["checkpoint.json", "history.csv", "history.svg", "threshold.json", "config.toml"] {
        assert!(paths.contains(&run.join(name)), "{name}");
    }
    assert_eq!(csv_rows(&run.join("history.csv")), 3);
    let ck = json(&run.join("checkpoint.json"));
    assert_eq!(ck["format"], "gwspectra-checkpoint");
    assert_eq!(ck["training"]["epochs_completed"], 3);

    // test split: 2 normal + 6 abnormal graphs of 4 nodes
    let det = dir.path().join("det");
    ok(&["detect", "--checkpoint", s(&run.join("checkpoint.json")), "--out", s(&det)]);
    assert_eq!(csv_rows(&det.join("scores.csv")), 8 * 4);
    assert_eq!(csv_rows(&det.join("labels.csv")), 8);
    let first = fs::read(det.join("scores.csv")).unwrap();
    ok(&["detect", "--checkpoint", s(&run.join("checkpoint.json")), "--out", s(&det)]);
    assert_eq!(first, fs::read(det.join("scores.csv")).unwrap());

    // validation scores are the KDE centers; about delta of them are flagged
    let val = dir.path().join("val");
    ok(&["detect", "--checkpoint", s(&run.join("checkpoint.json")), "--split", "val", "--out", s(&val)]);
    let text = fs::read_to_string(val.join("scores.csv")).unwrap();
    let flagged = text.lines().skip(1).filter(|l| l.ends_with(",1")).count();
    assert_eq!(csv_rows(&val.join("scores.csv")), 16);
    assert!(flagged <= 6, "{flagged}");

    // scoring a manifest written by synth
    let data = dir.path().join("data");
    ok(&["synth", "--config", s(&cfg), "--out", s(&data)]);
    let all = dir.path().join("all");
    ok(&[
        "detect",
        "--checkpoint",
        s(&run.join("checkpoint.json")),
        "--data",
        s(&data.join("manifest.json")),
        "--out",
        s(&all),
    ]);
    assert_eq!(csv_rows(&all.join("scores.csv")), 16 * 4);
}

#[test]
fn train_gwvae_and_zero_epochs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let run = dir.path().join("vae");
    ok(&["train", "--config", s(&cfg), "--model", "gwvae", "--out", s(&run)]);
    let names: Vec<String> = json(&run.join("checkpoint.json"))["tensors"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t["name"].as_str().unwrap().to_string())
        .collect();
    assert!(names.iter().any(|n| n.starts_with("head_mu.")));
    assert!(names.iter().any(|n| n.starts_with("head_logsigma.")));

    let zero = dir.path().join("zero");
    let out = gwspectra(&["train", "--config", s(&cfg), "--epochs", "0", "--out", s(&zero)]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    assert_eq!(json(&zero.join("checkpoint.json"))["training"]["epochs_completed"], 0);
}

#[test]
fn eval_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let a = dir.path().join("a");
    ok(&["eval", "--config", s(&cfg), "--retrain", "--out", s(&a)]);
    let report = json(&a.join("report.json"));
    assert_eq!(report["runs"].as_array().unwrap().len(), 2);
    assert_eq!(report["single_run"], false);
    assert_eq!(csv_rows(&a.join("report.csv")), 4);
    let b = dir.path().join("b");
    ok(&["eval", "--config", s(&cfg), "--retrain", "--sequential", "--out", s(&b)]);
    assert_eq!(fs::read(a.join("report.json")).unwrap(), fs::read(b.join("report.json")).unwrap());

    let g = dir.path().join("g");
    ok(&["eval", "--config", s(&cfg), "--retrain", "--seeds", "0", "--graph-level", "--out", s(&g)]);
    assert_eq!(csv_rows(&g.join("scores_seed0.csv")), 8);

    // score-only evaluation of a trained checkpoint matches its training run
    let run = dir.path().join("run");
    ok(&["train", "--config", s(&cfg), "--seed", "0", "--out", s(&run)]);
    let c = dir.path().join("c");
    ok(&["eval", "--checkpoint", s(&run.join("checkpoint.json")), "--out", s(&c)]);
    let single = json(&c.join("report.json"));
    assert_eq!(single["single_run"], true);
    assert_eq!(single["runs"][0], report["runs"][0]);
}

#[test]
fn sweep_rows_and_consistency() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out = dir.path().join("sweep");
    ok(&["sweep-scales", "--config", s(&cfg), "--seed", "0", "--j-min", "2", "--j-max", "4", "--out", s(&out)]);
    let text = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.iter().all(|v| v.is_finite()) && (0.0..=1.0).contains(&r[1])));

    let e = dir.path().join("e");
    ok(&["eval", "--config", s(&cfg), "--retrain", "--seeds", "0", "--out", s(&e)]);
    let auc = json(&e.join("report.json"))["runs"][0]["auc"].as_f64().unwrap();
    assert_eq!(rows[0][1], auc);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "nonsense = 1\n").unwrap();
    let out = gwspectra(&["train", "--config", s(&bad), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    assert!(!out.stderr.is_empty());

    let out = gwspectra(&["detect", "--checkpoint", s(&dir.path().join("missing.json")), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(3));

    // no anomalies and an even split leaves the test set empty
    let cfg = small_config(dir.path(), "[split]\ntrain_frac = 0.5\nval_frac = 0.5\n");
    let text = fs::read_to_string(&cfg).unwrap();
    let text = text.split("[[data.spec.anomalies]]").next().unwrap().replace("normal_count = 10", "normal_count = 10\nanomalies = []");
    fs::write(&cfg, text).unwrap();
    let run = dir.path().join("run");
    ok(&["train", "--config", s(&cfg), "--out", s(&run)]);
    let out = gwspectra(&["detect", "--checkpoint", s(&run.join("checkpoint.json")), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(3));

    // signals too short for one graph under the checkpoint's window
    let short = dir.path().join("short");
    let short_cfg = dir.path().join("short.toml");
    fs::write(
        &short_cfg,
        "[data]\nsource = \"synthetic\"\n[data.spec]\nwindow_len = 16\ngraph_size = 4\nnormal_count = 2\nanomalies = []\n[window]\nwindow_len = 16\ngraph_size = 4\n[model]\ninput_dim = 16\ngraph_size = 4\n",
    )
    .unwrap();
    ok(&["synth", "--config", s(&short_cfg), "--out", s(&short)]);
    let out = gwspectra(&[
        "detect",
        "--checkpoint",
        s(&run.join("checkpoint.json")),
        "--data",
        s(&short.join("manifest.json")),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(3));

    let out = gwspectra(&["sweep-scales", "--config", s(&cfg), "--j-min", "5", "--j-max", "2", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}
