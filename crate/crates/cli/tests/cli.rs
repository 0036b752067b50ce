use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dynamix_core::io::{read_checkpoint, read_dataset};
use dynamix_core::model::init_model;
use dynamix_core::seed;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_dynamix");

fn dynamix(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("DYNAMIX_DATA_DIR").env("RUST_LOG", "warn").output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

const GEN: &str = "systems = [\"lorenz63\"]\nsequences_per_system = 10\nseq_len = 60\ncontext_length = 40\noverlap = 10\n";
const TRAIN: &str = "epochs = 3\nbatches_per_epoch = 2\nbatch_size = 2\nlr_start = 0.01\nlr_end = 0.001\ncheckpoint_every = 1\n[model]\nm = 6\np = 1\nj = 2\nhidden = 4\n";

fn dataset(dir: &Path) -> PathBuf {
    let cfg = write(dir, "gen.toml", GEN);
    let out = dir.join("corpus.dmx");
    let o = dynamix(&["generate", "--config", p(&cfg), "--out", p(&out), "--seed", "5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

fn trained(dir: &Path) -> PathBuf {
    let data = dataset(dir);
    let cfg = write(dir, "train.toml", TRAIN);
    let out = dir.join("run");
    let o = dynamix(&["train", "--dataset", p(&data), "--config", p(&cfg), "--out-dir", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    out.join("model.dmxm")
}

#[test]
fn generate_minimal_and_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = dataset(dir.path());
    let corpus = read_dataset(&a).unwrap();
    assert_eq!(corpus.len(), 10);
    assert_eq!(corpus.params.seed, 5);
    let first = std::fs::read(&a).unwrap();
    let b = dataset(dir.path());
    assert_eq!(std::fs::read(&b).unwrap(), first);

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("corpus.dmx.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "generate");
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["outputs"][0], p(&a));
    assert_eq!(manifest["config"]["sequences_per_system"], "10");
}

#[test]
fn generate_names_unknown_system() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "gen.toml", "systems = [\"lorenz63\", \"lorenz36\"]\n");
    let o = dynamix(&["generate", "--config", p(&cfg), "--out", p(&dir.path().join("x.dmx"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lorenz36"), "{}", stderr(&o));
    assert!(!dir.path().join("x.dmx").exists());
}

#[test]
fn generate_defaults_to_data_dir() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "gen.toml", GEN);
    let o = Command::new(BIN)
        .args(["generate", "--config", p(&cfg)])
        .env("DYNAMIX_DATA_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("corpus.dmx").exists());
    assert!(dir.path().join("corpus.dmx.manifest.json").exists());
}

#[test]
fn train_writes_checkpoints_and_loss() {
    let dir = TempDir::new().unwrap();
    let model = trained(dir.path());
    let run = model.parent().unwrap();
    let loss = csv_rows(&run.join("loss.csv"));
    assert_eq!(loss[0], ["epoch", "mse", "reg", "lr"]);
    assert_eq!(loss.len(), 4);
    for e in 1..=3 {
        assert!(run.join(format!("checkpoints/epoch_{e:05}.dmxm")).exists());
    }
    let ckpt = read_checkpoint(&model).unwrap();
    assert_eq!(ckpt.model.n(), 3);
    assert_eq!(ckpt.model.j(), 2);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 5);
    assert_eq!(manifest["config"]["model.m"], "6");
    assert_eq!(manifest["config"]["context_length"], "40");

    // Replaying the run reproduces the checkpoint exactly, also with more threads.
    let cfg = dir.path().join("train.toml");
    let again = dir.path().join("again");
    let o = dynamix(&["train", "--dataset", p(&dir.path().join("corpus.dmx")), "--config", p(&cfg), "--out-dir", p(&again), "--jobs", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read(again.join("model.dmxm")).unwrap(), std::fs::read(&model).unwrap());
}

#[test]
fn train_zero_epochs_keeps_initialization() {
    let dir = TempDir::new().unwrap();
    let data = dataset(dir.path());
    let cfg = write(dir.path(), "t.toml", "epochs = 0\nseed = 11\n[model]\nm = 6\np = 1\nj = 2\nhidden = 4\n");
    let out = dir.path().join("run");
    let o = dynamix(&["train", "--dataset", p(&data), "--config", p(&cfg), "--out-dir", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ckpt = read_checkpoint(&out.join("model.dmxm")).unwrap();
    let init = init_model(ckpt.model.config, seed::derive(11, "model-init", &[])).unwrap();
    for (a, b) in ckpt.model.flatten().iter().zip(init.flatten()) {
        assert_eq!(*a, b as f32 as f64);
    }
    assert_eq!(csv_rows(&out.join("loss.csv")).len(), 1);
}

#[test]
fn train_rejects_corrupted_dataset() {
    let dir = TempDir::new().unwrap();
    let data = dataset(dir.path());
    let mut bytes = std::fs::read(&data).unwrap();
    bytes[0] = b'Z';
    std::fs::write(&data, bytes).unwrap();
    let cfg = write(dir.path(), "t.toml", TRAIN);
    let out = dir.path().join("run");
    let o = dynamix(&["train", "--dataset", p(&data), "--config", p(&cfg), "--out-dir", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("magic"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn train_divergence_exits_3() {
    let dir = TempDir::new().unwrap();
    let data = dataset(dir.path());
    let cfg = write(dir.path(), "t.toml", &TRAIN.replace("lr_start = 0.01", "lr_start = 1e300"));
    let out = dir.path().join("run");
    let o = dynamix(&["train", "--dataset", p(&data), "--config", p(&cfg), "--out-dir", p(&out)]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let last = out.join("last_good.dmxm");
    assert!(stderr(&o).contains(p(&last)), "{}", stderr(&o));
    assert!(read_checkpoint(&last).unwrap().model.is_finite());
    assert!(!out.join("manifest.json").exists());
}

fn sine_csv(dir: &Path, cols: usize, len: usize) -> PathBuf {
    let mut text = (0..cols).map(|i| format!("s{i}")).collect::<Vec<_>>().join(",") + "\n";
    for t in 0..len {
        let row: Vec<String> = (0..cols).map(|i| ((t as f64) * 0.1 + i as f64).sin().to_string()).collect();
        text += &(row.join(",") + "\n");
    }
    write(dir, &format!("ctx{cols}.csv"), &text)
}

#[test]
fn forecast_delay_embedding_shapes() {
    let dir = TempDir::new().unwrap();
    let model = trained(dir.path());
    let ctx = sine_csv(dir.path(), 1, 300);
    let out = dir.path().join("fc");
    let o = dynamix(&["forecast", "--checkpoint", p(&model), "--context", p(&ctx), "--steps", "250", "--embed", "delay", "--out-dir", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let fc = csv_rows(&out.join("forecast.csv"));
    assert_eq!(fc[0], ["s0", "embed1", "embed2"]);
    assert_eq!(fc.len(), 251);
    let w = csv_rows(&out.join("weights.csv"));
    assert_eq!(w[0], ["e0", "e1"]);
    assert_eq!(w.len(), 251);
    for row in &w[1..] {
        let s: f64 = row.iter().map(|v| v.parse::<f64>().unwrap()).sum();
        assert!((s - 1.0).abs() < 1e-9);
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["details"]["embedding"]["kind"], "delay");
    assert_eq!(manifest["details"]["embedding"]["lags"].as_array().unwrap().len(), 2);

    // Same inputs, same bytes.
    let out2 = dir.path().join("fc2");
    let o = dynamix(&["forecast", "--checkpoint", p(&model), "--context", p(&ctx), "--steps", "250", "--embed", "delay", "--out-dir", p(&out2)]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(out.join("forecast.csv")).unwrap(), std::fs::read(out2.join("forecast.csv")).unwrap());
}

#[test]
fn forecast_embedding_errors_exit_4() {
    let dir = TempDir::new().unwrap();
    let model = trained(dir.path());
    let ctx = sine_csv(dir.path(), 2, 100);
    let out = dir.path().join("fc");
    let o = dynamix(&["forecast", "--checkpoint", p(&model), "--context", p(&ctx), "--steps", "10", "--embed", "none", "--out-dir", p(&out)]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("zero-fill"), "{}", stderr(&o));

    let o = dynamix(&["forecast", "--checkpoint", p(&model), "--context", p(&ctx), "--steps", "10", "--embed", "zero-fill", "--out-dir", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(csv_rows(&out.join("forecast.csv"))[0], ["s0", "s1", "embed2"]);

    let flat = write(dir.path(), "flat.csv", &("x\n".to_string() + &"1.0\n".repeat(100)));
    let o = dynamix(&["forecast", "--checkpoint", p(&model), "--context", p(&flat), "--steps", "10", "--embed", "delay", "--out-dir", p(&out)]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));

    let o = dynamix(&["forecast", "--checkpoint", p(&model), "--context", p(&ctx), "--steps", "10", "--embed", "sideways"]);
    assert_eq!(o.status.code(), Some(2));
}

const EVAL: &str = "systems = [\"thomas\", \"sprott_e\"]\nn_steps = 300\ncontext_length = 200\nwarmup = 20\n";

#[test]
fn evaluate_rows_and_sweeps() {
    let dir = TempDir::new().unwrap();
    let model = trained(dir.path());
    let cfg = write(dir.path(), "eval.toml", EVAL);
    let out = dir.path().join("m.csv");
    let o = dynamix(&["evaluate", "--checkpoint", p(&model), "--config", p(&cfg), "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0][0], "system");
    assert!(rows[1..].iter().all(|r| r[4] == "ok"));
    assert!(dir.path().join("m.csv.manifest.json").exists());

    let o = dynamix(&["evaluate", "--checkpoint", p(&model), "--config", p(&cfg), "--out", p(&out), "--context-sweep", "100,150,250"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 7);
    let lengths: Vec<&str> = rows[1..4].iter().map(|r| r[2].as_str()).collect();
    assert_eq!(lengths, ["100", "150", "250"]);

    let o = dynamix(&["evaluate", "--checkpoint", p(&model), "--config", p(&cfg), "--out", p(&out), "--dt-sweep", "0.05,0.1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[2][3], "0.1");
}

#[test]
fn evaluate_isolates_failures() {
    let dir = TempDir::new().unwrap();
    let model = trained(dir.path());
    let cfg = write(dir.path(), "eval.toml", &EVAL.replace("\"sprott_e\"", "\"nonesuch\", \"sprott_e\""));
    let out = dir.path().join("m.csv");
    let o = dynamix(&["evaluate", "--checkpoint", p(&model), "--config", p(&cfg), "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 4);
    let bad = &rows[2];
    assert_eq!(bad[0], "nonesuch");
    assert_eq!(bad[4], "error");
    assert!(bad[5..10].iter().all(String::is_empty));
    assert!(bad[11].contains("nonesuch"));
    assert_eq!(rows[3][4], "ok");
}

#[test]
fn similarity_of_identical_systems() {
    let dir = TempDir::new().unwrap();
    let model = trained(dir.path());
    let cfg = write(
        dir.path(),
        "sim.toml",
        "systems = [\"lorenz63\", \"lorenz63\", \"thomas\"]\nn_steps = 300\ncontext_length = 200\nwarmup = 20\n",
    );
    let out = dir.path().join("sim.csv");
    let o = dynamix(&["similarity", "--checkpoint", p(&model), "--config", p(&cfg), "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&out);
    assert_eq!(rows[0], ["system", "lorenz63", "lorenz63", "thomas"]);
    let m: Vec<Vec<f64>> = rows[1..].iter().map(|r| r[1..].iter().map(|v| v.parse().unwrap()).collect()).collect();
    for i in 0..3 {
        assert_eq!(m[i][i], 1.0);
        for j in 0..3 {
            assert!((m[i][j] - m[j][i]).abs() <= 1e-12);
        }
    }
    assert_eq!(m[0][1], 1.0);

    let one = write(dir.path(), "one.toml", "systems = [\"thomas\"]\n");
    let o = dynamix(&["similarity", "--checkpoint", p(&model), "--config", p(&one), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
}
