use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_delaynet"));
    c.env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn small_config(dir: &Path, extra: &str) -> PathBuf {
    let text = format!(
        r#"name = "small"
seed = 3
output_dir = "{out}"

[task.cue]
n_cues = 3
wait_range_ms = [50.0, 100.0]

[network]
n_hidden = 12

[train]
epochs = 2
samples_per_epoch = 8
batch_size = 4
test_samples = 8

[train.init]
in_gain = 10.0
rec_gain = 10.0
{extra}
"#,
        out = dir.join("run").display()
    );
    let p = dir.join("config.toml");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn train_writes_artifacts_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = run(&["train", "--config", cfg.to_str().unwrap(), "--output", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let metrics = fs::read_to_string(a.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 3);
    assert!(metrics.starts_with("epoch,train_loss,train_acc,test_acc,mean_spike_rate,bf_loss"));
    assert_eq!(metrics, fs::read_to_string(b.join("metrics.csv")).unwrap());
    for f in ["checkpoint.bin", "report.json", "config.toml", "delays.json", "manifest.json"] {
        assert!(a.join(f).exists(), "{f} missing");
    }
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 16);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("report.json")).unwrap()).unwrap();
    assert!(report["spectral_radius"].as_f64().is_some());
}

#[test]
fn validation_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "[train.constraints]\ntau_rec_clamp = [-1.0, 50.0]\n");
    let o = run(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("tau_rec_clamp"));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "seed = 1\n[train]\nepochs = \"x\"\n").unwrap();
    let o = run(&["train", "--config", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    let o = run(&["train"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn divergence_exits_with_two_and_keeps_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let text = fs::read_to_string(&cfg).unwrap().replace("in_gain = 10.0", "in_gain = 1e308");
    fs::write(&cfg, text).unwrap();
    let o = run(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("run/checkpoint.bin").exists());
}

#[test]
fn missing_checkpoint_is_an_io_error() {
    let o = run(&["eval", "--checkpoint", "/nonexistent/ckpt.bin"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn eval_sweeps_and_chance_level() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out = dir.path().join("untrained");
    let o = run(&["train", "--config", cfg.to_str().unwrap(), "--output", out.to_str().unwrap(), "--epochs", "0"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let ckpt = out.join("checkpoint.bin");
    let ckpt = ckpt.to_str().unwrap();

    let o = run(&["eval", "--checkpoint", ckpt, "--n-cues", "7", "--samples", "8"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let row = text.lines().nth(1).unwrap();
    assert!(row.starts_with("n_cues,7,") && row.ends_with(",8,1"), "{row}");

    let csv = dir.path().join("waits.csv");
    let o = run(&[
        "eval", "--checkpoint", ckpt, "--wait-ms", "500,5000,30000", "--samples", "4", "--output",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(dir.path().join("manifest.json").exists());

    // an untrained network answers at chance on the standard task
    let o = run(&["eval", "--checkpoint", ckpt, "--samples", "2000", "--seed", "9"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let acc: f64 = text.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert!((acc - 0.5).abs() <= 0.05, "accuracy {acc}");
}

#[test]
fn memory_bound_table() {
    let o = run(&["memory-bound", "--bits", "1", "--tau", "20"]);
    assert_eq!(code(&o), 0);
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().nth(1).unwrap(), "1,20,0,0");

    let o = run(&["memory-bound", "--bits", "4,8,16", "--tau", "20,200,2000"]);
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<Vec<f64>> =
        text.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| r[3] <= r[2]));

    assert_ne!(code(&run(&["memory-bound", "--tau", "20"])), 0);
}

#[test]
fn ablate_rejects_contradictions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let c = cfg.to_str().unwrap();
    assert_eq!(code(&run(&["ablate", "--config", c])), 1);
    assert_eq!(code(&run(&["ablate", "--config", c, "--no-delays", "--no-recurrence"])), 1);
    let o = run(&["ablate", "--config", c, "--no-recurrence", "--long-tau", "--epochs", "1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(dir.path().join("run/ablation.csv")).unwrap();
    assert!(table.contains("baseline,") && table.contains("no-recurrence+long-tau,"));
    let report = fs::read_to_string(dir.path().join("run/no-recurrence+long-tau/report.json")).unwrap();
    assert!(report.contains("\"tau_rec_ms\": 2000.0"));
}

#[test]
fn generate_and_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let o = run(&["generate", "--output", data.to_str().unwrap(), "--count", "3", "--n-cues", "5", "--seed", "2"]);
    assert_eq!(code(&o), 0);
    assert!(data.join("manifest.json").exists() && data.join("episode_00002.bin").exists());

    let cfg = small_config(dir.path(), "");
    let out = dir.path().join("trained");
    let o = run(&["train", "--config", cfg.to_str().unwrap(), "--output", out.to_str().unwrap(), "--epochs", "1"]);
    assert_eq!(code(&o), 0);
    let an = dir.path().join("analysis");
    let o = run(&[
        "analyze", "--checkpoint", out.join("checkpoint.bin").to_str().unwrap(), "--config",
        cfg.to_str().unwrap(), "--output", an.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["raster.csv", "spectrum.csv", "run.bin", "raster.png", "spectrum.png", "analysis.json", "manifest.json"] {
        assert!(an.join(f).exists(), "{f} missing");
    }
    assert_eq!(&fs::read(an.join("raster.png")).unwrap()[1..4], b"PNG");
}
