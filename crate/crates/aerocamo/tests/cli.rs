//! End-to-end CLI runs on a tiny configuration.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const TINY: &str = r#"
[synth]
train_count = 6
test_count = 4

[synth.scene]
image_size = 64
span = [20.0, 30.0]
cell = 16
max_objects = 2

[detector]
input_size = 64
channels = [4, 4, 4, 4, 4, 4]
anchor = [24.0, 24.0]

[detector_training]
epochs = 1
min_ap = 0.0

[patch_training]
epochs = 2
batch_size = 3
patch_size = [6, 6]
checkpoint_every = 1

[evaluation]
gt_confidence = 0.0001
"#;

fn aerocamo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aerocamo")).args(args).output().expect("binary runs")
}

fn run_dir(out: &Output) -> PathBuf {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    let line = stdout.lines().find_map(|l| l.strip_prefix("run_dir=")).expect("run_dir line");
    PathBuf::from(line)
}

fn error_line(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().expect("error line");
    serde_json::from_str(line).unwrap_or_else(|_| panic!("not JSON: {line}"))
}

struct Fixture {
    _tmp: tempfile::TempDir,
    root: PathBuf,
    config: PathBuf,
    manifest: PathBuf,
    weights: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path().to_path_buf();
        let config = root.join("tiny.toml");
        std::fs::write(&config, TINY).unwrap();
        let c = config.to_str().unwrap().to_owned();
        let data = run_dir(&aerocamo(&["synth-data", "--config", &c, "--seed", "3", "--run-dir", p(&root.join("data"))]));
        let manifest = data.join("manifest.json");
        let det = run_dir(&aerocamo(&[
            "train-detector", "--config", &c, "--seed", "3", "--manifest", p(&manifest), "--run-dir", p(&root.join("det")),
        ]));
        Self { _tmp: tmp, weights: det.join("detector.bin"), root, config, manifest }
    }

    fn c(&self) -> &str {
        p(&self.config)
    }
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn unknown_subcommand_is_usage_error() {
    assert_eq!(aerocamo(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(aerocamo(&["evaluate", "--bogus"]).status.code(), Some(2));
}

#[test]
fn missing_inputs_exit_three() {
    let out = aerocamo(&["train-detector", "--manifest", "/nonexistent/manifest.json", "--out", "/tmp"]);
    assert_eq!(out.status.code(), Some(3));
    let e = error_line(&out);
    assert_eq!(e["error"], "missing_input");
    assert_eq!(e["exit_code"], 3);
    let out = aerocamo(&["plot", "--reports", "/nonexistent/r.json"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn pipeline_runs_end_to_end() {
    let f = Fixture::new();
    let c = f.c();

    // Zero epochs is a validation error with a parsable message.
    let out = aerocamo(&[
        "train-patch", "--config", c, "--manifest", p(&f.manifest), "--weights", p(&f.weights), "--epochs", "0",
        "--out", p(&f.root),
    ]);
    assert_ne!(out.status.code(), Some(0));
    assert_eq!(error_line(&out)["error"], "invalid_config");

    let bad = aerocamo(&[
        "train-patch", "--config", c, "--manifest", p(&f.manifest), "--weights", p(&f.weights), "--preset", "huge",
        "--out", p(&f.root),
    ]);
    assert_eq!(bad.status.code(), Some(2));

    let patch_dir = run_dir(&aerocamo(&[
        "train-patch", "--config", c, "--seed", "3", "--manifest", p(&f.manifest), "--weights", p(&f.weights),
        "--preset", "large", "--out", p(&f.root),
    ]));
    let name = patch_dir.file_name().unwrap().to_str().unwrap();
    assert!(name.contains("-seed3-train-patch"), "{name}");
    assert_eq!(name.as_bytes()[8], b'T');
    for file in ["config.toml", "run.json", "log.jsonl", "patch.png", "patch.json", "best.png", "checkpoints/state.json"] {
        assert!(patch_dir.join(file).exists(), "{file}");
    }
    let log = std::fs::read_to_string(patch_dir.join("log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 2);
    let first: serde_json::Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    for key in ["epoch", "l_obj", "l_nps", "l_tv", "l_sal", "total"] {
        assert!(first.get(key).is_some(), "{key}");
    }

    let patch = patch_dir.join("patch.png");
    let out = aerocamo(&[
        "evaluate", "--config", c, "--seed", "3", "--manifest", p(&f.manifest), "--weights", p(&f.weights),
        "--patch", p(&patch), "--condition", "clean", "--condition", "noise", "--condition", "patch",
        "--run-dir", p(&f.root.join("eval")),
    ]);
    let eval = run_dir(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("clean_ap=1.000000"), "{stdout}");
    let clean: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(eval.join("report_clean.json")).unwrap()).unwrap();
    assert_eq!(clean["ap"], 1.0);
    assert_eq!(clean["condition"], "CLEAN");
    assert!(eval.join("report_noise_pr.csv").exists());

    let plot = run_dir(&aerocamo(&[
        "plot", "--reports", p(&eval.join("report_clean.json")), p(&eval.join("report_noise.json")),
        p(&eval.join("report_patch.json")), "--run-dir", p(&f.root.join("plot")),
    ]));
    let svg = std::fs::read_to_string(plot.join("pr_curves.svg")).unwrap();
    for label in ["CLEAN", "NOISE", "PATCH"] {
        assert!(svg.contains(label), "{label} missing from plot");
    }
    let png = image::open(plot.join("pr_curves.png")).unwrap();
    assert!(png.width() > 100 && png.height() > 100);

    let applied = run_dir(&aerocamo(&[
        "apply", "--config", c, "--manifest", p(&f.manifest), "--patch", p(&patch), "--policy", "identity",
        "--run-dir", p(&f.root.join("applied")),
    ]));
    assert!(applied.join("manifest.json").exists());

    // Resume from the saved state continues to the configured epoch count.
    let resumed = run_dir(&aerocamo(&[
        "train-patch", "--config", c, "--seed", "3", "--manifest", p(&f.manifest), "--weights", p(&f.weights),
        "--preset", "large", "--epochs", "3", "--resume", p(&patch_dir.join("checkpoints/state.json")),
        "--out", p(&f.root),
    ]));
    let log = std::fs::read_to_string(resumed.join("log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 1);
}

#[test]
fn patch_requires_patch_file() {
    let f = Fixture::new();
    let out = aerocamo(&[
        "evaluate", "--config", f.c(), "--manifest", p(&f.manifest), "--weights", p(&f.weights), "--condition",
        "patch", "--out", p(&f.root),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["error"], "usage");
}
