//! End-to-end tests of the command-line binary.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cet"))
}

fn write_small_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("cfg.txt");
    std::fs::write(
        &path,
        "seed = 13\n\
         normal_hours = 0.25\n\
         abnormal_duration_s = 240\n\
         n_trips = 2\n\
         window.len = 10\n\
         window.step = 5\n\
         forest.trees = 8\n\
         forest.depth = 8\n\
         out_of_training = true\n",
    )
    .unwrap();
    path
}

fn run_ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "command failed: {}\n{}",
        String::from_utf8_lossy(&out.stderr),
        String::from_utf8_lossy(&out.stdout)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn generate_writes_manifest_and_reruns_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_small_config(tmp.path());
    for name in ["a", "b"] {
        let out = bin()
            .args(["--config"])
            .arg(&cfg)
            .args(["--out"])
            .arg(tmp.path().join(name))
            .arg("generate")
            .output()
            .unwrap();
        run_ok(out);
    }
    let manifest = std::fs::read_to_string(tmp.path().join("a/manifest.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    let entries = parsed["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 17); // 14 states + training variant + 2 lead-ins
    // Per-dataset files exist for every manifest entry.
    for e in entries {
        let id = e["id"].as_str().unwrap();
        for suffix in ["_ot.csv", "_it.csv", "_ot_mask.csv", "_it_mask.csv"] {
            assert!(tmp.path().join("a").join(format!("{id}{suffix}")).exists(), "{id}{suffix}");
        }
    }
    // Byte-identical rerun.
    let mut names: Vec<_> = std::fs::read_dir(tmp.path().join("a"))
        .unwrap()
        .filter_map(|e| {
            let e = e.unwrap();
            e.file_type().unwrap().is_file().then(|| e.file_name())
        })
        .collect();
    names.sort();
    for name in names {
        let a = std::fs::read(tmp.path().join("a").join(&name)).unwrap();
        let b = std::fs::read(tmp.path().join("b").join(&name)).unwrap();
        assert_eq!(a, b, "{name:?} differs");
    }
    assert!(tmp.path().join("a/out_of_training/manifest.json").exists());
}

#[test]
fn invalid_config_rejected_before_any_file_is_written() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.txt");
    std::fs::write(&cfg, "abnormal_duration_s = -100\n").unwrap();
    let out_dir = tmp.path().join("data");
    let out = bin()
        .args(["--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&out_dir)
        .arg("generate")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("line 1"), "{msg}");
    assert!(!out_dir.exists(), "output dir created despite config error");
}

#[test]
fn missing_inputs_exit_with_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["--out"])
        .arg(tmp.path().join("r"))
        .args(["eval", "--model", "missing.json", "--bundle"])
        .arg(tmp.path().join("nowhere"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn train_eval_classify_sweep_roundtrip() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_small_config(tmp.path());
    let data = tmp.path().join("data");
    let models = tmp.path().join("models");
    let report = tmp.path().join("report");
    let run = |args: &mut Command| run_ok(args.output().unwrap());

    run(bin().args(["--config"]).arg(&cfg).args(["--out"]).arg(&data).arg("generate"));
    run(bin()
        .args(["--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&models)
        .args(["train", "--bundle"])
        .arg(&data));
    let model = models.join("classifier.json");
    run(bin()
        .args(["--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&report)
        .args(["eval", "--model"])
        .arg(&model)
        .args(["--bundle"])
        .arg(&data)
        .arg("--plots"));
    for name in [
        "level1_cm.csv",
        "level2_cm.csv",
        "level3_cm.csv",
        "overall_cm.csv",
        "metrics.csv",
        "level1_roc.svg",
    ] {
        assert!(report.join(name).exists(), "{name} missing");
    }

    // Pure-normal stream: every line ends 0,0,0,Normal; line count obeys
    // the window formula for a 0.25 h (900 s) frame with W=10, step=5.
    let stdout = run(bin()
        .args(["--config"])
        .arg(&cfg)
        .args(["classify", "--model"])
        .arg(&model)
        .args(["--bundle"])
        .arg(&data)
        .args(["--id", "normal"]));
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), (900 - 10) / 5 + 1);
    for line in &lines {
        assert!(line.ends_with("0,0,0,Normal"), "{line}");
    }

    // Held-out report.
    let stdout = run(bin()
        .args(["--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&report)
        .args(["report", "--model"])
        .arg(&model)
        .args(["--bundle"])
        .arg(&data));
    assert!(stdout.contains("flood detection F1"), "{stdout}");
    assert!(report.join("out_of_training.json").exists());

    // Default 64-cell grid produces 64 data rows; reruns without the
    // timing column are byte-identical.
    for name in ["s1", "s2"] {
        run(bin()
            .args(["--config"])
            .arg(&cfg)
            .args(["--out"])
            .arg(tmp.path().join(name))
            .args(["sweep", "--bundle"])
            .arg(&data)
            .arg("--no-wall-time"));
    }
    let csv = std::fs::read_to_string(tmp.path().join("s1/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 65);
    let again = std::fs::read(tmp.path().join("s2/sweep.csv")).unwrap();
    assert_eq!(std::fs::read(tmp.path().join("s1/sweep.csv")).unwrap(), again);
}
