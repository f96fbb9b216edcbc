use std::path::Path;
use std::process::Command;

use askewsgd::harness::record::{read_runlog_csv, strip_wall_time};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_askewsgd"))
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = bin().args(args).output().expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn fig1_writes_field_and_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, stdout, _) = run(&["fig1", "--out-dir", out]);
    assert_eq!(code, 0);
    assert!(stdout.contains("violations 0"));
    for f in [
        "fig1_field.csv",
        "fig1_trajectories.csv",
        "fig1_summary.json",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn negative_alpha_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "[train]\nalpha = -1.0\n");
    let (code, _, stderr) = run(&["validate", "--config", &cfg]);
    assert_eq!(code, 2, "{stderr}");
    let (code, _, _) = run(&[
        "logistic",
        "--config",
        &cfg,
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
}

#[test]
fn bad_grid_and_unknown_keys_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let grid = write(dir.path(), "grid.toml", "[grid]\nlevels = [1.0, 1.0]\n");
    assert_eq!(run(&["fig1", "--config", &grid]).0, 2);
    let key = write(dir.path(), "key.toml", "learning_rate = 3\n");
    assert_eq!(run(&["fig1", "--config", &key]).0, 2);
    let eps = write(
        dir.path(),
        "eps.toml",
        "[grid]\nlevels = \"int4\"\n[anneal]\neps0 = 0.5\n",
    );
    let out = dir.path().join("o");
    assert_eq!(
        run(&[
            "logistic",
            "--config",
            &eps,
            "--out-dir",
            out.to_str().unwrap()
        ])
        .0,
        2
    );
}

#[test]
fn validate_passes() {
    let (code, stdout, _) = run(&["validate", "--seed", "3"]);
    assert_eq!(code, 0, "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.contains("PASS")).count(), 6);
}

#[test]
fn logistic_is_reproducible_and_flags_override_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "seed = 99\n[train]\nepochs = 9\nmethods = [\"askew\", \"bc-ste\"]\n",
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let (code, _, err) = run(&[
            "logistic",
            "--config",
            &cfg,
            "--seed",
            "5",
            "--epochs",
            "2",
            "--out-dir",
            d.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "{err}");
    }
    let name = "logistic_askew_seed5.csv";
    let ra = std::fs::read(a.join(name)).unwrap();
    let rb = std::fs::read(b.join(name)).unwrap();
    assert_eq!(strip_wall_time(&ra), strip_wall_time(&rb));
    let rows = read_runlog_csv(a.join(name)).unwrap();
    assert_eq!(rows.last().unwrap().epoch, 1);
    assert!(!a.join("logistic_sgd_seed5.csv").exists());
    let sidecar = std::fs::read_to_string(a.join("config.json")).unwrap();
    assert!(sidecar.contains("\"seed\": 5"));
}

#[test]
fn json_output_and_exhaustive() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, _, _) = run(&[
        "logistic",
        "--epochs",
        "1",
        "--format",
        "json",
        "--out-dir",
        out,
    ]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(dir.path().join("logistic_askew_seed0.json")).unwrap();
    let rows: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 6);

    let (code, stdout, _) = run(&["exhaustive", "--model", "fig1", "--out-dir", out]);
    assert_eq!(code, 0);
    assert!(stdout.contains("configurations 4"));
    assert!(stdout.contains("w [1.0, 1.0]"));
    let (code, stdout, _) = run(&["exhaustive", "--out-dir", out]);
    assert_eq!(code, 0);
    assert!(stdout.contains("configurations 512"));
}
