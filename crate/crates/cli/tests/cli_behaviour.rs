use std::path::Path;
use std::process::{Command, Output};

use incident_cli::RunManifest;

fn incidur(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_incidur"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

const SMALL: &str = r#"{
  "seed": 5,
  "dataset": { "synth": { "n": 120, "duration_model": { "kind": "log-normal", "mu": 3.0, "sigma": 0.5 }, "round_to_minute": true } },
  "sweep": { "models": ["tree"], "n_folds": 3 },
  "scenarios": { "tc": 20, "models": ["tree"], "scenarios": ["AtoA", "BtoB"], "n_folds": 3, "time_folding_model": "tree", "time_folding_groups": 3 }
}"#;

#[test]
fn schema_error_names_field_and_exits_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"seed": 1, "dataset": {"synth": {"n": 10}}, "sweep": {"n_folds": "ten"}}"#,
    );
    let out = incidur(&[
        "sweep",
        "--config",
        &cfg,
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("sweep.n_folds"), "{err}");
}

#[test]
fn synth_field_errors_carry_their_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"seed": 1, "dataset": {"synth": {"n": 10, "duration_model": {"kind": "log-normal", "mu": "x", "sigma": 1}}}}"#,
    );
    let out = incidur(&[
        "synth",
        "--config",
        &cfg,
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("dataset.synth.duration_model"), "{err}");
}

#[test]
fn seed_is_required_unless_given_on_the_command_line() {
    let tmp = tempfile::tempdir().unwrap();
    let body = SMALL.replace("\"seed\": 5,", "");
    let cfg = write_config(tmp.path(), &body);
    let out_dir = tmp.path().join("o");
    let out = incidur(&["synth", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
    let out = incidur(&[
        "synth",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
        "--seed",
        "8",
    ]);
    assert!(out.status.success());
    assert_eq!(manifest(&out_dir).seed, 8);
}

#[test]
fn missing_csv_is_a_load_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"seed": 1, "dataset": {"csv": {"path": "absent.csv", "schema": {"columns": [{"name": "a", "kind": "numeric"}], "target_column": "d"}}}}"#,
    );
    let out = incidur(&[
        "profile",
        "--config",
        &cfg,
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.csv"));
}

#[test]
fn empty_subset_refusal_names_the_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let body = SMALL.replace("\"tc\": 20", "\"tc\": 100000");
    let cfg = write_config(tmp.path(), &body);
    let out = incidur(&[
        "scenarios",
        "--config",
        &cfg,
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("BtoB"));
}

#[test]
fn warnings_exit_zero_and_manifest_lists_every_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out_dir = tmp.path().join("o");
    let out = incidur(&["sweep", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(&out_dir);
    assert_eq!(m.command, "sweep");
    assert!(!m.warnings.is_empty());
    assert_eq!(m.config_hash.len(), 64);
    let mut on_disk: Vec<String> = std::fs::read_dir(&out_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    on_disk.sort();
    let mut listed = m.files.clone();
    listed.sort();
    assert_eq!(on_disk, listed);
    let sweep = std::fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    assert!(sweep.starts_with("tc,model,precision,recall,accuracy,f1,class_balance,evaluable,below_gate\n"));
    assert_eq!(sweep.lines().count(), 1 + 11);
}

#[test]
fn rerun_is_byte_identical_and_seed_changes_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    for dir in [&a, &b] {
        assert!(
            incidur(&["scenarios", "--config", &cfg, "--out", dir.to_str().unwrap()])
                .status
                .success()
        );
    }
    for f in ["scenarios.csv", "scenario_details.csv", "time_folding.csv"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    assert!(incidur(&[
        "scenarios",
        "--config",
        &cfg,
        "--out",
        c.to_str().unwrap(),
        "--seed",
        "6"
    ])
    .status
    .success());
    assert_eq!(manifest(&a).config_hash, manifest(&b).config_hash);
    assert_ne!(manifest(&a).config_hash, manifest(&c).config_hash);
}
