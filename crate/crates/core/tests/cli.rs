use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use obslab::report::{config_hash, read_report};

fn config_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.json")
}

fn obslab(args: &[&str], config: &Path, out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_obslab"));
    cmd.arg("--config").arg(config);
    if let Some(o) = out {
        cmd.arg("--out").arg(o);
    }
    cmd.args(args).env_remove("OBSLAB_OUT_DIR").output().expect("spawn obslab")
}

#[test]
fn missing_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = obslab(&["observe"], &dir.path().join("nope.json"), Some(dir.path()));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.json"));
}

#[test]
fn malformed_config_reports_line_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let text = std::fs::read_to_string(config_path()).unwrap().replacen("\"seed\": 0,", "\"seed\": 0,\n  \"sede\": 1,", 1);
    std::fs::write(&path, text).unwrap();
    let out = obslab(&["cobs"], &path, Some(dir.path()));
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("sede") && err.contains("line 3"), "{err}");
}

#[test]
fn unknown_preset_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = obslab(&["--preset", "nosuch", "propagate"], &config_path(), Some(dir.path()));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nosuch"));
}

#[test]
fn bad_subcommand_exits_2() {
    let out = obslab(&["frobnicate"], &config_path(), None);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn observe_passes_and_writes_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = obslab(&["observe"], &config_path(), Some(dir.path()));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let rec = read_report(&dir.path().join("observe.json")).unwrap();
    assert!(rec.pass);
    assert_eq!(rec.config_hash, config_hash(&std::fs::read(config_path()).unwrap()));
    let csv = std::fs::read_to_string(dir.path().join("observe/ratios.csv")).unwrap();
    assert_eq!(csv.lines().count(), 501);
    assert!(csv.starts_with("candidate_id,n_or_lambda,ratio,bound,pass\n"));
}

#[test]
fn falsify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = obslab(&["falsify"], &config_path(), Some(dir.path()));
    assert_eq!(out.status.code(), Some(0));
    let rec = read_report(&dir.path().join("falsify.json")).unwrap();
    assert!(rec.outputs["report"]["growth"].as_f64().unwrap() > 10.0);
}

#[test]
fn failed_check_exits_1_with_witness() {
    let dir = tempfile::tempdir().unwrap();
    let out = obslab(&["--preset", "quartic", "kernel-check"], &config_path(), Some(dir.path()));
    assert_eq!(out.status.code(), Some(1));
    let rec = read_report(&dir.path().join("kernel-check.json")).unwrap();
    assert!(!rec.pass);
    let failing: Vec<_> = rec.checks.iter().filter(|c| !c.pass).collect();
    assert!(!failing.is_empty() && failing[0].detail.contains("max ratio"));
    assert!(rec.outputs["reports"][0]["admissible_c2"].as_f64().is_some());
}

#[test]
fn env_var_sets_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_obslab"))
        .arg("--config")
        .arg(config_path())
        .arg("cobs")
        .env("OBSLAB_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("cobs.json").exists());
}

#[test]
fn identical_runs_match_modulo_timestamps() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for (dir, threads) in [(&a, "1"), (&b, "2")] {
        let out = obslab(&["--seed", "4", "--threads", threads, "propagate"], &config_path(), Some(dir.path()));
        assert_eq!(out.status.code(), Some(0));
    }
    let strip = |p: &Path| {
        let mut r = read_report(&p.join("propagate.json")).unwrap();
        r.started.clear();
        r.finished.clear();
        serde_json::to_string(&r).unwrap()
    };
    assert_eq!(strip(a.path()), strip(b.path()));
    let field = |p: &Path| std::fs::read(p.join("propagate/field.csv")).unwrap();
    assert_eq!(field(a.path()), field(b.path()));
}

#[test]
fn record_keys_match_published_schema() {
    let schema: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(config_path().with_file_name("../schemas/run_record.schema.json")).unwrap())
            .unwrap();
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(obslab(&["cobs"], &config_path(), Some(dir.path())).status.code(), Some(0));
    let rec: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("cobs.json")).unwrap()).unwrap();
    let mut keys: Vec<&str> = rec.as_object().unwrap().keys().map(String::as_str).collect();
    let mut required: Vec<&str> = schema["required"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    keys.sort_unstable();
    required.sort_unstable();
    assert_eq!(keys, required);
}
