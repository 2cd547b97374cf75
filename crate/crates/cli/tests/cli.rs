//! End-to-end checks of the `hjlab` binary: exit codes, emitted files,
//! manifest hashing and rerun determinism.

use std::path::Path;
use std::process::{Command, Output};

fn hjlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hjlab"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    hjlab().args(args).output().expect("binary runs")
}

const SMALL_CONFIG: &str = r#"{
    "N": 64,
    "tau": 0.02,
    "T": 20.0,
    "R_schedule": [2, 4],
    "initial_data": [{"kind": "cosine"}]
}"#;

#[test]
fn verify_hr_emits_report_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_CONFIG);
    let out_dir = dir.path().join("out");
    let output = run(&[
        "verify-hr",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");

    let run_dir = out_dir.join("verify-hr");
    let report = std::fs::read_to_string(run_dir.join("hr_verification.json")).unwrap();
    assert!(report.contains("\"min_hessian_eig\""));

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run_dir.join("manifest.json")).unwrap())
            .unwrap();
    let files = manifest["files"].as_array().unwrap();
    assert_eq!(files.len(), 1);
    assert_eq!(files[0]["path"], "hr_verification.json");
    // the hash in the manifest matches the file on disk
    let bytes = std::fs::read(run_dir.join("hr_verification.json")).unwrap();
    use sha2::Digest;
    let digest = hex::encode(sha2::Sha256::digest(&bytes));
    assert_eq!(files[0]["sha256"].as_str().unwrap(), digest);
    // timestamp lives in the separate metadata file, not the manifest
    assert!(run_dir.join("run_metadata.json").exists());
    assert!(!std::fs::read_to_string(run_dir.join("manifest.json"))
        .unwrap()
        .contains("timestamp"));
}

#[test]
fn unknown_config_key_fails_with_pointer() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"taus": 0.01}"#);
    let output = run(&["verify-hr", "--config", cfg.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("/taus"), "{stderr}");
}

#[test]
fn descending_schedule_fails_with_pointer() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"R_schedule": [8, 4]}"#);
    let output = run(&["critical-value", "--config", cfg.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("/R_schedule"), "{stderr}");
    assert!(stderr.contains("not ascending"), "{stderr}");
}

#[test]
fn missing_config_file_is_io_error() {
    let output = run(&["evolve", "--config", "/nonexistent/config.json"]);
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn critical_value_passes_and_reruns_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_CONFIG);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for (out, threads) in [(&out_a, "1"), (&out_b, "4")] {
        let output = run(&[
            "critical-value",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--threads",
            threads,
        ]);
        assert!(
            output.status.success(),
            "stdout: {}\nstderr: {}",
            String::from_utf8_lossy(&output.stdout),
            String::from_utf8_lossy(&output.stderr)
        );
    }
    let a = std::fs::read(out_a.join("critical-value/critical_value.json")).unwrap();
    let b = std::fs::read(out_b.join("critical-value/critical_value.json")).unwrap();
    assert_eq!(a, b, "critical_value.json differs between 1 and 4 workers");
    let a = std::fs::read(out_a.join("critical-value/manifest.json")).unwrap();
    let b = std::fs::read(out_b.join("critical-value/manifest.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn evolve_emits_trace_sidecar_and_orbit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{
            "N": 32,
            "tau": 0.05,
            "T": 0.5,
            "R_schedule": [3],
            "initial_data": [{"kind": "sawtooth"}]
        }"#,
    );
    let out_dir = dir.path().join("out");
    let output = run(&[
        "evolve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    let run_dir = out_dir.join("evolve");
    for file in ["evolve_trace.csv", "evolve_trace_meta.json", "orbit.csv", "manifest.json"] {
        assert!(run_dir.join(file).exists(), "missing {file}");
    }
    let trace = std::fs::read_to_string(run_dir.join("evolve_trace.csv")).unwrap();
    assert!(trace.starts_with("step,node_index,value\n"));
    assert_eq!(trace.lines().count(), 1 + 11 * 32);
}

#[test]
fn regularity_experiment_small_run_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{
            "N": 64,
            "tau": 0.02,
            "T": 8.0,
            "R_schedule": [4],
            "initial_data": [{"kind": "cosine"}, {"kind": "sawtooth"}]
        }"#,
    );
    let out_dir = dir.path().join("out");
    let output = run(&[
        "regularity-experiment",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--threads",
        "2",
    ]);
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(
        output.status.success(),
        "stdout: {stdout}\nstderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let run_dir = out_dir.join("regularity-experiment");
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(run_dir.join("regularity_report.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["all_detected"], true);
    let csv = std::fs::read_to_string(run_dir.join("lip_series.csv")).unwrap();
    assert!(csv.starts_with("datum_id,R,t,lip,K\n"));
    // 2 data × 1 cutoff × 401 times
    assert_eq!(csv.lines().count(), 1 + 2 * 401);
}
