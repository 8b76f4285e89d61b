//! End-to-end CLI checks: exit codes through the real binary, and the file
//! outputs of an in-process run.

use std::process::Command;

use spellersim::cli::{execute, RunSpec};
use spellersim::report::{FLASH_LOG_HEADER, SWEEP_CSV_HEADER};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spellersim"))
}

#[test]
fn help_exits_zero_and_documents_the_flags() {
    let out = bin().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("Usage"));
    for flag in ["--paradigm", "--dprimes", "--od", "--tti-min", "--p-threshold", "--t-max"] {
        assert!(text.contains(flag), "help should mention {flag}");
    }
}

#[test]
fn usage_errors_exit_with_code_two() {
    let out = bin().args(["--tti-min", "0"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("tti-min"));

    let out = bin().args(["--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--no-such-flag"));
}

#[test]
fn infeasible_constraint_combinations_exit_with_code_three() {
    // tti-min 9 with flash size 9 can block all 72 characters.
    let out = bin()
        .args([
            "--paradigm",
            "greedy-adaptive",
            "--tti-min",
            "9",
            "--trials",
            "2",
            "--dprimes",
            "1",
            "--quiet",
            "--out-dir",
        ])
        .arg(tempfile::tempdir().unwrap().path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exhaust"));
}

#[test]
fn small_run_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let spec = RunSpec {
        trials: 12,
        dprimes: vec![1.0],
        out_dir: dir.path().to_path_buf(),
        flash_logs: true,
        quiet: true,
        ..RunSpec::default()
    };
    let outputs = execute(&spec).unwrap();

    let csv = std::fs::read_to_string(&outputs.csv_path).unwrap();
    assert!(csv.starts_with(SWEEP_CSV_HEADER));
    assert_eq!(csv.lines().count(), 1 + 3, "header plus one row per paradigm");

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&outputs.json_path).unwrap()).unwrap();
    assert_eq!(json["trials"], 12);
    assert_eq!(json["cells"].as_array().unwrap().len(), 3);

    let comparison = std::fs::read_to_string(outputs.comparison_path.as_ref().unwrap()).unwrap();
    assert!(comparison.contains("rc-random baseline"));

    assert_eq!(outputs.flash_log_paths.len(), 3);
    for path in &outputs.flash_log_paths {
        let log = std::fs::read_to_string(path).unwrap();
        assert!(log.starts_with(FLASH_LOG_HEADER));
        assert!(log.lines().count() > 12, "at least one line per trial");
    }
}

#[test]
fn comparison_report_is_skipped_without_the_baseline_paradigm() {
    let dir = tempfile::tempdir().unwrap();
    let spec = RunSpec {
        paradigms: vec![spellersim::Paradigm::GreedyAdaptive],
        trials: 8,
        dprimes: vec![1.0],
        out_dir: dir.path().to_path_buf(),
        quiet: true,
        ..RunSpec::default()
    };
    let outputs = execute(&spec).unwrap();
    assert!(outputs.comparison_path.is_none());
    assert!(!dir.path().join("comparison.txt").exists());
}

#[test]
fn binary_run_is_deterministic_at_the_byte_level() {
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let status = bin()
            .args(["--trials", "10", "--dprimes", "1.5", "--seed", "99", "--quiet", "--out-dir"])
            .arg(dir.path())
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
        std::fs::read(dir.path().join("sweep.csv")).unwrap()
    };
    assert_eq!(run(), run());
}
