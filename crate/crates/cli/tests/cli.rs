use std::path::Path;
use std::process::{Command, Output};

fn avoidwalk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_avoidwalk")).args(args).output().expect("binary runs")
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn tail_report_for_srw_converges_to_one() {
    let out = avoidwalk(&["tail", "--law", "srw", "--x", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["status"], "pass");
    let v = report["values"][0]["value"].as_f64().unwrap();
    assert!((v - 1.0).abs() < 1e-3, "{v}");
    assert_eq!(report["values"][0]["tag"], "oracle");
    assert_eq!(report["seed"], 1);
    assert_eq!(report["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn identical_configs_give_identical_files_for_any_worker_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let common = ["conditioned", "--law", "tent", "--x", "1", "--reps", "300", "--seed", "5"];
    let run = |dir: &Path, workers: &str| {
        let mut args = common.to_vec();
        args.extend(["--workers", workers, "--out", dir.to_str().unwrap()]);
        avoidwalk(&args)
    };
    // Few paths, so some checks may fail; the outcome must still match.
    assert_eq!(run(a.path(), "1").status.code(), run(b.path(), "3").status.code());
    for f in ["conditioned.json", "conditioned_nu_cells.csv"] {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f}");
    }
}

#[test]
fn failed_check_exits_with_two() {
    // Differences along this grid grow, so the trend check fails.
    let out = avoidwalk(&["tail", "--law", "srw", "--x", "1", "--n-grid", "64,65,4096"]);
    assert_eq!(out.status.code(), Some(2));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["status"], "fail");
}

#[test]
fn bad_input_exits_with_one() {
    assert_eq!(avoidwalk(&["tail", "--law", "nonsense"]).status.code(), Some(1));
    assert_eq!(avoidwalk(&["tail"]).status.code(), Some(1));
    assert_eq!(avoidwalk(&["tail", "--law", "srw", "--bogus"]).status.code(), Some(1));
    assert_eq!(avoidwalk(&["tail", "--law", "srw", "--n", "0"]).status.code(), Some(1));
    assert_eq!(avoidwalk(&["--help"]).status.code(), Some(0));
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    std::fs::write(&path, r#"{"experiment": "oracle", "law": "tent", "x": 2, "n": 128, "seed": 9}"#).unwrap();
    let out = avoidwalk(&["--config", path.to_str().unwrap(), "--n", "64"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["experiment"], "oracle");
    assert_eq!(report["config"]["n"], 64);
    assert_eq!(report["seed"], 9);
    assert!(report["details"]["q_exact"].is_string());

    std::fs::write(&path, r#"{"experiment": "oracle", "law": "tent", "typo": 1}"#).unwrap();
    assert_eq!(avoidwalk(&["--config", path.to_str().unwrap()]).status.code(), Some(1));
}
