use std::path::Path;
use std::process::Command;

fn hardbody() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hardbody"))
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

const SMALL: &str = r#"{
  "seed": 3,
  "budgets": {"chains": 2, "points_per_chain": 100, "directions": 200, "gaussian_samples": 2000},
  "design": {"n": 32, "m": 256},
  "widths": {"n": 16, "m": 128},
  "centers": {"n": 4, "m": 32},
  "hardness": {"n": 4, "m": 32, "eta": 0.2, "candidate": "random:N=6"},
  "dual": {"dims": [3], "count": 4, "points": 8},
  "approx": {"n": 4, "m": 64, "eta": "auto", "candidate": "greedy:N=12"}
}"#;

#[test]
fn design_command_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = hardbody()
        .args(["design", "--n", "256", "--m", "4096", "--seed", "7", "--mode", "desk", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&read(dir.path(), "design.json")).unwrap();
    assert_eq!(json["module"], "design");
    assert_eq!(json["result"]["report"]["passed"], true);
    assert_eq!(json["params"]["n"], 256);
    let csv = read(dir.path(), "design.csv");
    assert!(csv.starts_with("quantity,value,stderr,n_samples,paper_bound,margin,status\n"));
    assert!(csv.contains("design_passed,1.0000000000000000e0,,,,,pass"));
}

#[test]
fn config_errors_exit_64() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"seed": 1, "unknown_field": true}"#).unwrap();
    let code = hardbody().args(["all", "--config"]).arg(&cfg).output().unwrap().status.code();
    assert_eq!(code, Some(64));
    let code = hardbody().args(["design", "--n", "16", "--m", "4096", "--mode", "paper-faithful"]).output().unwrap().status.code();
    assert_eq!(code, Some(64));
    let code = hardbody().args(["hardness", "--n", "4", "--m", "32", "--eta", "0.7"]).output().unwrap().status.code();
    assert_eq!(code, Some(64));
    let code = hardbody().env("HARDBODY_THREADS", "zero").args(["dual"]).output().unwrap().status.code();
    assert_eq!(code, Some(64));
}

#[test]
fn hardness_with_soft_warnings_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = hardbody()
        .args(["hardness", "--n", "8", "--m", "64", "--eta", "auto", "--kappa", "1", "--candidate", "random:N=8"])
        .args(["--chains", "2", "--points-per-chain", "200", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&read(dir.path(), "hardness.json")).unwrap();
    assert_eq!(json["result"]["eta"]["source"], "auto");
    assert!(json["result"]["certificate"]["threshold"].as_f64().unwrap() == 12.0);
}

#[test]
fn all_is_deterministic_across_worker_counts() {
    let base = tempfile::tempdir().unwrap();
    let cfg = base.path().join("run.json");
    std::fs::write(&cfg, SMALL).unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let dir = base.path().join(format!("t{threads}"));
        let out = hardbody()
            .env("HARDBODY_THREADS", threads)
            .args(["all", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&dir)
            .output()
            .unwrap();
        assert!(matches!(out.status.code(), Some(0) | Some(2)), "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push(dir);
    }
    for module in ["design", "widths", "centers", "hardness", "dual", "approx"] {
        for ext in ["json", "csv"] {
            let name = format!("{module}.{ext}");
            assert_eq!(read(&outputs[0], &name), read(&outputs[1], &name), "{name}");
        }
    }
}
