use std::fs;
use std::path::Path;
use std::process::Command;

fn hflow(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_hflow")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn ppa_passes_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "ppa.json",
        r#"{"operation": "ppa", "space": {"kind": "euclidean", "dim": 1},
            "functional": {"kind": "dist", "p": 1, "anchor": [0.0]},
            "x": [5.0], "schedule": {"kind": "constant", "lambda": 1.0}, "steps": 10,
            "expect": {"point": [0.0]}}"#,
    );
    let out = dir.path().join("run");
    let (code, stdout, stderr) = hflow(&["ppa", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{stderr}");
    let summary: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(summary["status"], "pass");
    assert!(summary["metrics"].get("runtime").is_none());
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("n,lambda,point,f_value,step_move\n"));
    assert_eq!(fs::read_to_string(out.join("summary.json")).unwrap().trim(), stdout.trim());
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.json",
        r#"{"operation": "prox", "space": {"kind": "euclidean", "dim": 1},
            "functional": {"kind": "dist", "p": 2, "anchor": [0.0]}, "x": [1.0], "lambda": -1}"#,
    );
    let (code, _, stderr) = hflow(&["prox", "--config", &cfg]);
    assert_eq!(code, 1);
    assert!(stderr.contains("lambda"), "{stderr}");
    let (code, _, _) = hflow(&["flow", "--config", &cfg]);
    assert_eq!(code, 1);
    let (code, _, _) = hflow(&["prox", "--config", "/nonexistent/config.json"]);
    assert_eq!(code, 1);
}

#[test]
fn failed_expectation_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "prox.json",
        r#"{"operation": "prox", "space": {"kind": "euclidean", "dim": 1},
            "functional": {"kind": "dist", "p": 2, "anchor": [0.0]}, "x": [2.0], "lambda": 1.0,
            "expect": {"point": [0.0], "within": 1e-6}}"#,
    );
    let (code, stdout, _) = hflow(&["prox", "--config", &cfg]);
    assert_eq!(code, 2);
    assert!(stdout.contains("\"fail\""));
}

#[test]
fn median_from_points_file_and_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "pts.csv", "e0,1.0\ne1,1.0\ne2,1.0\n");
    let cfg = write(
        dir.path(),
        "median.json",
        r#"{"operation": "median", "space": {"kind": "tree", "nodes": 4, "edges": [[0,1,1.0],[0,2,1.0],[0,3,1.0]]},
            "points_file": "pts.csv", "expect": {"point": {"node": 0}, "within": 1e-9}}"#,
    );
    let (code, _, stderr) = hflow(&["median", "--config", &cfg, "--seed", "7"]);
    assert_eq!(code, 0, "{stderr}");

    let cfg = write(
        dir.path(),
        "check.json",
        r#"{"operation": "space-check", "space": {"kind": "spd", "n": 2}, "samples": 500}"#,
    );
    let (a, b) = (hflow(&["space-check", "--config", &cfg, "--seed", "3"]), hflow(&["space-check", "--config", &cfg, "--seed", "3"]));
    assert_eq!(a.0, 0);
    assert_eq!(a.1, b.1);
}
