//! Black-box tests of the `rdse` binary: exit codes, artifact layout, and
//! flag handling.

use std::path::Path;
use std::process::Command;

fn rdse() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rdse"))
}

fn repo_file(rel: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
        .to_string_lossy()
        .into_owned()
}

#[test]
fn check_reports_feasible_demo() {
    let out = rdse()
        .args(["check", &repo_file("scenarios/demo.scn")])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("sources = {1, 2, 3}"), "{text}");
    assert!(text.contains("verdict: feasible"), "{text}");
}

#[test]
fn simulate_writes_artifacts_and_respects_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out = rdse()
        .args([
            "simulate",
            &repo_file("scenarios/demo.scn"),
            "--out-dir",
            dir.path().to_str().unwrap(),
            "--rounds",
            "10",
            "--seed",
            "99",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    // 6 regular nodes x rounds 0..=10, plus the header
    assert_eq!(csv.lines().count(), 1 + 6 * 11);
    assert!(csv.starts_with("round,node,error_norm,xhat_0\n"));
    assert!(dir.path().join("summary.json").is_file());
    assert!(dir.path().join("medag_block_0.txt").is_file());
}

#[test]
fn generate_then_percolate() {
    let dir = tempfile::tempdir().unwrap();
    let net_path = dir.path().join("net.txt");
    let out = rdse()
        .args([
            "generate",
            &repo_file("scenarios/er-network.gen"),
            "--out",
            net_path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = rdse()
        .args(["percolate", net_path.to_str().unwrap(), "-r", "3"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("covers the network"), "{text}");
}

#[test]
fn parse_error_is_nonzero_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.scn");
    std::fs::write(&path, "[plant]\nnodes = 3\nwhat is this\n").unwrap();
    let out = rdse()
        .args(["check", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let text = String::from_utf8(out.stderr).unwrap();
    assert!(text.contains("line 3"), "{text}");
}

#[test]
fn infeasible_scenario_requires_force() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("thin.scn");
    // a 3-node chain cannot be strongly 3-robust for f = 1
    std::fs::write(
        &path,
        "[plant]\nnodes = 3\na = 2\nc 1 = 1\nx0 = 0.5\n\
         [network]\nedge = 1 -> 2\nedge = 2 -> 3\n\
         [resilience]\nf = 1\n[attack]\n[run]\nrounds = 5\nseed = 1\n",
    )
    .unwrap();
    let out = rdse()
        .args(["simulate", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let text = String::from_utf8(out.stderr).unwrap();
    assert!(text.contains("--force"), "{text}");

    // forcing it runs into the design phase, which cannot terminate either;
    // that failure must also be a non-zero exit
    let out = rdse()
        .args([
            "simulate",
            path.to_str().unwrap(),
            "--force",
            "--out-dir",
            dir.path().join("out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
}
