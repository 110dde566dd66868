//! End-to-end runs of the `qcwp` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bundle(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("bundles").join(name)
}

fn qcwp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcwp"))
        .args(args)
        .env_remove("QCWP_DIM_CAP")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn p(path: PathBuf) -> String {
    path.to_str().unwrap().to_owned()
}

#[test]
fn cwp_ratio_on_000_is_one() {
    let o = qcwp(&[
        "cwp",
        &p(bundle("fdr.qwp")),
        "--post",
        &p(bundle("fdr_phi.json")),
        "--ratio",
        &p(bundle("rho_000.json")),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().last(), Some("1.0000"));
}

#[test]
fn cwp_ratio_on_010_is_one_ninth() {
    let o = qcwp(&[
        "cwp",
        &p(bundle("fdr.qwp")),
        "--post",
        &p(bundle("fdr_phi.json")),
        "--ratio",
        &p(bundle("rho_010.json")),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().last(), Some("0.1111"));
}

#[test]
fn eval_fdr_default_input() {
    let o = qcwp(&["eval", &p(bundle("fdr.qwp"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("tr(rho') = 0.7500"), "{out}");
    assert!(out.contains("p'       = 0.2500"), "{out}");
}

#[test]
fn eval_json_carries_full_precision() {
    let o = qcwp(&["eval", "--json", &p(bundle("fdr.qwp"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["trace"].as_f64().unwrap() - 0.75).abs() < 1e-12);
    assert!((v["p"].as_f64().unwrap() - 0.25).abs() < 1e-12);
    assert_eq!(v["residual"].as_f64(), Some(0.0));
    assert_eq!(v["rho"]["dim"].as_u64(), Some(8));
}

#[test]
fn eval_reads_stdin() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_qcwp"))
        .args(["eval", "-"])
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    {
        use std::io::Write;
        let mut stdin = child.stdin.take().unwrap();
        stdin.write_all(b"bool q; q := H q; observe(q, P0)").unwrap();
    }
    let o = child.wait_with_output().unwrap();
    assert!(o.status.success());
    assert!(stdout(&o).contains("p'       = 0.5000"));
}

#[test]
fn explore_fdr_violation_quarter() {
    let o = qcwp(&["explore", &p(bundle("fdr.qwp"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("terminated  0.7500"), "{out}");
    assert!(out.contains("violated    0.2500"), "{out}");
}

#[test]
fn simulate_is_deterministic_for_a_seed() {
    let args = ["simulate", &p(bundle("geometric.qwp")), "--runs", "200", "--seed", "11"];
    let a = qcwp(&args);
    let b = qcwp(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn help_prints_usage() {
    let o = qcwp(&["cwp", "--help"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("Usage: qcwp cwp"), "{out}");
    assert!(out.contains("--ratio"), "{out}");
}

#[test]
fn unknown_subcommand_fails() {
    let o = qcwp(&["frobnicate"]);
    assert!(!o.status.success());
}

#[test]
fn syntax_error_exits_one_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let src = write(dir.path(), "bad.qwp", "bool q;\nq := Foo q");
    let o = qcwp(&["eval", &src]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn type_error_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let src = write(dir.path(), "bad.qwp", "bool q; observe(q, [[0, 1], [0, 0]])");
    let o = qcwp(&["eval", &src]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("projector"), "{}", stderr(&o));
}

#[test]
fn nonconvergence_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let src = write(dir.path(), "osc.qwp", "bool q;\nwhile {0 * I2, I2}[q] = 1 do { q := X q }\n");
    let o = qcwp(&["eval", &src, "--max-unfoldings", "50"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    let o = qcwp(&["eval", &src, "--max-unfoldings", "50", "--allow-residual"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("residual = 1.000e0"), "{}", stdout(&o));
}

#[test]
fn dim_cap_from_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_qcwp"))
        .args(["eval", &p(bundle("fdr.qwp"))])
        .env("QCWP_DIM_CAP", "4")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cap of 4"), "{}", stderr(&o));
}

#[test]
fn refuted_triple_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let src = write(dir.path(), "obs.qwp", "bool q; observe(q, P1)");
    let id = write(dir.path(), "id.json", r#"{"dim": 2, "entries": [[[1,0],[0,0]],[[0,0],[1,0]]]}"#);
    let o = qcwp(&["check-hoare", &src, "--pre", &id, "--post", &id, "--mode", "partial"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));

    let zero = write(dir.path(), "zero.json", r#"{"dim": 2, "entries": [[[0,0],[0,0]],[[0,0],[0,0]]]}"#);
    let o = qcwp(&["check-hoare", &src, "--pre", &zero, "--post", &id, "--mode", "total"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn wp_writes_to_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("wp.json");
    let o = qcwp(&[
        "--out",
        out.to_str().unwrap(),
        "wp",
        &p(bundle("fdr.qwp")),
        "--post",
        &p(bundle("fdr_phi.json")),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(out).unwrap();
    assert!(text.contains("0.7500"), "{text}");
}

#[test]
fn majsat_row_three_two() {
    let o = qcwp(&["majsat", "--n", "3", "--s", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("0.9714"), "{}", stdout(&o));
}

#[test]
fn check_suite_passes() {
    let o = qcwp(&["check", "--suite", "duality", "--trials", "20", "--seed", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
}
