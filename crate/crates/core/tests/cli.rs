//! The binary's subcommands, exit codes and file formats.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_groupshift"))
}

fn spec(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("specs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn entropy_and_blocks() {
    let s = spec("golden_mean_Z.json");
    let o = run(&["entropy", "--spec", s.to_str().unwrap(), "--n", "12"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["entropy"].as_f64().unwrap() - 0.69424).abs() < 0.05);
    let o = run(&["blocks", "--spec", s.to_str().unwrap(), "--window", "0:10"]);
    assert_eq!(stdout(&o).trim(), "144");
    let o = run(&["aperiodic-find", "--spec", s.to_str().unwrap(), "--window", "-1:2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn tiling_commands_round_trip_files() {
    let dir = tempfile::tempdir().unwrap();
    let q = dir.path().join("q.json");
    let t = dir.path().join("t.json");
    let w = ["--window", "0:30,0:30"];
    assert!(run(&[&["quasitile", "--n", "4", "--out", q.to_str().unwrap()], &w[..]].concat()).status.success());
    assert!(run(&["tile-adjust", "--tiling", q.to_str().unwrap(), "--out", t.to_str().unwrap()]).status.success());
    let o = run(&["tile-verify", "--tiling", t.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("\"covering_density\":[1,1]"));
    let tiling = groupshift::tiling::Quasitiling::from_json(&std::fs::read_to_string(&t).unwrap()).unwrap();
    assert!(tiling.exact);
}

#[test]
fn factor_encode_decode() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("f.json");
    let x = dir.path().join("x.json");
    let z = dir.path().join("z.json");
    let target: Vec<u8> = (0..40).map(|i| ((i * 7) % 3 == 0) as u8).collect();
    std::fs::write(&z, serde_json::to_string(&target).unwrap()).unwrap();
    let s = spec("no33_Z.json");
    assert!(run(&["factor", "build", "--subshift", s.to_str().unwrap(), "--N", "2", "--out", f.to_str().unwrap()]).status.success());
    let args = ["factor", "encode", "--system", f.to_str().unwrap(), "--target", z.to_str().unwrap(), "--out", x.to_str().unwrap()];
    assert!(run(&args).status.success());
    let o = run(&["factor", "decode", "--system", f.to_str().unwrap(), "--config", x.to_str().unwrap()]);
    let back: Vec<u8> = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(back, target);
    let o = run(&["factor", "verify", "--system", f.to_str().unwrap(), "--trials", "5", "--seed", "3"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("round-trip 100.00%"));
}

#[test]
fn run_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ok");
    let s = spec("no33_Z.json");
    let o = run(&["run", "--spec", s.to_str().unwrap(), "--N", "2", "--trials", "5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("| round-trip | 100.00% |"));
    for name in ["spec.json", "entropy.json", "subsystem.json", "marker.json", "factor.json", "verify.json", "report.md"] {
        assert!(out.join(name).exists(), "{name}");
    }
    let o = run(&["run", "--spec", s.to_str().unwrap(), "--N", "4", "--out", dir.path().join("n4").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("stage `subsystem`"));
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{").unwrap();
    let o = run(&["run", "--spec", bad.to_str().unwrap(), "--out", dir.path().join("b").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn marker_and_subsystem_commands() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.json");
    let s = spec("no33_Z.json");
    assert!(run(&["marker", "build", "--spec", s.to_str().unwrap(), "--out", m.to_str().unwrap()]).status.success());
    let o = run(&["marker", "verify", "--spec", s.to_str().unwrap(), "--cert", m.to_str().unwrap(), "--window-check"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let sel = dir.path().join("sel.json");
    let f2 = spec("full2_Z.json");
    let args = ["subsystem", "build", "--spec", f2.to_str().unwrap(), "--a", "0.4", "--b", "0.6", "--out", sel.to_str().unwrap()];
    assert!(run(&args).status.success());
    let o = run(&["subsystem", "verify", "--spec", f2.to_str().unwrap(), "--selection", sel.to_str().unwrap(), "--n", "30"]);
    assert!(o.status.success());
}
