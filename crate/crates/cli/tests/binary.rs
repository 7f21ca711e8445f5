use std::fs;
use std::process::Command;

fn causal() -> Command {
    Command::new(env!("CARGO_BIN_EXE_causal"))
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, format!("trials = 9\nk = 2\nseed = 4\nout = {:?}\n", dir.path().join("a"))).unwrap();
    let out = dir.path().join("b");
    let status = causal()
        .args(["kbad", "--config", cfg.to_str().unwrap(), "--trials", "5", "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("kbad.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config"]["trials"], 5);
    assert_eq!(m["config"]["k"], 2);
    assert_eq!(m["config"]["master_seed"], 4);
    assert!(!dir.path().join("a").exists());
}

#[test]
fn invalid_configs_fail() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().to_str().unwrap();
    assert!(!causal().args(["speed", "--trials", "0", "--out", o]).output().unwrap().status.success());
    assert!(!causal().args(["speed", "--mu", "0:1/2,2:1/2", "--out", o]).output().unwrap().status.success());
    assert!(!causal().args(["escape", "--mu", "garbage", "--out", o]).output().unwrap().status.success());
}

#[test]
fn sample_walk_and_render_write_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().to_str().unwrap();
    assert!(causal().args(["sample", "--depth", "4", "--out", o]).status().unwrap().success());
    assert!(causal().args(["walk", "--steps", "50", "--out", o]).status().unwrap().success());
    assert!(causal().args(["render", "--model", "slice", "--out", o]).status().unwrap().success());
    let map = fs::read_to_string(dir.path().join("map.txt")).unwrap();
    assert!(map.starts_with("# vertices"));
    assert!(fs::read_to_string(dir.path().join("walk.txt")).unwrap().lines().count() > 50);
    roxmltree::Document::parse(&fs::read_to_string(dir.path().join("map.svg")).unwrap()).unwrap();
}
