use std::path::Path;
use std::process::{Command, Output};

fn interlace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_interlace")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = interlace(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> serde_json::Value {
    serde_json::from_str(&ok(args)).unwrap()
}

#[test]
fn green_at_origin() {
    let v = json(&["green", "--d", "3"]);
    assert!((v["g"].as_f64().unwrap() - 1.5163860591519784).abs() < 1e-9);
    let e1 = json(&["green", "--d", "3", "--x", "1,0,0"]);
    assert!((e1["g"].as_f64().unwrap() - (v["g"].as_f64().unwrap() - 1.0)).abs() < 1e-9);
}

#[test]
fn bad_input_fails_cleanly() {
    let out = interlace(&["green", "--d", "3", "--x", "1,0"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("coordinates"));
    assert!(!interlace(&["cap", "--d", "3", "--window", "torus"]).status.success());
}

#[test]
fn cap_of_a_point() {
    let v = json(&["cap", "--d", "4", "--window", "ball:0"]);
    let s = v.to_string();
    assert!(s.contains("capacity"), "{s}");
}

#[test]
fn sample_then_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("s.bin");
    let f = file.to_str().unwrap();
    ok(&["sample", "--d", "5", "--window", "union", "--u", "1", "--n", "3", "--seed", "4", "--out", f]);
    let rows = json(&["analyze", "--in", f, "--report", "components"]);
    assert_eq!(rows.as_array().unwrap().len(), 3);
    let ub = json(&["analyze", "--in", f, "--report", "ubiquity"]);
    assert_eq!(ub.as_array().unwrap().len(), 3);

    let tree = dir.path().join("t.json");
    let t = tree.to_str().unwrap();
    ok(&["sample", "--d", "6", "--window", "tree:2", "--u", "0.5", "--n", "2", "--halves", "--protect", "2", "--out", t]);
    let out = json(&["analyze", "--in", t, "--report", "tree", "--ell", "2", "--epsilon", "0.3"]);
    assert_eq!(out[0]["outcome"]["t0"][0], 1);
}

#[test]
fn run_caches_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"experiment": "green-table", "d-list": [3, 4, 5]}"#).unwrap();
    let store = dir.path().join("store");
    let (c, s) = (cfg.to_str().unwrap(), store.to_str().unwrap());
    let run = |extra: &[&str]| {
        let mut args = vec!["run", "--config", c, "--store", s];
        args.extend_from_slice(extra);
        interlace(&args)
    };
    let first = run(&[]);
    assert!(first.status.success());
    assert!(String::from_utf8_lossy(&first.stderr).contains("computed"));
    let second = run(&["--workers", "4"]);
    assert!(String::from_utf8_lossy(&second.stderr).contains("cached"));
    assert_eq!(first.stdout, second.stdout);

    let index = json(&["report", "--store", s]);
    let hash = index.as_object().unwrap().keys().next().unwrap().clone();
    let csv = ok(&["report", "--store", s, "--hash", &hash]);
    assert!(csv.starts_with("# schema: green-asymptotics/1"), "{csv}");
    let out = dir.path().join("tables");
    ok(&["report", "--store", s, "--hash", &hash, "--out", out.to_str().unwrap()]);
    assert!(Path::new(&out).join("green-asymptotics.csv").exists());
}

#[test]
fn certify_prints_verdict() {
    let v = json(&["certify", "--d", "10", "--q0", "1e-6", "--l0", "1000000"]);
    assert!(v.is_object());
}
