use std::path::Path;
use std::process::{Command, Output};

use seqclass::{diag_operator, Exponent};
use serde_json::Value;

fn seqclass(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqclass")).args(args).output().expect("binary runs")
}

fn json_out(args: &[&str]) -> Value {
    let out = seqclass(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn norm_examples() {
    let seq = "[[1,0],[0,1]]";
    let weak = json_out(&["norm", "--class", "weak", "--p", "1", "--space", "l2:2", "--seq", seq, "--json"]);
    assert!((weak["upper"].as_f64().unwrap() - 2f64.sqrt()).abs() < 1e-12);
    assert!((weak["lower"].as_f64().unwrap() - 2f64.sqrt()).abs() < 1e-12);
    let rad = json_out(&["norm", "--class", "rad", "--space", "l2:2", "--seq", seq, "--json"]);
    assert!((rad["upper"].as_f64().unwrap() - 2f64.sqrt()).abs() < 1e-12);
    let cohen = json_out(&["norm", "--class", "cohen", "--p", "1", "--space", "l2:2", "--seq", seq, "--json"]);
    assert_eq!(cohen["upper"].as_f64().unwrap(), 2.0);
    assert_eq!(cohen["exact"], Value::Bool(true));
}

#[test]
fn norm_reads_files_and_prints_text() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "seq.json", "[[3],[4]]");
    let out = seqclass(&["norm", "--class", "strong:2", "--space", "l2:1", "--seq-file", &path]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("= 5"), "{text}");
}

#[test]
fn malformed_norm_input_exits_with_2() {
    for args in [
        vec!["norm", "--class", "weak", "--p", "1", "--space", "l2:2", "--seq", "[[1,0],[0]]"],
        vec!["norm", "--class", "weak", "--p", "0.5", "--space", "l2:2", "--seq", "[[1,0]]"],
        vec!["norm", "--class", "bogus", "--space", "l2:2", "--seq", "[[1,0]]"],
        vec!["norm", "--class", "sup", "--space", "l0:2", "--seq", "[[1,0]]"],
        vec!["norm", "--class", "sup", "--space", "l2:2", "--seq", "not json"],
        vec!["norm", "--class", "sup", "--space", "l2:2"],
    ] {
        assert_eq!(seqclass(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn ideal_examples() {
    let dir = tempfile::tempdir().unwrap();
    let product = write(dir.path(), "product.json", r#"{"domain":["l2:1","l2:1"],"codomain":"l2:1","coeffs":[1]}"#);
    let est = json_out(&["ideal", "--operator", &product, "--spec", "strong:2,strong:2;strong:1", "--json"]);
    assert!((est["bracket"]["lower"].as_f64().unwrap() - 1.0).abs() < 1e-9);

    let diag = serde_json::to_string(&diag_operator(2, 9, Exponent::TWO).unwrap()).unwrap();
    let diag = write(dir.path(), "diag.json", &diag);
    let witness = dir.path().join("witness.json");
    let w = witness.to_str().unwrap();
    let est = json_out(&["ideal", "--operator", &diag, "--spec", "weak:2", "--k-max", "9", "--witness", w, "--json"]);
    assert!(est["bracket"]["lower"].as_f64().unwrap() >= 3.0 - 1e-9);
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(&witness).unwrap()).unwrap();
    assert_eq!(saved.as_array().unwrap().len(), 2);

    let zero = write(
        dir.path(),
        "zero.json",
        r#"{"domain":["l1:2","linf:2"],"codomain":"l2:2","coeffs":[[[0,0],[0,0]],[[0,0],[0,0]]]}"#,
    );
    let est = json_out(&["ideal", "--operator", &zero, "--spec", "weak:1", "--json"]);
    assert_eq!(est["bracket"]["upper"].as_f64().unwrap(), 0.0);
}

#[test]
fn ideal_shape_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"domain":["l2:2"],"codomain":"l2:1","coeffs":[1,2,3]}"#);
    assert_eq!(seqclass(&["ideal", "--operator", &bad, "--spec", "weak:1"]).status.code(), Some(2));
    let ok = write(dir.path(), "ok.json", r#"{"domain":["l2:2"],"codomain":"l2:1","coeffs":[1,2]}"#);
    let wrong_arity = seqclass(&["ideal", "--operator", &ok, "--spec", "weak:1,weak:1;weak:1"]);
    assert_eq!(wrong_arity.status.code(), Some(2));
}

#[test]
fn suite_list() {
    let out = seqclass(&["suite", "list"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 10);
    let names = json_out(&["suite", "list", "--json"]);
    assert_eq!(names.as_array().unwrap().len(), 10);
    assert_eq!(seqclass(&["suite", "list", "--bogus"]).status.code(), Some(2));
}

#[test]
fn suite_run_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = seqclass(&["suite", "run", "growth"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout).unwrap().contains("PASS"));

    assert_eq!(seqclass(&["suite", "run", "no-such-suite"]).status.code(), Some(2));
    let bad = write(dir.path(), "bad.json", r#"{"suite":"decoupling","trials":0}"#);
    assert_eq!(seqclass(&["suite", "run", &bad]).status.code(), Some(2));
    let unknown_field = write(dir.path(), "unknown.json", r#"{"suite":"decoupling","trails":5}"#);
    assert_eq!(seqclass(&["suite", "run", &unknown_field]).status.code(), Some(2));

    // a sign budget too small for the decoupling average turns every trial into a recorded failure
    let starved = write(
        dir.path(),
        "starved.json",
        r#"{"suite":"decoupling","trials":5,"arities":[3],"k_max":6,"estimator":{"sign_cutoff":1}}"#,
    );
    let out = seqclass(&["suite", "run", &starved, "--json"]);
    assert_eq!(out.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["summary"]["violations"].as_u64().unwrap(), 5);
    assert!(report["cases"][0]["error"].as_str().unwrap().contains("sign"));
}

fn canonical(path: &Path) -> Value {
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    v["summary"]["wall_time_s"] = Value::from(0.0);
    v["config"]["output_path"] = Value::Null;
    v
}

#[test]
fn serial_reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", r#"{"suite":"weak1-stability","trials":12,"seed":5}"#);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let c = dir.path().join("c.json");
    for path in [&a, &b] {
        let out = seqclass(&["suite", "run", &cfg, "--serial", "--out", path.to_str().unwrap()]);
        assert!(out.status.success());
    }
    let out = Command::new(env!("CARGO_BIN_EXE_seqclass"))
        .args(["suite", "run", &cfg, "--out", c.to_str().unwrap()])
        .env("SEQCLASS_THREADS", "3")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(canonical(&a), canonical(&b));
    assert_eq!(canonical(&a), canonical(&c));

    let out = seqclass(&["suite", "run", &cfg, "--seed", "6", "--out", b.to_str().unwrap()]);
    assert!(out.status.success());
    assert_ne!(canonical(&a), canonical(&b));
}

#[test]
fn growth_curves_export_as_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("growth.csv");
    let out = seqclass(&["suite", "run", "growth", "--csv", csv.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "label,k,ratio");
    assert_eq!(rows.len(), 17);
    assert_eq!(rows[16], "p=2,n=2,16,4");
}

#[test]
fn bad_thread_count_exits_with_2() {
    let out = Command::new(env!("CARGO_BIN_EXE_seqclass"))
        .args(["suite", "list"])
        .env("SEQCLASS_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
