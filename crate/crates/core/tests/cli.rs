use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pe-toolkit")).args(args).output().expect("spawn pe-toolkit")
}

fn json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

#[test]
fn noon_fisher_information() {
    let v = json(&["qfi", "--state", "noon 2", "--h", "z"]);
    assert!((v["qfi"].as_f64().unwrap() - 8.0).abs() < 1e-9);
    assert!((v["objective"].as_f64().unwrap() - 4.0).abs() < 1e-9);
}

#[test]
fn activation_table_as_csv() {
    let out = run(&["--csv", "activate", "--state", "fock 1,1"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(&headers[2], "probability");
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    let total: f64 = rows.iter().map(|r| r[2].parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    let middle = rows.iter().find(|r| &r[0] == "1").unwrap();
    assert!((middle[4].parse::<f64>().unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn binomial_poisson_report() {
    let v = json(&["binpoisson", "--N", "10", "--p", "0.1"]);
    assert_eq!(v["satisfied"], Value::Bool(true));
    assert!(v["distance"].as_f64().unwrap() <= 0.1);
}

#[test]
fn demos_run() {
    for demo in ["yurke-stoler", "hom", "fock22", "two-copy"] {
        let out = run(&["demo", demo]);
        assert!(out.status.success(), "{demo}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn cap_violation_exits_with_validation_code() {
    let out = run(&["activate", "--state", "fock 9,9"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("max_particles"));
    // raising the cap is explicit
    let raised = run(&["--max-particles", "4", "activate", "--state", "fock 2,2"]);
    assert!(raised.status.success());
}

#[test]
fn malformed_preset_exits_with_validation_code() {
    assert_eq!(run(&["qfi", "--state", "fock one,two"]).status.code(), Some(2));
}

#[test]
fn missing_file_exits_with_io_code() {
    let out = run(&["witness", "bound", "--data", "/nonexistent/data.csv", "--meta", "/nonexistent/meta.json", "--optimize"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn synthesize_then_bound() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("shots.csv");
    let data_s = data.to_str().unwrap();
    let synth = run(&[
        "witness", "synth", "--model", "squeezed", "--xi2", "0.25", "--atoms", "1000", "--shots", "3000", "--seed", "7", "--out",
        data_s,
    ]);
    assert!(synth.status.success(), "{}", String::from_utf8_lossy(&synth.stderr));
    let meta = data.with_extension("meta.json");
    assert!(meta.exists());
    let args = ["witness", "bound", "--data", data_s, "--meta", meta.to_str().unwrap(), "--optimize", "--resamples", "200", "--seed", "1"];
    let v = json(&args);
    let bound = v["result"]["bound"].as_f64().unwrap();
    let se = v["result"]["standard_error"].as_f64().unwrap();
    assert!(bound > 3.0 * se, "bound {bound} se {se}");
    // same inputs, same bytes
    assert_eq!(run(&args).stdout, run(&args).stdout);
}
