use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn dimprofile(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dimprofile"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("bad report ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn cantor_csv(dir: &TempDir) -> PathBuf {
    let path = dir.path().join("c.csv");
    let out = dimprofile(&[
        "gen",
        "cantor",
        "--ratio",
        "0.3333333333333333",
        "--level",
        "10",
        "--out",
        path_str(&path),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    path
}

#[test]
fn gen_writes_the_requested_rows() {
    let dir = TempDir::new().unwrap();
    let path = cantor_csv(&dir);
    let text = std::fs::read_to_string(&path).unwrap();
    let rows = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .count();
    assert_eq!(rows, 1024);
}

#[test]
fn capacity_meets_its_tolerance() {
    let dir = TempDir::new().unwrap();
    let c = cantor_csv(&dir);
    let out = dimprofile(&[
        "capacity",
        "--input",
        path_str(&c),
        "--s",
        "1",
        "--r",
        "0.01",
        "--tol",
        "1e-6",
    ]);
    assert_eq!(code(&out), 0);
    let rep = report(&out);
    assert_eq!(rep["schema_version"], 1);
    assert!(rep["results"]["gap"].as_f64().unwrap() <= 1e-6);
    assert!(rep["results"].get("weights").is_none());
    assert_eq!(rep["checks"][0]["status"], "pass");
}

#[test]
fn profile_recovers_the_cantor_dimension() {
    let dir = TempDir::new().unwrap();
    let c = cantor_csv(&dir);
    let out = dimprofile(&["profile", "--input", path_str(&c), "--s", "1", "--levels", "10"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rep = report(&out);
    let slope = rep["results"]["estimates"][0]["slope"].as_f64().unwrap();
    assert!((slope - 0.6309).abs() <= 0.05, "slope {slope}");
    assert_eq!(rep["config"]["profile"]["r_max"], "auto");
    assert_eq!(rep["config"]["profile"]["levels"], 10);
    assert!(rep["config"]["profile"]["resolved"]["r_max"].as_f64().unwrap() > 0.99);
}

#[test]
fn reports_are_identical_apart_from_timing() {
    let dir = TempDir::new().unwrap();
    let c = cantor_csv(&dir);
    let args = ["boxdim", "--input", path_str(&c), "--levels", "8"];
    let mut a = report(&dimprofile(&args));
    let mut b = report(&dimprofile(&args));
    a["timing_ms"] = Value::Null;
    b["timing_ms"] = Value::Null;
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn report_can_go_to_a_file_and_tables_to_csv() {
    let dir = TempDir::new().unwrap();
    let c = cantor_csv(&dir);
    let dest = dir.path().join("sweep.csv");
    let out = dimprofile(&[
        "verify",
        "--input",
        path_str(&c),
        "--s",
        "0.5,1",
        "--levels",
        "8",
        "--format",
        "csv",
        "--report",
        path_str(&dest),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let table = std::fs::read_to_string(dest).unwrap();
    assert!(table.starts_with("s,r,capacity,gap,iterations\n"));
    assert_eq!(table.lines().count(), 1 + 2 * 8);
}

#[test]
fn usage_errors_exit_with_two() {
    let out = dimprofile(&["capacity", "--input", "x.csv", "--s", "1", "--r", "0.1", "--frobnicate"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));

    for bad in [
        vec!["capacity", "--input", "x.csv", "--s", "0", "--r", "0.1"],
        vec!["capacity", "--input", "x.csv", "--s", "1", "--r", "0.1", "--tol", "2"],
        vec!["fbm", "--input", "x.csv", "--alpha", "1"],
        vec!["holder", "--input", "x.csv", "--alpha", "1.5"],
        vec!["boxdim", "--input", "x.csv", "--levels", "1"],
        vec!["boxdim", "--input", "x.csv", "--r-max", "-3"],
        vec!["project", "--input", "x.csv", "--num-subspaces", "2"],
        vec!["gen", "cantor", "--ratio", "0.7", "--level", "3", "--out", "x.csv"],
        vec![
            "capacity", "--input", "x.csv", "--s", "1", "--r", "0.1", "--format", "csv",
        ],
    ] {
        assert_eq!(code(&dimprofile(&bad)), 2, "{bad:?}");
    }
}

#[test]
fn library_errors_exit_with_three() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "1,2\n3\n").unwrap();
    let out = dimprofile(&["boxdim", "--input", path_str(&bad)]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("parse error at line 2"));

    let missing = dir.path().join("missing.csv");
    assert_eq!(code(&dimprofile(&["boxdim", "--input", path_str(&missing)])), 3);

    let c = cantor_csv(&dir);
    let out = dimprofile(&["sandwich", "--input", path_str(&c), "--s", "0.5"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("domain error"));
}

#[test]
fn failed_checks_exit_with_one() {
    // Four-corner projections fall short of the profile on too many lines at these scales.
    let dir = TempDir::new().unwrap();
    let fc = dir.path().join("fc.csv");
    let out = dimprofile(&["gen", "four-corner", "--depth", "6", "--out", path_str(&fc)]);
    assert_eq!(code(&out), 0);
    let out = dimprofile(&[
        "project",
        "--input",
        path_str(&fc),
        "--m",
        "1",
        "--num-subspaces",
        "30",
        "--seed",
        "7",
        "--r-max",
        "0.1767766952966369",
        "--levels",
        "5",
    ]);
    assert_eq!(code(&out), 1);
    let rep = report(&out);
    assert!(rep["checks"].as_array().unwrap().iter().any(|c| c["status"] == "fail"));
    assert_eq!(rep["results"]["per_V"].as_array().unwrap().len(), 30);
}

#[test]
fn holder_and_fbm_runs() {
    let dir = TempDir::new().unwrap();
    let grid = dir.path().join("grid.csv");
    assert_eq!(
        code(&dimprofile(&[
            "gen",
            "grid",
            "--n",
            "1",
            "--side",
            "513",
            "--out",
            path_str(&grid)
        ])),
        0
    );

    let img = dir.path().join("img.csv");
    let out = dimprofile(&[
        "holder",
        "--input",
        path_str(&grid),
        "--alpha",
        "0.5",
        "--r-max",
        "0.125",
        "--levels",
        "4",
        "--image-r-max",
        "0.5",
        "--image-levels",
        "4",
        "--image-out",
        path_str(&img),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(report(&out)["results"]["holder_constant"].as_f64().unwrap() <= 1.0 + 1e-9);
    assert!(img.exists());

    let out = dimprofile(&[
        "fbm",
        "--input",
        path_str(&grid),
        "--alpha",
        "0.5",
        "--seeds",
        "3",
        "--r-max",
        "0.125",
        "--levels",
        "4",
        "--image-levels",
        "5",
    ]);
    assert!(matches!(code(&out), 0 | 1), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = report(&out);
    assert_eq!(rep["results"]["per_seed_dimensions"].as_array().unwrap().len(), 3);
    assert!(rep["config"]["fbm"]["resolved"]["image_r_max"].as_f64().unwrap() > 0.0);
}
