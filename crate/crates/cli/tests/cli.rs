use std::path::Path;
use std::process::{Command, Output};

use kamtori::fourier::{read_all_fts, write_fts, FourierSeries};
use serde_json::Value;
use tempfile::TempDir;

fn kamtori(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kamtori"))
        .args(args)
        .current_dir(dir)
        .env_remove("KAMTORI_THREADS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn summary(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> usize {
    csv::Reader::from_path(path).unwrap().records().count()
}

#[test]
fn integrable_torus_run() {
    let dir = TempDir::new().unwrap();
    let o = kamtori(dir.path(), &["solve-torus", "--model", "standard", "--epsilon", "0", "--omega", "golden", "--N", "256"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&dir.path().join("torus.json"));
    assert!(s["final_residual"].as_f64().unwrap() <= 1e-14);
    assert_eq!(s["steps"], 0);
    let bytes = std::fs::read(dir.path().join("torus.fts")).unwrap();
    assert_eq!(&bytes[..4], b"FTS1");
    assert_eq!(read_all_fts(&mut bytes.as_slice()).unwrap().len(), 1);
}

#[test]
fn malformed_grid_size_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let o = kamtori(dir.path(), &["solve-torus", "--N", "1000"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("power of two"));
    assert!(!dir.path().join("torus.fts").exists());
}

#[test]
fn config_errors_exit_with_three() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("bad.cfg"), "tol = 0\n").unwrap();
    assert_eq!(code(&kamtori(dir.path(), &["solve-torus", "--config", "bad.cfg"])), 3);
    assert_eq!(code(&kamtori(dir.path(), &["solve-torus", "--frobnicate"])), 3);
    assert_eq!(code(&kamtori(dir.path(), &["continue", "--from", "0", "--to", "1"])), 3);
    let o = Command::new(env!("CARGO_BIN_EXE_kamtori"))
        .args(["solve-torus"])
        .current_dir(dir.path())
        .env("KAMTORI_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&o), 3);
}

#[test]
fn flags_override_the_config_file() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("run.cfg"), "# standard map\nmodel = standard\nepsilon = 0.1\nN = 64\nout = t.fts\n").unwrap();
    let o = kamtori(dir.path(), &["solve-torus", "--config", "run.cfg", "--N", "128"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&dir.path().join("t.json"));
    assert_eq!(s["grid_points"], 128);
    assert_eq!(s["model"]["epsilon"], 0.1);
    assert!(s["final_residual"].as_f64().unwrap() <= 1e-12);
    assert_eq!(csv_rows(&dir.path().join("t.csv")), s["steps"].as_u64().unwrap() as usize);
}

#[test]
fn outputs_are_deterministic() {
    let dir = TempDir::new().unwrap();
    for out in ["a.fts", "b.fts"] {
        let o = kamtori(dir.path(), &["solve-torus", "--epsilon", "0.3", "--N", "512", "--out", out]);
        assert_eq!(code(&o), 0);
    }
    let a = std::fs::read(dir.path().join("a.fts")).unwrap();
    let b = std::fs::read(dir.path().join("b.fts")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn thread_cap_gives_identical_results() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&kamtori(dir.path(), &["solve-torus", "--epsilon", "0.2", "--N", "256", "--out", "a.fts"])), 0);
    let o = Command::new(env!("CARGO_BIN_EXE_kamtori"))
        .args(["solve-torus", "--epsilon", "0.2", "--N", "256", "--out", "b.fts"])
        .current_dir(dir.path())
        .env("KAMTORI_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read(dir.path().join("a.fts")).unwrap(), std::fs::read(dir.path().join("b.fts")).unwrap());
}

#[test]
fn broken_torus_reports_no_convergence() {
    let dir = TempDir::new().unwrap();
    let o = kamtori(dir.path(), &["solve-torus", "--epsilon", "3", "--N", "64", "--max-iter", "4"]);
    assert_eq!(code(&o), 2);
    let s = summary(&dir.path().join("torus.json"));
    assert_eq!(s["status"], "failed");
    assert_eq!(s["exit_code"], 2);
    assert!(!dir.path().join("torus.fts").exists());
}

#[test]
fn continuation_writes_one_file_per_value() {
    let dir = TempDir::new().unwrap();
    let o = kamtori(dir.path(), &["continue", "--from", "0", "--to", "0.5", "--step", "0.1", "--N", "256", "--out", "run"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let run = dir.path().join("run");
    let tori = std::fs::read_dir(&run)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "fts"))
        .count();
    assert_eq!(tori, 6);
    assert_eq!(csv_rows(&run.join("continuation.csv")), 6);
    let mut rdr = csv::Reader::from_path(run.join("continuation.csv")).unwrap();
    let eps: Vec<String> = rdr.records().map(|r| r.unwrap()[1].to_string()).collect();
    assert_eq!(eps, ["0", "0.1", "0.2", "0.3", "0.4", "0.5"]);
}

#[test]
fn diagnose_fresh_and_analytic_tori() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&kamtori(dir.path(), &["solve-torus", "--epsilon", "0", "--out", "flat.fts"])), 0);
    let o = kamtori(dir.path(), &["diagnose", "flat.fts", "--summary", "d.json"]);
    assert_eq!(code(&o), 0);
    let s = summary(&dir.path().join("d.json"));
    assert!(s["residual"]["value"].as_f64().unwrap() <= 1e-14);
    assert!((s["twist"]["value"].as_f64().unwrap() - 1.0).abs() <= 1e-12);

    assert_eq!(code(&kamtori(dir.path(), &["solve-torus", "--epsilon", "0.3", "--N", "512", "--out", "t.fts"])), 0);
    let o = kamtori(dir.path(), &["diagnose", "t.fts"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(String::from_utf8_lossy(&o.stdout).matches("PASS").count(), 5);
}

#[test]
fn diagnose_flags_a_corrupted_coefficient() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&kamtori(dir.path(), &["solve-torus", "--epsilon", "0.3", "--N", "256"])), 0);
    let path = dir.path().join("torus.fts");
    let mut block = read_all_fts(&mut std::fs::read(&path).unwrap().as_slice()).unwrap().remove(0);
    let s = &block.series;
    let mut coeffs = s.coeffs().to_vec();
    coeffs[3].re += 1e-6;
    block.series = FourierSeries::from_coeffs(s.grid(), s.rows(), s.cols(), coeffs).unwrap();
    let mut buf = Vec::new();
    write_fts(&mut buf, &block).unwrap();
    std::fs::write(&path, buf).unwrap();

    let o = kamtori(dir.path(), &["diagnose", "torus.fts"]);
    assert_eq!(code(&o), 1);
    let out = String::from_utf8_lossy(&o.stdout);
    let line = out.lines().find(|l| l.starts_with("residual")).unwrap();
    assert!(line.ends_with("FAIL"), "{out}");
}

#[test]
fn unreadable_file_is_a_format_error() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("junk.fts"), b"not a series file").unwrap();
    let o = kamtori(dir.path(), &["diagnose", "junk.fts"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("format error"));
}

#[test]
fn whisker_pipeline() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let run = |args: &[&str]| {
        let o = kamtori(d, args);
        assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    };
    run(&["solve-torus", "--model", "rotator_pendulum", "--epsilon", "0.05", "--N", "256", "--counterterm"]);
    let o = kamtori(d, &["solve-splitting", "--torus", "torus.fts", "--out", "split.fts"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&d.join("split.json"));
    assert!(s["idempotency_defect"].as_f64().unwrap() <= 1e-12);
    assert_eq!(s["rates"]["dichotomy"], true);

    run(&["solve-whisker", "--torus", "torus.fts", "--splitting", "split.fts", "--branch", "stable", "--L", "10", "--out", "w.ftt"]);
    let w = summary(&d.join("w.json"));
    let mu = w["mu"].as_f64().unwrap();
    assert!(mu > 0.3 && mu < 0.45);
    assert!(w["conjugacy_error"].as_f64().unwrap() <= 1e-9);
    assert_eq!(&std::fs::read(d.join("w.ftt")).unwrap()[..4], b"FTT1");

    run(&["solve-whisker", "--torus", "torus.fts", "--splitting", "split.fts", "--branch", "unstable", "--rho", "1", "--out", "wu.ftt"]);
    assert!(summary(&d.join("wu.json"))["mu"].as_f64().unwrap() > 2.0);

    run(&["export", "w.ftt", "--n-theta", "8", "--n-s", "5", "--out", "w.csv"]);
    assert_eq!(csv_rows(&d.join("w.csv")), 40);
    let header = csv::Reader::from_path(d.join("w.csv")).unwrap().headers().unwrap().clone();
    assert_eq!(header.iter().collect::<Vec<_>>(), ["theta", "s", "q1", "q2", "p1", "p2"]);
    run(&["export", "torus.fts", "--n-theta", "16", "--out", "t.csv"]);
    assert_eq!(csv_rows(&d.join("t.csv")), 16);
}

#[test]
fn twist_maps_have_no_splitting() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&kamtori(dir.path(), &["solve-torus", "--epsilon", "0.1", "--N", "64"])), 0);
    let o = kamtori(dir.path(), &["solve-splitting", "--torus", "torus.fts"]);
    assert_eq!(code(&o), 3);
    assert_eq!(summary(&dir.path().join("split.json"))["exit_code"], 3);
}
