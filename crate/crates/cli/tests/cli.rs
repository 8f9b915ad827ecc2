use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn dqd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dqd"))
        .args(args)
        .arg("--quiet")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn printed(o: &Output, key: &str) -> f64 {
    stdout(o)
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .and_then(|v| v.split_whitespace().next())
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(|| panic!("no `{key}` in output:\n{}", stdout(o)))
}

fn lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(String::from).collect()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

const QUICK: [&str; 4] = ["--set", "propagation.T=20", "--set", "oct.max_iterations=3"];

fn quick_optimize(dir: &Path) -> Output {
    let mut args = vec!["optimize", "transfer", "--output-dir", dir.to_str().unwrap()];
    args.extend(QUICK);
    dqd(&args)
}

#[test]
fn eigen_defaults() {
    let tmp = TempDir::new().unwrap();
    let o = dqd(&["eigen", "--output-dir", tmp.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let w = printed(&o, "omega01");
    assert!((w - 0.0135).abs() < 5e-4, "{w}");
    assert!((printed(&o, "half_period") - std::f64::consts::PI / w).abs() < 1e-3);

    let values = lines(&tmp.path().join("eigenvalues.csv"));
    assert!(values[0].starts_with("# config_sha256="));
    assert!(values[0].contains("E_h_meV=") && values[0].contains("a0_nm=") && values[0].contains("t0_fs="));
    assert_eq!(values[1], "index,energy");
    assert_eq!(values.len(), 2 + 12);
    let vectors = lines(&tmp.path().join("eigenvectors.csv"));
    assert!(vectors[1].starts_with("x,psi0,psi1,"));
    assert_eq!(vectors.len(), 2 + 481);
}

#[test]
fn eigen_harmonic_limit() {
    let tmp = TempDir::new().unwrap();
    let o = dqd(&["eigen", "--set", "system.d=0", "--output-dir", tmp.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!((printed(&o, "E0") - 0.25).abs() < 1e-3);
    assert!((printed(&o, "E1") - 0.75).abs() < 1e-3);
}

#[test]
fn unknown_key_exits_with_2() {
    let tmp = TempDir::new().unwrap();
    let o = dqd(&["eigen", "--set", "oct.fluence=1", "--output-dir", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("oct.fluence"));

    let cfg = tmp.path().join("bad.cfg");
    fs::write(&cfg, "grid.n_points = 481\ngrid.spacing = 0.05\n").unwrap();
    let o = dqd(&["eigen", "--config", cfg.to_str().unwrap(), "--output-dir", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("grid.spacing"));
}

#[test]
fn malformed_and_invalid_config_exit_with_2() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("syntax.cfg");
    fs::write(&cfg, "oct.E0 0.3\n").unwrap();
    let o = dqd(&["eigen", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = dqd(&["eigen", "--set", "oct.E0=-1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = dqd(&["eigen", "--config", tmp.path().join("missing.cfg").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_and_override_precedence() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.cfg");
    let out = tmp.path().join("from_file");
    fs::write(&cfg, format!("# experiment\nsystem.d = 0\noutput.dir = {}\n", out.display())).unwrap();
    let o = dqd(&["eigen", "--config", cfg.to_str().unwrap(), "--set", "system.omega0=1.0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!((printed(&o, "E0") - 0.5).abs() < 1e-3);
    assert!(out.join("eigenvalues.csv").exists());
}

#[test]
fn optimize_writes_all_artifacts() {
    let tmp = TempDir::new().unwrap();
    let o = quick_optimize(tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));

    let s = summary(tmp.path());
    for key in [
        "yield", "iterations", "converged", "fluence", "T", "E0", "omega_th", "omega01", "dt", "grid", "units",
    ] {
        assert!(s.get(key).is_some(), "summary lacks {key}");
    }
    assert!((s["fluence"].as_f64().unwrap() - 0.3).abs() < 1e-6 * 0.3);
    assert_eq!(s["T"].as_f64().unwrap(), 20.0);
    assert!(s["omega_th"].is_null());
    assert_eq!(s["grid"]["n_points"].as_u64().unwrap(), 481);
    assert!(s["units"]["E_h_meV"].as_f64().unwrap() > 10.0);
    assert!(s["iterations"].as_u64().unwrap() <= 3);

    let field = lines(&tmp.path().join("field.csv"));
    assert!(field[0].starts_with("# config_sha256="));
    assert_eq!(field[1], "t,epsilon");
    assert_eq!(field.len(), 2 + 2001);
    assert!(field[2].starts_with("0.000000,"));
    assert!(field.last().unwrap().starts_with("20.000000,"));

    let occ = lines(&tmp.path().join("occupations.csv"));
    let expected: String = std::iter::once("t".to_string())
        .chain((0..12).map(|j| format!("p{j}")))
        .chain(["pL".to_string(), "pR".to_string()])
        .collect::<Vec<_>>()
        .join(",");
    assert_eq!(occ[1], expected);
    let last: Vec<f64> = occ.last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!((last[14] - s["yield"].as_f64().unwrap()).abs() < 1e-10);

    let spectrum = lines(&tmp.path().join("spectrum.csv"));
    assert_eq!(spectrum[1], "omega,re,im,abs");
    assert_eq!(spectrum.len(), 2 + 2000);
}

#[test]
fn outputs_are_bit_identical_across_runs() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    assert!(quick_optimize(a.path()).status.success());
    assert!(quick_optimize(b.path()).status.success());
    for name in ["field.csv", "occupations.csv", "spectrum.csv", "summary.json", "history.csv"] {
        let same = fs::read(a.path().join(name)).unwrap() == fs::read(b.path().join(name)).unwrap();
        assert!(same, "{name} differs");
    }
}

#[test]
fn strict_flags_unconverged_run() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().to_str().unwrap();
    let o = dqd(&["optimize", "transfer", "--strict", "--output-dir", dir, "--set", "propagation.T=20", "--set", "oct.max_iterations=1"]);
    assert_eq!(o.status.code(), Some(1));
    let s = summary(tmp.path());
    assert_eq!(s["converged"], Value::Bool(false));

    let o = dqd(&["optimize", "transfer", "--output-dir", dir, "--set", "propagation.T=20", "--set", "oct.max_iterations=1"]);
    assert!(o.status.success());
}

#[test]
fn sweep_writes_values_in_order() {
    let tmp = TempDir::new().unwrap();
    let o = dqd(&[
        "sweep",
        "--output-dir",
        tmp.path().to_str().unwrap(),
        "--set",
        "sweep.parameter=omega_th",
        "--set",
        "sweep.values=0.9,0.4,inf",
        "--set",
        "propagation.T=10",
        "--set",
        "oct.max_iterations=1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = lines(&tmp.path().join("sweep.csv"));
    assert_eq!(rows[1], "omega_th,yield,iterations,converged");
    let values: Vec<&str> = rows[2..].iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(values, ["0.9", "0.4", "inf"]);
    assert!(!tmp.path().join("sweep.partial.csv").exists());
}

#[test]
fn sweep_needs_parameter_and_values() {
    let tmp = TempDir::new().unwrap();
    let o = dqd(&["sweep", "--output-dir", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = dqd(&["sweep", "--set", "sweep.parameter=dt"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sequence_from_saved_field_matches_single_run() {
    let tmp = TempDir::new().unwrap();
    assert!(quick_optimize(tmp.path()).status.success());
    let single = summary(tmp.path())["yield"].as_f64().unwrap();
    let seq_dir = tmp.path().join("seq");
    let field = tmp.path().join("field.csv");
    let o = dqd(&[
        "sequence",
        "--base-field",
        field.to_str().unwrap(),
        "--output-dir",
        seq_dir.to_str().unwrap(),
        "--set",
        "sequence.n=1,2,3",
        "--set",
        "sequence.field_n=3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = lines(&seq_dir.join("table.csv"));
    assert_eq!(table[1], "E0,omega_th,n,computed_yield,power_law_yield");
    assert_eq!(table.len(), 2 + 3);
    let first: Vec<&str> = table[2].split(',').collect();
    assert_eq!(first[2], "1");
    let computed: f64 = first[3].parse().unwrap();
    assert!((computed - single).abs() < 1e-9, "{computed} vs {single}");
    let power: f64 = first[4].parse().unwrap();
    assert!((power - single).abs() < 1e-9);

    let merged = lines(&seq_dir.join("merged_field.csv"));
    assert_eq!(merged.len(), 2 + 3 * 2000 + 1);
    assert!(seq_dir.join("merged_occupations.csv").exists());
}

#[test]
fn sequence_with_missing_base_field_fails() {
    let tmp = TempDir::new().unwrap();
    let o = dqd(&[
        "sequence",
        "--base-field",
        tmp.path().join("nope.csv").to_str().unwrap(),
        "--output-dir",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nope.csv"));
}

#[test]
fn sequence_table_rows() {
    let tmp = TempDir::new().unwrap();
    let o = dqd(&[
        "sequence",
        "--output-dir",
        tmp.path().to_str().unwrap(),
        "--set",
        "sequence.rows=0.3:inf,0.3:0.817",
        "--set",
        "sequence.n=1,2",
        "--set",
        "propagation.T=10",
        "--set",
        "oct.max_iterations=1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = lines(&tmp.path().join("table.csv"));
    let keys: Vec<String> = table[2..]
        .iter()
        .map(|r| r.split(',').take(3).collect::<Vec<_>>().join(","))
        .collect();
    assert_eq!(keys, ["0.3,inf,1", "0.3,inf,2", "0.3,0.817,1", "0.3,0.817,2"]);
}

// Full-length optimizations; several minutes each. Run with `--ignored`.

fn full_run(task: &str, extra: &[&str]) -> Value {
    let tmp = TempDir::new().unwrap();
    let mut args = vec!["optimize", task, "--output-dir", tmp.path().to_str().unwrap()];
    args.extend(extra);
    let o = dqd(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    summary(tmp.path())
}

#[test]
#[ignore]
fn prepare_defaults_reach_high_yield() {
    let y = full_run("prepare", &[])["yield"].as_f64().unwrap();
    assert!(y >= 0.995, "{y}");
}

#[test]
#[ignore]
fn transfer_defaults_reach_high_yield() {
    let y = full_run("transfer", &[])["yield"].as_f64().unwrap();
    assert!(y >= 0.995, "{y}");
}

#[test]
#[ignore]
fn transfer_with_tight_filter() {
    let y = full_run("transfer", &["--set", "oct.omega_th=0.629"])["yield"].as_f64().unwrap();
    assert!((y - 0.99).abs() <= 0.01, "{y}");
}
