//! End-to-end runs of the `henderson` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_henderson"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/inverse_crime").join(name)
}

fn write_conf(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.conf");
    fs::write(&path, text).unwrap();
    path
}

/// Runs one subcommand, returning the exit code and stdout.
fn run(cmd: &str, conf: &Path, out: &Path, extra: &[&str]) -> (i32, String) {
    let o = bin()
        .arg(cmd)
        .arg("--config")
        .arg(conf)
        .arg("--output")
        .arg(out)
        .args(extra)
        .output()
        .unwrap();
    (o.status.code().unwrap(), String::from_utf8_lossy(&o.stdout).into_owned())
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const RODS: &str = "grid.R = 8\ngrid.M = 257\ntruncation.n_max = 3\npotential.kind = hard_rod\npotential.sigma = 1\n";

#[test]
fn forward_ideal_gas_is_exact() {
    let dir = TempDir::new().unwrap();
    let conf = write_conf(dir.path(), "grid.R = 4\ngrid.M = 65\nz = 0.1\npotential.kind = ideal\n");
    let (code, _) = run("forward", &conf, dir.path(), &[]);
    assert_eq!(code, 0);
    let s = json(dir.path().join("summary.json"));
    assert!((s["rho"].as_f64().unwrap() - 0.1).abs() < 1e-14);
    assert!((s["beta_p"].as_f64().unwrap() - 0.1).abs() < 1e-14);
    assert!(s["int_omega2"].as_f64().unwrap().abs() < 1e-14);
}

#[test]
fn forward_hard_rods_matches_series() {
    let dir = TempDir::new().unwrap();
    let conf = write_conf(dir.path(), &format!("{RODS}z = 0.1\n"));
    let (code, _) = run("forward", &conf, dir.path(), &[]);
    assert_eq!(code, 0);
    // Third-order density series of hard rods, z - 2z² + (9/2)z³, up to the
    // trapezoid error at the core edge, which is O(z³h²) with h = 1/16.
    let rho = json(dir.path().join("summary.json"))["rho"].as_f64().unwrap();
    let h: f64 = 1.0 / 16.0;
    assert!((rho - 0.0845).abs() < 1e-3 * h * h, "{rho}");
    let rdf = fs::read_to_string(dir.path().join("rdf.dat")).unwrap();
    assert!(rdf.lines().next().unwrap().starts_with("# config_sha256 "));
}

#[test]
fn tables_and_summaries_carry_the_config_hash() {
    let dir = TempDir::new().unwrap();
    let conf = write_conf(dir.path(), &format!("{RODS}z = 0.05\n"));
    let (code, _) = run("forward", &conf, dir.path(), &[]);
    assert_eq!(code, 0);
    let hash = json(dir.path().join("summary.json"))["config_sha256"].as_str().unwrap().to_owned();
    assert_eq!(hash.len(), 64);
    for table in ["rdf.dat", "omega2.dat"] {
        let text = fs::read_to_string(dir.path().join(table)).unwrap();
        assert!(text.contains(&hash), "{table}");
        assert!(text.contains("# n_max 3"), "{table}");
    }
}

#[test]
fn invert_recovers_fixture_from_pmf_guess() {
    let dir = TempDir::new().unwrap();
    let (code, _) = run("invert", &fixture("invert.conf"), dir.path(), &[]);
    assert_eq!(code, 0);
    let report = json(dir.path().join("invert.json"));
    assert!(report["steps"].as_u64().unwrap() <= 15);
    assert!(report["grad_norm"].as_f64().unwrap() < 1e-6);
    let lines = fs::read_to_string(dir.path().join("iterates.jsonl")).unwrap();
    let n = lines.lines().count();
    assert_eq!(n as u64, report["steps"].as_u64().unwrap() + 1);
    assert!(dir.path().join("u_final.dat").exists());
    assert!(dir.path().join("u_0000.dat").exists());
    assert!(dir.path().join(format!("grad_{:04}.dat", n - 1)).exists());
}

#[test]
fn invert_from_the_true_potential_is_already_converged() {
    let dir = TempDir::new().unwrap();
    let (code, _) = run("invert", &fixture("self_target.conf"), dir.path(), &[]);
    assert_eq!(code, 0);
    assert!(json(dir.path().join("invert.json"))["steps"].as_u64().unwrap() <= 1);
}

#[test]
fn invert_without_rdf_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let conf = write_conf(dir.path(), &format!("{RODS}target.rho_star = 0.05\n"));
    assert_eq!(run("invert", &conf, dir.path(), &[]).0, 3);
}

#[test]
fn missing_rdf_file_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let conf = write_conf(dir.path(), &format!("{RODS}target.rho_star = 0.05\ntarget.rdf_path = nowhere.dat\n"));
    assert_eq!(run("invert", &conf, dir.path(), &[]).0, 3);
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let conf = write_conf(dir.path(), &format!("{RODS}z = 0.05\ngrid.N = 3\n"));
    assert_eq!(run("forward", &conf, dir.path(), &[]).0, 3);
}

#[test]
fn density_beyond_close_packing_is_infeasible() {
    let dir = TempDir::new().unwrap();
    let conf = write_conf(dir.path(), &format!("{RODS}target.rho_star = 1.5\n"));
    assert_eq!(run("forward", &conf, dir.path(), &[]).0, 2);
}

#[test]
fn check_passes_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let conf = write_conf(dir.path(), &format!("{RODS}potential.tail_depth = 0.3\npotential.tail_alpha = 6\n"));
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let (code, stdout) = run("check", &conf, &a, &["--seed", "7"]);
    assert_eq!(code, 0, "{stdout}");
    assert!(!stdout.contains("FAIL"));
    assert_eq!(run("check", &conf, &b, &["--seed", "7"]).0, 0);
    let (x, y) = (fs::read(a.join("check.json")).unwrap(), fs::read(b.join("check.json")).unwrap());
    assert_eq!(x, y);
    let report = json(a.join("check.json"));
    assert_eq!(report["seed"].as_u64(), Some(7));
    assert_eq!(report["all_pass"].as_bool(), Some(true));
}

#[test]
fn check_catches_a_corrupted_jacobian() {
    let dir = TempDir::new().unwrap();
    let conf = write_conf(dir.path(), &format!("{RODS}potential.tail_depth = 0.3\npotential.tail_alpha = 6\n"));
    let (code, stdout) = run("check", &conf, dir.path(), &["--corrupt-jacobian"]);
    assert_eq!(code, 1);
    let symmetry = stdout.lines().find(|l| l.contains("symmetry")).unwrap();
    assert!(symmetry.contains("FAIL"), "{symmetry}");
}

#[test]
fn oracle_agrees_with_the_series() {
    let dir = TempDir::new().unwrap();
    let conf = write_conf(
        dir.path(),
        "grid.R = 8\ngrid.M = 257\ntruncation.n_max = 4\npotential.kind = hard_rod\npotential.sigma = 1\n\
         z = 0.05\noracle.L = 12\noracle.n_cap = 4\n",
    );
    let (code, _) = run("oracle", &conf, dir.path(), &[]);
    assert_eq!(code, 0);
    let r = json(dir.path().join("oracle.json"));
    assert!(r["max_abs_diff"].as_f64().unwrap() < 1e-4);
    assert_eq!(r["pairs"].as_array().unwrap().len(), 5);
    assert!(r["tonks"]["rho"].as_f64().is_some());
}

#[test]
fn fixture_check_passes_at_fourth_order() {
    let dir = TempDir::new().unwrap();
    let (code, stdout) = run("check", &fixture("check.conf"), dir.path(), &[]);
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("17 of 17 checks passed"), "{stdout}");
}
