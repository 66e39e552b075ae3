use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_localwick"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env_remove("LOCALWICK_THREADS").output().unwrap()
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn ibp_config_closed_form_check() {
    let out = tempfile::tempdir().unwrap();
    let cfg = configs().join("ibp_a0.toml");
    let o = run(&["ibp", "--config", cfg.to_str().unwrap(), "--override", "M=500", "n=1024", "--out", out.path().to_str().unwrap(), "--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let r = report(out.path());
    let check = &r["reports"][0]["checks"][0];
    assert_eq!(check["name"], "closed-form lhs vs rhs");
    let gap = (check["value"].as_f64().unwrap() - check["target"].as_f64().unwrap()).abs();
    assert!(gap <= 1e-6);
    assert!(out.path().join("tables/checks.csv").is_file());
}

#[test]
fn mean_with_overrides() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&["mean", "--override", "M=200", "a=0", "--out", out.path().to_str().unwrap()]);
    assert!(matches!(o.status.code(), Some(0 | 1)));
    let r = report(out.path());
    let rep = &r["reports"][0];
    assert_eq!(rep["experiment"], "mean");
    assert_eq!(rep["replicates"], 200);
    assert!(rep["target"].as_f64().unwrap() < 0.0);
}

#[test]
fn usage_errors_exit_two() {
    let o = run(&["mean", "--config", "/nonexistent/cfg.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(run(&["mean", "--override", "bogus=1"]).status.code(), Some(2));
    assert_eq!(run(&["mean", "--override", "M=5"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn failed_verdict_exits_one() {
    // A zero tolerance multiple cannot pass a Monte-Carlo check.
    let out = tempfile::tempdir().unwrap();
    let o = run(&["localtime-bench", "--override", "M=200", "n=512", "tol_sigma=0", "--out", out.path().to_str().unwrap(), "--quiet"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(report(out.path())["verdict"], false);
}

#[test]
fn seed_reproduces_csv_bytes_across_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = |dir: &Path, threads: &str| -> Vec<String> {
        ["laplace", "--override", "M=300", "n=1024", "k_kind=constant", "--seed", "7", "--threads", threads, "--out", dir.to_str().unwrap(), "--quiet"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    };
    let oa = bin().args(args(a.path(), "1")).output().unwrap();
    let ob = bin().args(args(b.path(), "2")).env("LOCALWICK_THREADS", "3").output().unwrap();
    assert_eq!(oa.status.code(), ob.status.code());
    for name in ["checks.csv", "00_laplace_eps_sweep.csv"] {
        let x = std::fs::read(a.path().join("tables").join(name)).unwrap();
        let y = std::fs::read(b.path().join("tables").join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
    assert_eq!(report(a.path())["reports"][0]["seed"], 7);
}
