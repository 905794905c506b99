use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_torus-hj"));
    c.env("RAYON_NUM_THREADS", "2");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn torus-hj")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn write_config(dir: &Path, n: usize, size: usize, extra: &str) -> String {
    let omega = if n == 1 { "[1.0]" } else { "[1.0, 1.4142135623730951]" };
    let text = format!(
        "seed = 3\n\n[hamiltonian]\nkind = \"quadratic\"\nlambda = 1.0\nomega = {omega}\n\n\
         [grid]\nn = {n}\nN = {size}\n\n[experiment]\n{extra}\n"
    );
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["nonsense"]).status.code(), Some(2));
    assert_eq!(run(&["periods", "check", "--T", "abc", "--omega", "1"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    let out = run(&["--version"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn bad_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    std::fs::write(&p, "[grid]\nn = 1\nN = 8\nbogus = 1\n").unwrap();
    let out = run(&["equilibrium", "--config", s(&p)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
    let missing = run(&["equilibrium", "--config", "/nonexistent/run.toml"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn periods_commands() {
    let out = run(&["periods", "check", "--T", "0.41421356237309515", "--omega", "1,1.4142135623730951"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["status"], "certified");
    assert_eq!(v["certificate"]["k"], serde_json::json!([1, 1, 1]));
    assert_eq!(v["normalized"], true);

    let out = run(&["periods", "check", "--T", "0.3", "--omega", "1,1.4142135623730951", "--height", "3"]);
    assert_eq!(json(&out)["status"], "no-certificate-below-height");
    let out = run(&["periods", "check", "--T", "1", "--omega", "0,0"]);
    assert_eq!(json(&out)["status"], "omega-zero");
    let out = run(&["periods", "check", "--T", "2", "--omega", "1", "--ring", "scriptD"]);
    assert_eq!(json(&out)["status"], "no-certificate-below-height");

    let out = run(&["periods", "enumerate", "--omega", "1", "--height", "2"]);
    let rows = json(&out);
    let ts: Vec<f64> = rows.as_array().unwrap().iter().map(|r| r["T"].as_f64().unwrap()).collect();
    assert_eq!(ts, vec![0.5, 1.0, 2.0]);

    let out = run(&["periods", "independent", "--omega", "1,1.4142135623730951"]);
    assert_eq!(json(&out)["independent"], true);
    let out = run(&["periods", "independent", "--omega", "1,1.5"]);
    assert_eq!(json(&out)["independent"], false);
}

#[test]
fn audit_and_equilibrium() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 1, 16, "");
    let out = run(&["audit", "--config", &cfg, "--samples", "200"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&["equilibrium", "--config", &cfg]);
    let v = json(&out);
    assert_eq!(v["c"], 0.0);
    assert!((v["M0"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let eps0 = v["epsilon0"].as_f64().unwrap();
    assert!((eps0 - 1.0 / (8.0 * std::f64::consts::PI.powi(2))).abs() < 1e-9);
}

#[test]
fn solve_then_compare_with_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        1,
        128,
        "initial = { kind = \"point\", x0 = [0.25] }",
    );
    let solved = dir.path().join("solved");
    let out = run(&["solve", "--config", &cfg, "--t-final", "1", "--snapshots", "0.5,1", "--out", s(&solved)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(solved.join("field_002.json").exists());
    let diag = std::fs::read_to_string(solved.join("diagnostics.jsonl")).unwrap();
    assert!(diag.lines().count() >= 2);
    let man: Value = serde_json::from_str(&std::fs::read_to_string(solved.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(man["command"], "solve");
    assert_eq!(man["files"].as_array().unwrap().len(), 4);

    let reference = dir.path().join("ref");
    let out = run(&[
        "oracle", "eval", "--kind", "point",
        "--params", r#"{"lambda": 1.0, "omega": [1.0], "x0": [0.25]}"#,
        "--grid", "128", "--times", "0,0.5,1", "--out", s(&reference),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = run(&["oracle", "compare", "--reference", s(&reference), "--solver", s(&solved), "--tol", "2e-2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let sup = json(&out)["sup"].as_f64().unwrap();
    assert!(sup < 2e-2, "{sup}");
    let out = run(&["oracle", "compare", "--reference", s(&reference), "--solver", s(&solved), "--tol", "1e-12"]);
    assert_eq!(out.status.code(), Some(1));

    let coarse = dir.path().join("coarse");
    let out = run(&[
        "oracle", "eval", "--kind", "point",
        "--params", r#"{"omega": [1.0], "x0": [0.25]}"#,
        "--grid", "64", "--times", "0,0.5,1", "--out", s(&coarse),
    ]);
    assert!(out.status.success());
    let out = run(&["oracle", "compare", "--reference", s(&coarse), "--solver", s(&solved)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 2, 16, "initial = { kind = \"point\", x0 = [0.1, 0.6] }");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = run(&["solve", "--config", &cfg, "--t-final", "2", "--out", s(out)]);
        assert!(o.status.success());
    }
    for name in ["field_000.json", "field_001.json", "diagnostics.jsonl"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn action_with_sensitivity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 1, 64, "");
    let out_dir = dir.path().join("act");
    let out = run(&["action", "--config", &cfg, "--x0", "0.5", "--t", "0.2", "--out", s(&out_dir), "--sensitivity"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["min"], 0.0);
    let man: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert!(man["derived"]["plateau_sensitivity"]["sup_change_below_half"].as_f64().unwrap() < 1e-12);
}

#[test]
fn periodic_construct_verify_and_export() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 1, 64, "");
    let out_dir = dir.path().join("per");
    let out = run(&["periodic", "construct", "--T", "1", "--k", "1", "--config", &cfg, "--out", s(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("periodic.json").exists());

    let out = run(&["periodic", "verify", "--in", s(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let v = json(&out);
    assert_eq!(v["pass"], true);
    assert_eq!(v["fundamental_period"]["pass"], true);

    let bad = run(&["periodic", "construct", "--T", "0.7", "--k", "1", "--config", &cfg, "--out", s(&out_dir)]);
    assert_eq!(bad.status.code(), Some(2));

    let csv = dir.path().join("csv");
    let out = run(&["export", "--in", s(&out_dir), "--kind", "levelset", "--out", s(&csv)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let first = std::fs::read_to_string(csv.join("levelset_000.csv")).unwrap();
    assert!(first.starts_with("t,x1\n"));
    assert!(first.lines().count() >= 2);
    let out = run(&["export", "--in", s(&out_dir), "--kind", "timeseries", "--points", "0.25;0.5", "--out", s(&csv)]);
    assert!(out.status.success());
    let ts = std::fs::read_to_string(csv.join("timeseries.csv")).unwrap();
    assert!(ts.starts_with("t,p0,p1\n"));
    let out = run(&["export", "--in", s(&out_dir), "--kind", "heatmap", "--out", s(&csv)]);
    assert!(out.status.success());
    assert!(csv.join("heatmap_000.csv").exists());
}

#[test]
fn almost_periodic_compose_and_scan() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 2, 16, "");
    let w1 = dir.path().join("w1");
    let w2 = dir.path().join("w2");
    let o = run(&["periodic", "construct", "--T", "1", "--k", "1,0", "--config", &cfg, "--out", s(&w1)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(&["periodic", "construct", "--T", "0.7071067811865475", "--k", "0,1", "--config", &cfg, "--out", s(&w2)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let ap = dir.path().join("ap");
    let o = run(&["almost-periodic", "compose", "--w1", s(&w1), "--w2", s(&w2), "--out", s(&ap)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(ap.join("w1/periodic.json").exists() && ap.join("w2/periodic.json").exists());
    assert_eq!(json(&o)["ratio_screen"]["relation"], Value::Null);

    let o = run(&["almost-periodic", "scan", "--in", s(&ap), "--epsilon", "0.05", "--tau-max", "10"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert_eq!(v["periods_found"][0], 0.0);
    assert!(ap.join("epsilon_periods.json").exists());
}

#[test]
fn experiment_preset_with_small_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("exp");
    let o = run(&["experiment", "periodic-line", "--N", "64", "--out", s(&out_dir)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let man: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(man["pass"], true);
    assert!(!man["claims"].as_array().unwrap().is_empty());
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.lines().all(|l| l.starts_with("PASS")), "{stderr}");
}
