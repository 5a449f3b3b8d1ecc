use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn workdir(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("contact-ricci-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn run(dir: &Path, config: &str, command: &str, out: &str, extra: &[&str]) -> Output {
    let cfg = dir.join(format!("{out}.json"));
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_contact-ricci"))
        .args(["--config", cfg.to_str().unwrap(), "--command", command, "--out"])
        .arg(dir.join(out))
        .args(extra)
        .output()
        .unwrap()
}

fn summary(dir: &Path, out: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(out).join("summary.json")).unwrap()).unwrap()
}

fn check<'a>(s: &'a Value, name: &str) -> &'a Value {
    s["checks"].as_array().unwrap().iter().find(|c| c["name"] == name).unwrap()
}

const TORUS: &str = r#"{"manifold": {"name": "torus_xi_n", "params": {"n": 1, "grid": [12, 12, 12]}},
                        "verify": {"random_perturbations": 5}}"#;

#[test]
fn verify_on_the_torus_passes() {
    let dir = workdir("verify");
    let o = run(&dir, TORUS, "verify", "out", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&dir, "out");
    assert_eq!(s["backend"], "analytic_jet");
    let r = check(&s, "ricci_closed_vs_oracle");
    assert!(r["worst"].as_f64().unwrap() <= 1e-6);
    assert_eq!(r["rung"], "analytic");
    let p = s["details"]["p_range"].as_array().unwrap();
    let q = s["details"]["q_range"].as_array().unwrap();
    assert!(p.iter().all(|v| v.as_f64().unwrap().abs() < 1e-8));
    assert!(q.iter().all(|v| (v.as_f64().unwrap() - std::f64::consts::PI).abs() < 1e-8));
    let csv = std::fs::read_to_string(dir.join("out/curvature_grid.csv")).unwrap();
    assert!(csv.starts_with("x,y,z,P,Q,ricci_closed,ricci_oracle"));
    assert_eq!(csv.lines().count(), 1 + 12 * 12 * 12);
}

#[test]
fn summary_is_reproducible_apart_from_the_timestamp() {
    let dir = workdir("determinism");
    let strip = |mut v: Value| {
        v.as_object_mut().unwrap().remove("timestamp").unwrap();
        v
    };
    run(&dir, TORUS, "verify", "a", &["--seed", "7"]);
    run(&dir, TORUS, "verify", "b", &["--seed", "7"]);
    assert_eq!(strip(summary(&dir, "a")), strip(summary(&dir, "b")));
    assert_eq!(summary(&dir, "a")["seed"], 7);
    let grid = |o: &str| std::fs::read(dir.join(o).join("curvature_grid.csv")).unwrap();
    assert_eq!(grid("a"), grid("b"));
}

const LOCAL: &str = r#"{"manifold": {"name": "heisenberg_r3", "params": {"grid": [8, 8, 8]}},
  "f": F,
  "local": {"flow_box": {"axis": 2, "level": 0.05, "seed_bounds": [[0.2, 0.8], [0.2, 0.8]],
                         "seed_grid": [3, 3], "duration": 0.4, "samples": 4}}}"#;

#[test]
fn inadmissible_target_is_rejected_naming_the_point() {
    let dir = workdir("admissibility");
    let o = run(&dir, &LOCAL.replace('F', "\"3 + x\""), "realize-local", "out", &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("admissible bound") && err.contains("[0."), "{err}");
}

#[test]
fn local_realization_writes_its_samples() {
    let dir = workdir("local");
    let f = r#"{"op": "sub", "args": [2, {"op": "mul", "args": [2, "sin(2*pi*z)^2"]}]}"#;
    let o = run(&dir, &LOCAL.replace('F', f), "realize-local", "out", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&dir, "out");
    assert!(check(&s, "ricci_residual")["worst"].as_f64().unwrap() <= 1e-3);
    assert_eq!(check(&s, "initial_surface_defect")["rung"], "structural");
    let csv = std::fs::read_to_string(dir.join("out/realization.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 9 * 4);
}

#[test]
fn maximal_target_gives_an_identity_sequence() {
    let dir = workdir("global");
    let cfg = r#"{"manifold": {"name": "mapping_torus_box", "params": {"grid": [4, 4, 24]}}, "f": 2,
                  "global": {"n_max": 3, "step": 0.01, "band_samples": 8, "path_steps": 8}}"#;
    let o = run(&dir, cfg, "realize-global", "out", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let c: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("out/convergence.json")).unwrap()).unwrap();
    for k in ["summable", "deflated_sets_agree", "pointwise", "verdict"] {
        assert_eq!(c[k], true, "{k}");
    }
    let entries = c["distance_matrix"].as_array().unwrap().iter().flat_map(|r| r.as_array().unwrap());
    assert!(entries.filter(|v| !v.is_null()).all(|v| v.as_f64().unwrap() == 0.0));
}

#[test]
fn distance_reports_pairs() {
    let dir = workdir("distance");
    let cfg = r#"{"manifold": {"name": "torus_xi_n", "params": {"grid": [8, 8, 8]}},
                  "distance": {"metrics": [{"name": "g"}, {"name": "g4", "scale": 4}]}}"#;
    let o = run(&dir, cfg, "distance", "out", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&dir, "out");
    let pair = &s["details"]["pairs"][0];
    // Straight path between g and 4g: ∫ |g|_{g_t} dt = √3·Vol^{1/2}·(4^{3/4} − 1)·4/3.
    let expect = 3f64.sqrt() * (4f64.powf(0.75) - 1.0) * 4.0 / 3.0;
    assert!((pair["path_length_upper"].as_f64().unwrap() - expect).abs() < 1e-3, "{pair}");
}

#[test]
fn invalid_input_exits_with_two() {
    let dir = workdir("invalid");
    let unknown = r#"{"manifold": {"name": "torus_xi_n"}, "bogus": 1}"#;
    assert_eq!(run(&dir, unknown, "verify", "a", &[]).status.code(), Some(2));
    let model = r#"{"manifold": {"name": "sphere"}}"#;
    assert_eq!(run(&dir, model, "verify", "b", &[]).status.code(), Some(2));
    let no_f = r#"{"manifold": {"name": "mapping_torus_box", "params": {"grid": [4, 4, 8]}}}"#;
    let o = run(&dir, no_f, "realize-global", "c", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`f`"));
}
