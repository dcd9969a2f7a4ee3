use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const QUARTIC: &str = r#"
seed = 1
lambda = 0.0

[domain]
extents = [[0.0, 1.0]]
resolution = [32]

[exponent]
p = 2.0

[potential]
kind = "expression"
formula = "abs(t)^4/4"

[solver]
route = "mp"
sphere_samples = 32
"#;

const J1: &str = r#"
lambda = 0.0

[domain]
extents = [[0.0, 1.0]]
resolution = [16]

[exponent]
p = 3.0

[potential]
kind = "j1"
nu = 1.0
h = 2.0
r_plus = 5.0
"#;

fn varlap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_varlap")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn solve_writes_every_listed_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "q.toml", QUARTIC);
    let out = dir.path().join("out");
    let o = varlap(&["solve", "--config", &cfg, "--out", out.to_str().unwrap(), "--history"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = json(&out.join("manifest.json"));
    let outputs = manifest["outputs"].as_array().unwrap();
    assert_eq!(outputs.len(), 4);
    for p in outputs {
        assert!(Path::new(p.as_str().unwrap()).exists());
    }
    assert_eq!(manifest["subcommand"], "solve");
    assert_eq!(manifest["config"]["output"]["history"], true);
    let result = json(&out.join("result.json"));
    assert_eq!(result["converged"], true);
    assert_eq!(result["route"], "mountain_pass");
    let csv = std::fs::read_to_string(out.join("solution.csv")).unwrap();
    assert_eq!(csv.lines().count(), 34);
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "q.toml", QUARTIC);
    let out = dir.path().join("out");
    let o = varlap(&[
        "solve", "--config", &cfg, "--out", out.to_str().unwrap(), "--route", "min", "--seed", "99", "--probes", "50",
        "--multistart", "2", "--lambda", "20",
    ]);
    // λ above the first eigenvalue: the random start runs off to -∞
    assert_eq!(o.status.code(), Some(1));
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["seed"], 99);
    assert_eq!(manifest["config"]["solver"]["route"], "min");
    assert_eq!(manifest["config"]["lambda"], 20.0);
    assert!(out.join("failure.json").exists());
}

#[test]
fn identical_runs_give_identical_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "q.toml", QUARTIC);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        assert_eq!(varlap(&["solve", "--config", &cfg, "--out", d.to_str().unwrap()]).status.code(), Some(0));
    }
    let ra = std::fs::read(a.join("result.json")).unwrap();
    let rb = std::fs::read(b.join("result.json")).unwrap();
    assert_eq!(ra, rb);
}

#[test]
fn exit_code_contract() {
    assert_eq!(varlap(&["solve"]).status.code(), Some(2));
    let o = varlap(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(varlap(&["solve", "--config", "/definitely/missing.toml"]).status.code(), Some(2));
    assert_eq!(varlap(&["--help"]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", &J1.replace("r_plus = 5.0", "r_plus = 2.5"));
    let o = varlap(&["solve", "--config", &bad, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("potential.r_plus") && err.contains("p⁺ < r⁻") && err.contains("line"), "{err}");
}

#[test]
fn lambda_at_interval_end_warns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "j.toml", &J1.replace("lambda = 0.0", "lambda = 3.0"));
    let o = varlap(&["geometry", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap(), "--samples", "8"]);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("warning") && err.contains("ν p⁻"), "{err}");
}

#[test]
fn check_potential_reports_and_fails_on_violation() {
    let dir = tempfile::tempdir().unwrap();
    let ok = write(dir.path(), "ok.toml", &format!("{J1}\n[hypotheses]\nc = 3.9\n"));
    let o = varlap(&["check-potential", "--config", &ok, "--out", dir.path().join("a").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let reports = json(&dir.path().join("a/hypotheses.json"));
    assert_eq!(reports.as_array().unwrap().len(), 2);

    let bad = write(dir.path(), "bad.toml", &format!("{J1}\n[hypotheses]\nc = 4.1\n"));
    let o = varlap(&["check-potential", "--config", &bad, "--out", dir.path().join("b").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn verify_lemmas_emits_a_passing_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("l");
    let o = varlap(&["verify-lemmas", "--seed", "7", "--samples", "500", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["samples"], 500);
    assert_eq!(json(&out.join("lemmas.json")), report);
    assert_eq!(varlap(&["verify-lemmas", "--exponent", "1 + x", "--samples", "3"]).status.code(), Some(2));
}

#[test]
fn geometry_without_endpoint_fails() {
    let dir = tempfile::tempdir().unwrap();
    let zero = write(
        dir.path(),
        "z.toml",
        &QUARTIC.replace("kind = \"expression\"\nformula = \"abs(t)^4/4\"", "kind = \"zero\""),
    );
    let out = dir.path().join("g");
    let o = varlap(&["geometry", "--config", &zero, "--out", out.to_str().unwrap(), "--rho", "0.1,0.2"]);
    assert_eq!(o.status.code(), Some(1));
    let g = json(&out.join("geometry.json"));
    assert!(g["endpoint_error"].as_str().unwrap().contains("anticoercivity"));
    assert_eq!(g["reports"].as_array().unwrap().len(), 2);
}
