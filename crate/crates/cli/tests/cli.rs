use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rinewton(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rinewton")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("exp.toml");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SMOKE: &str = r#"
id = "smoke"
checks = ["majorant-h", "step-bound", "qfactor", "convergence", "residual-invariant"]

[problem]
name = "exp-minus-one"

[majorant]
kind = "smale"
gamma = 0.5

[starts]
fractions = [0.5]

[samples]
count = 40
"#;

#[test]
fn checks_list_names_every_check() {
    let o = rinewton(&["checks", "--list"]);
    assert!(o.status.success());
    let s = stdout(&o);
    for name in ["majorant-condition", "operator-bound", "step-bound", "linearization-error", "qfactor", "region"] {
        assert!(s.contains(name), "{name} missing");
    }
}

#[test]
fn radii_json_reproduces_closed_forms() {
    let o = rinewton(&["radii", "--kind", "smale", "--gamma", "1"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["rho"].as_f64().unwrap() - (5.0 - 17f64.sqrt()) / 4.0).abs() < 1e-12);
    assert_eq!(v["sigma"].as_f64().unwrap(), 0.5);
    assert!(v["theta_max"].is_null());
}

#[test]
fn radii_csv_with_theta_max() {
    let o = rinewton(&["radii", "--kind", "lipschitz", "--l", "1", "--vartheta", "0.5", "--cond", "1", "--d0", "0.1", "--format", "csv"]);
    assert!(o.status.success());
    let s = stdout(&o);
    let mut lines = s.lines();
    assert!(lines.next().unwrap().starts_with("kind,parameters"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "lipschitz");
    let theta: f64 = row[10].parse().unwrap();
    assert!((theta - 0.5 / (2.0 / 0.9 - 1.0)).abs() < 1e-15);
}

#[test]
fn radii_rejects_missing_constants_and_bad_queries() {
    assert_eq!(rinewton(&["radii", "--kind", "holder", "--l", "1"]).status.code(), Some(2));
    assert_eq!(rinewton(&["radii", "--kind", "lipschitz", "--l", "1", "--vartheta", "0.6", "--k", "2"]).status.code(), Some(2));
}

#[test]
fn run_writes_outputs_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMOKE);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = rinewton(&["run", &cfg, "--seed", "9", "--out-dir", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).contains("qfactor"));
    }
    for f in ["trace_000.csv", "checks.json", "radius_report.json", "traces.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn run_json_format() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMOKE);
    let out = dir.path().join("o");
    let o = rinewton(&["run", &cfg, "--format", "json", "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("trace_000.json")).unwrap()).unwrap();
    assert_eq!(v[0]["k"], 0);
}

#[test]
fn failing_checks_give_exit_status_one() {
    let dir = tempfile::tempdir().unwrap();
    let body = SMOKE.replace("gamma = 0.5", "gamma = 0.125").replace("\"majorant-h\", ", "\"linearization-error\", ");
    let cfg = write_config(dir.path(), &body);
    let out = dir.path().join("o");
    let o = rinewton(&["run", &cfg, "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    let checks: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("checks.json")).unwrap()).unwrap();
    assert!(checks.as_array().unwrap().iter().any(|c| c["status"] == "fail"));
}

#[test]
fn config_errors_give_exit_status_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMOKE.replace("exp-minus-one", "no-such-problem"));
    let o = rinewton(&["run", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown problem"));
    let cfg = write_config(dir.path(), &format!("{SMOKE}\nunexpected = 1\n"));
    assert_eq!(rinewton(&["run", &cfg]).status.code(), Some(2));
}
