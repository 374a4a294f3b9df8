use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn translab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_translab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn list_problems_shows_anchors() {
    let out = translab(&["list-problems"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let line = |name: &str| {
        text.lines()
            .find(|l| l.starts_with(name))
            .unwrap_or_else(|| panic!("{name} missing from\n{text}"))
            .to_string()
    };
    assert!(line("ex-2-2").contains("F(x,a)=(0, a_1^2−a_2^2)"));
    assert!(line("immersion-sigma-b").contains("Σ=B"));
    assert!(line("pareto-9-1").contains("X*(f+π)"));
    assert!(line("cantor-depth-12").contains("log 2/log 3"));
}

#[test]
fn list_problems_json_is_the_registry() {
    let out = translab(&["list-problems", "--json"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let names: Vec<&str> = v.as_array().unwrap().iter().map(|e| e["name"].as_str().unwrap()).collect();
    assert_eq!(names.len(), translab_cli::registry::registry().len());
    for name in ["ex-2-2", "ex-2-3", "ex-2-4", "circle-r3", "pareto-9-1"] {
        assert!(names.contains(&name), "{name}");
    }
}

#[test]
fn classify_prints_report() {
    let out = translab(&["run", "--config", scenarios_dir().join("classify-origin.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["command"], "classify");
    assert_eq!(v["result"]["classification"], "IN_W");
    assert_eq!(v["result"]["delta_family"], 2);
}

#[test]
fn flagged_verdicts_exit_with_two() {
    for name in ["umbrella-degenerate.json", "immersion-on-diagonal.json"] {
        let out = translab(&["run", "--config", scenarios_dir().join(name).to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{name}");
        let v: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(v["flagged"], true);
    }
}

#[test]
fn immersion_witness_on_the_diagonal() {
    let out = translab(&["run", "--config", scenarios_dir().join("immersion-on-diagonal.json").to_str().unwrap()]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let x = v["result"]["corank_witnesses"][0]["x"][0].as_f64().unwrap();
    assert!((x + 0.2).abs() < 1e-8, "{x}");
}

#[test]
fn bad_configs_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("version.json", r#"{"schema_version": 9, "command": "morse", "problem": "parabola"}"#),
        ("seedless.json", r#"{"schema_version": 1, "command": "sigma-sample", "problem": "ex-2-3"}"#),
        ("unknown.json", r#"{"schema_version": 1, "command": "morse", "problem": "no-such"}"#),
        ("kind.json", r#"{"schema_version": 1, "command": "morse", "problem": "ex-2-2"}"#),
        ("syntax.json", "{ not json"),
    ];
    for (name, body) in cases {
        let path = write_config(dir.path(), name, body);
        let out = translab(&["run", "--config", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(1), "{name}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"), "{name}");
    }
    let out = translab(&["run", "--config", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn out_dir_receives_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = translab(&[
        "run",
        "--config",
        scenarios_dir().join("cantor-boxdim.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("boxdim.json")).unwrap()).unwrap();
    let dim = report["result"]["dimension"].as_f64().unwrap();
    assert!((dim - 2f64.ln() / 3f64.ln()).abs() < 0.05);
    let csv = std::fs::read_to_string(dir.path().join("boxdim.csv")).unwrap();
    assert!(csv.starts_with("epsilon,count\n"));
    assert_eq!(csv.lines().count(), 13);
}

#[test]
fn csv_to_stdout_and_missing_csv() {
    let dir = tempfile::tempdir().unwrap();
    let sample = write_config(
        dir.path(),
        "sample.json",
        r#"{"schema_version": 1, "command": "sigma-sample", "problem": "ex-2-3", "seed": 3, "budget": 200}"#,
    );
    let out = translab(&["run", "--config", sample.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("a_1,a_2"));
    for row in lines {
        let v: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
        assert!((v[0] - v[1]).abs() < 1e-6, "{row}");
    }
    let classify = scenarios_dir().join("classify-origin.json");
    let out = translab(&["run", "--config", classify.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn seed_flag_overrides_and_threads_do_not_matter() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "probe.json",
        r#"{"schema_version": 1, "command": "df-estimate", "problem": "twisted-cubic", "seed": 1, "budget": 500}"#,
    );
    let cfg = cfg.to_str().unwrap();
    let a = translab(&["run", "--config", cfg, "--seed", "77", "--threads", "1"]);
    let b = translab(&["--threads", "4", "run", "--config", cfg, "--seed", "77"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["seed"], 77);
    assert_eq!(v["result"]["d_hat"], 4);
    let env = Command::new(env!("CARGO_BIN_EXE_translab"))
        .env("TRANSLAB_THREADS", "2")
        .args(["run", "--config", cfg, "--seed", "77"])
        .output()
        .unwrap();
    assert_eq!(env.stdout, a.stdout);
}

#[test]
fn every_bundled_scenario_loads() {
    let mut count = 0;
    for entry in std::fs::read_dir(scenarios_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            translab_cli::ScenarioConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e:#}", path.display()));
            count += 1;
        }
    }
    assert!(count >= 10);
}
