use std::path::Path;
use std::process::{Command, Output};

fn christoffel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_christoffel"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, json: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, json).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL: &str = r#"{"domain":"omega2","d":2,"function":"f3","schedule":[1,2,4],"k":400,"t":300,"trials":2,"seed":5}"#;

#[test]
fn sweep_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = dir.path().join("run");
    let status = christoffel(&["sweep", "--config", &config, "--out", out.to_str().unwrap()]);
    assert_eq!(status.status.code(), Some(0), "{}", String::from_utf8_lossy(&status.stderr));

    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(
        header,
        "method,m_rule,d,domain,function,K,N,M,trial,seed,E_tau,E_tau_tilde,C,kappa,wall_ms,status"
    );
    // 3 methods × 3 stages × 2 trials, plus one mean row per (method, stage).
    assert_eq!(csv.lines().count(), 1 + 18 + 9);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["grid_size"], 400);

    let again = dir.path().join("again");
    christoffel(&["sweep", "--config", &config, "--out", again.to_str().unwrap()]);
    assert_eq!(std::fs::read(out.join("results.csv")).unwrap(), std::fs::read(again.join("results.csv")).unwrap());

    let other = dir.path().join("other");
    christoffel(&["sweep", "--config", &config, "--seed", "6", "--out", other.to_str().unwrap()]);
    assert_ne!(std::fs::read(out.join("results.csv")).unwrap(), std::fs::read(other.join("results.csv")).unwrap());
}

#[test]
fn conditioning_uses_two_rules() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = dir.path().join("cond");
    let status = christoffel(&["conditioning", "--config", &config, "--out", out.to_str().unwrap()]);
    assert_eq!(status.status.code(), Some(0));
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(csv.contains(",linear:2,") && csv.contains(",nlogn,"));
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), r#"{"domain":"omega2","d":2,"function":"f3","schedule":[4,2],"k":400}"#);
    assert_eq!(christoffel(&["sweep", "--config", &bad]).status.code(), Some(2));
    assert_eq!(christoffel(&["sweep", "--config", "/nonexistent/config.json"]).status.code(), Some(2));
    let incompatible = write_config(dir.path(), r#"{"domain":"cube","d":2,"function":"f2","schedule":[1],"k":50}"#);
    assert_eq!(christoffel(&["sweep", "--config", &incompatible]).status.code(), Some(2));
    assert_eq!(christoffel(&["validate", "--suite", "bogus"]).status.code(), Some(2));
    assert_eq!(christoffel(&["plot", "--csv", "/nonexistent.csv", "--style", "fig1"]).status.code(), Some(2));
}

#[test]
fn validate_prints_json_report() {
    let out = christoffel(&["validate", "--suite", "oracle"]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["suite"], "oracle");
    assert_eq!(report["passed"], true);
    assert!(report["checks"].as_array().is_some_and(|c| !c.is_empty()));
}

#[test]
fn plot_emits_scripts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = dir.path().join("run");
    christoffel(&["sweep", "--config", &config, "--out", out.to_str().unwrap()]);
    let csv = out.join("results.csv");
    for style in ["fig1", "fig3", "fig6"] {
        let status = christoffel(&["plot", "--csv", csv.to_str().unwrap(), "--style", style]);
        assert_eq!(status.status.code(), Some(0));
        let listed = String::from_utf8(status.stdout).unwrap();
        let script = listed.lines().next().unwrap();
        assert!(std::fs::read_to_string(script).unwrap().contains("matplotlib"));
    }
    assert_eq!(
        christoffel(&["plot", "--csv", csv.to_str().unwrap(), "--style", "fig9"]).status.code(),
        Some(2)
    );
}
