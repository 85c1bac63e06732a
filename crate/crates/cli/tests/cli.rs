use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn ctlab(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ctlab"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const GRID: &str = r#"{
  "experiment": "grid",
  "fixture": { "name": "ex2_1" },
  "algorithm": "module-tr",
  "N": [1000, 10000, 100000],
  "n": [50],
  "seeds": [0, 1, 2]
}"#;

#[test]
fn module_tr_grid_writes_nine_rows_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), GRID);
    let out = tmp.path().join("out");
    let o = ctlab(&["run", "--config", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "experiment,fixture,method,K,T,vocab,N,n,seed,nll,excess,kl,extra");
    assert_eq!(lines.count(), 9);
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["rows"], 9);
    assert_eq!(manifest["seeds"], serde_json::json!([0, 1, 2]));
    assert!(out.join("details.json").exists());
}

#[test]
fn identical_invocations_give_identical_csv() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), GRID);
    let mut texts = Vec::new();
    for (dir, jobs) in [("a", "1"), ("b", "4")] {
        let out = tmp.path().join(dir);
        let o = ctlab(&["run", "--config", &cfg, "--jobs", jobs, "--out", out.to_str().unwrap()], &[]);
        assert!(o.status.success());
        texts.push(std::fs::read(out.join("results.csv")).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn seed_flag_replaces_seed_list() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), GRID);
    let out = tmp.path().join("out");
    assert!(ctlab(&["run", "--config", &cfg, "--seed", "7", "--out", out.to_str().unwrap()], &[]).status.success());
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(8) == Some("7")));
}

#[test]
fn invalid_config_exits_with_two() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &GRID.replace("[0, 1, 2]", "[1, 1]"));
    let o = ctlab(&["run", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
    let cfg = write_config(tmp.path(), "{ not json");
    assert_eq!(ctlab(&["run", "--config", &cfg], &[]).status.code(), Some(2));
}

#[test]
fn budget_overflow_exits_with_three() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), GRID);
    let o = ctlab(&["oracle", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()], &[("CTLAB_BUDGET", "100")]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn oracle_dumps_normalised_joints() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), GRID);
    let out = tmp.path().join("o");
    assert!(ctlab(&["oracle", "--config", &cfg, "--out", out.to_str().unwrap()], &[]).status.success());
    let j: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("oracle_target.json")).unwrap()).unwrap();
    let total: f64 = j["probs"].as_array().unwrap().iter().map(|p| p.as_f64().unwrap()).sum();
    assert_eq!(j["probs"].as_array().unwrap().len(), 10_000);
    assert!((total - 1.0).abs() < 1e-9);
}

#[test]
fn gen_writes_scm_and_data_files() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), GRID);
    let out = tmp.path().join("g");
    assert!(ctlab(&["gen", "--config", &cfg, "--out", out.to_str().unwrap()], &[]).status.success());
    let target = std::fs::read_to_string(out.join("data_target.csv")).unwrap();
    assert_eq!(target.lines().count(), 51);
    assert!(out.join("scm_target.json").exists());
    assert_eq!(std::fs::read_to_string(out.join("data_source-0.csv")).unwrap().lines().count(), 1001);
}

#[test]
fn gcd_rows_carry_transport_status() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{ "experiment": "g", "fixture": { "name": "gcd", "vocab": 4 }, "algorithm": "circuit-tr",
             "N": [2000], "n": [0], "seeds": [0], "params": { "prefix_len": 2 } }"#,
    );
    let out = tmp.path().join("o");
    assert!(ctlab(&["run", "--config", &cfg, "--out", out.to_str().unwrap()], &[]).status.success());
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(csv.contains("\"\"status\"\"") && csv.contains("\"\"transported\"\""));
}

#[test]
fn bounds_command_writes_json_and_curve() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{ "experiment": "b", "fixture": { "name": "bow" }, "algorithm": "bounds", "n": [5, 50], "seeds": [0, 1] }"#,
    );
    let out = tmp.path().join("o");
    let o = ctlab(&["bounds", "--config", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("bounds.json").exists());
    let curve = std::fs::read_to_string(out.join("curve.csv")).unwrap();
    assert_eq!(curve.lines().next().unwrap(), "n,seed,method,risk");
    assert_eq!(curve.lines().count(), 1 + 2 * 2 * 3);
}

#[test]
fn report_summarises_results_directory() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &GRID.replace("\"module-tr\"", "\"module-tr\", \"params\": { \"baselines\": [\"target-only\"] }"));
    let out = tmp.path().join("o");
    assert!(ctlab(&["run", "--config", &cfg, "--out", out.to_str().unwrap()], &[]).status.success());
    assert!(ctlab(&["report", out.to_str().unwrap()], &[]).status.success());
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    // two methods by three source sizes, three seeds each
    assert_eq!(summary.lines().count(), 1 + 6);
    assert!(summary.lines().skip(1).all(|l| l.split(',').nth(3) == Some("3") && !l.split(',').nth(5).unwrap().is_empty()));
    assert!(out.join("curve_module-tr.csv").exists() && out.join("curve_target-only.csv").exists());
}

#[test]
fn report_without_columns_exits_with_two() {
    let tmp = TempDir::new().unwrap();
    std::fs::write(tmp.path().join("results.csv"), "method,N\nx,1\n").unwrap();
    assert_eq!(ctlab(&["report", tmp.path().to_str().unwrap()], &[]).status.code(), Some(2));
}
