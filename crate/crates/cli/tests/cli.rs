//! Runs the `cpshift` binary end to end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_cpshift");

fn write_scenario(dir: &Path, name: &str, mode: &str, turnover: f64, classes: usize, rows: [usize; 3]) -> PathBuf {
    let path = dir.join(name);
    let text = format!(
        "n_features = 5\nn_classes = {classes}\nid_feature_turnover = {turnover:?}\n\
         concentration_mode = \"{mode}\"\nentropy_level = \"HIGH\"\n\
         n_train = {}\nn_val = {}\nn_test = {}\nseed = 1\n",
        rows[0], rows[1], rows[2]
    );
    fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str], scenario: &Path, out: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .arg("--scenario")
        .arg(scenario)
        .arg("--out")
        .arg(out)
        .env_remove("CPSHIFT_SEEDS")
        .output()
        .unwrap()
}

fn jsonl(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn severe_scenario_gates_the_pipeline() {
    let dir = TempDir::new().unwrap();
    let spec = write_scenario(dir.path(), "sev.toml", "SINGLE_DOMINANT", 1.0, 10, [2000, 1000, 1000]);
    let out = dir.path().join("out");
    let o = run(&["diagnose", "--seeds", "42..51"], &spec, &out);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let records = jsonl(&out.join("diagnosis.jsonl"));
    assert_eq!(records[0]["verdict"]["status"], "CATASTROPHIC_EXPECTED");
}

#[test]
fn stable_distributed_scenario_passes() {
    let dir = TempDir::new().unwrap();
    let spec = write_scenario(dir.path(), "rob.toml", "DISTRIBUTED", 0.0, 5, [2000, 1000, 1000]);
    let out = dir.path().join("out");
    let o = run(&["diagnose", "--seeds", "42..51"], &spec, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn missing_data_names_the_load_stage() {
    let dir = TempDir::new().unwrap();
    let schema = dir.path().join("schema.toml");
    fs::write(&schema, "target = \"label\"\ntimestamp = \"ts\"\n").unwrap();
    let o = Command::new(BIN)
        .args(["diagnose", "--data"])
        .arg(dir.path().join("nope.csv"))
        .arg("--schema")
        .arg(&schema)
        .args(["--train-end", "6", "--val-end", "9", "--out"])
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("load_table"), "{err}");
}

#[test]
fn small_ensemble_writes_one_row_per_seed() {
    let dir = TempDir::new().unwrap();
    let spec = write_scenario(dir.path(), "tiny.toml", "DISTRIBUTED", 0.0, 3, [300, 150, 150]);
    let out = dir.path().join("out");
    let start = Instant::now();
    let o = run(&["ensemble", "--seeds", "1,2"], &spec, &out);
    assert!(start.elapsed() < Duration::from_secs(10));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(jsonl(&out.join("seeds.jsonl")).len(), 2);
    let csv = fs::read_to_string(out.join("seeds.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn no_retraining_keeps_the_initial_model() {
    let dir = TempDir::new().unwrap();
    let spec = write_scenario(dir.path(), "tiny.toml", "SINGLE_DOMINANT", 1.0, 3, [300, 150, 150]);
    let out = dir.path().join("out");
    let o = run(&["retrain", "--cadence", "none", "--horizon", "5"], &spec, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let trace = jsonl(&out.join("trace.jsonl"));
    assert_eq!(trace.len(), 5);
    let schedules = jsonl(&out.join("schedules.jsonl"));
    assert_eq!(schedules.len(), 1);
    assert_eq!(schedules[0]["retrain_count"], 0);
}

#[test]
fn zero_step_aci_row_equals_static_row() {
    let dir = TempDir::new().unwrap();
    let spec = write_scenario(dir.path(), "tiny.toml", "SINGLE_DOMINANT", 1.0, 3, [300, 150, 150]);
    let out = dir.path().join("out");
    let o = run(&["aci", "--gamma", "0", "--gamma", "0.01"], &spec, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = jsonl(&out.join("aci.jsonl"));
    let stat = rows.iter().find(|r| r["gamma"].is_null()).unwrap();
    let zero = rows.iter().find(|r| r["gamma"] == 0.0).unwrap();
    assert_eq!(stat["coverage"], zero["coverage"]);
    assert_eq!(stat["mean_set_size"], zero["mean_set_size"]);
}

#[test]
fn report_echoes_resolved_defaults() {
    let dir = TempDir::new().unwrap();
    let spec = write_scenario(dir.path(), "tiny.toml", "DISTRIBUTED", 0.0, 3, [300, 150, 150]);
    let out = dir.path().join("out");
    let o = run(&["ensemble", "--seeds", "1,2"], &spec, &out);
    assert!(o.status.success());
    let config: Value = serde_json::from_str(&fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(config["alpha"], 0.1);
    assert_eq!(config["split"]["train_end"], 6);
    assert_eq!(config["model"]["kind"], "bagged_trees");
    assert_eq!(config["gammas"].as_array().unwrap().len(), 3);
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("resolved config"));
    assert!(report.contains("\"horizon\": 11"));
}

#[test]
fn seed_list_can_come_from_the_environment() {
    let dir = TempDir::new().unwrap();
    let spec = write_scenario(dir.path(), "tiny.toml", "DISTRIBUTED", 0.0, 3, [300, 150, 150]);
    let out = dir.path().join("out");
    let o = Command::new(BIN)
        .args(["ensemble", "--scenario"])
        .arg(&spec)
        .arg("--out")
        .arg(&out)
        .env("CPSHIFT_SEEDS", "3..5")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(jsonl(&out.join("seeds.jsonl")).len(), 3);
}

#[test]
fn invalid_alpha_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let spec = write_scenario(dir.path(), "tiny.toml", "DISTRIBUTED", 0.0, 3, [300, 150, 150]);
    let o = run(&["ensemble", "--alpha", "1.5"], &spec, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("parse_config"));
}
