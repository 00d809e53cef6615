//! End-to-end checks of the CLI binary: subcommands, output files, exit
//! codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tierserve"))
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn golden_fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../tierserve/tests/fixtures/golden.jsonl")
        .canonicalize()
        .unwrap()
}

const CONFIG: &str = r#"
seed = 5
replicas = 1
warmup_tasks = 500

[topology]
tiers = [
    { tier = 1, compute_cost = 1.0 },
    { tier = 2, compute_cost = 5.0 },
    { tier = 3, compute_cost = 20.0 },
]

[workload]
source = "synthetic"
n_tasks = 5500
task_type = "seq2class"
input_len_dist = { kind = "constant", value = 100 }
output_len_dist = { kind = "constant", value = 20 }
confidence_dist = [ { a = 2.0, b = 2.0 }, { a = 3.0, b = 2.0 }, { a = 4.0, b = 2.0 } ]
quality_model = [ { q0 = 0.5, q1 = 0.4 }, { q0 = 0.6, q1 = 0.4 }, { q0 = 0.7, q1 = 0.3 } ]

[[methods]]
kind = "rec_serve"
beta = 0.3
k = 500

[[methods]]
kind = "cloud_serve"

[calibrate]
target_beta = 0.3
window = 1000
max_rounds = 5
k = 500
warmup_tasks = 500
"#;

#[test]
fn run_writes_deterministic_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("exp.toml");
    std::fs::write(&config_path, CONFIG).unwrap();
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");

    for out in [&out_a, &out_b] {
        let status = bin()
            .args(["run", "--config"])
            .arg(&config_path)
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = std::fs::read(&out_a).unwrap();
    let b = std::fs::read(&out_b).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with(
        "method,param,task_count,mean_quality,mean_compute_cost,comm_device,comm_edge,comm_cloud,comm_total,completion_tier_1,completion_tier_2,completion_tier_3,seed"
    ));
    assert!(text.contains("RecServe,beta=0.3,5000,"));
    // CloudServe on 5000 measured tasks of 240 bytes each
    assert!(text.contains("CloudServe,,5000,"));
    assert!(text.contains("1200000"));
}

#[test]
fn run_emits_json_when_asked() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("exp.toml");
    std::fs::write(&config_path, CONFIG).unwrap();
    let output = bin()
        .args(["run", "--config"])
        .arg(&config_path)
        .args(["--format", "json"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let parsed: serde_json::Value = serde_json::from_str(&stdout(&output)).unwrap();
    assert_eq!(parsed["seed"], 5);
    assert_eq!(parsed["methods"][0]["label"], "RecServe");
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("exp.toml");
    std::fs::write(&config_path, CONFIG).unwrap();
    let base = bin()
        .args(["run", "--config"])
        .arg(&config_path)
        .output()
        .unwrap();
    let reseeded = bin()
        .args(["run", "--config"])
        .arg(&config_path)
        .args(["--seed", "99"])
        .output()
        .unwrap();
    assert!(base.status.success() && reseeded.status.success());
    assert_ne!(stdout(&base), stdout(&reseeded));
    assert!(stdout(&reseeded).lines().nth(1).unwrap().ends_with(",99"));
}

#[test]
fn compare_emits_tradeoff_table() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("exp.toml");
    std::fs::write(&config_path, CONFIG).unwrap();
    let output = bin()
        .args(["compare", "--config"])
        .arg(&config_path)
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = stdout(&output);
    assert!(text.starts_with("method,param,quality,comm_total\n"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn theory_prints_bounds_table() {
    let output = bin()
        .args(["theory", "--costs", "1,5,20", "--betas", "0.1,0.3"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = stdout(&output);
    assert!(text.starts_with("beta,completion_tier_1"));
    assert!(text.contains("0.6180339887498949"));
    let row: Vec<&str> = text.lines().nth(2).unwrap().split(',').collect();
    assert_eq!(row[0], "0.3");
    assert!((row[4].parse::<f64>().unwrap() - 0.39).abs() < 1e-12);
}

#[test]
fn calibrate_emits_round_trace() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("exp.toml");
    std::fs::write(&config_path, CONFIG).unwrap();
    let output = bin()
        .args(["calibrate", "--config"])
        .arg(&config_path)
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = stdout(&output);
    assert!(text.starts_with("round,beta,burden,gamma\n"));
    assert!(text.lines().count() >= 2);
    assert!(text.lines().nth(1).unwrap().starts_with("1,0.3"));
}

#[test]
fn validate_trace_reports_golden_fixture() {
    let output = bin()
        .arg("validate-trace")
        .arg(golden_fixture())
        .output()
        .unwrap();
    assert!(output.status.success());
    assert!(stdout(&output).contains("3 tasks, 3 tiers, 0 violations"));
}

#[test]
fn run_on_trace_workload() {
    let dir = tempfile::tempdir().unwrap();
    let config = format!(
        r#"
seed = 5
warmup_tasks = 1

[topology]
tiers = [
    {{ tier = 1, compute_cost = 1.0 }},
    {{ tier = 2, compute_cost = 5.0 }},
    {{ tier = 3, compute_cost = 20.0 }},
]

[workload]
source = "trace"
path = "{}"

[[methods]]
kind = "cas_serve"
thresholds = [0.8, 0.6]
"#,
        golden_fixture().display()
    );
    let config_path = dir.path().join("trace_exp.toml");
    std::fs::write(&config_path, &config).unwrap();
    let output = bin()
        .args(["run", "--config"])
        .arg(&config_path)
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    assert!(stdout(&output).contains("CasServe"));
}

#[test]
fn exit_codes_distinguish_config_and_trace_errors() {
    // missing config file -> 1
    let status = bin()
        .args(["run", "--config", "/nonexistent/exp.toml"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));

    // config parses but the trace file is absent -> 2
    let dir = tempfile::tempdir().unwrap();
    let config = r#"
[topology]
tiers = [
    { tier = 1, compute_cost = 1.0 },
    { tier = 2, compute_cost = 5.0 },
]

[workload]
source = "trace"
path = "/nonexistent/trace.jsonl"

[[methods]]
kind = "end_serve"
"#;
    let config_path = dir.path().join("exp.toml");
    std::fs::write(&config_path, config).unwrap();
    let status = bin()
        .args(["run", "--config"])
        .arg(&config_path)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    // invalid method parameters -> 1
    let bad = CONFIG.replace("beta = 0.3", "beta = 1.5");
    let bad_path = dir.path().join("bad.toml");
    std::fs::write(&bad_path, bad).unwrap();
    let status = bin()
        .args(["run", "--config"])
        .arg(&bad_path)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));

    // missing trace for validate-trace -> 2
    let status = bin()
        .args(["validate-trace", "/nonexistent/trace.jsonl"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}
