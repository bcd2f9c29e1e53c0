use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const DATASET: &str = "text,label\n\
\"Profit rose 20% on strong demand.\",positive\n\
\"The company cut its outlook after losses.\",negative\n\
\"The annual meeting is scheduled for May.\",neutral\n\
\"Shares jumped after the upbeat guidance.\",positive\n";

fn greenbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_greenbench"))
        .args(args)
        .env_remove("GREENBENCH_FACTOR_FILE")
        .output()
        .unwrap()
}

fn factors() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/emission_factors.csv")
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("fix.csv"), DATASET).unwrap();
        Self { dir }
    }

    fn path(&self, name: &str) -> String {
        self.dir.path().join(name).display().to_string()
    }

    fn bench(&self, out: &str, extra: &[&str]) -> Output {
        let (dataset, out, factor_file) = (self.path("fix.csv"), self.path(out), factors().display().to_string());
        let mut args = vec![
            "bench", "--dataset", &dataset, "--power-source", "constant:28", "--factor-file", &factor_file,
            "--region", "test-grid", "--out", &out,
        ];
        args.extend_from_slice(extra);
        greenbench(&args)
    }
}

fn json(path: &str) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

#[test]
fn mock_bench_writes_report() {
    let fx = Fixture::new();
    let out = fx.bench("run.json", &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(&fx.path("run.json"));
    assert_eq!(doc["schema_version"], "1");
    let run = &doc["runs"][0];
    assert_eq!(run["runner"], "mock");
    assert_eq!(run["n_inferences"], 4);
    assert_eq!(run["metrics"]["accuracy"], 1.0);
    assert_eq!(run["energy_source"], "constant-power:28W");
    assert_eq!(doc["provenance"]["factor_rows"][0], "test-grid,400,scope2");
}

#[test]
fn fixed_mock_response_and_predictions() {
    let fx = Fixture::new();
    let preds = fx.path("preds.csv");
    let out = fx.bench("run.json", &["--mock-response", "I cannot tell.", "--predictions", &preds]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = &json(&fx.path("run.json"))["runs"][0];
    assert_eq!(run["unknown_predictions"], 4);
    let csv = fs::read_to_string(preds).unwrap();
    assert!(csv.starts_with("text,gold,predicted,raw_response\n"));
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn preset_and_override_are_recorded() {
    let fx = Fixture::new();
    let out = fx.bench("run.json", &["--config", "phi-3-mini", "--temperature", "0.2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let config = &json(&fx.path("run.json"))["runs"][0]["config"];
    assert_eq!(config["model_name"], "phi3:mini");
    assert_eq!(config["temperature"], 0.2);
}

#[test]
fn missing_dataset_is_usage_error() {
    let out = greenbench(&["bench", "--power-source", "constant:28", "--region", "x", "--out", "o.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--dataset"));
}

#[test]
fn unknown_region_is_runtime_error() {
    let fx = Fixture::new();
    let (dataset, out, factor_file) = (fx.path("fix.csv"), fx.path("o.json"), factors().display().to_string());
    let res = greenbench(&[
        "bench", "--dataset", &dataset, "--power-source", "constant:28", "--factor-file", &factor_file,
        "--region", "atlantis", "--out", &out,
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("atlantis"));
}

#[test]
fn compare_run_with_itself() {
    let fx = Fixture::new();
    assert!(fx.bench("a.json", &[]).status.success());
    let a = fx.path("a.json");
    let cmp = fx.path("cmp.json");
    let out = greenbench(&["compare", &a, &a, "--out", &cmp]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(&cmp);
    assert_eq!(doc["comparisons"][0]["co2_reduction_pct"], 0.0);
    assert_eq!(doc["runs"].as_array().unwrap().len(), 1);
}

#[test]
fn compare_then_report() {
    let fx = Fixture::new();
    assert!(fx.bench("a.json", &["--label", "before", "--config", "llama-3.2-1b"]).status.success());
    assert!(fx.bench("b.json", &["--label", "after", "--mock-response", "Neutral"]).status.success());
    let cmp = fx.path("cmp.json");
    assert!(greenbench(&["compare", &fx.path("a.json"), &fx.path("b.json"), "--out", &cmp])
        .status
        .success());
    let out = greenbench(&["report", &cmp]);
    assert!(out.status.success());
    let md = String::from_utf8(out.stdout).unwrap();
    assert!(md.starts_with("| Model | Precision | Recall | F1 | Accuracy | CO₂ (kg) |\n"));
    assert!(md.contains("| **Before Optimization** | | | | | |\n| before | 1.00 | 1.00 | 1.00 | 1.00 |"));
    assert!(md.contains("| **After Optimization** | | | | | |\n| after |"));
    assert!(md.contains("| before → after |"));
}

#[test]
fn toy_bench_with_bits_labels_run() {
    let fx = Fixture::new();
    let out = fx.bench("q.json", &["--runner", "toy", "--bits", "4", "--dims", "64"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = &json(&fx.path("q.json"))["runs"][0];
    assert_eq!(run["label"], "toy-classifier (4-bit)");
    assert_eq!(run["quantization"]["bits"], 4);
}

#[test]
fn bits_require_toy_runner() {
    let fx = Fixture::new();
    assert_eq!(fx.bench("x.json", &["--bits", "4"]).status.code(), Some(2));
}

#[test]
fn quantize_writes_codes_and_stats() {
    let fx = Fixture::new();
    let input = fx.path("w.txt");
    fs::write(&input, "2 3\n-1.0 0.0 1.0 2.0 3.0 4.0\n").unwrap();
    let out = greenbench(&["quantize", &input, "--bits", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stats: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(stats["bits"], 2);
    assert_eq!(stats["fp32_bytes"], 24);
    let quant = fs::read_to_string(format!("{input}.quant")).unwrap();
    let lines: Vec<&str> = quant.lines().collect();
    assert_eq!(lines[0], "2 3");
    assert!(lines[1].starts_with("2 "));
    assert_eq!(lines[2].split_whitespace().count(), 6);
}

#[test]
fn quantize_rejects_bad_bits() {
    let out = greenbench(&["quantize", "w.txt", "--bits", "9"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn every_subcommand_has_help() {
    for sub in [&["--help"][..], &["quantize", "--help"], &["bench", "--help"], &["compare", "--help"], &["report", "--help"]] {
        let out = greenbench(sub);
        assert_eq!(out.status.code(), Some(0), "{sub:?}");
        assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"), "{sub:?}");
    }
}
