use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_fairsub");

fn demo(file: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../demo")
        .join(file)
        .to_string_lossy()
        .into_owned()
}

/// The stub oracle lives in the core package; build it when this package is
/// tested on its own.
fn stub() -> PathBuf {
    let path = Path::new(BIN).with_file_name(format!("fairsub-oracle-stub{}", std::env::consts::EXE_SUFFIX));
    if !path.exists() {
        let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".into());
        let status = Command::new(cargo)
            .args(["build", "-p", "fairsub", "--bin", "fairsub-oracle-stub"])
            .status()
            .unwrap();
        assert!(status.success());
    }
    path
}

/// Settings that keep each run to a few seconds.
const FAST: &[&str] = &["--theta", "0.3", "--sample-thr", "200", "--error-thr", "0.1"];

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "fairsub {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn with_fast<'a>(args: &[&'a str]) -> Vec<&'a str> {
    args.iter().copied().chain(FAST.iter().copied()).collect()
}

#[test]
fn audit_json_is_byte_identical_across_runs() {
    let cfg = demo("audit.json");
    let args = with_fast(&["audit", "-c", &cfg]);
    let a = ok(&args);
    let b = ok(&args);
    assert_eq!(a, b);
    let report: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert!(report.get("timings").is_none());
    assert_eq!(report["samples"], 2000);
    assert!(!report["findings"]["ranked"].as_array().unwrap().is_empty());
}

#[test]
fn timings_only_on_request() {
    let cfg = demo("audit.json");
    let out = ok(&with_fast(&["audit", "-c", &cfg, "--timings"]));
    let report: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(report["timings"]["scoring_secs"].as_f64().unwrap() >= 0.0);
}

#[test]
fn markdown_from_flags() {
    let (data, schema, model) = (demo("loans.csv"), demo("schema.json"), demo("model.json"));
    let out = ok(&with_fast(&[
        "audit", "--data", &data, "--schema", &schema, "--model", &model, "--format", "markdown", "--top-k",
        "2",
    ]));
    assert!(
        out.contains("| Rule Set | Fairness Score (φ_r, φ_¬r) |\n|---|---|\n"),
        "{out}"
    );
    let rows = out
        .lines()
        .filter(|l| l.starts_with("| ") && !l.starts_with("| Rule Set"))
        .count();
    assert_eq!(rows, 2);
}

#[test]
fn report_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let cfg = demo("audit.json");
    let stdout = ok(&with_fast(&["audit", "-c", &cfg, "-o", path.to_str().unwrap()]));
    assert!(stdout.is_empty());
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(report["data_kind"], "structured");
}

#[test]
fn subprocess_oracle() {
    let stub = stub();
    let cmd = format!("{} --threshold 3 100 --labels deny approve", stub.display());
    let cfg = demo("audit.json");
    let out = ok(&with_fast(&["audit", "-c", &cfg, "--oracle-cmd", &cmd]));
    let report: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(report["frequent"].as_u64().unwrap() > 0);
}

#[test]
fn subprocess_oracle_with_wrong_labels_fails() {
    let stub = stub();
    let cmd = format!("{} --threshold 3 100", stub.display());
    let cfg = demo("audit.json");
    let out = run(&with_fast(&["audit", "-c", &cfg, "--oracle-cmd", &cmd]));
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("scoring") && err.contains("schema labels"), "{err}");
}

#[test]
fn data_without_schema_is_rejected() {
    let (data, model) = (demo("loans.csv"), demo("model.json"));
    let out = run(&["audit", "--data", &data, "--model", &model]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--schema"));
}

#[test]
fn missing_files_are_reported() {
    let schema = demo("schema.json");
    let out = run(&[
        "audit",
        "--data",
        "/no/such.csv",
        "--schema",
        &schema,
        "--model",
        "/no/model.json",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    std::fs::write(
        &path,
        r#"{"data": {"kind": "structured", "path": "d.csv", "schema": "s.json"},
            "oracle": {"kind": "mlp", "path": "m.json"}, "tehta": 0.1}"#,
    )
    .unwrap();
    let out = run(&["audit", "-c", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tehta"));
}

#[test]
fn rules_lists_frequent_sets() {
    let cfg = demo("audit.json");
    let out = ok(&["rules", "-c", &cfg, "--theta", "0.2"]);
    let report: serde_json::Value = serde_json::from_str(&out).unwrap();
    let frequent = report["frequent"].as_array().unwrap();
    assert!(!frequent.is_empty());
    for f in frequent {
        assert!(f["support"].as_f64().unwrap() >= 0.2);
    }
}

#[test]
fn sample_by_index_and_by_rule_set() {
    let cfg = demo("audit.json");
    let out = ok(&["sample", "-c", &cfg, "--index", "0", "-n", "5"]);
    let lines: Vec<serde_json::Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 5);
    assert!(lines.iter().all(|l| l["side"] == "in_group"));

    let rs = r#"[{"kind":"categorical","feature":"gender","values":["female"]}]"#;
    let out = ok(&[
        "sample",
        "-c",
        &cfg,
        "--rule-set",
        rs,
        "--side",
        "complement",
        "-n",
        "20",
    ]);
    for l in out.lines() {
        let v: serde_json::Value = serde_json::from_str(l).unwrap();
        assert_eq!(v["features"]["gender"], "male");
    }
}

#[test]
fn sample_index_out_of_range() {
    let cfg = demo("audit.json");
    let out = run(&["sample", "-c", &cfg, "--index", "100000"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("out of range"));
}

#[test]
fn mitigate_writes_model_and_augmented_data() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    let augmented = dir.path().join("augmented.csv");
    let cfg = demo("audit.json");
    let out = ok(&with_fast(&[
        "mitigate",
        "-c",
        &cfg,
        "--epochs",
        "5",
        "--model-out",
        model.to_str().unwrap(),
        "--augmented-out",
        augmented.to_str().unwrap(),
    ]));
    let report: serde_json::Value = serde_json::from_str(&out).unwrap();
    let m = &report["mitigation"];
    assert_eq!(m["retrain_from"], "original_weights");
    assert!(!m["rounds"].as_array().unwrap().is_empty());
    if m["chosen_round"].is_null() {
        return;
    }
    let written: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(written["labels"], serde_json::json!(["deny", "approve"]));
    let csv = std::fs::read_to_string(&augmented).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().ends_with(",origin"));
    let origins: Vec<&str> = lines.map(|l| l.rsplit(',').next().unwrap()).collect();
    assert_eq!(origins.iter().filter(|&&o| o == "original").count(), 2000);
    assert!(origins.contains(&"augmented"));
}

#[test]
fn text_audit_with_subprocess_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("comments.tsv");
    let mut tsv = String::new();
    for i in 0..200 {
        let who = ["lesbian", "christian", "old", "black"][i % 4];
        tsv.push_str(&format!("ok\tcomment {i} from a {who} reader\n"));
    }
    std::fs::write(&path, tsv).unwrap();
    let cmd = format!("{} --contains gay --labels ok toxic", stub().display());
    let out = ok(&[
        "audit",
        "--text",
        path.to_str().unwrap(),
        "--favorable-label",
        "ok",
        "--oracle-cmd",
        &cmd,
        "--format",
        "markdown",
        "--top-k",
        "1",
    ]);
    assert!(out.contains("| \"gay\" | 100.0% (0.0%, 100.0%) |"), "{out}");
}
