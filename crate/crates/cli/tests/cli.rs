use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use intent_core::fixtures::standard_personas;
use serde_json::Value;

fn intent(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_intent")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = intent(args);
    assert!(
        out.status.success(),
        "intent {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A personas file holding the first `n` fixture personas.
fn personas_file(dir: &Path, n: usize) -> PathBuf {
    let path = dir.join("personas.json");
    let personas = &standard_personas()[..n];
    std::fs::write(&path, serde_json::to_string(personas).unwrap()).unwrap();
    path
}

#[test]
fn usage_errors_exit_with_status_two() {
    let out = intent(&["generate", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let personas = personas_file(dir.path(), 1);
    let data = dir.path().join("data");
    ok(&["generate", "--personas", s(&personas), "--days", "2", "--seed", "1", "--out", s(&data)]);
    let log = data.join("P01.jsonl");
    let out = intent(&["detect", "--log", s(&log)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--manifest"));
    let out = intent(&["detect", "--log", s(&log), "--oracle", "--delta", "2.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_exits_with_status_one() {
    let out = intent(&["detect", "--log", "/nonexistent/P01.jsonl", "--oracle"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));
}

#[test]
fn generate_is_deterministic_and_writes_the_dataset_layout() {
    let dir = tempfile::tempdir().unwrap();
    let personas = personas_file(dir.path(), 2);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let out_a = ok(&["generate", "--personas", s(&personas), "--days", "3", "--seed", "9", "--out", s(&a)]);
    let out_b = ok(&["generate", "--personas", s(&personas), "--days", "3", "--seed", "9", "--out", s(&b)]);
    assert_eq!(out_a, out_b);

    let index: Value = serde_json::from_str(&out_a).unwrap();
    assert_eq!(index["v"], 1);
    assert_eq!(index["participants"], serde_json::json!(["P01", "P02"]));

    let mut names: Vec<String> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    let expected = [
        "P01.jsonl",
        "P01.schedule.json",
        "P01.truth.json",
        "P02.jsonl",
        "P02.schedule.json",
        "P02.truth.json",
        "dataset.json",
        "layout.json",
        "world.json",
    ];
    assert_eq!(names, expected);
    for name in expected {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }

    let c = dir.path().join("c");
    ok(&["generate", "--personas", s(&personas), "--days", "3", "--seed", "10", "--out", s(&c)]);
    assert_ne!(std::fs::read(a.join("P01.jsonl")).unwrap(), std::fs::read(c.join("P01.jsonl")).unwrap());
}

#[test]
fn oracle_detection_recovers_every_injected_conflict() {
    let dir = tempfile::tempdir().unwrap();
    let personas = personas_file(dir.path(), 3);
    let data = dir.path().join("data");
    ok(&["generate", "--personas", s(&personas), "--days", "14", "--seed", "42", "--out", s(&data)]);
    for id in ["P01", "P02", "P03"] {
        let reports = dir.path().join(format!("{id}.reports.jsonl"));
        let out = ok(&[
            "detect",
            "--log",
            s(&data.join(format!("{id}.jsonl"))),
            "--oracle",
            "--delta",
            "0.3",
            "--out",
            s(&reports),
        ]);
        let summary: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(summary["scores"]["recall"], 1.0, "{id}: {summary}");
        assert_eq!(summary["scores"]["false_positive_rate"], 0.0, "{id}: {summary}");
        assert!(summary["raised"].as_u64().unwrap() > 0);

        let lines = std::fs::read_to_string(&reports).unwrap();
        assert_eq!(lines.lines().count() as u64, summary["judged"].as_u64().unwrap());
        for line in lines.lines() {
            let r: Value = serde_json::from_str(line).unwrap();
            assert_eq!(r["query_text"].as_str().unwrap().is_empty(), r["r_conf"] == 0);
        }
    }
}

#[test]
fn train_finetune_eval_and_detect_run_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let personas = personas_file(dir.path(), 2);
    let data = dir.path().join("data");
    let models = dir.path().join("models");
    ok(&["generate", "--personas", s(&personas), "--days", "4", "--seed", "3", "--out", s(&data)]);
    let epochs = ["--pretrain-epochs", "1", "--max-epochs", "1"];

    let mut args = vec!["train", "--data", s(&data), "--out", s(&models)];
    args.extend(epochs);
    let trained = ok(&args);
    assert_eq!(trained.lines().count(), 5);
    assert!(models.join("base/long_intention.ckpt").exists());
    assert!(models.join("base/reports.json").exists());

    let mut args = vec!["finetune", "--data", s(&data), "--base", s(&models), "--out", s(&models), "--participants", "P02"];
    args.extend(epochs);
    ok(&args);
    let manifest = models.join("manifest.json");
    let m: Value = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    assert_eq!(m["participants"].as_object().unwrap().len(), 1);

    let metrics = dir.path().join("metrics.json");
    let table = ok(&["eval", "--data", s(&data), "--manifest", s(&manifest), "--out", s(&metrics)]);
    assert!(table.lines().any(|l| l.starts_with("P02") && l.contains("baseline")));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&metrics).unwrap()).unwrap();
    assert_eq!(report["rows"][0]["baseline"]["long_term"], Value::Null);
    assert!(report["rows"][0]["structured"]["long_term"]["top5"].is_number());

    let out = ok(&["detect", "--log", s(&data.join("P02.jsonl")), "--manifest", s(&manifest), "--no-duration-gate"]);
    let summary: Value = serde_json::from_str(&out).unwrap();
    assert!(summary["judged"].as_u64().unwrap() > 0);
    assert!(summary["scores"]["recall"].is_number());
}
