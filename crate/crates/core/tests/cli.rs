mod common;

use std::path::Path;
use std::process::{Command, Output};

use afie_core::document::{Document, ElementKind, ReportType};
use serde_json::Value;

fn afie(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_afie")).args(args).output().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn fixture_doc(dir: &Path) -> String {
    let doc = Document::new(
        "d",
        "ACME",
        "2022Q4",
        ReportType::TenQ,
        vec![
            ElementKind::Paragraph {
                text: "Revenue of ACME for 2022Q4 was $5.000 million.".into(),
            },
            ElementKind::Table(afie_core::document::Table::new(vec![
                vec!["Item".into(), "Amount".into()],
                vec!["Cash".into(), "1,200".into()],
            ])),
        ],
    )
    .unwrap();
    let path = dir.join("d.json");
    std::fs::write(&path, doc.to_json()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn extract_prints_value() {
    let dir = tempfile::tempdir().unwrap();
    let doc = fixture_doc(dir.path());
    let mut values = Vec::new();
    for strategy in ["refine", "map_reduce"] {
        let out = afie(&[
            "extract", "--doc", &doc, "--attribute", "Revenue", "--company", "ACME", "--time", "2022Q4", "--backend",
            "mock", "--strategy", strategy,
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let json = stdout_json(&out);
        values.push(json["value"].clone());
    }
    assert_eq!(values[0], "5.00");
    assert_eq!(values[0], values[1]);
}

#[test]
fn usage_errors_exit_one() {
    let out = afie(&["extract", "--attribute", "Revenue"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--doc"));

    let out = afie(&["eval", "--dataset", "x", "--docs-dir", "y", "--levels", "five"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(afie(&["--help"]).status.code(), Some(0));
}

#[test]
fn pipeline_error_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let doc = fixture_doc(dir.path());
    // A_T_C without a company cannot be completed
    let out = afie(&["extract", "--doc", &doc, "--attribute", "Revenue", "--time", "2022Q4"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    let missing = dir.path().join("missing.json");
    let out = afie(&["extract", "--doc", missing.to_str().unwrap(), "--attribute", "Revenue", "--completion", "A"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eval_on_planted_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = common::planted_corpus(50, 42);
    let (docs, dataset) = common::write_corpus(&corpus, dir.path());
    let run = |out_dir: &str| {
        let out_path = dir.path().join(out_dir);
        let out = afie(&[
            "eval",
            "--dataset",
            dataset.to_str().unwrap(),
            "--docs-dir",
            docs.to_str().unwrap(),
            "--out",
            out_path.to_str().unwrap(),
            "--levels",
            "0,1%,3%,5%,10%",
            "--backend",
            "mock",
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        (stdout_json(&out), out_path)
    };
    let (summary, first) = run("a");
    for level in summary["levels"].as_array().unwrap() {
        assert_eq!(level["accuracy"], "1.0000", "{level}");
    }
    assert_eq!(summary["average"], "1.0000");
    let (_, second) = run("b");
    for f in ["report.json", "report.txt", "predictions.jsonl"] {
        assert_eq!(
            std::fs::read(first.join(f)).unwrap(),
            std::fs::read(second.join(f)).unwrap(),
            "{f} differs between runs"
        );
    }
    let preds = std::fs::read_to_string(first.join("predictions.jsonl")).unwrap();
    assert_eq!(preds.lines().count(), 50);
    let table = std::fs::read_to_string(first.join("report.txt")).unwrap();
    assert!(table.contains("RETA 0%") && table.contains("Average"));
}

#[test]
fn eval_fine_levels_and_rpd() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = common::planted_corpus(10, 1);
    let (docs, dataset) = common::write_corpus(&corpus, dir.path());
    let out = afie(&[
        "eval",
        "--dataset",
        dataset.to_str().unwrap(),
        "--docs-dir",
        docs.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
        "--levels",
        "0,0.001%,0.01%,0.1%",
        "--rpd-x",
        "Revenue",
        "--rpd-y",
        "Net income",
        "--macro",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let json = stdout_json(&out);
    let labels: Vec<&str> = json["levels"].as_array().unwrap().iter().map(|l| l["level"].as_str().unwrap()).collect();
    assert_eq!(labels, ["0%", "0.001%", "0.01%", "0.1%"]);
    assert_eq!(json["averaging"], "macro");
    assert_eq!(json["rpd"]["levels"][0]["rpd"], "0.00%");
}

#[test]
fn dataset_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let line = r#"{"company":"A","time":"T","keyword":"Revenue","value_millions":"1.00"}"#;
    let dataset = dir.path().join("dup.jsonl");
    std::fs::write(&dataset, format!("{line}\n{line}\n")).unwrap();
    let out = afie(&["eval", "--dataset", dataset.to_str().unwrap(), "--docs-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn segment_and_serialize_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let doc = fixture_doc(dir.path());
    let out = afie(&["segment", "--doc", &doc]);
    assert_eq!(out.status.code(), Some(0));
    let segs = stdout_json(&out);
    assert_eq!(segs[0]["source_element_ids"], serde_json::json!([0, 1]));

    let out = afie(&["serialize", "--doc", &doc, "--format", "html"]);
    assert_eq!(out.status.code(), Some(0));
    let json = stdout_json(&out);
    assert!(json["elements"][1]["text"].as_str().unwrap().starts_with("<table><tr><td>Item</td>"));
}

#[test]
fn templates_verify_and_list() {
    let out = afie(&["templates", "verify"]);
    assert_eq!(out.status.code(), Some(0));
    let json = stdout_json(&out);
    assert_eq!(json["ok"], true);
    assert_eq!(json["templates"].as_array().unwrap().len(), 12);

    let out = afie(&["templates", "list"]);
    let list = stdout_json(&out);
    let refine = list.as_array().unwrap().iter().find(|t| t["name"] == "refine").unwrap();
    assert_eq!(refine["placeholders"], serde_json::json!(["document_segment", "keywords", "old_summary"]));
}

#[test]
fn broken_override_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("refine.txt"),
        "Segment: {document_segment}\nSummary so far: {old_summary}\nKeywords: {keywords}",
    )
    .unwrap();
    let out = afie(&["templates", "verify", "--template-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let json = stdout_json(&out);
    assert_eq!(json["ok"], false);
}

#[test]
fn config_file_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let doc = fixture_doc(dir.path());
    let trace = dir.path().join("trace.jsonl");
    let cfg = afie_core::config::RunConfig {
        strategy: afie_core::pipeline::Strategy::MapReduce,
        trace: Some(trace.clone()),
        ..Default::default()
    };
    let cfg_path = dir.path().join("afie.toml");
    std::fs::write(&cfg_path, cfg.to_toml()).unwrap();
    let out = afie(&[
        "extract", "--doc", &doc, "--attribute", "Revenue", "--company", "ACME", "--time", "2022Q4", "--config",
        cfg_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let lines: Vec<Value> = std::fs::read_to_string(&trace)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    // one segment: map, reduce, extract
    assert_eq!(lines.iter().filter(|l| l["kind"] == "llm").count(), 3);

    std::fs::write(&cfg_path, "top_k = 0").unwrap();
    let out = afie(&["extract", "--doc", &doc, "--attribute", "R", "--config", cfg_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}
