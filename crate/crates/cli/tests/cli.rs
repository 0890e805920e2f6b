use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_reasongraph"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// Synthetic model and corpus under `dir`.
fn synth(dir: &Path, samples: usize) -> (PathBuf, PathBuf) {
    ok(&["synth", "--output", s(dir), "--samples", &samples.to_string(), "--seed", "3"]);
    (dir.join("model"), dir.join("corpus.jsonl"))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn jsonl(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn detect_then_eval_agree_on_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let (model, corpus) = synth(dir.path(), 10);
    let out = dir.path().join("det");
    let stdout = ok(&[
        "detect", "--model-dir", s(&model), "--input", s(&corpus), "--output", s(&out), "--alpha", "0.2",
    ]);
    assert!(stdout.contains("10 succeeded"), "{stdout}");
    assert_eq!(jsonl(&out.join("verdicts.jsonl")).len(), 10);
    assert_eq!(fs::read_dir(out.join("graphs")).unwrap().count(), 20);

    let metrics = out.join("eval.json");
    ok(&[
        "eval", "--input", s(&corpus), "--verdicts", s(&out.join("verdicts.jsonl")), "--alpha", "0.2",
        "--output", s(&metrics),
    ]);
    let from_eval: Value = serde_json::from_str(&fs::read_to_string(metrics).unwrap()).unwrap();
    let from_detect: Value = serde_json::from_str(&fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(from_eval, from_detect);
}

#[test]
fn failing_samples_keep_a_zero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let (model, corpus) = synth(dir.path(), 3);
    let long = vec!["river"; 80].join(" ");
    let extra = serde_json::json!({
        "id": "too-long", "context": [long], "question": "Which statements hold?", "answer": "River."
    });
    let mut text = fs::read_to_string(&corpus).unwrap();
    text.push_str(&format!("{extra}\n"));
    fs::write(&corpus, text).unwrap();
    let out = dir.path().join("det");
    let stdout = ok(&["detect", "--model-dir", s(&model), "--input", s(&corpus), "--output", s(&out)]);
    assert!(stdout.contains("3 succeeded, 0 rejected, 1 errored"), "{stdout}");
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["errored"][0]["id"], "too-long");
}

#[test]
fn worker_count_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (model, corpus) = synth(dir.path(), 6);
    let mut verdicts = Vec::new();
    for workers in ["1", "3"] {
        let out = dir.path().join(format!("w{workers}"));
        ok(&[
            "detect", "--model-dir", s(&model), "--input", s(&corpus), "--output", s(&out), "--workers", workers,
            "--topk", "2",
        ]);
        verdicts.push(fs::read(out.join("verdicts.jsonl")).unwrap());
    }
    assert_eq!(verdicts[0], verdicts[1]);
}

#[test]
fn generate_fills_blank_answers() {
    let dir = tempfile::tempdir().unwrap();
    let (model, corpus) = synth(dir.path(), 2);
    let mut rows = jsonl(&corpus);
    rows[0]["answer"] = Value::from("");
    let text: String = rows.iter().map(|r| format!("{r}\n")).collect();
    fs::write(&corpus, text).unwrap();
    let out = dir.path().join("gen");
    ok(&[
        "generate", "--model-dir", s(&model), "--input", s(&corpus), "--output", s(&out), "--max-new", "6",
    ]);
    let done = jsonl(&out.join("generated.jsonl"));
    assert_eq!(done.len(), 2);
    assert!(!done[0]["answer"].as_str().unwrap().trim().is_empty());
    assert_eq!(done[1]["answer"], rows[1]["answer"]);
}

#[test]
fn attribute_and_graph_write_their_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let (model, corpus) = synth(dir.path(), 2);
    let att = dir.path().join("att");
    ok(&[
        "attribute", "--model-dir", s(&model), "--input", s(&corpus), "--output", s(&att), "--heatmap", "mean",
    ]);
    assert_eq!(fs::read_dir(att.join("relevance")).unwrap().count(), 2);
    assert_eq!(fs::read_dir(att.join("heatmaps")).unwrap().count(), 2);
    assert!(!att.join("verdicts.jsonl").exists());

    let g = dir.path().join("g");
    ok(&["graph", "--model-dir", s(&model), "--input", s(&corpus), "--output", s(&g), "--adaptive"]);
    assert_eq!(fs::read_dir(g.join("graphs")).unwrap().count(), 4);
}

#[test]
fn perturb_writes_curves_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let (model, corpus) = synth(dir.path(), 2);
    let out = dir.path().join("p");
    let stdout = ok(&[
        "perturb", "--model-dir", s(&model), "--input", s(&corpus), "--output", s(&out), "--mode", "pruning",
        "--steps", "4", "--seed", "9",
    ]);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("pruning ")).count(), 2, "{stdout}");
    let curves = fs::read_to_string(out.join("perturb/syn-0000.csv")).unwrap();
    // header plus 21 curves over 5 fractions
    assert_eq!(curves.lines().count(), 1 + 21 * 5);
}

#[test]
fn invalid_invocations_fail() {
    let dir = tempfile::tempdir().unwrap();
    let (model, corpus) = synth(dir.path(), 1);
    let out = dir.path().join("x");
    let base = ["--model-dir", s(&model), "--input", s(&corpus), "--output", s(&out)];
    let with = |cmd: &str, extra: &[&str]| {
        let mut args = vec![cmd];
        args.extend(base);
        args.extend(extra);
        run(&args).status.success()
    };
    assert!(!with("detect", &["--scorer", "remote"]));
    assert!(!with("detect", &["--topk", "2", "--adaptive"]));
    assert!(!with("perturb", &["--random-orders", "5"]));
    assert!(!with("attribute", &["--heatmap", "median"]));
    assert!(!run(&["detect", "--model-dir", s(&dir.path().join("none")), "--input", s(&corpus), "--output", s(&out)])
        .status
        .success());
}
