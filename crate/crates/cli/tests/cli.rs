use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

/// `bcaid` with the store and output directory inside `dir` and no inherited
/// `BCAID_*` settings.
fn bcaid(dir: &Path) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bcaid"));
    for (k, _) in std::env::vars() {
        if k.starts_with("BCAID_") {
            cmd.env_remove(k);
        }
    }
    cmd.env("BCAID_STORE", dir.join("store.jsonl"))
        .env("BCAID_OUT", dir.join("out"))
        .env("BCAID_LOG", "error");
    cmd
}

fn corpus_args(cmd: &mut Command) -> &mut Command {
    cmd.arg("--obo")
        .arg(fixture("go.obo"))
        .arg("--gene-info")
        .arg(fixture("gene_info.tsv"))
        .arg("--gene2pubmed")
        .arg(fixture("gene2pubmed.tsv"))
        .arg("--abstracts")
        .arg(fixture("abstracts.jsonl"))
        .arg("--atlas")
        .arg(fixture("atlas.csv"))
        .arg("--expression")
        .arg(fixture("expression.csv"))
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("bcaid runs")
}

fn manifest(dir: &Path, command: &str) -> Value {
    let text = std::fs::read_to_string(dir.join("out/manifests").join(format!("{command}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn journal_kinds(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["kind"].as_str().unwrap().to_string())
        .collect()
}

fn annotate_replay(dir: &Path, jobs: &str) -> Output {
    let mut cmd = bcaid(dir);
    cmd.arg("annotate");
    corpus_args(&mut cmd)
        .arg("--gateway")
        .arg(format!("mock:{}", fixture("replay.jsonl").display()))
        .args(["--fixed-time", "2025-01-01T00:00:00Z", "--jobs", jobs]);
    run(&mut cmd)
}

#[test]
fn annotate_from_replay_persists_records() {
    let a = tempfile::tempdir().unwrap();
    let out = annotate_replay(a.path(), "1");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let kinds = journal_kinds(&a.path().join("store.jsonl"));
    assert_eq!(kinds.iter().filter(|k| *k == "annotation").count(), 12);
    assert_eq!(kinds.iter().filter(|k| *k == "summary").count(), 3);
    let m = manifest(a.path(), "annotate");
    assert_eq!(m["status"], "ok");
    assert_eq!(m["counts"]["run"]["clusters"], 3);
    assert_eq!(m["counts"]["run"]["failures"], 0);
    assert!(m["inputs"].as_array().unwrap().iter().any(|i| i["role"] == "replay"));
    assert_eq!(std::fs::read_to_string(a.path().join("out/failures.jsonl")).unwrap(), "");

    // same replay, more workers: the journal is byte-identical
    let b = tempfile::tempdir().unwrap();
    assert_eq!(annotate_replay(b.path(), "3").status.code(), Some(0));
    assert_eq!(
        std::fs::read(a.path().join("store.jsonl")).unwrap(),
        std::fs::read(b.path().join("store.jsonl")).unwrap()
    );
}

#[test]
fn missing_replay_entries_are_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    let mut cmd = bcaid(dir.path());
    cmd.arg("annotate");
    corpus_args(&mut cmd).arg("--gateway").arg(format!("mock:{}", empty.display()));
    let out = run(&mut cmd);
    assert_eq!(out.status.code(), Some(2));
    let m = manifest(dir.path(), "annotate");
    assert_eq!(m["status"], "failed");
    assert_eq!(m["error"]["exit_code"], 2);
    let failures = std::fs::read_to_string(dir.path().join("out/failures.jsonl")).unwrap();
    assert!(failures.lines().count() >= 3);
}

fn write_rows(dir: &Path, name: &str, rows: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, rows).unwrap();
    path
}

const TRUTHS: &str = r#"{"id":"dopa","go_term":"GO:0014046","text":"Dopamine secretion from midbrain neurons."}
{"id":"str","go_term":"GO:0021756","text":"Development of the striatum."}
{"id":"ctx","go_term":"GO:0021987","text":"Cerebral cortex development."}
"#;

#[test]
fn evaluate_predictions_equal_to_truths_scores_one() {
    let dir = tempfile::tempdir().unwrap();
    let truths = write_rows(dir.path(), "truths.jsonl", TRUTHS);
    let out = run(bcaid(dir.path())
        .arg("evaluate")
        .arg("--obo")
        .arg(fixture("go.obo"))
        .arg("--predictions")
        .arg(&truths)
        .arg("--truths")
        .arg(&truths));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/evaluation.json")).unwrap()).unwrap();
    assert_eq!(report["topo"]["accuracy"], 1.0);
    assert_eq!(report["rouge"]["pairs"], 3);
    assert_eq!(report["rouge"]["rouge1_f1"], 1.0);
    assert_eq!(report["rouge"]["rouge_l_f1"], 1.0);
    assert_eq!(manifest(dir.path(), "evaluate")["counts"]["accuracy"], 1.0);
}

#[test]
fn evaluate_rejects_bad_input_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let truths = write_rows(dir.path(), "truths.jsonl", TRUTHS);
    let unknown = write_rows(dir.path(), "unknown.jsonl", r#"{"id":"dopa","go_term":"GO:1234567"}"#);
    let partial = write_rows(dir.path(), "partial.jsonl", r#"{"id":"dopa","go_terms":["GO:0014046"]}"#);
    for preds in [&unknown, &partial, &dir.path().join("absent.jsonl")] {
        let out = run(bcaid(dir.path())
            .arg("evaluate")
            .arg("--obo")
            .arg(fixture("go.obo"))
            .arg("--predictions")
            .arg(preds)
            .arg("--truths")
            .arg(if preds == &unknown { &unknown } else { &truths }));
        assert_eq!(out.status.code(), Some(1), "{}", preds.display());
    }
}

#[test]
fn baseline_with_fixed_seed_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let truths = write_rows(dir.path(), "truths.jsonl", TRUTHS);
    let base = write_rows(
        dir.path(),
        "base.jsonl",
        "{\"id\":\"dopa\",\"go_terms\":[\"GO:0014046\"]}\n{\"id\":\"str\",\"go_terms\":[]}\n{\"id\":\"ctx\",\"go_terms\":[]}\n",
    );
    let report = |name: &str| {
        let path = dir.path().join(name);
        let out = run(bcaid(dir.path())
            .arg("baseline")
            .arg("--obo")
            .arg(fixture("go.obo"))
            .arg("--base")
            .arg(&base)
            .arg("--truths")
            .arg(&truths)
            .args(["--trials", "100", "--seed", "7", "--observed", "1.0", "--output"])
            .arg(&path));
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(path).unwrap()
    };
    let first = report("first.json");
    assert_eq!(first, report("second.json"));
    let v: Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(v["trial_accuracies"].as_array().unwrap().len(), 100);
    assert_eq!(v["seed"], 7);
    assert!(v["base_accuracy"].as_f64().unwrap() > 0.3);
    assert_eq!(manifest(dir.path(), "baseline")["seeds"]["baseline"], 7);
}

#[test]
fn unknown_flag_prints_usage_and_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(bcaid(dir.path()).args(["annotate", "--no-such-flag"]));
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("Usage:"), "{stderr}");

    assert_eq!(run(bcaid(dir.path()).arg("frobnicate")).status.code(), Some(1));
    let help = run(bcaid(dir.path()).arg("--help"));
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("wordfreq"));
}

#[test]
fn ingest_then_export_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut cmd = bcaid(dir.path());
    cmd.arg("ingest")
        .arg("--gene-info")
        .arg(fixture("gene_info.tsv"))
        .arg("--gene2pubmed")
        .arg(fixture("gene2pubmed.tsv"))
        .arg("--abstracts")
        .arg(fixture("abstracts.jsonl"))
        .arg("--atlas")
        .arg(fixture("atlas.csv"));
    assert_eq!(run(&mut cmd).status.code(), Some(0));
    let m = manifest(dir.path(), "ingest");
    assert_eq!(m["counts"]["clusters_registered"], 3);
    let abstracts = m["counts"]["abstracts"].as_u64().unwrap();
    assert!(abstracts > 0);

    let export = dir.path().join("dump");
    assert_eq!(run(bcaid(dir.path()).arg("export").arg("--dir").arg(&export)).status.code(), Some(0));
    let counts = &manifest(dir.path(), "export")["counts"]["exported"];
    assert_eq!(counts["clusters"], 3);
    assert_eq!(counts["abstracts"], abstracts);
    assert!(export.join("clusters.jsonl").is_file());
}

#[test]
fn wordfreq_keyword_subset() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(bcaid(dir.path())
        .arg("wordfreq")
        .arg("--input")
        .arg(fixture("summaries.jsonl"))
        .args(["--keyword", "Basal Ganglia"]));
    assert_eq!(out.status.code(), Some(0));
    let all = std::fs::read_to_string(dir.path().join("out/wordfreq.csv")).unwrap();
    let subset = std::fs::read_to_string(dir.path().join("out/wordfreq_keyword.csv")).unwrap();
    assert!(all.starts_with("token,count\n"));
    // ties are broken alphabetically
    assert_eq!(subset.lines().nth(1), Some("dopamine,8"));
    assert_eq!(subset.lines().nth(2), Some("motor,8"));
}

#[test]
fn ora_reports_best_term_per_query() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(bcaid(dir.path())
        .arg("ora")
        .arg("--library")
        .arg(fixture("library.gmt"))
        .args(["--genes", "Slc6a3,Th,Ddc,Drd2"]));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let line = std::fs::read_to_string(dir.path().join("out/ora.jsonl")).unwrap();
    let row: Value = serde_json::from_str(line.lines().next().unwrap()).unwrap();
    assert_eq!(row["best"]["label"], "DOPAMINE_SECRETION");
    assert_eq!(row["best"]["contributing_genes"].as_array().unwrap().len(), 4);
}
