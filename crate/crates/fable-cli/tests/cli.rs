//! End-to-end checks of the fable binary: synth -> index -> query -> eval.

use std::path::Path;
use std::process::{Command, Output};

fn fable(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fable"))
        .args(args)
        .env_remove("FABLE_LLM_ENDPOINT")
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).to_string()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).to_string()
}

fn synth_small(dir: &Path) {
    let out = fable(&[
        "synth",
        dir.to_str().unwrap(),
        "--docs",
        "4",
        "--queries",
        "5",
        "--evidence-per-query",
        "2",
        "--seed",
        "11",
        "--sections",
        "3",
        "--paragraphs",
        "4",
    ]);
    assert!(out.status.success(), "synth failed: {}", stderr(&out));
}

#[test]
fn synth_index_query_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let synth_dir = dir.path().join("synth");
    synth_small(&synth_dir);
    assert!(synth_dir.join("queries.jsonl").exists());
    assert!(synth_dir.join("corpus/doc0000.md").exists());

    let index_dir = dir.path().join("index");
    let out = fable(&[
        "index",
        synth_dir.join("corpus").to_str().unwrap(),
        index_dir.to_str().unwrap(),
        "--dimension",
        "64",
    ]);
    assert!(out.status.success(), "index failed: {}", stderr(&out));
    assert!(index_dir.join("forest.jsonl").exists());
    assert!(index_dir.join("vectors.bin").exists());
    let listing = stdout(&out);
    assert!(listing.contains("doc0000: chunks="), "missing per-doc stats: {listing}");

    // a marker query must surface its evidence
    let queries = std::fs::read_to_string(synth_dir.join("queries.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(queries.lines().next().unwrap()).unwrap();
    let query_text = first["text"].as_str().unwrap();

    let out = fable(&[
        "query",
        index_dir.to_str().unwrap(),
        "--mode",
        "nodes",
        "--budget",
        "2048",
        "--json",
        query_text,
    ]);
    assert!(out.status.success(), "query failed: {}", stderr(&out));
    let result: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(result["token_count"].as_u64().unwrap() <= 2048);
    assert_eq!(result["audit"]["mode"], "nodes");

    let out = fable(&[
        "eval",
        index_dir.to_str().unwrap(),
        "--queries",
        synth_dir.join("queries.jsonl").to_str().unwrap(),
        "--modes",
        "nodes,treexp",
        "--budgets",
        "1024,4096",
        "--json",
        dir.path().join("report.json").to_str().unwrap(),
    ]);
    assert!(out.status.success(), "eval failed: {}", stderr(&out));
    let table = stdout(&out);
    assert!(table.starts_with("mode\tbudget\tqueries\trecall\teir\tmean_output_tokens\n"));
    assert_eq!(table.lines().count(), 5, "2 modes x 2 budgets + header: {table}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["rows"].as_array().unwrap().len(), 4);
}

#[test]
fn empty_corpus_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    std::fs::create_dir_all(&corpus).unwrap();
    let out = fable(&["index", corpus.to_str().unwrap(), dir.path().join("x").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("no documents found"));
}

#[test]
fn reindex_requires_force() {
    let dir = tempfile::tempdir().unwrap();
    let synth_dir = dir.path().join("synth");
    synth_small(&synth_dir);
    let corpus = synth_dir.join("corpus");
    let index_dir = dir.path().join("index");
    let ok = fable(&["index", corpus.to_str().unwrap(), index_dir.to_str().unwrap()]);
    assert!(ok.status.success());
    let refused = fable(&["index", corpus.to_str().unwrap(), index_dir.to_str().unwrap()]);
    assert_eq!(refused.status.code(), Some(1));
    assert!(stderr(&refused).contains("--force"));
    let forced =
        fable(&["index", corpus.to_str().unwrap(), index_dir.to_str().unwrap(), "--force"]);
    assert!(forced.status.success(), "{}", stderr(&forced));
}

#[test]
fn identical_builds_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let synth_dir = dir.path().join("synth");
    synth_small(&synth_dir);
    let corpus = synth_dir.join("corpus");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(fable(&["index", corpus.to_str().unwrap(), a.to_str().unwrap()]).status.success());
    assert!(fable(&["index", corpus.to_str().unwrap(), b.to_str().unwrap()]).status.success());
    for name in ["forest.jsonl", "vectors.bin"] {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
            "{name} differs"
        );
    }
}

#[test]
fn zero_budget_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = fable(&["query", dir.path().to_str().unwrap(), "--budget", "0", "hello"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn unknown_mode_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = fable(&["query", dir.path().to_str().unwrap(), "--mode", "bogus", "hello"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("unknown mode"));
}

#[test]
fn same_seed_same_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    synth_small(&a);
    synth_small(&b);
    assert_eq!(
        std::fs::read(a.join("corpus/doc0001.md")).unwrap(),
        std::fs::read(b.join("corpus/doc0001.md")).unwrap()
    );
    assert_eq!(
        std::fs::read(a.join("queries.jsonl")).unwrap(),
        std::fs::read(b.join("queries.jsonl")).unwrap()
    );
}
