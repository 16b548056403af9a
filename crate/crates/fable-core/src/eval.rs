//! Retrieval-quality evaluation: Recall and EIR over gold-labeled queries.
//!
//! Recall is the fraction of gold chunks present in the output, EIR the
//! fraction of output tokens that belong to gold chunks; both are
//! macro-averaged over queries. A sweep runs every (mode, budget) pair and
//! emits TSV and JSON tables. Latency columns appear only when timing is
//! requested, so default tables are byte-reproducible.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RetrievalConfig;
use crate::error::{Error, Result};
use crate::forest::Forest;
use crate::gateway::Gateway;
use crate::retrieve::{Engine, Mode, RetrievalResult};
use crate::tokens::Tokenizer;
use crate::vector::{Embedder, VectorIndex};

/// One gold evidence chunk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldRef {
    pub doc_id: String,
    pub chunk_id: String,
}

/// One evaluation query with its gold labels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryRecord {
    pub query_id: String,
    pub text: String,
    pub gold: Vec<GoldRef>,
}

/// Read queries from JSONL (one record per line).
pub fn load_queries(path: &Path) -> Result<Vec<QueryRecord>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: QueryRecord = serde_json::from_str(line)
            .map_err(|e| Error::Malformed(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        out.push(record);
    }
    Ok(out)
}

/// Write queries as JSONL.
pub fn save_queries(path: &Path, queries: &[QueryRecord]) -> Result<()> {
    let mut file = fs::File::create(path)?;
    for record in queries {
        let line = serde_json::to_string(record)?;
        file.write_all(line.as_bytes())?;
        file.write_all(b"\n")?;
    }
    Ok(())
}

/// Per-query metrics against a retrieval result.
pub fn query_metrics(
    result: &RetrievalResult,
    gold: &[GoldRef],
    tokenizer: &Tokenizer,
) -> (f64, f64) {
    let gold_set: BTreeSet<(&str, &str)> =
        gold.iter().map(|g| (g.doc_id.as_str(), g.chunk_id.as_str())).collect();
    let mut matched: BTreeSet<(&str, &str)> = BTreeSet::new();
    let mut gold_tokens = 0usize;
    for chunk in &result.chunks {
        let key = (chunk.doc_id.as_str(), chunk.chunk_id.as_str());
        if gold_set.contains(&key) {
            matched.insert(key);
            gold_tokens += tokenizer.count(&chunk.content);
        }
    }
    let recall = matched.len() as f64 / gold_set.len() as f64;
    let eir = if result.token_count == 0 {
        0.0
    } else {
        gold_tokens as f64 / result.token_count as f64
    };
    (recall, eir)
}

/// Evaluation sweep settings.
#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub modes: Vec<Mode>,
    pub budgets: Vec<usize>,
    /// Record wall-clock latency per query. Off by default so tables stay
    /// byte-identical across runs.
    pub timings: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { modes: vec![Mode::Auto], budgets: vec![8192], timings: false }
    }
}

/// One row of the metrics table.
#[derive(Debug, Clone, Serialize)]
pub struct EvalRow {
    pub mode: String,
    pub budget: usize,
    pub queries: usize,
    pub recall: f64,
    pub eir: f64,
    pub mean_output_tokens: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<f64>,
}

/// The full sweep.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn to_tsv(&self) -> String {
        let timings = self.rows.iter().any(|r| r.latency_ms.is_some());
        let mut out = String::from("mode\tbudget\tqueries\trecall\teir\tmean_output_tokens");
        if timings {
            out.push_str("\tlatency_ms");
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{}\t{:.4}\t{:.4}\t{:.1}",
                row.mode, row.budget, row.queries, row.recall, row.eir, row.mean_output_tokens
            ));
            if timings {
                match row.latency_ms {
                    Some(ms) => out.push_str(&format!("\t{ms:.2}")),
                    None => out.push_str("\t-"),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Check that every gold label resolves in the forest.
pub fn validate_gold(forest: &Forest, queries: &[QueryRecord]) -> Result<()> {
    for record in queries {
        if record.gold.is_empty() {
            return Err(Error::InvalidInput(format!(
                "query {} has no gold labels",
                record.query_id
            )));
        }
        for gold in &record.gold {
            if !forest.contains_chunk(&gold.doc_id, &gold.chunk_id) {
                return Err(Error::InvalidInput(format!(
                    "query {} references unknown chunk {}/{} (corpus/gold mismatch)",
                    record.query_id, gold.doc_id, gold.chunk_id
                )));
            }
        }
    }
    Ok(())
}

/// Run the sweep: every mode at every budget, queries in parallel, rows in
/// deterministic (mode, budget, query) order.
pub fn evaluate(
    forest: &Forest,
    index: &VectorIndex,
    embedder: &dyn Embedder,
    gateway: &Gateway,
    base_config: &RetrievalConfig,
    queries: &[QueryRecord],
    options: &EvalOptions,
) -> Result<EvalReport> {
    if queries.is_empty() {
        return Err(Error::InvalidInput("no queries to evaluate".into()));
    }
    validate_gold(forest, queries)?;
    let tokenizer = Tokenizer::from_spec(&base_config.tokenizer)?;

    let mut rows = Vec::new();
    for mode in &options.modes {
        for &budget in &options.budgets {
            let config = RetrievalConfig { budget, ..base_config.clone() };
            let engine = Engine::new(forest, index, embedder, gateway, config)?;
            let per_query: Vec<(f64, f64, usize, f64)> = queries
                .par_iter()
                .map(|record| -> Result<(f64, f64, usize, f64)> {
                    let started = Instant::now();
                    let result = engine.retrieve_mode(&record.text, *mode)?;
                    let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
                    let (recall, eir) = query_metrics(&result, &record.gold, &tokenizer);
                    Ok((recall, eir, result.token_count, elapsed_ms))
                })
                .collect::<Result<Vec<_>>>()?;

            let n = per_query.len() as f64;
            let recall = per_query.iter().map(|r| r.0).sum::<f64>() / n;
            let eir = per_query.iter().map(|r| r.1).sum::<f64>() / n;
            let mean_tokens = per_query.iter().map(|r| r.2 as f64).sum::<f64>() / n;
            let latency_ms = if options.timings {
                Some(per_query.iter().map(|r| r.3).sum::<f64>() / n)
            } else {
                None
            };
            rows.push(EvalRow {
                mode: mode.to_string(),
                budget,
                queries: per_query.len(),
                recall,
                eir,
                mean_output_tokens: mean_tokens,
                latency_ms,
            });
        }
    }
    Ok(EvalReport { rows })
}
