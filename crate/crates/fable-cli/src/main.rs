//! fable: build hierarchical indexes, query them, generate synthetic
//! corpora, and evaluate retrieval quality.
//!
//! Exit codes: 0 ok, 1 runtime failure, 2 usage error.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use fable_core::eval::{evaluate, load_queries, EvalOptions};
use fable_core::pipeline::{
    build_index_dir, corpus_files, embedder_spec_from_info, load_index_dir, BuildOptions,
    FOREST_FILE,
};
use fable_core::retrieve::{Engine, Mode};
use fable_core::synth::{generate, SynthSpec};
use fable_core::vector::embedder_from_spec;
use fable_core::{Gateway, Tokenizer};

use config::{Settings, SettingsArgs};

#[derive(Parser)]
#[command(
    name = "fable",
    version,
    about = "Hierarchical semantic-forest retrieval: index, query, synth, eval"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a forest + vector index from a directory of .txt/.md files.
    Index(IndexArgs),
    /// Run one query against an index and print the retrieved chunks.
    Query(QueryArgs),
    /// Generate a seeded synthetic corpus with gold evidence labels.
    Synth(SynthArgs),
    /// Evaluate Recall/EIR over a gold-labeled query file.
    Eval(EvalArgs),
}

#[derive(Args)]
struct IndexArgs {
    /// Directory of source documents.
    corpus_dir: PathBuf,
    /// Output directory for forest.jsonl and vectors.bin.
    out_dir: PathBuf,
    /// Overwrite an existing index directory.
    #[arg(long)]
    force: bool,
    /// Skip documents that fail to build instead of aborting.
    #[arg(long)]
    skip_failed: bool,
    #[command(flatten)]
    settings: SettingsArgs,
}

#[derive(Args)]
struct QueryArgs {
    /// Index directory produced by `fable index`.
    index_dir: PathBuf,
    /// Query text (remaining arguments are joined).
    #[arg(required = true, trailing_var_arg = true)]
    query: Vec<String>,
    /// Retrieval mode: auto | llm-docs | docs | llm-nodes | nodes | treexp.
    #[arg(long, default_value = "auto")]
    mode: String,
    /// Emit the full result (chunks + audit) as JSON instead of plain text.
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    settings: SettingsArgs,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for corpus/, queries.jsonl, synth_meta.json.
    out_dir: PathBuf,
    /// Number of documents.
    #[arg(long, default_value_t = 50)]
    docs: usize,
    /// Number of queries.
    #[arg(long, default_value_t = 100)]
    queries: usize,
    /// Evidence chunks per query are drawn from 1..=N.
    #[arg(long, value_name = "N", default_value_t = 3)]
    evidence_per_query: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Sections per document.
    #[arg(long, default_value_t = 10)]
    sections: usize,
    /// Paragraphs per section.
    #[arg(long, default_value_t = 12)]
    paragraphs: usize,
    #[command(flatten)]
    settings: SettingsArgs,
}

#[derive(Args)]
struct EvalArgs {
    /// Index directory produced by `fable index`.
    index_dir: PathBuf,
    /// Gold-labeled query file (JSONL) from `fable synth` or hand-written.
    #[arg(long, value_name = "FILE")]
    queries: PathBuf,
    /// Comma-separated modes to sweep.
    #[arg(long, default_value = "auto", value_delimiter = ',')]
    modes: Vec<String>,
    /// Comma-separated budgets to sweep.
    #[arg(long, default_value = "8192", value_delimiter = ',')]
    budgets: Vec<usize>,
    /// Add a wall-clock latency column (makes tables non-reproducible).
    #[arg(long)]
    timings: bool,
    /// Also write the report as JSON to this path.
    #[arg(long, value_name = "FILE")]
    json: Option<PathBuf>,
    #[command(flatten)]
    settings: SettingsArgs,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Index(args) => cmd_index(args),
        Command::Query(args) => cmd_query(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Eval(args) => cmd_eval(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn cmd_index(args: IndexArgs) -> Result<u8> {
    let settings = Settings::resolve(&args.settings, None)?;
    match corpus_files(&args.corpus_dir) {
        Ok(_) => {}
        Err(fable_core::Error::InvalidInput(message)) => {
            eprintln!("{message}");
            return Ok(2);
        }
        Err(e) => return Err(e.into()),
    }
    let existing = args.out_dir.join(FOREST_FILE);
    if existing.exists() && !args.force {
        anyhow::bail!(
            "{} already contains an index; pass --force to overwrite",
            args.out_dir.display()
        );
    }
    let options = BuildOptions {
        retrieval: settings.retrieval,
        segmenter: settings.segmenter,
        embedder: settings.embedder,
        gateway: settings.gateway,
        skip_failed: args.skip_failed,
    };
    let stats = build_index_dir(&args.corpus_dir, &args.out_dir, &options)
        .context("index build failed")?;
    for doc in &stats.docs {
        println!(
            "{}: chunks={} nodes={} depth={}",
            doc.doc_id, doc.chunks, doc.nodes, doc.depth
        );
    }
    for (doc_id, reason) in &stats.skipped {
        eprintln!("skipped {doc_id}: {reason}");
    }
    println!(
        "indexed {} document(s), {} chunk(s), {} embedding(s) -> {}",
        stats.docs.len(),
        stats.chunk_count,
        stats.embedding_count,
        args.out_dir.display()
    );
    Ok(if stats.skipped.is_empty() { 0 } else { 1 })
}

fn cmd_query(args: QueryArgs) -> Result<u8> {
    let mode: Mode = args.mode.parse::<Mode>().map_err(|e| anyhow::anyhow!("{e}"))?;
    let loaded = load_index_dir(&args.index_dir)
        .with_context(|| format!("loading index from {}", args.index_dir.display()))?;
    let settings = Settings::resolve(&args.settings, Some(loaded.forest.build_info()))?;
    let gateway = Gateway::new(settings.gateway)?;
    let embedder = {
        // query vectors must be produced exactly like index vectors
        let recorded = embedder_spec_from_info(loaded.forest.build_info())?;
        let spec = if args.settings.embedder.is_some() || args.settings.dimension.is_some() {
            settings.embedder
        } else {
            recorded
        };
        embedder_from_spec(&spec)?
    };
    let engine = Engine::new(
        &loaded.forest,
        &loaded.vectors,
        embedder.as_ref(),
        &gateway,
        settings.retrieval,
    )?;
    let query = args.query.join(" ");
    let result = engine.retrieve_mode(&query, mode)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&result)?);
    } else {
        for chunk in &result.chunks {
            println!("{}", chunk.content);
            println!();
        }
        eprintln!(
            "[{} chunks, {} tokens, stage {:?}, status {:?}]",
            result.chunks.len(),
            result.token_count,
            result.stage,
            result.status
        );
    }
    Ok(0)
}

fn cmd_synth(args: SynthArgs) -> Result<u8> {
    let settings = Settings::resolve(&args.settings, None)?;
    let spec = SynthSpec {
        docs: args.docs,
        queries: args.queries,
        evidence_max: args.evidence_per_query,
        seed: args.seed,
        sections_per_doc: args.sections,
        paragraphs_per_section: args.paragraphs,
    };
    let tokenizer = Tokenizer::from_spec(&settings.retrieval.tokenizer)?;
    let stats = generate(&args.out_dir, &spec, &settings.segmenter, &tokenizer)?;
    println!(
        "generated {} document(s), {} quer{} ({} gold refs), {} chunk(s), {} corpus token(s) -> {}",
        stats.docs,
        stats.queries,
        if stats.queries == 1 { "y" } else { "ies" },
        stats.gold_refs,
        stats.corpus_chunks,
        stats.corpus_tokens,
        args.out_dir.display()
    );
    Ok(0)
}

fn cmd_eval(args: EvalArgs) -> Result<u8> {
    let loaded = load_index_dir(&args.index_dir)
        .with_context(|| format!("loading index from {}", args.index_dir.display()))?;
    let settings = Settings::resolve(&args.settings, Some(loaded.forest.build_info()))?;
    let gateway = Gateway::new(settings.gateway)?;
    let embedder = {
        let recorded = embedder_spec_from_info(loaded.forest.build_info())?;
        let spec = if args.settings.embedder.is_some() || args.settings.dimension.is_some() {
            settings.embedder
        } else {
            recorded
        };
        embedder_from_spec(&spec)?
    };
    let queries = load_queries(&args.queries)?;
    let modes = args
        .modes
        .iter()
        .map(|m| m.parse::<Mode>().map_err(|e| anyhow::anyhow!("{e}")))
        .collect::<Result<Vec<_>>>()?;
    let options = EvalOptions { modes, budgets: args.budgets.clone(), timings: args.timings };
    if options.budgets.contains(&0) {
        eprintln!("budgets must be >= 1");
        return Ok(2);
    }
    let report = evaluate(
        &loaded.forest,
        &loaded.vectors,
        embedder.as_ref(),
        &gateway,
        &settings.retrieval,
        &queries,
        &options,
    )?;
    print!("{}", report.to_tsv());
    if let Some(path) = &args.json {
        write_report(path, &report.to_json())?;
    }
    Ok(0)
}

fn write_report(path: &Path, json: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, json.as_bytes())?;
    Ok(())
}
