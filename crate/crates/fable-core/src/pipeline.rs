//! Index building and loading shared by the CLI and integration tests.
//!
//! An index directory holds `forest.jsonl` (trees + chunks + meta) and
//! `vectors.bin` (node embeddings). The meta record captures the build
//! configuration so query time can reconstruct a matching embedder and
//! tokenizer.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::RetrievalConfig;
use crate::error::{Error, Result};
use crate::forest::{load_forest, save_forest, Chunk, Forest, SemanticTree};
use crate::gateway::{BackendSpec, Gateway, GatewaySpec};
use crate::segment::{segment, SegmenterBackend, SegmenterSpec};
use crate::tokens::Tokenizer;
use crate::tree_build::build_auto;
use crate::vector::{build_index, embedder_from_spec, EmbedderBackend, EmbedderSpec, VectorIndex};

pub const FOREST_FILE: &str = "forest.jsonl";
pub const VECTORS_FILE: &str = "vectors.bin";

/// Everything the indexing pipeline needs.
#[derive(Debug, Clone, Default)]
pub struct BuildOptions {
    pub retrieval: RetrievalConfig,
    pub segmenter: SegmenterSpec,
    pub embedder: EmbedderSpec,
    pub gateway: GatewaySpec,
    /// Skip documents that fail segmentation or structuring instead of
    /// aborting the build. Failures are still reported.
    pub skip_failed: bool,
}

/// Per-document build report.
#[derive(Debug, Clone)]
pub struct DocReport {
    pub doc_id: String,
    pub chunks: usize,
    pub nodes: usize,
    pub depth: u32,
}

/// Whole-build report.
#[derive(Debug, Clone, Default)]
pub struct IndexStats {
    pub docs: Vec<DocReport>,
    /// (doc_id, reason) for documents skipped under `skip_failed`.
    pub skipped: Vec<(String, String)>,
    pub chunk_count: usize,
    pub embedding_count: usize,
}

/// Collect corpus files (`.txt`/`.md`), sorted by name.
pub fn corpus_files(corpus_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(corpus_dir)? {
        let path = entry?.path();
        if !path.is_file() {
            continue;
        }
        match path.extension().and_then(|e| e.to_str()) {
            Some("txt") | Some("md") => files.push(path),
            _ => {}
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no documents found in {}",
            corpus_dir.display()
        )));
    }
    Ok(files)
}

/// Build forest and vector store from a corpus directory and write both
/// artifacts into `out_dir`.
pub fn build_index_dir(
    corpus_dir: &Path,
    out_dir: &Path,
    options: &BuildOptions,
) -> Result<IndexStats> {
    options.retrieval.validate()?;
    options.segmenter.validate()?;
    let files = corpus_files(corpus_dir)?;
    let gateway = Gateway::new(options.gateway.clone())?;
    let embedder = embedder_from_spec(&options.embedder)?;
    let tokenizer = Tokenizer::from_spec(&options.retrieval.tokenizer)?;

    let mut doc_ids = BTreeMap::new();
    for path in &files {
        let doc_id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::InvalidInput(format!("unusable file name {}", path.display())))?
            .to_string();
        if let Some(previous) = doc_ids.insert(doc_id.clone(), path.clone()) {
            return Err(Error::InvalidInput(format!(
                "documents {} and {} share the id {doc_id}",
                previous.display(),
                path.display()
            )));
        }
    }

    type Built = (String, SemanticTree, Vec<Chunk>);
    let built: Vec<std::result::Result<Built, (String, String)>> = doc_ids
        .par_iter()
        .map(|(doc_id, path)| {
            let build = || -> Result<Built> {
                let text = fs::read_to_string(path)?;
                let chunks = segment(&text, doc_id, &options.segmenter, &tokenizer, Some(&gateway))?;
                let tree = build_auto(&chunks, doc_id, &options.retrieval, &gateway, &tokenizer)?;
                Ok((doc_id.clone(), tree, chunks))
            };
            build().map_err(|e| (doc_id.clone(), e.to_string()))
        })
        .collect();

    let mut forest = Forest::new();
    forest.set_build_info(build_info(options, &gateway));
    let mut stats = IndexStats::default();
    for outcome in built {
        match outcome {
            Ok((doc_id, tree, chunks)) => {
                stats.docs.push(DocReport {
                    doc_id: doc_id.clone(),
                    chunks: chunks.len(),
                    nodes: tree.len(),
                    depth: tree.tree_depth(),
                });
                stats.chunk_count += chunks.len();
                forest.add_document(tree, chunks)?;
            }
            Err((doc_id, reason)) => {
                if options.skip_failed {
                    log::warn!("skipping {doc_id}: {reason}");
                    stats.skipped.push((doc_id, reason));
                } else {
                    return Err(Error::InvalidInput(format!(
                        "document {doc_id} failed to build: {reason}"
                    )));
                }
            }
        }
    }
    if forest.is_empty() {
        return Err(Error::InvalidInput("every document failed to build".into()));
    }

    let index = build_index(&forest, embedder.as_ref())?;
    stats.embedding_count = index.len();

    fs::create_dir_all(out_dir)?;
    save_forest(&forest, &out_dir.join(FOREST_FILE))?;
    index.save(&out_dir.join(VECTORS_FILE))?;
    Ok(stats)
}

/// A loaded index directory.
pub struct LoadedIndex {
    pub forest: Forest,
    pub vectors: VectorIndex,
}

pub fn load_index_dir(dir: &Path) -> Result<LoadedIndex> {
    let forest = load_forest(&dir.join(FOREST_FILE))?;
    let vectors = VectorIndex::load(&dir.join(VECTORS_FILE))?;
    Ok(LoadedIndex { forest, vectors })
}

fn build_info(options: &BuildOptions, gateway: &Gateway) -> BTreeMap<String, String> {
    let mut info = BTreeMap::new();
    let r = &options.retrieval;
    info.insert("retrieval.max_depth".into(), r.max_depth.to_string());
    info.insert("retrieval.hierarchy_threshold".into(), r.hierarchy_threshold.to_string());
    info.insert("retrieval.k_doc".into(), r.k_doc.to_string());
    info.insert("retrieval.budget".into(), r.budget.to_string());
    info.insert("retrieval.tokenizer".into(), r.tokenizer.to_string());
    let s = &options.segmenter;
    info.insert(
        "segmenter.backend".into(),
        match s.backend {
            SegmenterBackend::Llm => "llm".into(),
            SegmenterBackend::Structural => "structural".into(),
        },
    );
    info.insert("segmenter.target_chunk_tokens".into(), s.target_chunk_tokens.to_string());
    info.insert("segmenter.max_chunk_tokens".into(), s.max_chunk_tokens.to_string());
    let e = &options.embedder;
    info.insert(
        "embedder.backend".into(),
        match &e.backend {
            EmbedderBackend::HashMock => "hash_mock".into(),
            EmbedderBackend::Http { endpoint, .. } => format!("http:{endpoint}"),
        },
    );
    if let EmbedderBackend::Http { auth_token_env, .. } = &e.backend {
        info.insert("embedder.auth_token_env".into(), auth_token_env.clone());
    }
    info.insert("embedder.dimension".into(), e.dimension.to_string());
    info.insert(
        "gateway.backend".into(),
        match &options.gateway.backend {
            BackendSpec::Mock(_) => "mock".into(),
            BackendSpec::HttpChat { endpoint, .. } => format!("http_chat:{endpoint}"),
        },
    );
    info.insert("gateway.model".into(), options.gateway.model.clone());
    info.insert("prompt_bundle_version".into(), gateway.prompt_bundle_version().to_string());
    info
}

/// Reconstruct the embedder configuration recorded at build time, so query
/// vectors are produced the same way index vectors were.
pub fn embedder_spec_from_info(info: &BTreeMap<String, String>) -> Result<EmbedderSpec> {
    let dimension: usize = info
        .get("embedder.dimension")
        .ok_or_else(|| Error::Malformed("index meta lacks embedder.dimension".into()))?
        .parse()
        .map_err(|_| Error::Malformed("bad embedder.dimension in index meta".into()))?;
    let backend = match info.get("embedder.backend").map(String::as_str) {
        Some("hash_mock") | None => EmbedderBackend::HashMock,
        Some(other) => match other.strip_prefix("http:") {
            Some(endpoint) => EmbedderBackend::Http {
                endpoint: format!("http:{endpoint}"),
                auth_token_env: info
                    .get("embedder.auth_token_env")
                    .cloned()
                    .unwrap_or_else(|| crate::gateway::TOKEN_ENV.to_string()),
            },
            None => {
                return Err(Error::Malformed(format!(
                    "unknown embedder backend in index meta: {other}"
                )))
            }
        },
    };
    Ok(EmbedderSpec { backend, dimension })
}

/// Tokenizer recorded at build time.
pub fn tokenizer_spec_from_info(
    info: &BTreeMap<String, String>,
) -> Result<crate::tokens::TokenizerSpec> {
    match info.get("retrieval.tokenizer") {
        Some(raw) => raw.parse(),
        None => Ok(crate::tokens::TokenizerSpec::default()),
    }
}
