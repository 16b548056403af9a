//! Seeded synthetic corpora with planted evidence.
//!
//! Generates sectioned markdown documents over per-document vocabularies,
//! plants a unique marker sentence per query into 1..=E paragraphs, and
//! resolves gold (doc_id, chunk_id) labels by running the same structural
//! segmentation the indexer will run. Everything is a pure function of the
//! seed.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::{save_queries, GoldRef, QueryRecord};
use crate::segment::{segment, SegmenterSpec};
use crate::tokens::Tokenizer;

/// Corpus shape knobs. Defaults land near 10K tokens per document.
#[derive(Debug, Clone, Serialize)]
pub struct SynthSpec {
    pub docs: usize,
    pub queries: usize,
    /// Evidence chunks per query are drawn from `1..=evidence_max`.
    pub evidence_max: usize,
    pub seed: u64,
    pub sections_per_doc: usize,
    pub paragraphs_per_section: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            docs: 50,
            queries: 100,
            evidence_max: 3,
            seed: 42,
            sections_per_doc: 10,
            paragraphs_per_section: 12,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.docs < 1 {
            return Err(Error::InvalidInput("docs must be >= 1".into()));
        }
        if self.evidence_max < 1 {
            return Err(Error::InvalidInput("evidence_max must be >= 1".into()));
        }
        if self.sections_per_doc < 1 || self.paragraphs_per_section < 1 {
            return Err(Error::InvalidInput("document shape knobs must be >= 1".into()));
        }
        Ok(())
    }
}

/// What was generated.
#[derive(Debug, Clone, Serialize)]
pub struct SynthStats {
    pub docs: usize,
    pub queries: usize,
    pub gold_refs: usize,
    pub corpus_chunks: usize,
    /// Token mass of all chunks under the given tokenizer.
    pub corpus_tokens: usize,
}

const CONNECTORS: &[&str] = &["the", "of", "and", "a", "to", "in", "on", "as", "by"];

/// Vocabulary is local to one section of one document, so topical words
/// discriminate at section granularity the way real section topics do.
fn vocab_word(doc: usize, section: usize, j: usize) -> String {
    format!("w{doc:02}s{section:02}{j:02}")
}

fn sentence(rng: &mut ChaCha8Rng, vocab: &[String], out_words: &mut Vec<String>) -> String {
    let n = rng.random_range(8..=12);
    let mut parts: Vec<String> = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 && rng.random_bool(0.15) {
            parts.push(CONNECTORS[rng.random_range(0..CONNECTORS.len())].to_string());
        } else {
            let w = vocab[rng.random_range(0..vocab.len())].clone();
            out_words.push(w.clone());
            parts.push(w);
        }
    }
    let mut text = parts.join(" ");
    text.push('.');
    let mut chars = text.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().collect::<String>() + chars.as_str(),
        None => text,
    }
}

struct Paragraph {
    sentences: Vec<String>,
    words: Vec<String>,
    marker: Option<String>,
}

enum Block {
    Heading1(String),
    Heading2(String),
    Paragraph(Paragraph),
}

struct Draft {
    doc_id: String,
    blocks: Vec<Block>,
    paragraph_slots: Vec<usize>,
}

fn draft(rng: &mut ChaCha8Rng, doc_idx: usize, spec: &SynthSpec) -> Draft {
    let doc_id = format!("doc{doc_idx:04}");
    let mut blocks = Vec::new();
    let mut paragraph_slots = Vec::new();
    for s in 0..spec.sections_per_doc {
        let vocab: Vec<String> = (0..40).map(|j| vocab_word(doc_idx, s, j)).collect();
        let heading_words = format!(
            "{} {}",
            vocab[rng.random_range(0..vocab.len())],
            vocab[rng.random_range(0..vocab.len())]
        );
        blocks.push(Block::Heading1(format!("Topic {s}: {heading_words}")));
        let subsection_at =
            if rng.random_bool(0.5) { Some(spec.paragraphs_per_section / 2) } else { None };
        for p in 0..spec.paragraphs_per_section {
            if subsection_at == Some(p) {
                let sub_word = vocab[rng.random_range(0..vocab.len())].clone();
                blocks.push(Block::Heading2(format!("Detail {s}.{p}: {sub_word}")));
            }
            let sentence_count = rng.random_range(4..=6);
            let mut words = Vec::new();
            let sentences: Vec<String> =
                (0..sentence_count).map(|_| sentence(rng, &vocab, &mut words)).collect();
            blocks.push(Block::Paragraph(Paragraph { sentences, words, marker: None }));
            paragraph_slots.push(blocks.len() - 1);
        }
    }
    Draft { doc_id, blocks, paragraph_slots }
}

fn render(draft: &Draft) -> String {
    let mut parts = Vec::with_capacity(draft.blocks.len());
    for block in &draft.blocks {
        match block {
            Block::Heading1(h) => parts.push(format!("# {h}")),
            Block::Heading2(h) => parts.push(format!("## {h}")),
            Block::Paragraph(p) => {
                let mut text = String::new();
                if let Some(marker) = &p.marker {
                    text.push_str(&format!("Marker {marker} appears in this passage. "));
                }
                text.push_str(&p.sentences.join(" "));
                parts.push(text);
            }
        }
    }
    parts.join("\n\n")
}

/// Generate a corpus with planted evidence under `out_dir`:
/// `corpus/<doc_id>.md`, `queries.jsonl`, and `synth_meta.json`.
pub fn generate(
    out_dir: &Path,
    spec: &SynthSpec,
    segmenter: &SegmenterSpec,
    tokenizer: &Tokenizer,
) -> Result<SynthStats> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut drafts: Vec<Draft> = (0..spec.docs).map(|d| draft(&mut rng, d, spec)).collect();

    // Plant one marker per query into 1..=evidence_max distinct paragraphs.
    let mut used_slots: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut query_plans: Vec<(String, String, Vec<usize>, Vec<String>)> = Vec::new();
    for qi in 0..spec.queries {
        let marker = format!("mk{qi:03}x");
        let evidence = rng.random_range(1..=spec.evidence_max);
        let mut slots: Vec<(usize, usize)> = Vec::new();
        let mut guard = 0;
        while slots.len() < evidence {
            guard += 1;
            if guard > 10_000 {
                return Err(Error::InvalidInput(
                    "not enough paragraphs for the requested evidence volume".into(),
                ));
            }
            let doc = rng.random_range(0..drafts.len());
            let para = rng.random_range(0..drafts[doc].paragraph_slots.len());
            if used_slots.insert((doc, para)) {
                slots.push((doc, para));
            }
        }
        let mut topic_words = Vec::new();
        let mut docs_hit = Vec::new();
        for (doc, para) in &slots {
            let block_idx = drafts[*doc].paragraph_slots[*para];
            if let Block::Paragraph(p) = &mut drafts[*doc].blocks[block_idx] {
                p.marker = Some(marker.clone());
                for _ in 0..3 {
                    if !p.words.is_empty() {
                        topic_words.push(p.words[rng.random_range(0..p.words.len())].clone());
                    }
                }
            }
            docs_hit.push(*doc);
        }
        let text = format!("Find passages covering {marker} {}.", topic_words.join(" "));
        query_plans.push((format!("q{qi:04}"), text, docs_hit, vec![marker]));
    }

    // Write documents and resolve gold labels through the real segmenter.
    let corpus_dir = out_dir.join("corpus");
    fs::create_dir_all(&corpus_dir)?;
    let mut corpus_tokens = 0usize;
    let mut corpus_chunks = 0usize;
    let mut doc_chunks: Vec<Vec<crate::forest::Chunk>> = Vec::with_capacity(drafts.len());
    for d in &drafts {
        let text = render(d);
        fs::write(corpus_dir.join(format!("{}.md", d.doc_id)), &text)?;
        let chunks = segment(&text, &d.doc_id, segmenter, tokenizer, None)?;
        corpus_chunks += chunks.len();
        corpus_tokens += chunks.iter().map(|c| tokenizer.count(&c.content)).sum::<usize>();
        doc_chunks.push(chunks);
    }

    let mut queries = Vec::with_capacity(query_plans.len());
    let mut gold_refs = 0usize;
    for (query_id, text, docs_hit, markers) in query_plans {
        let marker = &markers[0];
        let needle = format!("Marker {marker} appears");
        let mut gold: Vec<GoldRef> = Vec::new();
        for doc in &docs_hit {
            for chunk in &doc_chunks[*doc] {
                if chunk.content.contains(&needle) {
                    let gref = GoldRef {
                        doc_id: chunk.doc_id.clone(),
                        chunk_id: chunk.chunk_id.clone(),
                    };
                    if !gold.contains(&gref) {
                        gold.push(gref);
                    }
                }
            }
        }
        if gold.is_empty() {
            return Err(Error::InvalidInput(format!(
                "planted marker {marker} did not surface in any chunk"
            )));
        }
        gold_refs += gold.len();
        queries.push(QueryRecord { query_id, text, gold });
    }

    save_queries(&out_dir.join("queries.jsonl"), &queries)?;

    let stats = SynthStats {
        docs: spec.docs,
        queries: queries.len(),
        gold_refs,
        corpus_chunks,
        corpus_tokens,
    };
    let meta = serde_json::json!({ "spec": spec, "stats": stats });
    fs::write(out_dir.join("synth_meta.json"), serde_json::to_string_pretty(&meta)?.as_bytes())?;
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> SynthSpec {
        SynthSpec {
            docs: 4,
            queries: 6,
            evidence_max: 2,
            seed: 7,
            sections_per_doc: 3,
            paragraphs_per_section: 4,
        }
    }

    #[test]
    fn same_seed_produces_identical_output() {
        let tok = Tokenizer::approx_bytes();
        let seg = SegmenterSpec::default();
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        generate(dir_a.path(), &small_spec(), &seg, &tok).unwrap();
        generate(dir_b.path(), &small_spec(), &seg, &tok).unwrap();
        for name in ["queries.jsonl", "synth_meta.json", "corpus/doc0000.md", "corpus/doc0003.md"]
        {
            let a = fs::read(dir_a.path().join(name)).unwrap();
            let b = fs::read(dir_b.path().join(name)).unwrap();
            assert_eq!(a, b, "file {name} differs between runs");
        }
    }

    #[test]
    fn gold_chunks_exist_and_contain_markers() {
        let tok = Tokenizer::approx_bytes();
        let seg = SegmenterSpec::default();
        let dir = tempfile::tempdir().unwrap();
        let stats = generate(dir.path(), &small_spec(), &seg, &tok).unwrap();
        assert!(stats.gold_refs >= stats.queries);
        let queries = crate::eval::load_queries(&dir.path().join("queries.jsonl")).unwrap();
        assert_eq!(queries.len(), 6);
        for record in &queries {
            assert!(!record.gold.is_empty());
            let marker = record
                .text
                .split_whitespace()
                .find(|w| w.starts_with("mk"))
                .unwrap()
                .trim_end_matches('.');
            for gold in &record.gold {
                let text =
                    fs::read_to_string(dir.path().join(format!("corpus/{}.md", gold.doc_id)))
                        .unwrap();
                let chunks = segment(&text, &gold.doc_id, &seg, &tok, None).unwrap();
                let chunk = chunks.iter().find(|c| c.chunk_id == gold.chunk_id).unwrap();
                assert!(chunk.content.contains(marker), "{marker} missing from gold chunk");
            }
        }
    }

    #[test]
    fn different_seeds_differ() {
        let tok = Tokenizer::approx_bytes();
        let seg = SegmenterSpec::default();
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        generate(dir_a.path(), &small_spec(), &seg, &tok).unwrap();
        let mut other = small_spec();
        other.seed = 8;
        generate(dir_b.path(), &other, &seg, &tok).unwrap();
        let a = fs::read(dir_a.path().join("corpus/doc0000.md")).unwrap();
        let b = fs::read(dir_b.path().join("corpus/doc0000.md")).unwrap();
        assert_ne!(a, b);
    }
}
