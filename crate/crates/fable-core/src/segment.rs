//! Document segmentation into semantically self-contained chunks.
//!
//! Two backends share one contract: chunks cover the normalized document
//! text completely, in order, without overlap. The structural backend splits
//! at blank lines and markdown headings and greedily merges neighbors up to
//! a target size. The LLM backend proposes boundary offsets and the
//! segmenter slices the original text, so coverage holds regardless of model
//! behavior; a malformed proposal falls back to the structural backend with
//! a warning.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::Chunk;
use crate::gateway::schema::SegmentRequest;
use crate::gateway::Gateway;
use crate::tokens::Tokenizer;

/// Which segmentation backend to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmenterBackend {
    Llm,
    Structural,
}

/// Segmenter configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmenterSpec {
    pub backend: SegmenterBackend,
    /// Greedy merge target for the structural backend.
    pub target_chunk_tokens: usize,
    /// Hard cap for every chunk from either backend; oversize semantic units
    /// are split at sentence boundaries.
    pub max_chunk_tokens: usize,
}

impl Default for SegmenterSpec {
    fn default() -> Self {
        SegmenterSpec {
            backend: SegmenterBackend::Structural,
            target_chunk_tokens: 256,
            max_chunk_tokens: 1024,
        }
    }
}

impl SegmenterSpec {
    pub fn validate(&self) -> Result<()> {
        if self.target_chunk_tokens < 1 {
            return Err(Error::Config("target_chunk_tokens must be >= 1".into()));
        }
        if self.max_chunk_tokens < self.target_chunk_tokens {
            return Err(Error::Config(format!(
                "max_chunk_tokens ({}) must be >= target_chunk_tokens ({})",
                self.max_chunk_tokens, self.target_chunk_tokens
            )));
        }
        Ok(())
    }
}

/// Split a document into ordered chunks with sequential ids (`c0001`, ...).
pub fn segment(
    text: &str,
    doc_id: &str,
    spec: &SegmenterSpec,
    tokenizer: &Tokenizer,
    gateway: Option<&Gateway>,
) -> Result<Vec<Chunk>> {
    spec.validate()?;
    let blocks = split_blocks(text);
    if blocks.is_empty() {
        return Err(Error::InvalidInput(format!(
            "document {doc_id} is empty after whitespace normalization"
        )));
    }

    let contents = match spec.backend {
        SegmenterBackend::Structural => structural_chunks(&blocks, spec, tokenizer),
        SegmenterBackend::Llm => {
            let gateway = gateway.ok_or_else(|| {
                Error::Config("llm segmenter backend requires a gateway".into())
            })?;
            match llm_chunks(&blocks, doc_id, spec, tokenizer, gateway) {
                Ok(chunks) => chunks,
                Err(reason) => {
                    log::warn!(
                        "llm segmentation of {doc_id} failed ({reason}); falling back to structural backend"
                    );
                    structural_chunks(&blocks, spec, tokenizer)
                }
            }
        }
    };

    Ok(contents
        .into_iter()
        .enumerate()
        .map(|(i, content)| Chunk::new(doc_id, format!("c{:04}", i + 1), content))
        .collect())
}

/// Normalize a document the way the segmenter sees it: CRLF folded, line
/// ends trimmed, blank-line runs collapsed to one separator.
pub fn normalize_document(text: &str) -> String {
    let blocks = split_blocks(text);
    blocks.into_iter().map(|b| b.text).collect::<Vec<_>>().join("\n\n")
}

struct Block {
    text: String,
    heading: bool,
}

fn is_heading_line(line: &str) -> bool {
    let hashes = line.chars().take_while(|c| *c == '#').count();
    (1..=6).contains(&hashes) && line[hashes..].starts_with(' ')
}

fn split_blocks(text: &str) -> Vec<Block> {
    let mut blocks: Vec<Block> = Vec::new();
    let mut cur: Vec<&str> = Vec::new();
    let mut cur_heading = false;
    let flush = |cur: &mut Vec<&str>, cur_heading: &mut bool, blocks: &mut Vec<Block>| {
        if !cur.is_empty() {
            blocks.push(Block { text: cur.join("\n"), heading: *cur_heading });
            cur.clear();
        }
        *cur_heading = false;
    };
    for raw_line in text.lines() {
        let line = raw_line.trim_end();
        if line.is_empty() {
            flush(&mut cur, &mut cur_heading, &mut blocks);
        } else if is_heading_line(line) {
            flush(&mut cur, &mut cur_heading, &mut blocks);
            cur.push(line);
            cur_heading = true;
        } else {
            cur.push(line);
        }
    }
    flush(&mut cur, &mut cur_heading, &mut blocks);
    blocks
}

fn structural_chunks(blocks: &[Block], spec: &SegmenterSpec, tok: &Tokenizer) -> Vec<String> {
    let mut merged: Vec<String> = Vec::new();
    let mut cur = String::new();
    for block in blocks {
        if cur.is_empty() {
            cur = block.text.clone();
            continue;
        }
        if block.heading {
            merged.push(std::mem::take(&mut cur));
            cur = block.text.clone();
            continue;
        }
        let candidate = format!("{cur}\n\n{}", block.text);
        if tok.count(&candidate) <= spec.target_chunk_tokens {
            cur = candidate;
        } else {
            merged.push(std::mem::take(&mut cur));
            cur = block.text.clone();
        }
    }
    if !cur.is_empty() {
        merged.push(cur);
    }
    enforce_max(merged, spec.max_chunk_tokens, tok)
}

fn llm_chunks(
    blocks: &[Block],
    doc_id: &str,
    spec: &SegmenterSpec,
    tok: &Tokenizer,
    gateway: &Gateway,
) -> std::result::Result<Vec<String>, String> {
    let normalized = blocks.iter().map(|b| b.text.as_str()).collect::<Vec<_>>().join("\n\n");
    let request = SegmentRequest { doc_id: doc_id.to_string(), text: normalized.clone() };
    let outcome = gateway.segment(&request).map_err(|e| e.to_string())?;
    let boundaries = outcome.value.boundaries;
    for &b in &boundaries {
        if !normalized.is_char_boundary(b) {
            return Err(format!("boundary {b} is not a character boundary"));
        }
    }
    let mut pieces = Vec::with_capacity(boundaries.len() + 1);
    let mut start = 0usize;
    for &b in boundaries.iter().chain(std::iter::once(&normalized.len())) {
        let piece = normalized[start..b].trim();
        if !piece.is_empty() {
            pieces.push(piece.to_string());
        }
        start = b;
    }
    if pieces.is_empty() {
        return Err("response produced no non-empty chunks".into());
    }
    Ok(enforce_max(pieces, spec.max_chunk_tokens, tok))
}

fn enforce_max(chunks: Vec<String>, max: usize, tok: &Tokenizer) -> Vec<String> {
    let mut out = Vec::with_capacity(chunks.len());
    for chunk in chunks {
        if tok.count(&chunk) <= max {
            out.push(chunk);
        } else {
            out.extend(split_oversize(&chunk, max, tok));
        }
    }
    out
}

/// Split an oversize unit at sentence boundaries, falling back to word and
/// then character boundaries so the cap always holds.
fn split_oversize(text: &str, max: usize, tok: &Tokenizer) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for sentence in split_sentences(text) {
        if cur.is_empty() && tok.count(sentence) > max {
            out.extend(split_words(sentence, max, tok));
            continue;
        }
        let candidate =
            if cur.is_empty() { sentence.to_string() } else { format!("{cur} {sentence}") };
        if tok.count(&candidate) <= max {
            cur = candidate;
        } else {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            if tok.count(sentence) > max {
                out.extend(split_words(sentence, max, tok));
            } else {
                cur = sentence.to_string();
            }
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn split_words(text: &str, max: usize, tok: &Tokenizer) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for word in text.split_whitespace() {
        if cur.is_empty() && tok.count(word) > max {
            out.extend(split_chars(word, max, tok));
            continue;
        }
        let candidate = if cur.is_empty() { word.to_string() } else { format!("{cur} {word}") };
        if tok.count(&candidate) <= max {
            cur = candidate;
        } else {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            if tok.count(word) > max {
                out.extend(split_chars(word, max, tok));
            } else {
                cur = word.to_string();
            }
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn split_chars(text: &str, max: usize, tok: &Tokenizer) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        cur.push(ch);
        if tok.count(&cur) > max {
            cur.pop();
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            cur.push(ch);
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn split_sentences(text: &str) -> impl Iterator<Item = &str> {
    let bytes = text.as_bytes();
    let mut spans = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < bytes.len() {
        let b = bytes[i];
        if (b == b'.' || b == b'!' || b == b'?')
            && bytes.get(i + 1).is_none_or(|n| n.is_ascii_whitespace())
        {
            let end = i + 1;
            let piece = text[start..end].trim();
            if !piece.is_empty() {
                spans.push(piece);
            }
            start = end;
        }
        i += 1;
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        spans.push(tail);
    }
    spans.into_iter()
}
