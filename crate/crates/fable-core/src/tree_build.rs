//! Tree construction over chunk sequences.
//!
//! The structuring backend proposes a nested outline; this module turns it
//! into a validated [`SemanticTree`], repairing the recoverable failure
//! classes (unknown refs, missing chunks, excess depth, duplicate refs) and
//! rejecting the rest. Long documents are built part-by-part and merged.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::config::RetrievalConfig;
use crate::error::{Error, Result};
use crate::forest::{Chunk, NodeKind, SemanticTree, TreeNode};
use crate::gateway::schema::{ChunkPayload, OutlineItem, OutlineNode, StructureRequest, TitleSummary};
use crate::gateway::Gateway;
use crate::tokens::Tokenizer;

/// A tree description before validation. Entries interleave chunk leaves and
/// child headings in document order.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateNode {
    pub title: String,
    pub summary: String,
    pub entries: Vec<CandidateEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CandidateEntry {
    Chunk(String),
    Child(CandidateNode),
}

/// Counts of repairs applied while validating a candidate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RepairReport {
    pub dropped_unknown: usize,
    pub appended_missing: usize,
    pub dissolved_deep: usize,
    pub deduplicated: usize,
}

impl RepairReport {
    pub fn is_clean(&self) -> bool {
        *self == RepairReport::default()
    }
}

/// Convert a backend outline into a candidate tree.
pub fn outline_to_candidate(outline: OutlineNode) -> CandidateNode {
    CandidateNode {
        title: outline.title,
        summary: outline.summary,
        entries: outline
            .items
            .into_iter()
            .map(|item| match item {
                OutlineItem::Chunk(id) => CandidateEntry::Chunk(id),
                OutlineItem::Node(node) => CandidateEntry::Child(outline_to_candidate(node)),
            })
            .collect(),
    }
}

/// Build a semantic tree over a chunk sequence via the structuring backend.
pub fn build_tree(
    chunks: &[Chunk],
    doc_id: &str,
    config: &RetrievalConfig,
    gateway: &Gateway,
) -> Result<SemanticTree> {
    check_chunk_preconditions(chunks, doc_id)?;
    let payload: Vec<ChunkPayload> = chunks
        .iter()
        .map(|c| ChunkPayload { chunk_id: c.chunk_id.clone(), content: c.content.clone() })
        .collect();
    let outcome = gateway.structure_outline(doc_id, payload)?;
    let candidate = outline_to_candidate(outcome.value);
    let expected: Vec<String> = chunks.iter().map(|c| c.chunk_id.clone()).collect();
    validate_and_repair(candidate, &expected, doc_id, config)
}

/// Batch-wise construction for documents whose chunk payload exceeds the
/// backend context: build one partial tree per consecutive part, then merge.
pub fn build_progressive(
    chunks: &[Chunk],
    doc_id: &str,
    config: &RetrievalConfig,
    part_size: usize,
    gateway: &Gateway,
) -> Result<SemanticTree> {
    if part_size < 1 {
        return Err(Error::InvalidInput("part_size must be >= 1".into()));
    }
    check_chunk_preconditions(chunks, doc_id)?;
    let partials: Vec<SemanticTree> = chunks
        .par_chunks(part_size)
        .map(|part| build_tree(part, doc_id, config, gateway))
        .collect::<Result<Vec<_>>>()?;
    merge_trees(partials, doc_id, config, gateway)
}

/// Merge partial trees into one document tree. Partial roots are dissolved:
/// the merged root adopts their children in part order, and a fresh root
/// title/summary is generated over the child summaries.
pub fn merge_trees(
    partials: Vec<SemanticTree>,
    doc_id: &str,
    config: &RetrievalConfig,
    gateway: &Gateway,
) -> Result<SemanticTree> {
    if partials.is_empty() {
        return Err(Error::InvalidInput("merge_trees needs at least one partial".into()));
    }
    for partial in &partials {
        if partial.doc_id() != doc_id {
            return Err(Error::InvalidInput(format!(
                "partial tree for {} merged under {doc_id}",
                partial.doc_id()
            )));
        }
    }
    let mut expected: Vec<String> = Vec::new();
    let mut seen = BTreeSet::new();
    for partial in &partials {
        for chunk_ref in partial.leaf_chunk_refs() {
            if !seen.insert(chunk_ref.clone()) {
                return Err(Error::InvalidInput(format!(
                    "partial trees overlap on chunk {chunk_ref}"
                )));
            }
            expected.push(chunk_ref);
        }
    }

    let mut entries = Vec::new();
    for partial in &partials {
        let root = partial.node(partial.root_id())?;
        for child in &root.children {
            entries.push(subtree_to_entry(partial, child)?);
        }
    }

    let children: Vec<TitleSummary> = entries
        .iter()
        .map(|entry| match entry {
            CandidateEntry::Child(node) => {
                TitleSummary { title: node.title.clone(), summary: node.summary.clone() }
            }
            CandidateEntry::Chunk(_) => TitleSummary { title: String::new(), summary: String::new() },
        })
        .collect();
    let root_meta = gateway.structure_merge_root(doc_id, children)?;

    let candidate = CandidateNode {
        title: root_meta.value.title,
        summary: root_meta.value.summary,
        entries,
    };
    validate_and_repair(candidate, &expected, doc_id, config)
}

fn subtree_to_entry(tree: &SemanticTree, node_id: &str) -> Result<CandidateEntry> {
    let node = tree.node(node_id)?;
    if node.is_leaf() {
        return Ok(CandidateEntry::Chunk(node.chunk_ref.clone().unwrap_or_default()));
    }
    let mut entries = Vec::with_capacity(node.children.len());
    for child in &node.children {
        entries.push(subtree_to_entry(tree, child)?);
    }
    Ok(CandidateEntry::Child(CandidateNode {
        title: node.title.clone().unwrap_or_default(),
        summary: node.summary.clone().unwrap_or_default(),
        entries,
    }))
}

/// Validate a candidate against the expected chunk sequence, repairing in
/// order: (1) drop unknown chunk refs, (2) append missing chunks after their
/// nearest preceding chunk, (3) dissolve structure below the depth bound,
/// (4) keep only the first occurrence of duplicated refs. A candidate whose
/// leaf order still disagrees with the document is a structuring failure.
pub fn validate_and_repair(
    candidate: CandidateNode,
    expected: &[String],
    doc_id: &str,
    config: &RetrievalConfig,
) -> Result<SemanticTree> {
    config.validate()?;
    if expected.is_empty() {
        return Err(Error::InvalidInput("expected chunk sequence is empty".into()));
    }
    let mut candidate = candidate;
    let mut report = RepairReport::default();
    let known: BTreeSet<&str> = expected.iter().map(String::as_str).collect();
    if known.len() != expected.len() {
        return Err(Error::InvalidInput("expected chunk sequence contains duplicates".into()));
    }

    report.dropped_unknown = drop_unknown(&mut candidate, &known);
    prune_empty(&mut candidate);

    // Missing chunks are appended in document order so that later insertions
    // can anchor on earlier ones.
    let mut present: BTreeSet<String> = BTreeSet::new();
    collect_refs(&candidate, &mut present);
    for (idx, chunk_id) in expected.iter().enumerate() {
        if present.contains(chunk_id) {
            continue;
        }
        let predecessor = expected[..idx].iter().rev().find(|p| present.contains(*p));
        let inserted = match predecessor {
            Some(pred) => insert_after_first(&mut candidate, pred, chunk_id),
            None => {
                candidate.entries.insert(0, CandidateEntry::Chunk(chunk_id.clone()));
                true
            }
        };
        if !inserted {
            return Err(Error::StructuringFailure(format!(
                "could not place missing chunk {chunk_id} in {doc_id}"
            )));
        }
        present.insert(chunk_id.clone());
        report.appended_missing += 1;
    }

    // Internal nodes may sit at depth <= D-1 so their leaves stay within D.
    report.dissolved_deep = dissolve_below(&mut candidate, 1, config.max_depth - 1);

    let mut seen = BTreeSet::new();
    report.deduplicated = dedup_refs(&mut candidate, &mut seen);
    prune_empty(&mut candidate);

    if !report.is_clean() {
        log::debug!(
            "repaired candidate for {doc_id}: dropped {} unknown, appended {} missing, dissolved {} deep, removed {} duplicates",
            report.dropped_unknown,
            report.appended_missing,
            report.dissolved_deep,
            report.deduplicated
        );
    }

    let (root_id, nodes) = candidate_to_nodes(&candidate);
    let tree = SemanticTree::new(doc_id, root_id, config.max_depth, nodes).map_err(|e| {
        Error::StructuringFailure(format!("candidate for {doc_id} is unrepairable: {e}"))
    })?;
    let leaf_order = tree.leaf_chunk_refs();
    if leaf_order.iter().map(String::as_str).ne(expected.iter().map(String::as_str)) {
        return Err(Error::StructuringFailure(format!(
            "candidate for {doc_id} orders chunks differently from the document"
        )));
    }
    Ok(tree)
}

fn check_chunk_preconditions(chunks: &[Chunk], doc_id: &str) -> Result<()> {
    if chunks.is_empty() {
        return Err(Error::InvalidInput(format!("no chunks for document {doc_id}")));
    }
    let mut ids = BTreeSet::new();
    for chunk in chunks {
        if chunk.doc_id != doc_id {
            return Err(Error::InvalidInput(format!(
                "chunk {} belongs to {}, not {doc_id}",
                chunk.chunk_id, chunk.doc_id
            )));
        }
        if !ids.insert(chunk.chunk_id.as_str()) {
            return Err(Error::InvalidInput(format!("duplicate chunk id {}", chunk.chunk_id)));
        }
    }
    Ok(())
}

fn drop_unknown(node: &mut CandidateNode, known: &BTreeSet<&str>) -> usize {
    let mut dropped = 0;
    let mut kept = Vec::with_capacity(node.entries.len());
    for entry in node.entries.drain(..) {
        match entry {
            CandidateEntry::Chunk(id) => {
                if known.contains(id.as_str()) {
                    kept.push(CandidateEntry::Chunk(id));
                } else {
                    dropped += 1;
                }
            }
            CandidateEntry::Child(mut child) => {
                dropped += drop_unknown(&mut child, known);
                kept.push(CandidateEntry::Child(child));
            }
        }
    }
    node.entries = kept;
    dropped
}

fn prune_empty(node: &mut CandidateNode) {
    for entry in &mut node.entries {
        if let CandidateEntry::Child(child) = entry {
            prune_empty(child);
        }
    }
    node.entries.retain(|entry| match entry {
        CandidateEntry::Child(child) => !child.entries.is_empty(),
        CandidateEntry::Chunk(_) => true,
    });
}

fn collect_refs(node: &CandidateNode, out: &mut BTreeSet<String>) {
    for entry in &node.entries {
        match entry {
            CandidateEntry::Chunk(id) => {
                out.insert(id.clone());
            }
            CandidateEntry::Child(child) => collect_refs(child, out),
        }
    }
}

fn insert_after_first(node: &mut CandidateNode, pred: &str, new_id: &str) -> bool {
    let mut i = 0;
    while i < node.entries.len() {
        match &mut node.entries[i] {
            CandidateEntry::Chunk(id) if id == pred => {
                node.entries.insert(i + 1, CandidateEntry::Chunk(new_id.to_string()));
                return true;
            }
            CandidateEntry::Child(child) => {
                if insert_after_first(child, pred, new_id) {
                    return true;
                }
            }
            CandidateEntry::Chunk(_) => {}
        }
        i += 1;
    }
    false
}

/// Dissolve internal structure deeper than `limit`: chunks keep their order,
/// headings below the limit lose their level and merge into the ancestor at
/// the limit.
fn dissolve_below(node: &mut CandidateNode, depth: u32, limit: u32) -> usize {
    let mut dissolved = 0;
    if depth + 1 > limit {
        let mut flat = Vec::with_capacity(node.entries.len());
        for entry in node.entries.drain(..) {
            match entry {
                CandidateEntry::Chunk(id) => flat.push(CandidateEntry::Chunk(id)),
                CandidateEntry::Child(child) => {
                    dissolved += 1;
                    dissolved += dissolve_count(&child);
                    flatten_into(child, &mut flat);
                }
            }
        }
        node.entries = flat;
    } else {
        for entry in &mut node.entries {
            if let CandidateEntry::Child(child) = entry {
                dissolved += dissolve_below(child, depth + 1, limit);
            }
        }
    }
    dissolved
}

fn dissolve_count(node: &CandidateNode) -> usize {
    node.entries
        .iter()
        .map(|e| match e {
            CandidateEntry::Child(c) => 1 + dissolve_count(c),
            CandidateEntry::Chunk(_) => 0,
        })
        .sum()
}

fn flatten_into(node: CandidateNode, out: &mut Vec<CandidateEntry>) {
    for entry in node.entries {
        match entry {
            CandidateEntry::Chunk(id) => out.push(CandidateEntry::Chunk(id)),
            CandidateEntry::Child(child) => flatten_into(child, out),
        }
    }
}

fn dedup_refs(node: &mut CandidateNode, seen: &mut BTreeSet<String>) -> usize {
    let mut removed = 0;
    let mut kept = Vec::with_capacity(node.entries.len());
    for entry in node.entries.drain(..) {
        match entry {
            CandidateEntry::Chunk(id) => {
                if seen.insert(id.clone()) {
                    kept.push(CandidateEntry::Chunk(id));
                } else {
                    removed += 1;
                }
            }
            CandidateEntry::Child(mut child) => {
                removed += dedup_refs(&mut child, seen);
                kept.push(CandidateEntry::Child(child));
            }
        }
    }
    node.entries = kept;
    removed
}

/// Assign preorder node ids and materialize typed nodes.
fn candidate_to_nodes(candidate: &CandidateNode) -> (String, Vec<TreeNode>) {
    fn next_id(counter: &mut usize) -> String {
        *counter += 1;
        format!("n{:04}", *counter)
    }

    fn walk(
        node: &CandidateNode,
        depth: u32,
        counter: &mut usize,
        out: &mut Vec<TreeNode>,
    ) -> String {
        let id = next_id(counter);
        let slot = out.len();
        out.push(TreeNode::internal(
            id.clone(),
            NodeKind::internal_for_depth(depth),
            node.title.clone(),
            node.summary.clone(),
            Vec::new(),
        ));
        let mut children = Vec::with_capacity(node.entries.len());
        for entry in &node.entries {
            match entry {
                CandidateEntry::Chunk(chunk_id) => {
                    let leaf_id = next_id(counter);
                    out.push(TreeNode::leaf(leaf_id.clone(), chunk_id.clone()));
                    children.push(leaf_id);
                }
                CandidateEntry::Child(child) => {
                    children.push(walk(child, depth + 1, counter, out));
                }
            }
        }
        out[slot].children = children;
        id
    }

    let mut out = Vec::new();
    let mut counter = 0usize;
    let root_id = walk(candidate, 1, &mut counter, &mut out);
    (root_id, out)
}

/// Largest part size (in chunks) such that every window of that many
/// consecutive chunks fits 60% of the backend context window.
pub fn default_part_size(chunks: &[Chunk], tokenizer: &Tokenizer, context_tokens: usize) -> usize {
    let budget = context_tokens.saturating_mul(6) / 10;
    let counts: Vec<usize> = chunks.iter().map(|c| tokenizer.count(&c.content)).collect();
    let n = counts.len();
    if n == 0 {
        return 1;
    }
    let fits = |k: usize| -> bool {
        let mut sum: usize = counts[..k].iter().sum();
        let mut max = sum;
        for i in k..n {
            sum = sum + counts[i] - counts[i - k];
            max = max.max(sum);
        }
        max <= budget
    };
    if fits(n) {
        return n;
    }
    if !fits(1) {
        return 1;
    }
    let (mut lo, mut hi) = (1usize, n);
    while lo + 1 < hi {
        let mid = lo + (hi - lo) / 2;
        if fits(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Build a tree, sharding into the progressive path when the chunk payload
/// would overflow the backend context.
pub fn build_auto(
    chunks: &[Chunk],
    doc_id: &str,
    config: &RetrievalConfig,
    gateway: &Gateway,
    tokenizer: &Tokenizer,
) -> Result<SemanticTree> {
    check_chunk_preconditions(chunks, doc_id)?;
    let payload: Vec<ChunkPayload> = chunks
        .iter()
        .map(|c| ChunkPayload { chunk_id: c.chunk_id.clone(), content: c.content.clone() })
        .collect();
    let request = StructureRequest::Outline { doc_id: doc_id.to_string(), chunks: payload };
    let serialized = serde_json::to_string(&request)
        .map_err(|e| Error::InvalidInput(format!("payload serialization: {e}")))?;
    let payload_tokens = Tokenizer::approx_bytes().count(&serialized);
    if payload_tokens <= gateway.context_tokens() {
        build_tree(chunks, doc_id, config, gateway)
    } else {
        let part_size = default_part_size(chunks, tokenizer, gateway.context_tokens());
        build_progressive(chunks, doc_id, config, part_size, gateway)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{GatewaySpec, MockScript, Role};

    fn mock_gateway() -> Gateway {
        Gateway::new(GatewaySpec::mock(MockScript::default())).unwrap()
    }

    fn config() -> RetrievalConfig {
        RetrievalConfig::default()
    }

    fn chunk(doc: &str, n: usize, content: &str) -> Chunk {
        Chunk::new(doc, format!("c{n:04}"), content)
    }

    fn sectioned_chunks(doc: &str) -> Vec<Chunk> {
        // 8 chunks: two sections of four, driven by heading chunks.
        let mut out = Vec::new();
        for i in 0..8 {
            let content = match i {
                0 => "# First\nintro".to_string(),
                4 => "# Second\nintro".to_string(),
                _ => format!("paragraph {i} body text"),
            };
            out.push(chunk(doc, i + 1, &content));
        }
        out
    }

    #[test]
    fn single_chunk_builds_minimal_tree() {
        let chunks = vec![chunk("d", 1, "only content")];
        let tree = build_tree(&chunks, "d", &config(), &mock_gateway()).unwrap();
        assert_eq!(tree.len(), 2); // root and one leaf
        assert_eq!(tree.tree_depth(), 2);
        assert_eq!(tree.leaf_chunk_refs(), vec!["c0001"]);
    }

    #[test]
    fn mock_backend_groups_labeled_sections() {
        let chunks = sectioned_chunks("d");
        let tree = build_tree(&chunks, "d", &config(), &mock_gateway()).unwrap();
        let root = tree.node(tree.root_id()).unwrap();
        assert_eq!(root.children.len(), 2);
        let leaf_count = tree.preorder().filter(|id| tree.node(id).unwrap().is_leaf()).count();
        assert_eq!(leaf_count, 8);
        let expected: Vec<String> = chunks.iter().map(|c| c.chunk_id.clone()).collect();
        assert_eq!(tree.leaf_chunk_refs(), expected);
        let titles: Vec<_> = root
            .children
            .iter()
            .map(|id| tree.node(id).unwrap().title.clone().unwrap())
            .collect();
        assert_eq!(titles, vec!["First", "Second"]);
    }

    #[test]
    fn mock_build_is_deterministic() {
        let chunks = sectioned_chunks("d");
        let a = build_tree(&chunks, "d", &config(), &mock_gateway()).unwrap();
        let b = build_tree(&chunks, "d", &config(), &mock_gateway()).unwrap();
        assert_eq!(a, b);
    }

    fn deep_candidate(levels: usize, chunk_id: &str) -> CandidateNode {
        let mut node = CandidateNode {
            title: format!("L{levels}"),
            summary: "s".into(),
            entries: vec![CandidateEntry::Chunk(chunk_id.to_string())],
        };
        for level in (1..levels).rev() {
            node = CandidateNode {
                title: format!("L{level}"),
                summary: "s".into(),
                entries: vec![CandidateEntry::Child(node)],
            };
        }
        node
    }

    #[test]
    fn depth_six_candidate_is_flattened_to_bound() {
        // 6 internal levels holding one chunk; D = 4 allows internals at 1..=3.
        let candidate = deep_candidate(6, "c0001");
        let expected = vec!["c0001".to_string()];
        let tree = validate_and_repair(candidate, &expected, "d", &config()).unwrap();
        assert!(tree.tree_depth() <= 4);
        assert_eq!(tree.leaf_chunk_refs(), expected);
    }

    #[test]
    fn missing_chunk_is_appended_in_place() {
        let candidate = CandidateNode {
            title: "doc".into(),
            summary: "s".into(),
            entries: vec![CandidateEntry::Child(CandidateNode {
                title: "sec".into(),
                summary: "s".into(),
                entries: vec![
                    CandidateEntry::Chunk("c0001".into()),
                    CandidateEntry::Chunk("c0002".into()),
                    CandidateEntry::Chunk("c0004".into()),
                    CandidateEntry::Chunk("c0005".into()),
                ],
            })],
        };
        let expected: Vec<String> = (1..=5).map(|i| format!("c{i:04}")).collect();
        let tree = validate_and_repair(candidate, &expected, "d", &config()).unwrap();
        assert_eq!(tree.leaf_chunk_refs(), expected);
    }

    #[test]
    fn missing_first_chunk_lands_at_front() {
        let candidate = CandidateNode {
            title: "doc".into(),
            summary: "s".into(),
            entries: vec![CandidateEntry::Child(CandidateNode {
                title: "sec".into(),
                summary: "s".into(),
                entries: vec![CandidateEntry::Chunk("c0002".into())],
            })],
        };
        let expected = vec!["c0001".to_string(), "c0002".to_string()];
        let tree = validate_and_repair(candidate, &expected, "d", &config()).unwrap();
        assert_eq!(tree.leaf_chunk_refs(), expected);
    }

    #[test]
    fn unknown_refs_are_dropped() {
        let candidate = CandidateNode {
            title: "doc".into(),
            summary: "s".into(),
            entries: vec![CandidateEntry::Child(CandidateNode {
                title: "sec".into(),
                summary: "s".into(),
                entries: vec![
                    CandidateEntry::Chunk("c0001".into()),
                    CandidateEntry::Chunk("stray".into()),
                    CandidateEntry::Chunk("c0002".into()),
                ],
            })],
        };
        let expected = vec!["c0001".to_string(), "c0002".to_string()];
        let tree = validate_and_repair(candidate, &expected, "d", &config()).unwrap();
        assert_eq!(tree.leaf_chunk_refs(), expected);
    }

    #[test]
    fn duplicate_refs_keep_first_occurrence() {
        let candidate = CandidateNode {
            title: "doc".into(),
            summary: "s".into(),
            entries: vec![CandidateEntry::Child(CandidateNode {
                title: "sec".into(),
                summary: "s".into(),
                entries: vec![
                    CandidateEntry::Chunk("c0001".into()),
                    CandidateEntry::Chunk("c0002".into()),
                    CandidateEntry::Chunk("c0001".into()),
                ],
            })],
        };
        let expected = vec!["c0001".to_string(), "c0002".to_string()];
        let tree = validate_and_repair(candidate, &expected, "d", &config()).unwrap();
        assert_eq!(tree.leaf_chunk_refs(), expected);
    }

    #[test]
    fn well_formed_candidate_is_unchanged() {
        let candidate = CandidateNode {
            title: "doc".into(),
            summary: "root summary".into(),
            entries: vec![CandidateEntry::Child(CandidateNode {
                title: "sec".into(),
                summary: "sec summary".into(),
                entries: vec![
                    CandidateEntry::Chunk("c0001".into()),
                    CandidateEntry::Chunk("c0002".into()),
                ],
            })],
        };
        let expected = vec!["c0001".to_string(), "c0002".to_string()];
        let tree = validate_and_repair(candidate, &expected, "d", &config()).unwrap();
        assert_eq!(tree.len(), 4);
        let root = tree.node(tree.root_id()).unwrap();
        assert_eq!(root.summary.as_deref(), Some("root summary"));
    }

    #[test]
    fn scrambled_order_is_structuring_failure() {
        let candidate = CandidateNode {
            title: "doc".into(),
            summary: "s".into(),
            entries: vec![CandidateEntry::Child(CandidateNode {
                title: "sec".into(),
                summary: "s".into(),
                entries: vec![
                    CandidateEntry::Chunk("c0002".into()),
                    CandidateEntry::Chunk("c0001".into()),
                ],
            })],
        };
        let expected = vec!["c0001".to_string(), "c0002".to_string()];
        let err = validate_and_repair(candidate, &expected, "d", &config()).unwrap_err();
        assert!(matches!(err, Error::StructuringFailure(_)));
    }

    #[test]
    fn progressive_single_part_equals_plain_build() {
        let chunks = sectioned_chunks("d");
        let plain = build_tree(&chunks, "d", &config(), &mock_gateway()).unwrap();
        let progressive =
            build_progressive(&chunks, "d", &config(), chunks.len(), &mock_gateway()).unwrap();
        assert_eq!(plain, progressive);
    }

    #[test]
    fn progressive_two_parts_keeps_all_leaves_in_order() {
        let chunks = sectioned_chunks("d");
        let tree = build_progressive(&chunks, "d", &config(), 4, &mock_gateway()).unwrap();
        let expected: Vec<String> = chunks.iter().map(|c| c.chunk_id.clone()).collect();
        assert_eq!(tree.leaf_chunk_refs(), expected);
        assert!(tree.tree_depth() <= config().max_depth);
    }

    #[test]
    fn merge_concatenates_partial_sections_in_order() {
        let gateway = mock_gateway();
        let cfg = config();
        let first = build_tree(&sectioned_chunks("d")[..4], "d", &cfg, &gateway).unwrap();
        let tail: Vec<Chunk> = sectioned_chunks("d")[4..].to_vec();
        let second = build_tree(&tail, "d", &cfg, &gateway).unwrap();
        let merged = merge_trees(vec![first, second], "d", &cfg, &gateway).unwrap();
        let root = merged.node(merged.root_id()).unwrap();
        let titles: Vec<_> = root
            .children
            .iter()
            .map(|id| merged.node(id).unwrap().title.clone().unwrap())
            .collect();
        assert_eq!(titles, vec!["First", "Second"]);
    }

    #[test]
    fn merge_rejects_overlapping_chunk_sets() {
        let gateway = mock_gateway();
        let cfg = config();
        let chunks = sectioned_chunks("d");
        let a = build_tree(&chunks[..4], "d", &cfg, &gateway).unwrap();
        let b = build_tree(&chunks[..4], "d", &cfg, &gateway).unwrap();
        let err = merge_trees(vec![a, b], "d", &cfg, &gateway).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn repaired_build_survives_backend_omissions() {
        // Scripted outline omits c0003 and invents "ghost".
        let outline = serde_json::json!({
            "title": "d", "summary": "s",
            "items": [ { "node": { "title": "sec", "summary": "s", "items": [
                { "chunk": "c0001" }, { "chunk": "c0002" }, { "chunk": "ghost" }, { "chunk": "c0004" }
            ] } } ]
        });
        let script = MockScript::default().with_rule(Role::Structure, "\"task\":\"outline\"", outline);
        let gateway = Gateway::new(GatewaySpec::mock(script)).unwrap();
        let chunks: Vec<Chunk> = (1..=4).map(|i| chunk("d", i, "body")).collect();
        let tree = build_tree(&chunks, "d", &config(), &gateway).unwrap();
        let expected: Vec<String> = chunks.iter().map(|c| c.chunk_id.clone()).collect();
        assert_eq!(tree.leaf_chunk_refs(), expected);
    }

    #[test]
    fn default_part_size_respects_context_budget() {
        let chunks: Vec<Chunk> = (1..=20).map(|i| chunk("d", i, &"x".repeat(400))).collect();
        // each chunk is 100 tokens; 60% of 1000 = 600 tokens -> 6 chunks
        let size = default_part_size(&chunks, &Tokenizer::approx_bytes(), 1000);
        assert_eq!(size, 6);
        // everything fits a huge context
        assert_eq!(default_part_size(&chunks, &Tokenizer::approx_bytes(), 1_000_000), 20);
    }
}
