//! Node fusion and budget control.
//!
//! Fusion turns the two node-level selections into one ordered chunk list:
//! descendants of selected ancestors are dropped, documents carrying
//! LLM-selected survivors come first, and within each document survivors are
//! emitted in original position order. Budget control then takes the longest
//! admissible prefix under the token budget.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::config::BudgetPolicy;
use crate::error::Result;
use crate::forest::{Chunk, Forest};
use crate::tokens::Tokenizer;
use crate::vector::NodeKey;

/// How the fused ordering was derived; returned alongside the chunks for
/// audit trails.
#[derive(Debug, Clone, Default, Serialize)]
pub struct NodeFusionAudit {
    /// Union survivors after ancestor-descendant deduplication, in emission order.
    pub survivors: Vec<NodeKey>,
    /// Union members removed because an ancestor was also selected.
    pub removed_descendants: Vec<NodeKey>,
    /// Documents carrying LLM-selected survivors, in order.
    pub llm_docs: Vec<String>,
    /// Documents carrying only expansion-selected survivors, in order.
    pub treexp_docs: Vec<String>,
}

/// Structure-aware fusion of LLM-selected and expansion-selected nodes into
/// an ordered chunk list. Input order matters: document partitions follow
/// first appearance in `n_llm` and `n_treexp` respectively.
pub fn node_fusion(
    n_llm: &[NodeKey],
    n_treexp: &[NodeKey],
    forest: &Forest,
) -> Result<Vec<Chunk>> {
    node_fusion_with_audit(n_llm, n_treexp, forest).map(|(chunks, _)| chunks)
}

/// As [`node_fusion`], also returning the audit record.
pub fn node_fusion_with_audit(
    n_llm: &[NodeKey],
    n_treexp: &[NodeKey],
    forest: &Forest,
) -> Result<(Vec<Chunk>, NodeFusionAudit)> {
    // Deduplicated ordered union; a key on both sides counts as LLM-side
    // for the document partition below.
    let mut union: Vec<NodeKey> = Vec::new();
    let mut union_set: BTreeSet<NodeKey> = BTreeSet::new();
    for key in n_llm.iter().chain(n_treexp) {
        forest.tree(&key.doc_id)?.node(&key.node_id)?;
        if union_set.insert(key.clone()) {
            union.push(key.clone());
        }
    }

    // Remove every node that has a selected ancestor.
    let mut survivors: BTreeSet<NodeKey> = BTreeSet::new();
    let mut removed: Vec<NodeKey> = Vec::new();
    for key in &union {
        let tree = forest.tree(&key.doc_id)?;
        let has_selected_ancestor = tree
            .ancestors(&key.node_id)?
            .into_iter()
            .any(|a| union_set.contains(&NodeKey::new(key.doc_id.clone(), a)));
        if has_selected_ancestor {
            removed.push(key.clone());
        } else {
            survivors.insert(key.clone());
        }
    }

    // Partition documents: LLM-side survivors first (in n_llm order), then
    // expansion-only documents (in n_treexp order).
    let mut llm_docs: Vec<String> = Vec::new();
    for key in n_llm {
        if survivors.contains(key) && !llm_docs.contains(&key.doc_id) {
            llm_docs.push(key.doc_id.clone());
        }
    }
    let mut treexp_docs: Vec<String> = Vec::new();
    for key in n_treexp {
        if survivors.contains(key)
            && !llm_docs.contains(&key.doc_id)
            && !treexp_docs.contains(&key.doc_id)
        {
            treexp_docs.push(key.doc_id.clone());
        }
    }

    // Within each document, survivors in original document position of their
    // first chunk; expand each survivor to its subtree chunks.
    let mut chunks: Vec<Chunk> = Vec::new();
    let mut ordered_survivors: Vec<NodeKey> = Vec::new();
    let mut emitted: BTreeSet<(String, String)> = BTreeSet::new();
    for doc_id in llm_docs.iter().chain(treexp_docs.iter()) {
        let positions = forest.chunk_positions(doc_id)?;
        let tree = forest.tree(doc_id)?;
        let mut doc_survivors: Vec<(usize, NodeKey)> = Vec::new();
        for key in survivors.iter().filter(|k| k.doc_id == *doc_id) {
            let refs = tree.subtree_chunk_refs(&key.node_id)?;
            let first = refs
                .first()
                .and_then(|r| positions.get(r))
                .copied()
                .unwrap_or(usize::MAX);
            doc_survivors.push((first, key.clone()));
        }
        doc_survivors.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        for (_, key) in doc_survivors {
            for chunk in forest.subtree_chunks(doc_id, &key.node_id)? {
                let id = (chunk.doc_id.clone(), chunk.chunk_id.clone());
                // survivors within one tree are subtree-disjoint, so this
                // only guards cross-call misuse
                if emitted.insert(id) {
                    chunks.push(chunk.clone());
                }
            }
            ordered_survivors.push(key);
        }
    }

    let audit = NodeFusionAudit {
        survivors: ordered_survivors,
        removed_descendants: removed,
        llm_docs,
        treexp_docs,
    };
    Ok((chunks, audit))
}

/// Result of a budget cut.
#[derive(Debug, Clone, Serialize)]
pub struct BudgetOutcome {
    /// Chunks kept, in input order.
    #[serde(skip)]
    pub chunks: Vec<Chunk>,
    /// Tokens spent by the kept chunks.
    pub spent: usize,
    /// Budget remaining.
    pub remaining: usize,
    /// Whether anything was cut.
    pub truncated: bool,
    /// The very first chunk already exceeded the budget.
    pub first_chunk_too_large: bool,
}

/// Keep the longest prefix whose summed token lengths fit `budget`.
pub fn budget_control(chunks: &[Chunk], budget: usize, tokenizer: &Tokenizer) -> BudgetOutcome {
    let mut kept = Vec::new();
    let mut spent = 0usize;
    let mut truncated = false;
    for chunk in chunks {
        let cost = tokenizer.count(&chunk.content);
        if spent + cost <= budget {
            spent += cost;
            kept.push(chunk.clone());
        } else {
            truncated = true;
            break;
        }
    }
    BudgetOutcome {
        first_chunk_too_large: kept.is_empty() && !chunks.is_empty(),
        chunks: kept,
        spent,
        remaining: budget - spent,
        truncated,
    }
}

/// Experimental variant: skip chunks that do not fit and keep scanning.
pub fn budget_control_skip(
    chunks: &[Chunk],
    budget: usize,
    tokenizer: &Tokenizer,
) -> BudgetOutcome {
    let mut kept = Vec::new();
    let mut spent = 0usize;
    let mut truncated = false;
    for chunk in chunks {
        let cost = tokenizer.count(&chunk.content);
        if spent + cost <= budget {
            spent += cost;
            kept.push(chunk.clone());
        } else {
            truncated = true;
        }
    }
    BudgetOutcome {
        first_chunk_too_large: kept.is_empty() && !chunks.is_empty(),
        chunks: kept,
        spent,
        remaining: budget - spent,
        truncated,
    }
}

/// Dispatch on the configured policy.
pub fn budget_control_with_policy(
    chunks: &[Chunk],
    budget: usize,
    tokenizer: &Tokenizer,
    policy: BudgetPolicy,
) -> BudgetOutcome {
    match policy {
        BudgetPolicy::Prefix => budget_control(chunks, budget, tokenizer),
        BudgetPolicy::SkipGreedy => budget_control_skip(chunks, budget, tokenizer),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn chunk_of_tokens(doc: &str, id: &str, tokens: usize) -> Chunk {
        // approx_bytes: 4 bytes per token
        Chunk::new(doc, id, "x".repeat(tokens * 4))
    }

    #[test]
    fn prefix_stops_at_first_misfit() {
        let tok = Tokenizer::approx_bytes();
        let chunks = vec![
            chunk_of_tokens("d", "c1", 3),
            chunk_of_tokens("d", "c2", 3),
            chunk_of_tokens("d", "c3", 3),
        ];
        let outcome = budget_control(&chunks, 7, &tok);
        assert_eq!(outcome.chunks.len(), 2);
        assert_eq!(outcome.spent, 6);
        assert_eq!(outcome.remaining, 1);
        assert!(outcome.truncated);
    }

    #[test]
    fn budget_covers_everything_when_large() {
        let tok = Tokenizer::approx_bytes();
        let chunks = vec![chunk_of_tokens("d", "c1", 3), chunk_of_tokens("d", "c2", 4)];
        let outcome = budget_control(&chunks, 100, &tok);
        assert_eq!(outcome.chunks.len(), 2);
        assert!(!outcome.truncated);
        assert_eq!(outcome.spent, 7);
    }

    #[test]
    fn zero_budget_flags_oversize_head() {
        let tok = Tokenizer::approx_bytes();
        let chunks = vec![chunk_of_tokens("d", "c1", 3)];
        let outcome = budget_control(&chunks, 0, &tok);
        assert!(outcome.chunks.is_empty());
        assert!(outcome.first_chunk_too_large);
    }

    #[test]
    fn prefix_matches_cumulative_sum_oracle_and_is_idempotent() {
        let tok = Tokenizer::approx_bytes();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let chunks: Vec<Chunk> = (0..rng.random_range(1..20))
                .map(|i| chunk_of_tokens("d", &format!("c{i}"), rng.random_range(1..30)))
                .collect();
            let budget = rng.random_range(0..200);
            let outcome = budget_control(&chunks, budget, &tok);
            // oracle: scan the cumulative sum for the maximal admissible k
            let mut cumulative = 0usize;
            let mut k_star = 0usize;
            for (i, c) in chunks.iter().enumerate() {
                cumulative += tok.count(&c.content);
                if cumulative <= budget {
                    k_star = i + 1;
                } else {
                    break;
                }
            }
            assert_eq!(outcome.chunks.len(), k_star);
            assert!(outcome.spent <= budget);
            let again = budget_control(&outcome.chunks, budget, &tok);
            assert_eq!(again.chunks, outcome.chunks);
        }
    }

    #[test]
    fn skip_greedy_takes_later_fits() {
        let tok = Tokenizer::approx_bytes();
        let chunks = vec![
            chunk_of_tokens("d", "c1", 3),
            chunk_of_tokens("d", "c2", 10),
            chunk_of_tokens("d", "c3", 3),
        ];
        let outcome = budget_control_skip(&chunks, 7, &tok);
        let ids: Vec<&str> = outcome.chunks.iter().map(|c| c.chunk_id.as_str()).collect();
        assert_eq!(ids, vec!["c1", "c3"]);
        assert_eq!(outcome.spent, 6);
    }

    #[test]
    fn fusion_drops_descendants_of_selected_ancestors() {
        let forest = testutil::small_forest();
        let tree = forest.tree("doc-a").unwrap();
        let root = NodeKey::new("doc-a", tree.root_id());
        let some_leaf = tree
            .preorder()
            .find(|id| tree.node(id).unwrap().is_leaf())
            .map(|id| NodeKey::new("doc-a", id))
            .unwrap();
        let (chunks, audit) =
            node_fusion_with_audit(&[root], std::slice::from_ref(&some_leaf), &forest).unwrap();
        assert_eq!(audit.removed_descendants, vec![some_leaf]);
        let expected: Vec<String> = tree.leaf_chunk_refs();
        let got: Vec<String> = chunks.iter().map(|c| c.chunk_id.clone()).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn fusion_puts_llm_documents_first() {
        let forest = testutil::small_forest();
        let a_section = first_section(&forest, "doc-a");
        let b_section = first_section(&forest, "doc-b");
        let (chunks, audit) =
            node_fusion_with_audit(&[a_section], &[b_section], &forest).unwrap();
        assert_eq!(audit.llm_docs, vec!["doc-a"]);
        assert_eq!(audit.treexp_docs, vec!["doc-b"]);
        let docs: Vec<&str> = chunks.iter().map(|c| c.doc_id.as_str()).collect();
        let first_b = docs.iter().position(|d| *d == "doc-b").unwrap_or(docs.len());
        assert!(docs[..first_b].iter().all(|d| *d == "doc-a"));
    }

    fn first_section(forest: &Forest, doc: &str) -> NodeKey {
        let tree = forest.tree(doc).unwrap();
        let id = tree
            .preorder()
            .find(|id| {
                let n = tree.node(id).unwrap();
                !n.is_leaf() && *id != tree.root_id()
            })
            .unwrap();
        NodeKey::new(doc, id)
    }

    #[test]
    fn unknown_node_key_is_not_found() {
        let forest = testutil::small_forest();
        let err = node_fusion(&[NodeKey::new("doc-a", "missing")], &[], &forest).unwrap_err();
        assert!(matches!(err, crate::error::Error::NodeNotFound(_)));
    }

    /// Direct transcription of the fusion pseudocode, kept naive on purpose.
    fn fusion_oracle(n_llm: &[NodeKey], n_treexp: &[NodeKey], forest: &Forest) -> Vec<Chunk> {
        // dedup union
        let mut union: Vec<NodeKey> = Vec::new();
        for k in n_llm.iter().chain(n_treexp) {
            if !union.contains(k) {
                union.push(k.clone());
            }
        }
        // remove descendants
        let dedup: Vec<NodeKey> = union
            .iter()
            .filter(|k| {
                let tree = forest.tree(&k.doc_id).unwrap();
                !tree
                    .ancestors(&k.node_id)
                    .unwrap()
                    .iter()
                    .any(|a| union.contains(&NodeKey::new(k.doc_id.clone(), a.clone())))
            })
            .cloned()
            .collect();
        // document partitions
        let mut docs: Vec<String> = Vec::new();
        for k in n_llm {
            if dedup.contains(k) && !docs.contains(&k.doc_id) {
                docs.push(k.doc_id.clone());
            }
        }
        for k in n_treexp {
            if dedup.contains(k) && !docs.contains(&k.doc_id) {
                docs.push(k.doc_id.clone());
            }
        }
        // intra-document position sort + chunk extraction
        let mut out: Vec<Chunk> = Vec::new();
        for doc in &docs {
            let tree = forest.tree(doc).unwrap();
            let order = tree.leaf_chunk_refs();
            let mut sel: Vec<&NodeKey> = dedup.iter().filter(|k| k.doc_id == *doc).collect();
            sel.sort_by_key(|k| {
                let first = tree.subtree_chunk_refs(&k.node_id).unwrap()[0].clone();
                (order.iter().position(|c| *c == first).unwrap(), k.node_id.clone())
            });
            for k in sel {
                for c in forest.subtree_chunks(doc, &k.node_id).unwrap() {
                    if !out.iter().any(|e| e.doc_id == c.doc_id && e.chunk_id == c.chunk_id) {
                        out.push(c.clone());
                    }
                }
            }
        }
        out
    }

    #[test]
    fn fusion_matches_pseudocode_oracle_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for round in 0..60 {
            let forest = testutil::random_forest(&mut rng, 3, 14);
            let keys: Vec<NodeKey> = forest
                .doc_ids()
                .flat_map(|d| {
                    let tree = forest.tree(d).unwrap();
                    tree.preorder().map(|n| NodeKey::new(d, n)).collect::<Vec<_>>()
                })
                .collect();
            let pick = |rng: &mut ChaCha8Rng, n: usize| -> Vec<NodeKey> {
                (0..n).map(|_| keys[rng.random_range(0..keys.len())].clone()).collect()
            };
            let n_llm = pick(&mut rng, round % 5);
            let n_treexp = pick(&mut rng, 1 + round % 6);
            let got = node_fusion(&n_llm, &n_treexp, &forest).unwrap();
            let want = fusion_oracle(&n_llm, &n_treexp, &forest);
            assert_eq!(got, want, "llm={n_llm:?} treexp={n_treexp:?}");
        }
    }

    #[test]
    fn fusion_output_never_repeats_chunks_and_preserves_positions() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..30 {
            let forest = testutil::random_forest(&mut rng, 2, 12);
            let keys: Vec<NodeKey> = forest
                .doc_ids()
                .flat_map(|d| {
                    let tree = forest.tree(d).unwrap();
                    tree.preorder().map(|n| NodeKey::new(d, n)).collect::<Vec<_>>()
                })
                .collect();
            let sample: Vec<NodeKey> =
                (0..4).map(|_| keys[rng.random_range(0..keys.len())].clone()).collect();
            let chunks = node_fusion(&sample[..2], &sample[2..], &forest).unwrap();
            let mut seen = BTreeSet::new();
            for c in &chunks {
                assert!(seen.insert((c.doc_id.clone(), c.chunk_id.clone())));
            }
            // within each document, output order is a subsequence of document order
            for doc in forest.doc_ids() {
                let order = forest.tree(doc).unwrap().leaf_chunk_refs();
                let emitted: Vec<usize> = chunks
                    .iter()
                    .filter(|c| c.doc_id == doc)
                    .map(|c| order.iter().position(|o| *o == c.chunk_id).unwrap())
                    .collect();
                assert!(emitted.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }
}
