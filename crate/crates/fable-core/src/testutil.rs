//! Deterministic fixtures for tests and benchmarks: hand-built forests,
//! seeded random trees, and exhaustive small tree shapes.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::forest::{Chunk, Forest, NodeKind, SemanticTree, TreeNode};
use crate::vector::{build_index, HashEmbedder, VectorIndex};

const WORDS: &[&str] = &[
    "ledger", "harbor", "quartz", "meadow", "copper", "signal", "lantern", "gravel", "ember",
    "willow", "falcon", "marble", "cedar", "prism", "anchor", "violet", "thimble", "canyon",
    "breeze", "saffron", "juniper", "cobalt", "drift", "hollow", "cinder", "tundra", "melody",
    "sprocket", "garnet", "lagoon", "mantle", "onyx", "pebble", "russet", "sable", "timber",
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn words(rng: &mut ChaCha8Rng, n: usize) -> String {
    (0..n).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
}

/// Two small documents with sections, a subsection, and a handful of leaves.
pub fn small_forest() -> Forest {
    let mut forest = Forest::new();
    for (doc_id, flavor) in [("doc-a", "alpha"), ("doc-b", "beta")] {
        let nodes = vec![
            TreeNode::internal(
                "n0001",
                NodeKind::Root,
                doc_id,
                format!("all about {flavor}"),
                vec!["n0002".into(), "n0005".into()],
            ),
            TreeNode::internal(
                "n0002",
                NodeKind::Section,
                format!("{flavor} basics"),
                format!("introduction to {flavor}"),
                vec!["n0003".into(), "n0004".into()],
            ),
            TreeNode::leaf("n0003", "c0001"),
            TreeNode::leaf("n0004", "c0002"),
            TreeNode::internal(
                "n0005",
                NodeKind::Section,
                format!("{flavor} details"),
                format!("deeper {flavor} material"),
                vec!["n0006".into(), "n0007".into()],
            ),
            TreeNode::internal(
                "n0006",
                NodeKind::Subsection,
                format!("{flavor} corner cases"),
                format!("{flavor} edge behavior"),
                vec!["n0008".into()],
            ),
            TreeNode::leaf("n0007", "c0004"),
            TreeNode::leaf("n0008", "c0003"),
        ];
        let tree = SemanticTree::new(doc_id, "n0001", 4, nodes).unwrap();
        let chunks = vec![
            Chunk::new(doc_id, "c0001", format!("first {flavor} chunk with opening words")),
            Chunk::new(doc_id, "c0002", format!("second {flavor} chunk continuing the theme")),
            Chunk::new(doc_id, "c0003", format!("third {flavor} chunk inside the subsection")),
            Chunk::new(doc_id, "c0004", format!("fourth {flavor} chunk closing the document")),
        ];
        forest.add_document(tree, chunks).unwrap();
    }
    forest
}

enum ShapeChild {
    Leaf,
    Internal(Vec<ShapeChild>),
}

fn random_shape(
    rng: &mut ChaCha8Rng,
    depth: u32,
    max_depth: u32,
    budget: &mut usize,
) -> Vec<ShapeChild> {
    debug_assert!(*budget >= 1);
    let max_children = (*budget).min(4);
    let k = rng.random_range(1..=max_children);
    let mut children = Vec::with_capacity(k);
    for _ in 0..k {
        if *budget == 0 {
            break;
        }
        *budget -= 1;
        // an internal child needs a level below it and budget for a child of its own
        let can_be_internal = depth < max_depth - 1 && *budget >= 1;
        if can_be_internal && rng.random_bool(0.4) {
            children.push(ShapeChild::Internal(random_shape(rng, depth + 1, max_depth, budget)));
        } else {
            children.push(ShapeChild::Leaf);
        }
    }
    children
}

struct Materializer<'a> {
    doc_id: &'a str,
    counter: usize,
    nodes: Vec<TreeNode>,
    chunks: Vec<Chunk>,
    rng: &'a mut ChaCha8Rng,
}

impl Materializer<'_> {
    fn next_id(&mut self) -> String {
        self.counter += 1;
        format!("n{:04}", self.counter)
    }

    fn walk(&mut self, children: &[ShapeChild], depth: u32) -> Vec<String> {
        let mut ids = Vec::with_capacity(children.len());
        for child in children {
            match child {
                ShapeChild::Leaf => {
                    let id = self.next_id();
                    let chunk_id = format!("c{:04}", self.chunks.len() + 1);
                    let content = words(self.rng, 6);
                    self.chunks.push(Chunk::new(self.doc_id, chunk_id.clone(), content));
                    self.nodes.push(TreeNode::leaf(id.clone(), chunk_id));
                    ids.push(id);
                }
                ShapeChild::Internal(sub) => {
                    let id = self.next_id();
                    let slot = self.nodes.len();
                    let title = words(self.rng, 2);
                    let summary = words(self.rng, 5);
                    self.nodes.push(TreeNode::internal(
                        id.clone(),
                        NodeKind::internal_for_depth(depth + 1),
                        title,
                        summary,
                        Vec::new(),
                    ));
                    let child_ids = self.walk(sub, depth + 1);
                    self.nodes[slot].children = child_ids;
                    ids.push(id);
                }
            }
        }
        ids
    }
}

fn materialize(
    doc_id: &str,
    shape: &[ShapeChild],
    max_depth: u32,
    rng: &mut ChaCha8Rng,
) -> (SemanticTree, Vec<Chunk>) {
    let mut m = Materializer { doc_id, counter: 0, nodes: Vec::new(), chunks: Vec::new(), rng };
    let root_id = m.next_id();
    let slot = m.nodes.len();
    let summary = words(m.rng, 5);
    m.nodes.push(TreeNode::internal(root_id.clone(), NodeKind::Root, doc_id, summary, Vec::new()));
    let child_ids = m.walk(shape, 1);
    m.nodes[slot].children = child_ids;

    let tree =
        SemanticTree::new(doc_id, root_id, max_depth, m.nodes).expect("generated tree valid");
    (tree, m.chunks)
}

/// A random valid tree with at most `max_nodes` nodes and depth within 4.
pub fn random_tree(rng: &mut ChaCha8Rng, doc_id: &str, max_nodes: usize) -> (SemanticTree, Vec<Chunk>) {
    let max_depth = 4;
    let mut budget = max_nodes.saturating_sub(1).max(1);
    let shape = random_shape(rng, 1, max_depth, &mut budget);
    materialize(doc_id, &shape, max_depth, rng)
}

/// A forest of random trees.
pub fn random_forest(rng: &mut ChaCha8Rng, docs: usize, max_nodes_per_doc: usize) -> Forest {
    let mut forest = Forest::new();
    for d in 0..docs {
        let doc_id = format!("doc{d:02}");
        let (tree, chunks) = random_tree(rng, &doc_id, max_nodes_per_doc);
        forest.add_document(tree, chunks).unwrap();
    }
    forest
}

/// Index a forest with the deterministic hash embedder.
pub fn index_forest(forest: &Forest, dimension: usize) -> VectorIndex {
    build_index(forest, &HashEmbedder::new(dimension)).expect("indexing fixture forest")
}

/// Every ordered tree shape with between 2 and `max_nodes` nodes and depth
/// within `max_depth`, materialized with deterministic content.
pub fn enumerate_trees(max_nodes: usize, max_depth: u32) -> Vec<(SemanticTree, Vec<Chunk>)> {
    // all ordered non-empty children lists costing exactly `budget` nodes
    fn lists_exact(budget: usize, parent_depth: u32, max_depth: u32) -> Vec<Vec<ShapeChild>> {
        let mut out = Vec::new();
        if budget == 0 {
            return out;
        }
        for first_cost in 1..=budget {
            let firsts: Vec<ShapeChild> = if first_cost == 1 {
                vec![ShapeChild::Leaf]
            } else if parent_depth < max_depth - 1 {
                lists_exact(first_cost - 1, parent_depth + 1, max_depth)
                    .into_iter()
                    .map(ShapeChild::Internal)
                    .collect()
            } else {
                Vec::new()
            };
            let rest_budget = budget - first_cost;
            for first in firsts {
                if rest_budget == 0 {
                    out.push(vec![clone_shape(&first)]);
                } else {
                    for rest in lists_exact(rest_budget, parent_depth, max_depth) {
                        let mut list = vec![clone_shape(&first)];
                        list.extend(rest);
                        out.push(list);
                    }
                }
            }
        }
        out
    }

    fn clone_shape(shape: &ShapeChild) -> ShapeChild {
        match shape {
            ShapeChild::Leaf => ShapeChild::Leaf,
            ShapeChild::Internal(sub) => ShapeChild::Internal(sub.iter().map(clone_shape).collect()),
        }
    }

    let mut shapes = Vec::new();
    for descendants in 1..max_nodes {
        shapes.extend(lists_exact(descendants, 1, max_depth));
    }
    let mut out = Vec::new();
    for (i, shape) in shapes.iter().enumerate() {
        let mut content_rng = rng(0xC0FFEE ^ i as u64);
        let (tree, chunks) =
            materialize(&format!("shape{i:04}"), shape, max_depth, &mut content_rng);
        out.push((tree, chunks));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_trees_are_valid_and_in_bounds() {
        let mut r = rng(5);
        for i in 0..50 {
            let (tree, chunks) = random_tree(&mut r, &format!("d{i}"), 20);
            assert!(tree.len() <= 20);
            assert!(tree.tree_depth() <= 4);
            assert_eq!(tree.leaf_chunk_refs().len(), chunks.len());
        }
    }

    #[test]
    fn enumeration_covers_expected_counts() {
        // ordered rooted trees with n nodes = catalan(n-1); with a depth
        // bound of 7 nothing is pruned at 7 nodes, so the count is
        // 1+2+5+14+42+132 over n = 2..=7.
        let trees = enumerate_trees(7, 7);
        assert_eq!(trees.len(), 196);
        for (tree, chunks) in &trees {
            assert!(tree.len() >= 2 && tree.len() <= 7);
            assert_eq!(tree.leaf_chunk_refs().len(), chunks.len());
        }
        // the depth bound prunes deep chains
        let bounded = enumerate_trees(7, 4);
        assert!(bounded.len() < 196);
        assert!(bounded.iter().all(|(t, _)| t.tree_depth() <= 4));
    }
}
