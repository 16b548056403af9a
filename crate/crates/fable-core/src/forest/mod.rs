//! Core domain types: chunks, semantic trees, and the forest.
//!
//! One tree per document. Internal nodes carry a title and a summary of their
//! descendants; leaves reference exactly one original chunk. Trees are
//! immutable after construction, which makes the whole forest safe to share
//! across query workers.

mod persist;

pub use persist::{load_forest, save_forest, FOREST_FORMAT_VERSION};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An original semantic text unit; the leaf payload of every tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    /// Owning document.
    pub doc_id: String,
    /// Unique within the document.
    pub chunk_id: String,
    /// Non-empty UTF-8 text.
    pub content: String,
}

impl Chunk {
    pub fn new(
        doc_id: impl Into<String>,
        chunk_id: impl Into<String>,
        content: impl Into<String>,
    ) -> Self {
        Chunk { doc_id: doc_id.into(), chunk_id: chunk_id.into(), content: content.into() }
    }
}

/// Node level within a tree. Kind is a function of depth: 1 is the root,
/// internal nodes at depth 2 are sections, deeper internal nodes are
/// subsections. Leaves may sit at any depth from 2 to the depth bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Root,
    Section,
    Subsection,
    Leaf,
}

impl NodeKind {
    /// The kind an internal node must have at `depth`.
    pub fn internal_for_depth(depth: u32) -> NodeKind {
        match depth {
            1 => NodeKind::Root,
            2 => NodeKind::Section,
            _ => NodeKind::Subsection,
        }
    }
}

/// A typed tree node. Internal nodes have `title`, `summary`, and `children`;
/// leaves have `chunk_ref` only. [`SemanticTree::new`] enforces the shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub node_id: String,
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chunk_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<String>,
}

impl TreeNode {
    /// Build an internal node.
    pub fn internal(
        node_id: impl Into<String>,
        kind: NodeKind,
        title: impl Into<String>,
        summary: impl Into<String>,
        children: Vec<String>,
    ) -> Self {
        TreeNode {
            node_id: node_id.into(),
            kind,
            title: Some(title.into()),
            summary: Some(summary.into()),
            chunk_ref: None,
            children,
        }
    }

    /// Build a leaf node referencing one chunk.
    pub fn leaf(node_id: impl Into<String>, chunk_ref: impl Into<String>) -> Self {
        TreeNode {
            node_id: node_id.into(),
            kind: NodeKind::Leaf,
            title: None,
            summary: None,
            chunk_ref: Some(chunk_ref.into()),
            children: Vec::new(),
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.kind == NodeKind::Leaf
    }
}

/// One rooted tree over one document's chunks.
///
/// Validated at construction: single root, every non-root node has exactly
/// one parent, no cycles, depth within the bound, node kinds matching their
/// depth, and well-formed leaf/internal field shapes.
#[derive(Debug, Clone)]
pub struct SemanticTree {
    doc_id: String,
    root_id: String,
    max_depth: u32,
    nodes: BTreeMap<String, TreeNode>,
    parent: BTreeMap<String, String>,
    depth: BTreeMap<String, u32>,
    preorder: Vec<String>,
}

impl PartialEq for SemanticTree {
    fn eq(&self, other: &Self) -> bool {
        // parent/depth/preorder are derived from nodes; comparing the source
        // fields is sufficient.
        self.doc_id == other.doc_id
            && self.root_id == other.root_id
            && self.max_depth == other.max_depth
            && self.nodes == other.nodes
    }
}

impl SemanticTree {
    /// Validate and index a node set as a tree.
    pub fn new(
        doc_id: impl Into<String>,
        root_id: impl Into<String>,
        max_depth: u32,
        nodes: Vec<TreeNode>,
    ) -> Result<Self> {
        let doc_id = doc_id.into();
        let root_id = root_id.into();

        let mut map = BTreeMap::new();
        for node in nodes {
            if map.insert(node.node_id.clone(), node).is_some() {
                return Err(Error::InvariantViolation(format!(
                    "duplicate node_id in tree for {doc_id}"
                )));
            }
        }

        let root = map
            .get(&root_id)
            .ok_or_else(|| Error::InvariantViolation(format!("root {root_id} missing")))?;
        if root.kind != NodeKind::Root {
            return Err(Error::InvariantViolation(format!(
                "root {root_id} has kind {:?}",
                root.kind
            )));
        }

        // Parent uniqueness.
        let mut parent: BTreeMap<String, String> = BTreeMap::new();
        for node in map.values() {
            for child in &node.children {
                if !map.contains_key(child) {
                    return Err(Error::InvariantViolation(format!(
                        "node {} references unknown child {child}",
                        node.node_id
                    )));
                }
                if parent.insert(child.clone(), node.node_id.clone()).is_some() {
                    return Err(Error::InvariantViolation(format!(
                        "node {child} has more than one parent"
                    )));
                }
            }
        }
        if parent.contains_key(&root_id) {
            return Err(Error::InvariantViolation("root has a parent".into()));
        }

        // Reachability from the root covers everything; together with parent
        // uniqueness and |edges| = |nodes| - 1 this rules out cycles.
        let mut depth = BTreeMap::new();
        let mut preorder = Vec::with_capacity(map.len());
        let mut stack = vec![(root_id.clone(), 1u32)];
        let mut seen_chunks = BTreeSet::new();
        while let Some((id, d)) = stack.pop() {
            let node = &map[&id];
            if d > max_depth {
                return Err(Error::InvariantViolation(format!(
                    "node {id} at depth {d} exceeds bound {max_depth}"
                )));
            }
            depth.insert(id.clone(), d);
            preorder.push(id.clone());
            if node.is_leaf() {
                if node.chunk_ref.is_none() || !node.children.is_empty() {
                    return Err(Error::InvariantViolation(format!(
                        "leaf {id} must have a chunk_ref and no children"
                    )));
                }
                if node.title.is_some() || node.summary.is_some() {
                    return Err(Error::InvariantViolation(format!(
                        "leaf {id} must not carry title or summary"
                    )));
                }
                let chunk = node.chunk_ref.clone().unwrap();
                if !seen_chunks.insert(chunk.clone()) {
                    return Err(Error::InvariantViolation(format!(
                        "chunk {chunk} referenced by more than one leaf"
                    )));
                }
                if d < 2 {
                    return Err(Error::InvariantViolation(format!("leaf {id} at depth {d}")));
                }
            } else {
                if node.chunk_ref.is_some() {
                    return Err(Error::InvariantViolation(format!(
                        "internal node {id} carries a chunk_ref"
                    )));
                }
                if node.title.is_none() || node.summary.is_none() {
                    return Err(Error::InvariantViolation(format!(
                        "internal node {id} is missing title or summary"
                    )));
                }
                if node.children.is_empty() && id != root_id {
                    return Err(Error::InvariantViolation(format!(
                        "internal node {id} has no children"
                    )));
                }
                if node.kind != NodeKind::internal_for_depth(d) {
                    return Err(Error::InvariantViolation(format!(
                        "node {id} at depth {d} has kind {:?}",
                        node.kind
                    )));
                }
                // Reverse push keeps preorder in child order.
                for child in node.children.iter().rev() {
                    stack.push((child.clone(), d + 1));
                }
            }
        }
        if preorder.len() != map.len() {
            return Err(Error::InvariantViolation(format!(
                "{} node(s) unreachable from root",
                map.len() - preorder.len()
            )));
        }

        Ok(SemanticTree { doc_id, root_id, max_depth, nodes: map, parent, depth, preorder })
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn root_id(&self) -> &str {
        &self.root_id
    }

    pub fn max_depth(&self) -> u32 {
        self.max_depth
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Look a node up by id.
    pub fn node(&self, node_id: &str) -> Result<&TreeNode> {
        self.nodes.get(node_id).ok_or_else(|| Error::NodeNotFound(node_id.to_string()))
    }

    pub fn contains(&self, node_id: &str) -> bool {
        self.nodes.contains_key(node_id)
    }

    /// Parent id, or `None` for the root.
    pub fn parent(&self, node_id: &str) -> Option<&str> {
        self.parent.get(node_id).map(String::as_str)
    }

    /// Node ids in preorder (document order).
    pub fn preorder(&self) -> impl Iterator<Item = &str> {
        self.preorder.iter().map(String::as_str)
    }

    /// Number of nodes on the root-to-node path, root inclusive: depth(root) = 1.
    pub fn depth(&self, node_id: &str) -> Result<u32> {
        self.depth
            .get(node_id)
            .copied()
            .ok_or_else(|| Error::NodeNotFound(node_id.to_string()))
    }

    /// Deepest depth present in the tree.
    pub fn tree_depth(&self) -> u32 {
        self.depth.values().copied().max().unwrap_or(0)
    }

    /// Titles of the internal ancestors from the root down to and including
    /// `node_id`. Leaves carry no title, so asking for a leaf's path is an
    /// invalid argument.
    pub fn toc_path(&self, node_id: &str) -> Result<Vec<String>> {
        let node = self.node(node_id)?;
        if node.is_leaf() {
            return Err(Error::InvalidArgument(format!(
                "toc_path of leaf {node_id}: leaves carry no title"
            )));
        }
        let mut path: Vec<String> = self
            .ancestors(node_id)?
            .into_iter()
            .map(|id| self.nodes[&id].title.clone().unwrap_or_default())
            .collect();
        path.push(node.title.clone().unwrap_or_default());
        Ok(path)
    }

    /// Ancestor ids ordered root -> parent, excluding the node itself.
    pub fn ancestors(&self, node_id: &str) -> Result<Vec<String>> {
        self.node(node_id)?;
        let mut up = Vec::new();
        let mut cur = node_id;
        while let Some(p) = self.parent(cur) {
            up.push(p.to_string());
            cur = p;
        }
        up.reverse();
        Ok(up)
    }

    /// All ids strictly below `node_id`.
    pub fn descendants(&self, node_id: &str) -> Result<BTreeSet<String>> {
        let node = self.node(node_id)?;
        let mut out = BTreeSet::new();
        let mut stack: Vec<&str> = node.children.iter().map(String::as_str).collect();
        while let Some(id) = stack.pop() {
            out.insert(id.to_string());
            stack.extend(self.nodes[id].children.iter().map(String::as_str));
        }
        Ok(out)
    }

    /// Chunk refs under `node_id`, in document order.
    pub fn subtree_chunk_refs(&self, node_id: &str) -> Result<Vec<String>> {
        let node = self.node(node_id)?;
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(n) = stack.pop() {
            if let Some(chunk) = &n.chunk_ref {
                out.push(chunk.clone());
            }
            for child in n.children.iter().rev() {
                stack.push(&self.nodes[child]);
            }
        }
        Ok(out)
    }

    /// Chunk refs of the whole document, in document order.
    pub fn leaf_chunk_refs(&self) -> Vec<String> {
        self.subtree_chunk_refs(&self.root_id).expect("root exists")
    }

    /// Internal node ids in preorder.
    pub fn internal_ids(&self) -> impl Iterator<Item = &str> {
        self.preorder.iter().map(String::as_str).filter(|id| !self.nodes[*id].is_leaf())
    }
}

/// The collection-level index: one tree per document plus the chunk store.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    format_version: u32,
    build_info: BTreeMap<String, String>,
    trees: BTreeMap<String, SemanticTree>,
    chunks: BTreeMap<(String, String), Chunk>,
}

impl Default for Forest {
    fn default() -> Self {
        Forest::new()
    }
}

impl Forest {
    pub fn new() -> Self {
        Forest {
            format_version: FOREST_FORMAT_VERSION,
            build_info: BTreeMap::new(),
            trees: BTreeMap::new(),
            chunks: BTreeMap::new(),
        }
    }

    pub fn format_version(&self) -> u32 {
        self.format_version
    }

    pub(crate) fn set_format_version(&mut self, v: u32) {
        self.format_version = v;
    }

    /// Free-form provenance recorded at build time (config, prompt bundle).
    pub fn build_info(&self) -> &BTreeMap<String, String> {
        &self.build_info
    }

    pub fn set_build_info(&mut self, info: BTreeMap<String, String>) {
        self.build_info = info;
    }

    /// Add one document: its tree plus its chunks in document order.
    ///
    /// Enforces the chunk bijection (tree leaves == given chunks, same order)
    /// and chunk-level invariants. Incremental indexing is exactly this:
    /// adding a new tree, never editing one in place.
    pub fn add_document(&mut self, tree: SemanticTree, chunks: Vec<Chunk>) -> Result<()> {
        let doc_id = tree.doc_id().to_string();
        if self.trees.contains_key(&doc_id) {
            return Err(Error::InvalidInput(format!("document {doc_id} already present")));
        }
        if chunks.is_empty() {
            return Err(Error::InvalidInput(format!("document {doc_id} has no chunks")));
        }
        let mut ids = BTreeSet::new();
        for chunk in &chunks {
            if chunk.doc_id != doc_id {
                return Err(Error::InvalidInput(format!(
                    "chunk {} belongs to {}, not {doc_id}",
                    chunk.chunk_id, chunk.doc_id
                )));
            }
            if chunk.content.is_empty() {
                return Err(Error::InvariantViolation(format!(
                    "chunk {doc_id}/{} has empty content",
                    chunk.chunk_id
                )));
            }
            if !ids.insert(chunk.chunk_id.clone()) {
                return Err(Error::InvariantViolation(format!(
                    "duplicate chunk id {doc_id}/{}",
                    chunk.chunk_id
                )));
            }
        }
        let leaf_refs = tree.leaf_chunk_refs();
        let given: Vec<&str> = chunks.iter().map(|c| c.chunk_id.as_str()).collect();
        if leaf_refs.len() != given.len()
            || leaf_refs.iter().map(String::as_str).ne(given.iter().copied())
        {
            return Err(Error::InvariantViolation(format!(
                "tree leaves of {doc_id} do not match the chunk sequence"
            )));
        }
        for chunk in chunks {
            self.chunks.insert((doc_id.clone(), chunk.chunk_id.clone()), chunk);
        }
        self.trees.insert(doc_id, tree);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    /// Document ids in sorted order.
    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.trees.keys().map(String::as_str)
    }

    pub fn contains_doc(&self, doc_id: &str) -> bool {
        self.trees.contains_key(doc_id)
    }

    pub fn tree(&self, doc_id: &str) -> Result<&SemanticTree> {
        self.trees.get(doc_id).ok_or_else(|| Error::DocNotFound(doc_id.to_string()))
    }

    pub fn trees(&self) -> impl Iterator<Item = &SemanticTree> {
        self.trees.values()
    }

    pub fn chunk(&self, doc_id: &str, chunk_id: &str) -> Result<&Chunk> {
        self.chunks
            .get(&(doc_id.to_string(), chunk_id.to_string()))
            .ok_or_else(|| Error::ChunkNotFound {
                doc_id: doc_id.to_string(),
                chunk_id: chunk_id.to_string(),
            })
    }

    pub fn contains_chunk(&self, doc_id: &str, chunk_id: &str) -> bool {
        self.chunks.contains_key(&(doc_id.to_string(), chunk_id.to_string()))
    }

    pub fn chunk_count(&self) -> usize {
        self.chunks.len()
    }

    /// All chunks of a document, in document order.
    pub fn doc_chunks(&self, doc_id: &str) -> Result<Vec<&Chunk>> {
        let tree = self.tree(doc_id)?;
        tree.leaf_chunk_refs().iter().map(|id| self.chunk(doc_id, id)).collect()
    }

    /// All chunks under one node, in document order.
    pub fn subtree_chunks(&self, doc_id: &str, node_id: &str) -> Result<Vec<&Chunk>> {
        let tree = self.tree(doc_id)?;
        tree.subtree_chunk_refs(node_id)?.iter().map(|id| self.chunk(doc_id, id)).collect()
    }

    /// Map chunk_id -> position in document order for one document.
    pub fn chunk_positions(&self, doc_id: &str) -> Result<BTreeMap<String, usize>> {
        let tree = self.tree(doc_id)?;
        Ok(tree.leaf_chunk_refs().into_iter().enumerate().map(|(i, id)| (id, i)).collect())
    }

    /// Re-check every cross-cutting invariant. Used after loading from disk.
    pub fn validate(&self) -> Result<()> {
        for (doc_id, tree) in &self.trees {
            if tree.doc_id() != doc_id {
                return Err(Error::InvariantViolation(format!(
                    "tree stored under {doc_id} claims doc {}",
                    tree.doc_id()
                )));
            }
            for chunk_ref in tree.leaf_chunk_refs() {
                if !self.contains_chunk(doc_id, &chunk_ref) {
                    return Err(Error::InvariantViolation(format!(
                        "dangling chunk_ref {doc_id}/{chunk_ref}"
                    )));
                }
            }
            let leaf_refs: BTreeSet<String> = tree.leaf_chunk_refs().into_iter().collect();
            for (key, chunk) in self.chunks.range((doc_id.clone(), String::new())..) {
                if key.0 != *doc_id {
                    break;
                }
                if chunk.content.is_empty() {
                    return Err(Error::InvariantViolation(format!(
                        "chunk {doc_id}/{} has empty content",
                        key.1
                    )));
                }
                if !leaf_refs.contains(&key.1) {
                    return Err(Error::InvariantViolation(format!(
                        "chunk {doc_id}/{} is not referenced by any leaf",
                        key.1
                    )));
                }
            }
        }
        for (doc_id, _) in self.chunks.keys() {
            if !self.trees.contains_key(doc_id) {
                return Err(Error::InvariantViolation(format!(
                    "chunks present for unknown document {doc_id}"
                )));
            }
        }
        Ok(())
    }
}
