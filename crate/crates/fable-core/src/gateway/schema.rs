//! Request and response schemas for the four gateway roles.
//!
//! Selection roles return identifier lists only, never free text, so
//! downstream filtering stays mechanical.

use serde::{Deserialize, Serialize};

/// Ask for chunk boundaries over a normalized document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentRequest {
    pub doc_id: String,
    /// Whitespace-normalized document text; the caller slices this exact
    /// string at the returned boundaries.
    pub text: String,
}

/// Byte offsets (UTF-8 boundary positions) at which a new chunk starts.
/// Strictly increasing, each in `(0, text.len())`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentResponse {
    pub boundaries: Vec<usize>,
}

/// One chunk shown to the structuring backend.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChunkPayload {
    pub chunk_id: String,
    pub content: String,
}

/// Title/summary pair of an already-built subtree root.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TitleSummary {
    pub title: String,
    pub summary: String,
}

/// The two tasks served by the `structure` role.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum StructureRequest {
    /// Produce a nested outline assigning every chunk to a heading path.
    Outline { doc_id: String, chunks: Vec<ChunkPayload> },
    /// Regenerate root title/summary over merged part summaries.
    MergeRoot { doc_id: String, children: Vec<TitleSummary> },
}

/// A nested outline node. `items` interleaves chunk assignments and child
/// headings in document order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlineNode {
    pub title: String,
    #[serde(default)]
    pub summary: String,
    #[serde(default)]
    pub items: Vec<OutlineItem>,
}

/// One entry of an outline node, in document order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutlineItem {
    /// A chunk id placed directly under this heading.
    Chunk(String),
    /// A nested heading.
    Node(OutlineNode),
}

/// Response for [`StructureRequest::MergeRoot`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MergeRootResponse {
    pub title: String,
    pub summary: String,
}

/// One ToC entry shown for document selection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DocEntry {
    /// Title path from the root, joined with " > ".
    pub toc: String,
    pub summary: String,
}

/// Everything shown for one document during selection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DocContext {
    pub doc_id: String,
    pub entries: Vec<DocEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectDocsRequest {
    pub query: String,
    pub docs: Vec<DocContext>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectDocsResponse {
    pub doc_ids: Vec<String>,
}

/// One navigable node shown during node-level navigation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeEntry {
    pub node_id: String,
    pub toc: String,
    pub summary: String,
}

/// Non-leaf nodes of one fused document, in preorder.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeContext {
    pub doc_id: String,
    pub nodes: Vec<NodeEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NavigateRequest {
    pub query: String,
    pub docs: Vec<NodeContext>,
}

/// A (doc, node) pair named by the navigation backend.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeRef {
    pub doc_id: String,
    pub node_id: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NavigateResponse {
    pub nodes: Vec<NodeRef>,
}
