//! Deterministic scripted backend.
//!
//! Every response is a pure function of the payload: scripted rules first,
//! then a built-in default per role. This makes full pipelines reproducible
//! byte-for-byte without any model in the loop.

use std::collections::BTreeSet;

use serde_json::Value;

use super::schema::{
    DocContext, NavigateRequest, NodeRef, OutlineItem, OutlineNode, SegmentRequest,
    SelectDocsRequest, StructureRequest,
};
use super::Role;

/// One scripted response: fires when the role matches and the serialized
/// payload contains `contains`.
#[derive(Debug, Clone)]
pub struct MockRule {
    pub role: Role,
    pub contains: String,
    pub response: Value,
}

/// Default behavior of the document-selection role.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectDefault {
    /// Select documents sharing a significant query token with any shown
    /// toc or summary.
    KeyedOnQueryTokens,
    /// Select every document shown.
    All,
    /// Select nothing.
    Nothing,
}

/// Default behavior of the node-navigation role.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NavigateDefault {
    /// Select nodes whose toc or summary shares a significant query token.
    KeyedOnQueryTokens,
    /// Select the first (root) node of each document shown.
    Roots,
    /// Select nothing.
    Nothing,
}

/// A fully deterministic stand-in for a model backend.
#[derive(Debug, Clone)]
pub struct MockScript {
    pub rules: Vec<MockRule>,
    pub select_default: SelectDefault,
    pub navigate_default: NavigateDefault,
    /// Roles that fail with a transport error, for failure-injection tests.
    pub fail_roles: BTreeSet<Role>,
}

impl Default for MockScript {
    fn default() -> Self {
        MockScript {
            rules: Vec::new(),
            select_default: SelectDefault::KeyedOnQueryTokens,
            navigate_default: NavigateDefault::KeyedOnQueryTokens,
            fail_roles: BTreeSet::new(),
        }
    }
}

impl MockScript {
    pub fn keyed() -> Self {
        MockScript::default()
    }

    /// Select everything shown, at both levels.
    pub fn select_all() -> Self {
        MockScript {
            select_default: SelectDefault::All,
            navigate_default: NavigateDefault::Roots,
            ..MockScript::default()
        }
    }

    pub fn with_rule(mut self, role: Role, contains: impl Into<String>, response: Value) -> Self {
        self.rules.push(MockRule { role, contains: contains.into(), response });
        self
    }

    pub fn failing(mut self, role: Role) -> Self {
        self.fail_roles.insert(role);
        self
    }

    /// Produce the scripted or default response for a payload.
    pub(crate) fn respond(&self, role: Role, payload: &Value) -> Result<Value, String> {
        if self.fail_roles.contains(&role) {
            return Err(format!("injected failure for role {role}"));
        }
        let payload_text = payload.to_string();
        for rule in &self.rules {
            if rule.role == role && payload_text.contains(&rule.contains) {
                return Ok(rule.response.clone());
            }
        }
        match role {
            Role::Segment => self.default_segment(payload),
            Role::Structure => self.default_structure(payload),
            Role::SelectDocs => self.default_select(payload),
            Role::NavigateNodes => self.default_navigate(payload),
        }
    }

    fn default_segment(&self, payload: &Value) -> Result<Value, String> {
        let req: SegmentRequest =
            serde_json::from_value(payload.clone()).map_err(|e| format!("segment payload: {e}"))?;
        let boundaries = paragraph_boundaries(&req.text);
        Ok(serde_json::json!({ "boundaries": boundaries }))
    }

    fn default_structure(&self, payload: &Value) -> Result<Value, String> {
        let req: StructureRequest =
            serde_json::from_value(payload.clone()).map_err(|e| format!("structure payload: {e}"))?;
        match req {
            StructureRequest::Outline { doc_id, chunks } => {
                let outline = heading_outline(&doc_id, &chunks);
                serde_json::to_value(outline).map_err(|e| e.to_string())
            }
            StructureRequest::MergeRoot { doc_id, children } => {
                let summary =
                    synth_summary(children.iter().map(|c| c.summary.as_str()), ROOT_PIECE_CHARS);
                Ok(serde_json::json!({ "title": doc_id, "summary": summary }))
            }
        }
    }

    fn default_select(&self, payload: &Value) -> Result<Value, String> {
        let req: SelectDocsRequest =
            serde_json::from_value(payload.clone()).map_err(|e| format!("select payload: {e}"))?;
        let doc_ids: Vec<&str> = match self.select_default {
            SelectDefault::All => req.docs.iter().map(|d| d.doc_id.as_str()).collect(),
            SelectDefault::Nothing => Vec::new(),
            SelectDefault::KeyedOnQueryTokens => {
                let query = significant_tokens(&req.query);
                req.docs
                    .iter()
                    .filter(|d| doc_matches(d, &query))
                    .map(|d| d.doc_id.as_str())
                    .collect()
            }
        };
        Ok(serde_json::json!({ "doc_ids": doc_ids }))
    }

    fn default_navigate(&self, payload: &Value) -> Result<Value, String> {
        let req: NavigateRequest =
            serde_json::from_value(payload.clone()).map_err(|e| format!("navigate payload: {e}"))?;
        let mut nodes: Vec<NodeRef> = Vec::new();
        match self.navigate_default {
            NavigateDefault::Nothing => {}
            NavigateDefault::Roots => {
                // Contexts arrive in preorder, so the first node is the root.
                for doc in &req.docs {
                    if let Some(first) = doc.nodes.first() {
                        nodes.push(NodeRef {
                            doc_id: doc.doc_id.clone(),
                            node_id: first.node_id.clone(),
                        });
                    }
                }
            }
            NavigateDefault::KeyedOnQueryTokens => {
                // A competent navigator is selective: rank matches by how
                // many query tokens they carry, avoid whole-document picks
                // when a more specific heading matches, and name at most two
                // headings per document.
                let query = significant_tokens(&req.query);
                for doc in &req.docs {
                    let mut matches: Vec<(usize, usize, &str)> = Vec::new();
                    for (idx, node) in doc.nodes.iter().enumerate() {
                        let mut hay = significant_tokens(&node.toc);
                        hay.extend(significant_tokens(&node.summary));
                        let count = query.intersection(&hay).count();
                        if count > 0 {
                            let depth = node.toc.split(" > ").count();
                            matches.push((idx, count, node.node_id.as_str()));
                            let _ = depth;
                        }
                    }
                    let has_specific = matches.iter().any(|(idx, _, _)| *idx > 0);
                    if has_specific {
                        // contexts arrive in preorder, so index 0 is the root
                        matches.retain(|(idx, _, _)| *idx > 0);
                    }
                    matches.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                    for (_, _, node_id) in matches.into_iter().take(2) {
                        nodes.push(NodeRef {
                            doc_id: doc.doc_id.clone(),
                            node_id: node_id.to_string(),
                        });
                    }
                }
            }
        }
        serde_json::to_value(super::schema::NavigateResponse { nodes }).map_err(|e| e.to_string())
    }
}

fn doc_matches(doc: &DocContext, query: &BTreeSet<String>) -> bool {
    doc.entries.iter().any(|e| {
        let mut hay = significant_tokens(&e.toc);
        hay.extend(significant_tokens(&e.summary));
        !query.is_disjoint(&hay)
    })
}

/// Lowercased alphanumeric runs of length >= 4; shorter runs are treated as
/// connective noise.
pub fn significant_tokens(text: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            cur.extend(ch.to_lowercase());
        } else if !cur.is_empty() {
            if cur.chars().count() >= 4 {
                out.insert(std::mem::take(&mut cur));
            } else {
                cur.clear();
            }
        }
    }
    if cur.chars().count() >= 4 {
        out.insert(cur);
    }
    out
}

/// Byte offsets at which a new paragraph starts (after each blank-line run).
pub fn paragraph_boundaries(text: &str) -> Vec<usize> {
    let bytes = text.as_bytes();
    let mut boundaries = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'\n' {
            // look for a blank-line run: \n (whitespace-only lines) \n
            let mut j = i + 1;
            let mut saw_blank = false;
            while j < bytes.len() {
                if bytes[j] == b'\n' {
                    saw_blank = true;
                    j += 1;
                } else if bytes[j] == b' ' || bytes[j] == b'\t' || bytes[j] == b'\r' {
                    j += 1;
                } else {
                    break;
                }
            }
            if saw_blank && j < bytes.len() {
                boundaries.push(j);
            }
            i = j;
        } else {
            i += 1;
        }
    }
    boundaries
}

const SECTION_PIECE_CHARS: usize = 60;
const ROOT_PIECE_CHARS: usize = 80;

/// First `max_chars` characters with internal whitespace collapsed.
fn piece_prefix(text: &str, max_chars: usize) -> String {
    let collapsed: String = text.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed.chars().take(max_chars).collect()
}

/// Join piece prefixes into a short deterministic summary.
pub fn synth_summary<'a>(pieces: impl Iterator<Item = &'a str>, per_piece_chars: usize) -> String {
    pieces.map(|p| piece_prefix(p, per_piece_chars)).collect::<Vec<_>>().join(" ")
}

/// Heading level of a chunk's first line: `# ` is 1, `## ` is 2, etc.
fn heading_level(content: &str) -> Option<(usize, String)> {
    let first = content.lines().next()?;
    let hashes = first.chars().take_while(|c| *c == '#').count();
    if hashes == 0 || hashes > 6 {
        return None;
    }
    let rest = first[hashes..].trim();
    if rest.is_empty() {
        return None;
    }
    Some((hashes, rest.to_string()))
}

/// The default structuring behavior: open a section per `#` heading, a
/// subsection per deeper heading, attach every chunk to the deepest open
/// container, and fill summaries bottom-up from content prefixes. A document
/// without any headings stays flat: chunks hang directly off the root.
fn heading_outline(doc_id: &str, chunks: &[super::schema::ChunkPayload]) -> OutlineNode {
    if chunks.iter().all(|c| heading_level(&c.content).is_none()) {
        let summary =
            synth_summary(chunks.iter().map(|c| c.content.as_str()), ROOT_PIECE_CHARS);
        return OutlineNode {
            title: doc_id.to_string(),
            summary,
            items: chunks.iter().map(|c| OutlineItem::Chunk(c.chunk_id.clone())).collect(),
        };
    }
    struct Sub {
        title: String,
        items: Vec<OutlineItem>,
        texts: Vec<String>,
    }
    struct Sec {
        title: String,
        head_items: Vec<OutlineItem>,
        head_texts: Vec<String>,
        subs: Vec<Sub>,
    }

    let mut secs: Vec<Sec> = Vec::new();
    let mut part = 0usize;
    for chunk in chunks {
        let level = heading_level(&chunk.content).map(|(depth, _)| depth);
        match heading_level(&chunk.content) {
            Some((1, title)) => {
                secs.push(Sec { title, head_items: vec![], head_texts: vec![], subs: vec![] });
            }
            Some((_, title)) if !secs.is_empty() => {
                secs.last_mut().unwrap().subs.push(Sub { title, items: vec![], texts: vec![] });
            }
            _ => {}
        }
        if secs.is_empty() {
            part += 1;
            secs.push(Sec {
                title: format!("Part {part}"),
                head_items: vec![],
                head_texts: vec![],
                subs: vec![],
            });
        }
        let sec = secs.last_mut().unwrap();
        // A deeper heading chunk attaches to the subsection it just opened.
        let target_sub = match level {
            Some(1) => None,
            Some(_) => sec.subs.last_mut(),
            None => sec.subs.last_mut(),
        };
        match target_sub {
            Some(sub) => {
                sub.items.push(OutlineItem::Chunk(chunk.chunk_id.clone()));
                sub.texts.push(chunk.content.clone());
            }
            None => {
                sec.head_items.push(OutlineItem::Chunk(chunk.chunk_id.clone()));
                sec.head_texts.push(chunk.content.clone());
            }
        }
    }

    let mut section_nodes = Vec::new();
    let mut section_summaries = Vec::new();
    for sec in secs {
        let mut items = sec.head_items;
        let mut summary_pieces: Vec<String> = sec.head_texts;
        for sub in sec.subs {
            let sub_summary =
                synth_summary(sub.texts.iter().map(String::as_str), SECTION_PIECE_CHARS);
            summary_pieces.push(sub_summary.clone());
            items.push(OutlineItem::Node(OutlineNode {
                title: sub.title,
                summary: sub_summary,
                items: sub.items,
            }));
        }
        let summary =
            synth_summary(summary_pieces.iter().map(String::as_str), SECTION_PIECE_CHARS);
        section_summaries.push(summary.clone());
        section_nodes.push(OutlineNode { title: sec.title, summary, items });
    }

    let root_summary =
        synth_summary(section_summaries.iter().map(String::as_str), ROOT_PIECE_CHARS);
    OutlineNode {
        title: doc_id.to_string(),
        summary: root_summary,
        items: section_nodes.into_iter().map(OutlineItem::Node).collect(),
    }
}
