//! Forest persistence: line-delimited JSON.
//!
//! One record per line, tagged by `"t"`: a single `meta` record first, then
//! per document a `tree` record, its `node` records in preorder, and its
//! `chunk` records in document order. Documents are written in sorted id
//! order so identical forests serialize byte-identically.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Chunk, Forest, SemanticTree, TreeNode};
use crate::error::{Error, Result};

/// Current on-disk format version.
pub const FOREST_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(tag = "t")]
enum Record {
    #[serde(rename = "meta")]
    Meta {
        format_version: u32,
        #[serde(default)]
        build: BTreeMap<String, String>,
    },
    #[serde(rename = "tree")]
    Tree { doc_id: String, root_id: String, max_depth: u32 },
    #[serde(rename = "node")]
    Node {
        doc_id: String,
        #[serde(flatten)]
        node: TreeNode,
    },
    #[serde(rename = "chunk")]
    Chunk { doc_id: String, chunk_id: String, content: String },
}

/// Write a forest to `path` as JSONL.
pub fn save_forest(forest: &Forest, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    let mut out = BufWriter::new(file);
    let mut write = |record: &Record| -> Result<()> {
        let line = serde_json::to_string(record)
            .map_err(|e| Error::Malformed(format!("serialize: {e}")))?;
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
        Ok(())
    };

    write(&Record::Meta {
        format_version: forest.format_version(),
        build: forest.build_info().clone(),
    })?;
    for doc_id in forest.doc_ids().map(str::to_string).collect::<Vec<_>>() {
        let tree = forest.tree(&doc_id)?;
        write(&Record::Tree {
            doc_id: doc_id.clone(),
            root_id: tree.root_id().to_string(),
            max_depth: tree.max_depth(),
        })?;
        for node_id in tree.preorder().map(str::to_string).collect::<Vec<_>>() {
            write(&Record::Node { doc_id: doc_id.clone(), node: tree.node(&node_id)?.clone() })?;
        }
        for chunk in forest.doc_chunks(&doc_id)? {
            write(&Record::Chunk {
                doc_id: doc_id.clone(),
                chunk_id: chunk.chunk_id.clone(),
                content: chunk.content.clone(),
            })?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Read a forest back, re-validating every structural invariant.
pub fn load_forest(path: &Path) -> Result<Forest> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);

    let mut meta: Option<(u32, BTreeMap<String, String>)> = None;
    let mut tree_headers: BTreeMap<String, (String, u32)> = BTreeMap::new();
    let mut nodes: BTreeMap<String, Vec<TreeNode>> = BTreeMap::new();
    let mut chunks: BTreeMap<String, Vec<Chunk>> = BTreeMap::new();

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line)
            .map_err(|e| Error::Malformed(format!("line {}: {e}", lineno + 1)))?;
        match record {
            Record::Meta { format_version, build } => {
                if meta.is_some() {
                    return Err(Error::Malformed("duplicate meta record".into()));
                }
                if format_version != FOREST_FORMAT_VERSION {
                    return Err(Error::VersionMismatch {
                        found: format_version,
                        supported: FOREST_FORMAT_VERSION,
                    });
                }
                meta = Some((format_version, build));
            }
            Record::Tree { doc_id, root_id, max_depth } => {
                if tree_headers.insert(doc_id.clone(), (root_id, max_depth)).is_some() {
                    return Err(Error::Malformed(format!("duplicate tree record for {doc_id}")));
                }
            }
            Record::Node { doc_id, node } => nodes.entry(doc_id).or_default().push(node),
            Record::Chunk { doc_id, chunk_id, content } => {
                chunks.entry(doc_id.clone()).or_default().push(Chunk {
                    doc_id,
                    chunk_id,
                    content,
                })
            }
        }
    }

    let (version, build) = meta.ok_or_else(|| Error::Malformed("missing meta record".into()))?;

    let mut forest = Forest::new();
    forest.set_format_version(version);
    forest.set_build_info(build);

    for (doc_id, (root_id, max_depth)) in tree_headers {
        let doc_nodes = nodes.remove(&doc_id).unwrap_or_default();
        let doc_chunks = chunks.remove(&doc_id).unwrap_or_default();
        let tree = SemanticTree::new(doc_id.clone(), root_id, max_depth, doc_nodes)?;
        // add_document enforces the chunk bijection; a dangling chunk_ref in
        // the file surfaces here as an invariant violation.
        forest.add_document(tree, doc_chunks)?;
    }
    if let Some(doc_id) = nodes.keys().next() {
        return Err(Error::Malformed(format!("node records without tree record for {doc_id}")));
    }
    if let Some(doc_id) = chunks.keys().next() {
        return Err(Error::Malformed(format!("chunk records without tree record for {doc_id}")));
    }
    forest.validate()?;
    Ok(forest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::NodeKind;

    fn sample_forest() -> Forest {
        let mut forest = Forest::new();
        forest.set_build_info(BTreeMap::from([(String::from("tokenizer"), String::from("approx_bytes"))]));
        for d in 0..3 {
            let doc_id = format!("doc{d:02}");
            let nodes = vec![
                TreeNode::internal("n0001", NodeKind::Root, &doc_id, "summary", vec![
                    "n0002".into(),
                ]),
                TreeNode::internal("n0002", NodeKind::Section, "S", "sec", vec![
                    "n0003".into(),
                    "n0004".into(),
                ]),
                TreeNode::leaf("n0003", "c0001"),
                TreeNode::leaf("n0004", "c0002"),
            ];
            let tree = SemanticTree::new(doc_id.clone(), "n0001", 4, nodes).unwrap();
            let chunks = vec![
                Chunk::new(doc_id.clone(), "c0001", format!("first chunk of {doc_id}")),
                Chunk::new(doc_id.clone(), "c0002", format!("second chunk of {doc_id}")),
            ];
            forest.add_document(tree, chunks).unwrap();
        }
        forest
    }

    #[test]
    fn round_trip_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("forest.jsonl");
        let forest = sample_forest();
        save_forest(&forest, &path).unwrap();
        let loaded = load_forest(&path).unwrap();
        assert_eq!(forest, loaded);
    }

    #[test]
    fn empty_forest_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("forest.jsonl");
        let forest = Forest::new();
        save_forest(&forest, &path).unwrap();
        assert_eq!(load_forest(&path).unwrap(), forest);
    }

    #[test]
    fn save_is_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.jsonl");
        let b = dir.path().join("b.jsonl");
        let forest = sample_forest();
        save_forest(&forest, &a).unwrap();
        save_forest(&forest, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn dangling_chunk_ref_is_invariant_violation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("forest.jsonl");
        let forest = sample_forest();
        save_forest(&forest, &path).unwrap();
        // Drop one chunk line.
        let text = std::fs::read_to_string(&path).unwrap();
        let filtered: Vec<&str> = text
            .lines()
            .filter(|l| !(l.contains(r#""t":"chunk""#) && l.contains("c0002") && l.contains("doc01")))
            .collect();
        std::fs::write(&path, filtered.join("\n")).unwrap();
        let err = load_forest(&path).unwrap_err();
        assert!(matches!(err, Error::InvariantViolation(_)), "{err}");
    }

    #[test]
    fn version_mismatch_is_distinct() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("forest.jsonl");
        let forest = sample_forest();
        save_forest(&forest, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let patched = text.replace(r#""format_version":1"#, r#""format_version":9"#);
        std::fs::write(&path, patched).unwrap();
        assert!(matches!(load_forest(&path), Err(Error::VersionMismatch { found: 9, .. })));
    }

    #[test]
    fn garbage_line_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("forest.jsonl");
        std::fs::write(&path, "{\"t\":\"meta\",\"format_version\":1}\nnot json\n").unwrap();
        assert!(matches!(load_forest(&path), Err(Error::Malformed(_))));
    }

    #[test]
    fn missing_meta_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("forest.jsonl");
        std::fs::write(&path, "").unwrap();
        assert!(matches!(load_forest(&path), Err(Error::Malformed(_))));
    }
}
