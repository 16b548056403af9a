//! Budget-adaptive bi-path retrieval.
//!
//! Document level: model-guided selection over shallow ToC context runs
//! alongside vector retrieval over all node embeddings; the fused candidate
//! set routes to whole-document output when it fits the budget. Node level:
//! model-guided navigation runs alongside structural score propagation
//! (direct similarity with depth decay, ancestor inheritance, child
//! aggregation); fusion orders the survivors and the budget cut bounds the
//! output. Either model path degrades to empty on gateway failure — the
//! other path keeps the query alive.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::config::RetrievalConfig;
use crate::error::{Error, Result};
use crate::forest::{Chunk, Forest};
use crate::fusion::{budget_control_with_policy, node_fusion_with_audit, NodeFusionAudit};
use crate::gateway::schema::{
    DocContext, DocEntry, NavigateRequest, NodeContext, NodeEntry, SelectDocsRequest,
};
use crate::gateway::Gateway;
use crate::tokens::Tokenizer;
use crate::vector::{cosine, docs_of, Embedder, NodeKey, Scope, ScoredKey, VectorIndex};

/// Retrieval mode: `auto` is the full budget-adaptive pipeline, the others
/// pin a stage and/or disable one path for ablation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Bi-path document recall, budget routing, bi-path node recall.
    Auto,
    /// Document level only, model path only.
    LlmDocs,
    /// Document level only, both paths.
    Docs,
    /// Node level, model paths only (documents and nodes).
    LlmNodes,
    /// Node level, both paths at both levels.
    Nodes,
    /// Node level, fully model-free: vector documents + tree expansion.
    Treexp,
}

impl Mode {
    pub const ALL: [Mode; 6] =
        [Mode::Auto, Mode::LlmDocs, Mode::Docs, Mode::LlmNodes, Mode::Nodes, Mode::Treexp];

    fn uses_llm_doc_path(&self) -> bool {
        !matches!(self, Mode::Treexp)
    }

    fn uses_vector_doc_path(&self) -> bool {
        matches!(self, Mode::Auto | Mode::Docs | Mode::Nodes | Mode::Treexp)
    }

    fn uses_llm_node_path(&self) -> bool {
        matches!(self, Mode::Auto | Mode::LlmNodes | Mode::Nodes)
    }

    fn uses_treexp_path(&self) -> bool {
        matches!(self, Mode::Auto | Mode::Nodes | Mode::Treexp)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Mode::Auto => "auto",
            Mode::LlmDocs => "llm-docs",
            Mode::Docs => "docs",
            Mode::LlmNodes => "llm-nodes",
            Mode::Nodes => "nodes",
            Mode::Treexp => "treexp",
        };
        f.write_str(name)
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Mode::Auto),
            "llm-docs" => Ok(Mode::LlmDocs),
            "docs" => Ok(Mode::Docs),
            "llm-nodes" => Ok(Mode::LlmNodes),
            "nodes" => Ok(Mode::Nodes),
            "treexp" => Ok(Mode::Treexp),
            other => Err(Error::InvalidArgument(format!("unknown mode: {other}"))),
        }
    }
}

/// Which stage produced the output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    DocLevel,
    NodeLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResultStatus {
    Ok,
    /// Both document paths came back empty.
    NoCandidates,
}

/// Which path(s) nominated a document or node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Llm,
    Treexp,
    Both,
}

/// A fused document with its path provenance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DocSelection {
    pub doc_id: String,
    pub provenance: Provenance,
}

/// A node with its composite relevance score and sub-scores.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredNode {
    pub doc_id: String,
    pub node_id: String,
    /// Query-node cosine with depth decay.
    pub s_sim: f64,
    /// Maximum ancestor `s_sim` (the root inherits its own).
    pub s_inh: f64,
    /// Mean composite score of the children (leaves use their own `s_sim`).
    pub s_child: f64,
    /// Mean of the three signals.
    pub s: f64,
    pub provenance: Provenance,
}

impl ScoredNode {
    pub fn key(&self) -> NodeKey {
        NodeKey::new(self.doc_id.clone(), self.node_id.clone())
    }
}

/// Everything tree expansion produced, for selection and audit.
#[derive(Debug, Clone, Serialize)]
pub struct TreeExpansionOutcome {
    /// Nodes taken by the greedy pass, in selection order.
    pub selected: Vec<ScoredNode>,
    /// All candidates with their scores, in rank order.
    pub ranked: Vec<ScoredNode>,
    /// Ranked candidates considered.
    pub considered: usize,
    /// Candidates skipped because an ancestor was already taken.
    pub pruned: usize,
}

/// Routing decision record.
#[derive(Debug, Clone, Serialize)]
pub struct RoutingAudit {
    pub total_tokens: usize,
    pub budget: usize,
    pub doc_level: bool,
}

/// Budget cut record.
#[derive(Debug, Clone, Serialize)]
pub struct BudgetAudit {
    pub budget: usize,
    pub spent: usize,
    pub remaining: usize,
    pub chunks_in: usize,
    pub chunks_out: usize,
    pub truncated: bool,
    pub first_chunk_too_large: bool,
}

/// Per-step record of one retrieval: candidates considered, scores, prunes,
/// and degradations.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Audit {
    pub query: String,
    pub mode: String,
    pub warnings: Vec<String>,
    /// Documents picked by the model path, post-filter.
    pub llm_docs: Vec<String>,
    /// Identifiers the model returned that do not exist.
    pub llm_docs_dropped: Vec<String>,
    /// Documents picked by the vector path.
    pub vector_docs: Vec<String>,
    /// Raw node hits behind the vector document selection.
    pub vector_hits: Vec<ScoredKey>,
    pub fusion: Vec<DocSelection>,
    pub routing: Option<RoutingAudit>,
    /// Node keys picked by navigation, post-filter.
    pub llm_nodes: Vec<NodeKey>,
    /// Navigation picks dropped with reasons.
    pub llm_nodes_dropped: Vec<String>,
    pub treexp: Option<TreeExpansionOutcome>,
    pub node_fusion: Option<NodeFusionAudit>,
    pub budget: Option<BudgetAudit>,
    /// Total gateway retries spent across calls.
    pub gateway_retries: u32,
}

/// Ordered evidence within budget plus the full audit trail.
#[derive(Debug, Clone, Serialize)]
pub struct RetrievalResult {
    pub stage: Stage,
    pub status: ResultStatus,
    pub docs: Vec<DocSelection>,
    pub chunks: Vec<Chunk>,
    pub token_count: usize,
    pub audit: Audit,
}

/// Deduplicated union of the two document selections: model-selected
/// documents first in model order, then vector-only documents in vector
/// order.
pub fn fuse_docs(d_llm: &[String], d_vector: &[String]) -> Vec<DocSelection> {
    let mut out: Vec<DocSelection> = Vec::new();
    for doc_id in d_llm {
        if !out.iter().any(|d| d.doc_id == *doc_id) {
            let provenance =
                if d_vector.contains(doc_id) { Provenance::Both } else { Provenance::Llm };
            out.push(DocSelection { doc_id: doc_id.clone(), provenance });
        }
    }
    for doc_id in d_vector {
        if !out.iter().any(|d| d.doc_id == *doc_id) {
            out.push(DocSelection { doc_id: doc_id.clone(), provenance: Provenance::Treexp });
        }
    }
    out
}

/// Structure-aware score propagation and greedy selection under `budget`.
///
/// For every node of every listed document: `s_sim = cos(e_v, e_q) / depth`,
/// `s_inh` is the maximum ancestor `s_sim` (computed top-down, root inherits
/// its own), `s_child` is the mean child composite score (computed
/// bottom-up, leaves use their own `s_sim`), and `s` is the mean of the
/// three. Candidates are ranked by `s` (ties broken by doc and node id) and
/// taken greedily while their subtree token mass fits the remaining budget;
/// taking a node removes all its descendants from the pool.
pub fn tree_expansion(
    query_vector: &[f32],
    doc_ids: &[String],
    forest: &Forest,
    index: &VectorIndex,
    budget: usize,
    tokenizer: &Tokenizer,
) -> Result<TreeExpansionOutcome> {
    let mut candidates: Vec<ScoredNode> = Vec::new();
    let mut subtree_mass: BTreeMap<NodeKey, usize> = BTreeMap::new();
    let mut descendants_of: BTreeMap<NodeKey, Vec<NodeKey>> = BTreeMap::new();

    for doc_id in doc_ids {
        let tree = forest.tree(doc_id)?;
        let ids: Vec<&str> = tree.preorder().collect();

        let mut s_sim: BTreeMap<&str, f64> = BTreeMap::new();
        for id in &ids {
            let key = NodeKey::new(doc_id.clone(), *id);
            let embedding = index.get(&key).ok_or_else(|| {
                Error::InvariantViolation(format!("no embedding for {key}; index out of date"))
            })?;
            let raw = cosine(query_vector, &embedding.vector);
            s_sim.insert(*id, raw / tree.depth(id)? as f64);
        }

        // top-down: preorder puts parents before children
        let mut s_inh: BTreeMap<&str, f64> = BTreeMap::new();
        for id in &ids {
            let value = match tree.parent(id) {
                None => s_sim[*id],
                Some(parent) => s_inh[parent].max(s_sim[parent]),
            };
            s_inh.insert(*id, value);
        }

        // bottom-up: reverse preorder puts children before parents
        let mut s_all: BTreeMap<&str, f64> = BTreeMap::new();
        let mut s_child: BTreeMap<&str, f64> = BTreeMap::new();
        let mut mass: BTreeMap<&str, usize> = BTreeMap::new();
        for id in ids.iter().rev() {
            let node = tree.node(id)?;
            let (child_score, node_mass) = if node.is_leaf() {
                let chunk = forest.chunk(doc_id, node.chunk_ref.as_deref().unwrap())?;
                (s_sim[*id], tokenizer.count(&chunk.content))
            } else {
                let sum: f64 = node.children.iter().map(|c| s_all[c.as_str()]).sum();
                let total: usize = node.children.iter().map(|c| mass[c.as_str()]).sum();
                (sum / node.children.len() as f64, total)
            };
            s_child.insert(*id, child_score);
            mass.insert(*id, node_mass);
            s_all.insert(*id, (s_sim[*id] + s_inh[*id] + child_score) / 3.0);
        }

        for id in &ids {
            let key = NodeKey::new(doc_id.clone(), *id);
            subtree_mass.insert(key.clone(), mass[*id]);
            descendants_of.insert(
                key,
                tree.descendants(id)?
                    .into_iter()
                    .map(|d| NodeKey::new(doc_id.clone(), d))
                    .collect(),
            );
            candidates.push(ScoredNode {
                doc_id: doc_id.clone(),
                node_id: (*id).to_string(),
                s_sim: s_sim[*id],
                s_inh: s_inh[*id],
                s_child: s_child[*id],
                s: s_all[*id],
                provenance: Provenance::Treexp,
            });
        }
    }

    candidates.sort_by(|a, b| {
        b.s.partial_cmp(&a.s)
            .expect("scores are finite")
            .then_with(|| a.doc_id.cmp(&b.doc_id))
            .then_with(|| a.node_id.cmp(&b.node_id))
    });

    let considered = candidates.len();
    let ranked = candidates.clone();
    let mut pruned = 0usize;
    let mut removed: BTreeSet<NodeKey> = BTreeSet::new();
    let mut selected: Vec<ScoredNode> = Vec::new();
    let mut remaining = budget;
    for candidate in candidates {
        let key = candidate.key();
        if removed.contains(&key) {
            pruned += 1;
            continue;
        }
        let mass = subtree_mass[&key];
        if mass <= remaining {
            remaining -= mass;
            for descendant in &descendants_of[&key] {
                removed.insert(descendant.clone());
            }
            selected.push(candidate);
        }
    }

    Ok(TreeExpansionOutcome { selected, ranked, considered, pruned })
}

/// Frozen retrieval context: many queries may run against one engine
/// concurrently.
pub struct Engine<'a> {
    forest: &'a Forest,
    index: &'a VectorIndex,
    embedder: &'a dyn Embedder,
    gateway: &'a Gateway,
    config: RetrievalConfig,
    tokenizer: Tokenizer,
}

impl<'a> Engine<'a> {
    pub fn new(
        forest: &'a Forest,
        index: &'a VectorIndex,
        embedder: &'a dyn Embedder,
        gateway: &'a Gateway,
        config: RetrievalConfig,
    ) -> Result<Self> {
        config.validate()?;
        let tokenizer = Tokenizer::from_spec(&config.tokenizer)?;
        if embedder.dimension() != index.dimension() {
            return Err(Error::Config(format!(
                "embedder dimension {} does not match index dimension {}",
                embedder.dimension(),
                index.dimension()
            )));
        }
        Ok(Engine { forest, index, embedder, gateway, config, tokenizer })
    }

    pub fn config(&self) -> &RetrievalConfig {
        &self.config
    }

    pub fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    /// Full pipeline (`auto` mode).
    pub fn retrieve(&self, query: &str) -> Result<RetrievalResult> {
        self.retrieve_mode(query, Mode::Auto)
    }

    /// Run one retrieval in the given mode.
    pub fn retrieve_mode(&self, query: &str, mode: Mode) -> Result<RetrievalResult> {
        let mut audit = Audit { query: query.to_string(), mode: mode.to_string(), ..Audit::default() };
        if self.forest.is_empty() {
            return Err(Error::InvalidInput("forest is empty".into()));
        }
        let query_vector = self.embedder.embed(query)?;

        let d_llm = if mode.uses_llm_doc_path() {
            self.select_docs_llm(query, &mut audit)
        } else {
            Vec::new()
        };
        let d_vector = if mode.uses_vector_doc_path() {
            self.select_docs_vector(&query_vector, &mut audit)
        } else {
            Vec::new()
        };

        let fusion = fuse_docs(&d_llm, &d_vector);
        audit.fusion = fusion.clone();
        if fusion.is_empty() {
            return Ok(RetrievalResult {
                stage: Stage::DocLevel,
                status: ResultStatus::NoCandidates,
                docs: Vec::new(),
                chunks: Vec::new(),
                token_count: 0,
                audit,
            });
        }
        let doc_ids: Vec<String> = fusion.iter().map(|d| d.doc_id.clone()).collect();

        match mode {
            Mode::Auto => {
                let total = self.fused_content_tokens(&doc_ids)?;
                let doc_level = total <= self.config.budget;
                audit.routing = Some(RoutingAudit {
                    total_tokens: total,
                    budget: self.config.budget,
                    doc_level,
                });
                if doc_level {
                    let chunks = self.full_contents(&doc_ids)?;
                    Ok(RetrievalResult {
                        stage: Stage::DocLevel,
                        status: ResultStatus::Ok,
                        docs: fusion,
                        chunks,
                        token_count: total,
                        audit,
                    })
                } else {
                    self.node_level(query, &query_vector, fusion, mode, audit)
                }
            }
            Mode::Docs | Mode::LlmDocs => {
                let chunks = self.full_contents(&doc_ids)?;
                let outcome = budget_control_with_policy(
                    &chunks,
                    self.config.budget,
                    &self.tokenizer,
                    self.config.budget_policy,
                );
                audit.budget = Some(BudgetAudit {
                    budget: self.config.budget,
                    spent: outcome.spent,
                    remaining: outcome.remaining,
                    chunks_in: chunks.len(),
                    chunks_out: outcome.chunks.len(),
                    truncated: outcome.truncated,
                    first_chunk_too_large: outcome.first_chunk_too_large,
                });
                Ok(RetrievalResult {
                    stage: Stage::DocLevel,
                    status: ResultStatus::Ok,
                    docs: fusion,
                    chunks: outcome.chunks,
                    token_count: outcome.spent,
                    audit,
                })
            }
            Mode::Nodes | Mode::LlmNodes | Mode::Treexp => {
                self.node_level(query, &query_vector, fusion, mode, audit)
            }
        }
    }

    fn node_level(
        &self,
        query: &str,
        query_vector: &[f32],
        fusion: Vec<DocSelection>,
        mode: Mode,
        mut audit: Audit,
    ) -> Result<RetrievalResult> {
        let doc_ids: Vec<String> = fusion.iter().map(|d| d.doc_id.clone()).collect();

        let n_llm = if mode.uses_llm_node_path() {
            self.navigate_nodes_llm(query, &doc_ids, &mut audit)
        } else {
            Vec::new()
        };
        let n_treexp: Vec<NodeKey> = if mode.uses_treexp_path() {
            let outcome = tree_expansion(
                query_vector,
                &doc_ids,
                self.forest,
                self.index,
                self.config.budget,
                &self.tokenizer,
            )?;
            let keys: Vec<NodeKey> = outcome.selected.iter().map(|s| s.key()).collect();
            audit.treexp = Some(outcome);
            keys
        } else {
            Vec::new()
        };

        let (fused_chunks, fusion_audit) =
            node_fusion_with_audit(&n_llm, &n_treexp, self.forest)?;
        audit.llm_nodes = n_llm;
        audit.node_fusion = Some(fusion_audit);

        let outcome = budget_control_with_policy(
            &fused_chunks,
            self.config.budget,
            &self.tokenizer,
            self.config.budget_policy,
        );
        audit.budget = Some(BudgetAudit {
            budget: self.config.budget,
            spent: outcome.spent,
            remaining: outcome.remaining,
            chunks_in: fused_chunks.len(),
            chunks_out: outcome.chunks.len(),
            truncated: outcome.truncated,
            first_chunk_too_large: outcome.first_chunk_too_large,
        });
        Ok(RetrievalResult {
            stage: Stage::NodeLevel,
            status: ResultStatus::Ok,
            docs: fusion,
            chunks: outcome.chunks,
            token_count: outcome.spent,
            audit,
        })
    }

    /// Model path of document selection. Shows every internal node with
    /// depth within the hierarchy threshold as (toc, summary); filters the
    /// reply to documents that exist; degrades to empty on gateway failure.
    pub fn select_docs_llm(&self, query: &str, audit: &mut Audit) -> Vec<String> {
        let threshold = self.config.hierarchy_threshold;
        let mut docs = Vec::new();
        for doc_id in self.forest.doc_ids() {
            let tree = self.forest.tree(doc_id).expect("doc_ids yields valid ids");
            let mut entries = Vec::new();
            for node_id in tree.preorder() {
                let node = tree.node(node_id).expect("preorder yields valid ids");
                if node.is_leaf() || tree.depth(node_id).expect("known node") > threshold {
                    continue;
                }
                entries.push(DocEntry {
                    toc: tree.toc_path(node_id).expect("internal node").join(" > "),
                    summary: node.summary.clone().unwrap_or_default(),
                });
            }
            docs.push(DocContext { doc_id: doc_id.to_string(), entries });
        }
        let request = SelectDocsRequest { query: query.to_string(), docs };
        match self.gateway.select_docs(&request) {
            Ok(outcome) => {
                audit.gateway_retries += outcome.retries;
                let mut seen = BTreeSet::new();
                let mut out = Vec::new();
                for doc_id in outcome.value.doc_ids {
                    if !self.forest.contains_doc(&doc_id) {
                        audit.llm_docs_dropped.push(doc_id);
                    } else if seen.insert(doc_id.clone()) {
                        out.push(doc_id);
                    }
                }
                audit.llm_docs = out.clone();
                out
            }
            Err(e) => {
                audit.warnings.push(format!("document selection gateway failed: {e}"));
                Vec::new()
            }
        }
    }

    /// Vector path of document selection: over-fetch node hits (4x `k_doc`)
    /// over all granularities, then group to distinct documents by best hit.
    pub fn select_docs_vector(&self, query_vector: &[f32], audit: &mut Audit) -> Vec<String> {
        if self.index.is_empty() {
            return Vec::new();
        }
        let k_search = 4 * self.config.k_doc;
        let hits = self.index.topk(query_vector, k_search, Scope::All);
        let docs = docs_of(&hits, self.config.k_doc);
        audit.vector_hits = hits;
        audit.vector_docs = docs.clone();
        docs
    }

    /// Model path of node selection over the fused documents. Shows all
    /// non-leaf (toc, summary) pairs; selecting a node means selecting its
    /// subtree. Replies naming leaves or unknown nodes are dropped.
    pub fn navigate_nodes_llm(
        &self,
        query: &str,
        doc_ids: &[String],
        audit: &mut Audit,
    ) -> Vec<NodeKey> {
        let mut docs = Vec::new();
        for doc_id in doc_ids {
            let Ok(tree) = self.forest.tree(doc_id) else { continue };
            let mut nodes = Vec::new();
            for node_id in tree.preorder() {
                let node = tree.node(node_id).expect("preorder yields valid ids");
                if node.is_leaf() {
                    continue;
                }
                nodes.push(NodeEntry {
                    node_id: node_id.to_string(),
                    toc: tree.toc_path(node_id).expect("internal node").join(" > "),
                    summary: node.summary.clone().unwrap_or_default(),
                });
            }
            docs.push(NodeContext { doc_id: doc_id.clone(), nodes });
        }
        let request = NavigateRequest { query: query.to_string(), docs };
        match self.gateway.navigate(&request) {
            Ok(outcome) => {
                audit.gateway_retries += outcome.retries;
                let mut seen = BTreeSet::new();
                let mut out = Vec::new();
                for node_ref in outcome.value.nodes {
                    let key = NodeKey::new(node_ref.doc_id.clone(), node_ref.node_id.clone());
                    let valid = doc_ids.contains(&node_ref.doc_id)
                        && self
                            .forest
                            .tree(&node_ref.doc_id)
                            .ok()
                            .and_then(|t| t.node(&node_ref.node_id).ok().map(|n| !n.is_leaf()))
                            .unwrap_or(false);
                    if !valid {
                        audit
                            .llm_nodes_dropped
                            .push(format!("{key}: not a known internal node of a fused document"));
                    } else if seen.insert(key.clone()) {
                        out.push(key);
                    }
                }
                out
            }
            Err(e) => {
                audit.warnings.push(format!("node navigation gateway failed: {e}"));
                Vec::new()
            }
        }
    }

    /// Total token mass of the fused documents' full contents.
    fn fused_content_tokens(&self, doc_ids: &[String]) -> Result<usize> {
        let mut total = 0usize;
        for doc_id in doc_ids {
            for chunk in self.forest.doc_chunks(doc_id)? {
                total += self.tokenizer.count(&chunk.content);
            }
        }
        Ok(total)
    }

    fn full_contents(&self, doc_ids: &[String]) -> Result<Vec<Chunk>> {
        let mut out = Vec::new();
        for doc_id in doc_ids {
            out.extend(self.forest.doc_chunks(doc_id)?.into_iter().cloned());
        }
        Ok(out)
    }
}
