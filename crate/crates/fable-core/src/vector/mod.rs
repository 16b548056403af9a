//! Multi-granularity embedding index with exact cosine top-K.
//!
//! Every node of every tree is embedded: internal nodes over their ToC path
//! plus summary, leaves over their chunk content. Retrieval is brute-force
//! exact scoring with deterministic tie-breaking; approximate structures are
//! out of scope at this scale.

mod store;

use std::collections::BTreeMap;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{Chunk, Forest, SemanticTree};
use crate::gateway::{HttpTransport, Transport};

/// Identifies one embedded node.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeKey {
    pub doc_id: String,
    pub node_id: String,
}

impl NodeKey {
    pub fn new(doc_id: impl Into<String>, node_id: impl Into<String>) -> Self {
        NodeKey { doc_id: doc_id.into(), node_id: node_id.into() }
    }
}

impl std::fmt::Display for NodeKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.doc_id, self.node_id)
    }
}

/// Whether an embedding covers an internal node or a leaf chunk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Internal,
    Leaf,
}

/// A unit-normalized vector for one node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeEmbedding {
    pub key: NodeKey,
    pub granularity: Granularity,
    pub vector: Vec<f32>,
}

/// Norm slack accepted on insert/load; embedders normalize in f64 before
/// casting to f32, which lands around 1e-7.
const NORM_TOLERANCE: f64 = 1e-6;

impl NodeEmbedding {
    pub fn new(key: NodeKey, granularity: Granularity, vector: Vec<f32>) -> Result<Self> {
        let norm = l2_norm(&vector);
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvariantViolation(format!(
                "embedding for {key} has norm {norm}, expected 1"
            )));
        }
        Ok(NodeEmbedding { key, granularity, vector })
    }
}

fn l2_norm(v: &[f32]) -> f64 {
    v.iter().map(|x| (*x as f64) * (*x as f64)).sum::<f64>().sqrt()
}

/// Cosine between unit vectors, accumulated in f64 for stable scoring.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (*x as f64) * (*y as f64)).sum()
}

/// Text embedder. Implementations return unit-normalized vectors of a fixed
/// dimension.
pub trait Embedder: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f32>>;
}

/// Which embedding backend to use.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EmbedderBackend {
    /// Deterministic token-hash bag-of-words projection. Shared tokens raise
    /// cosine; good enough for offline integration testing.
    HashMock,
    /// JSON-over-HTTP embedding endpoint.
    Http { endpoint: String, auth_token_env: String },
}

/// Embedder configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbedderSpec {
    pub backend: EmbedderBackend,
    pub dimension: usize,
}

impl Default for EmbedderSpec {
    fn default() -> Self {
        EmbedderSpec { backend: EmbedderBackend::HashMock, dimension: 256 }
    }
}

impl EmbedderSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dimension < 8 {
            return Err(Error::Config(format!(
                "embedder dimension must be >= 8, got {}",
                self.dimension
            )));
        }
        Ok(())
    }
}

/// Resolve a spec into a callable embedder.
pub fn embedder_from_spec(spec: &EmbedderSpec) -> Result<Box<dyn Embedder>> {
    spec.validate()?;
    match &spec.backend {
        EmbedderBackend::HashMock => Ok(Box::new(HashEmbedder::new(spec.dimension))),
        EmbedderBackend::Http { endpoint, auth_token_env } => {
            if !endpoint.starts_with("http://") {
                return Err(Error::Config(format!(
                    "unsupported embedder endpoint '{endpoint}': only http:// is supported"
                )));
            }
            Ok(Box::new(HttpEmbedder {
                endpoint: endpoint.clone(),
                token: std::env::var(auth_token_env).ok(),
                dimension: spec.dimension,
                transport: Box::new(HttpTransport),
                timeout: Duration::from_secs(30),
            }))
        }
    }
}

/// Token-hash bag-of-words embedder: each token hashes to a seeded ±1 sign
/// pattern over the full dimension; sign patterns are summed weighted by the
/// square root of the token count (sublinear TF, so frequent filler tokens
/// do not drown rare discriminative ones) and the result is normalized.
/// Pure function of the input text.
pub struct HashEmbedder {
    dimension: usize,
    seed: u64,
}

impl HashEmbedder {
    pub fn new(dimension: usize) -> Self {
        HashEmbedder { dimension, seed: 0x5eed_fab1_e000_0001 }
    }

    pub fn with_seed(dimension: usize, seed: u64) -> Self {
        HashEmbedder { dimension, seed }
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for b in bytes {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Embedder for HashEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Vec<f32>> {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        let mut token = String::new();
        for ch in text.chars() {
            if ch.is_alphanumeric() {
                token.extend(ch.to_lowercase());
            } else if !token.is_empty() {
                *counts.entry(std::mem::take(&mut token)).or_insert(0) += 1;
            }
        }
        if !token.is_empty() {
            *counts.entry(token).or_insert(0) += 1;
        }

        if counts.is_empty() {
            // no tokens at all: a fixed deterministic unit vector
            let mut v = vec![0.0f32; self.dimension];
            v[0] = 1.0;
            return Ok(v);
        }
        let mut acc = vec![0.0f64; self.dimension];
        for (token, count) in &counts {
            let weight = (*count as f64).sqrt();
            let mut state = fnv1a64(token.as_bytes()) ^ self.seed;
            let mut word = 0u64;
            for (i, slot) in acc.iter_mut().enumerate() {
                if i % 64 == 0 {
                    word = splitmix64(&mut state);
                }
                *slot += if (word >> (i % 64)) & 1 == 1 { weight } else { -weight };
            }
        }
        let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            let mut v = vec![0.0f32; self.dimension];
            v[0] = 1.0;
            return Ok(v);
        }
        Ok(acc.into_iter().map(|x| (x / norm) as f32).collect())
    }
}

/// Embedder backed by a `POST {"model"?, "input": text}` endpoint returning
/// `{"embedding": [f32, ...]}` or OpenAI-style `{"data":[{"embedding":[...]}]}`.
/// Responses are normalized client-side.
pub struct HttpEmbedder {
    endpoint: String,
    token: Option<String>,
    dimension: usize,
    transport: Box<dyn Transport>,
    timeout: Duration,
}

impl Embedder for HttpEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Vec<f32>> {
        let body = serde_json::json!({ "input": text }).to_string();
        let mut headers = Vec::new();
        if let Some(token) = &self.token {
            headers.push(("Authorization".to_string(), format!("Bearer {token}")));
        }
        let response = self
            .transport
            .post(&self.endpoint, &headers, &body, self.timeout)
            .map_err(Error::Embedder)?;
        if response.status != 200 {
            return Err(Error::Embedder(format!("http status {}", response.status)));
        }
        let value: serde_json::Value =
            serde_json::from_str(&response.body).map_err(|e| Error::Embedder(e.to_string()))?;
        let raw = value
            .pointer("/embedding")
            .or_else(|| value.pointer("/data/0/embedding"))
            .and_then(|v| v.as_array())
            .ok_or_else(|| Error::Embedder("response carries no embedding array".into()))?;
        let mut acc: Vec<f64> =
            raw.iter().map(|x| x.as_f64().unwrap_or(0.0)).collect();
        if acc.len() != self.dimension {
            return Err(Error::Embedder(format!(
                "endpoint returned dimension {}, expected {}",
                acc.len(),
                self.dimension
            )));
        }
        let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Embedder("endpoint returned a zero vector".into()));
        }
        for x in &mut acc {
            *x /= norm;
        }
        Ok(acc.into_iter().map(|x| x as f32).collect())
    }
}

/// Embedding input for an internal node: ToC path titles joined with " > ",
/// a newline, then the summary.
pub fn internal_embedding_text(tree: &SemanticTree, node_id: &str) -> Result<String> {
    let path = tree.toc_path(node_id)?;
    let summary = tree.node(node_id)?.summary.clone().unwrap_or_default();
    Ok(format!("{}\n{}", path.join(" > "), summary))
}

/// Embed an internal node (ToC path ++ summary).
pub fn embed_internal(
    tree: &SemanticTree,
    node_id: &str,
    embedder: &dyn Embedder,
) -> Result<NodeEmbedding> {
    let text = internal_embedding_text(tree, node_id)?;
    let vector = embedder.embed(&text)?;
    NodeEmbedding::new(NodeKey::new(tree.doc_id(), node_id), Granularity::Internal, vector)
}

/// Embed a leaf node over its chunk content.
pub fn embed_leaf(
    tree: &SemanticTree,
    node_id: &str,
    chunk: &Chunk,
    embedder: &dyn Embedder,
) -> Result<NodeEmbedding> {
    let node = tree.node(node_id)?;
    if !node.is_leaf() {
        return Err(Error::InvalidArgument(format!("{node_id} is not a leaf")));
    }
    let vector = embedder.embed(&chunk.content)?;
    NodeEmbedding::new(NodeKey::new(tree.doc_id(), node_id), Granularity::Leaf, vector)
}

/// Restrict which entries a query scores against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope<'a> {
    All,
    Granularity(Granularity),
    Doc(&'a str),
}

impl Scope<'_> {
    fn admits(&self, entry: &NodeEmbedding) -> bool {
        match self {
            Scope::All => true,
            Scope::Granularity(g) => entry.granularity == *g,
            Scope::Doc(doc_id) => entry.key.doc_id == *doc_id,
        }
    }
}

/// A key with its exact cosine score.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredKey {
    #[serde(flatten)]
    pub key: NodeKey,
    pub score: f64,
}

/// Append-only at build time, frozen at query time.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    dimension: usize,
    entries: Vec<NodeEmbedding>,
    by_key: BTreeMap<NodeKey, usize>,
}

impl VectorIndex {
    pub fn new(dimension: usize) -> Self {
        VectorIndex { dimension, entries: Vec::new(), by_key: BTreeMap::new() }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, embedding: NodeEmbedding) -> Result<()> {
        if embedding.vector.len() != self.dimension {
            return Err(Error::InvariantViolation(format!(
                "embedding for {} has dimension {}, index is {}",
                embedding.key,
                embedding.vector.len(),
                self.dimension
            )));
        }
        if self.by_key.contains_key(&embedding.key) {
            return Err(Error::InvariantViolation(format!("duplicate key {}", embedding.key)));
        }
        self.by_key.insert(embedding.key.clone(), self.entries.len());
        self.entries.push(embedding);
        Ok(())
    }

    pub fn get(&self, key: &NodeKey) -> Option<&NodeEmbedding> {
        self.by_key.get(key).map(|i| &self.entries[*i])
    }

    pub fn entries(&self) -> impl Iterator<Item = &NodeEmbedding> {
        self.entries.iter()
    }

    /// Exact top-K by cosine over the scoped entries. Results are sorted by
    /// score descending with ties broken by (doc_id, node_id) ascending, and
    /// truncated to `min(k, |scope|)`. An empty scope returns an empty list.
    pub fn topk(&self, query: &[f32], k: usize, scope: Scope<'_>) -> Vec<ScoredKey> {
        assert_eq!(query.len(), self.dimension, "query dimension mismatch");
        let mut scored: Vec<ScoredKey> = self
            .entries
            .iter()
            .filter(|e| scope.admits(e))
            .map(|e| ScoredKey { key: e.key.clone(), score: cosine(query, &e.vector) })
            .collect();
        scored.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .expect("cosine of unit vectors is finite")
                .then_with(|| a.key.cmp(&b.key))
        });
        scored.truncate(k);
        scored
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        store::save(self, path)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        store::load(path)
    }
}

/// Distinct documents of a top-K hit list, ordered by each document's best
/// node score (the hit list is already sorted), truncated to `k_doc`.
pub fn docs_of(hits: &[ScoredKey], k_doc: usize) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for hit in hits {
        if out.len() == k_doc {
            break;
        }
        if !out.contains(&hit.key.doc_id) {
            out.push(hit.key.doc_id.clone());
        }
    }
    out
}

/// Embed every node of every tree in the forest.
pub fn build_index(forest: &Forest, embedder: &dyn Embedder) -> Result<VectorIndex> {
    let doc_ids: Vec<String> = forest.doc_ids().map(str::to_string).collect();
    let per_doc: Vec<Vec<NodeEmbedding>> = doc_ids
        .par_iter()
        .map(|doc_id| -> Result<Vec<NodeEmbedding>> {
            let tree = forest.tree(doc_id)?;
            let mut out = Vec::with_capacity(tree.len());
            for node_id in tree.preorder() {
                let node = tree.node(node_id)?;
                let embedding = if node.is_leaf() {
                    let chunk = forest.chunk(doc_id, node.chunk_ref.as_deref().unwrap())?;
                    embed_leaf(tree, node_id, chunk, embedder)?
                } else {
                    embed_internal(tree, node_id, embedder)?
                };
                out.push(embedding);
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut index = VectorIndex::new(embedder.dimension());
    for embeddings in per_doc {
        for embedding in embeddings {
            index.insert(embedding)?;
        }
    }
    Ok(index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn unit(v: Vec<f32>) -> Vec<f32> {
        let norm = l2_norm(&v);
        v.into_iter().map(|x| (x as f64 / norm) as f32).collect()
    }

    #[test]
    fn hash_embedder_is_unit_normalized_and_stable() {
        let embedder = HashEmbedder::new(64);
        let a = embedder.embed("alpha beta gamma").unwrap();
        let b = embedder.embed("alpha beta gamma").unwrap();
        assert_eq!(a, b);
        assert!((l2_norm(&a) - 1.0).abs() < 1e-6);
        assert!((cosine(&a, &b) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn shared_tokens_raise_cosine() {
        let embedder = HashEmbedder::new(256);
        let a = embedder.embed("kernel scheduler preemption latency").unwrap();
        let b = embedder.embed("kernel scheduler throughput analysis").unwrap();
        let c = embedder.embed("gardening tulips watering spring").unwrap();
        assert!(cosine(&a, &b) > cosine(&a, &c) + 0.1);
    }

    #[test]
    fn identical_content_in_two_docs_gives_identical_vectors_distinct_keys() {
        let embedder = HashEmbedder::new(32);
        let vector = embedder.embed("same words either place").unwrap();
        let mut index = VectorIndex::new(32);
        for doc in ["doc-x", "doc-y"] {
            index
                .insert(
                    NodeEmbedding::new(NodeKey::new(doc, "n1"), Granularity::Leaf, vector.clone())
                        .unwrap(),
                )
                .unwrap();
        }
        let a = index.get(&NodeKey::new("doc-x", "n1")).unwrap();
        let b = index.get(&NodeKey::new("doc-y", "n1")).unwrap();
        assert_eq!(a.vector, b.vector);
        assert_ne!(a.key, b.key);
    }

    #[test]
    fn tokenless_text_gets_fixed_unit_vector() {
        let embedder = HashEmbedder::new(16);
        let v = embedder.embed("!!! ???").unwrap();
        assert_eq!(v[0], 1.0);
        assert!((l2_norm(&v) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn topk_exact_match_scores_one() {
        let mut index = VectorIndex::new(4);
        let v = unit(vec![1.0, 2.0, 3.0, 4.0]);
        index
            .insert(NodeEmbedding::new(NodeKey::new("d1", "n1"), Granularity::Leaf, v.clone()).unwrap())
            .unwrap();
        let hits = index.topk(&v, 1, Scope::All);
        assert_eq!(hits.len(), 1);
        assert!((hits[0].score - 1.0).abs() < 1e-6);
    }

    #[test]
    fn topk_with_k_beyond_scope_returns_all() {
        let mut index = VectorIndex::new(4);
        for i in 0..3 {
            let v = unit(vec![1.0, i as f32, 0.5, 0.0]);
            index
                .insert(
                    NodeEmbedding::new(NodeKey::new("d1", format!("n{i}")), Granularity::Leaf, v)
                        .unwrap(),
                )
                .unwrap();
        }
        let q = unit(vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(index.topk(&q, 10, Scope::All).len(), 3);
        assert!(index.topk(&q, 10, Scope::Doc("other")).is_empty());
    }

    fn random_index(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> VectorIndex {
        let mut index = VectorIndex::new(dim);
        for i in 0..n {
            let v: Vec<f32> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let doc = format!("d{:02}", i % 7);
            let node = format!("n{i:04}");
            index
                .insert(NodeEmbedding::new(NodeKey::new(doc, node), pick_gran(rng), unit(v)).unwrap())
                .unwrap();
        }
        index
    }

    fn pick_gran(rng: &mut ChaCha8Rng) -> Granularity {
        if rng.random_bool(0.3) {
            Granularity::Internal
        } else {
            Granularity::Leaf
        }
    }

    /// Exhaustive scoring + full stable sort, written independently of topk.
    fn naive_topk(index: &VectorIndex, query: &[f32], k: usize, scope: Scope<'_>) -> Vec<ScoredKey> {
        let mut all: Vec<ScoredKey> = index
            .entries()
            .filter(|e| scope.admits(e))
            .map(|e| ScoredKey { key: e.key.clone(), score: cosine(query, &e.vector) })
            .collect();
        all.sort_by(|a, b| {
            b.score.partial_cmp(&a.score).unwrap().then_with(|| {
                a.key.doc_id.cmp(&b.key.doc_id).then_with(|| a.key.node_id.cmp(&b.key.node_id))
            })
        });
        all.into_iter().take(k).collect()
    }

    #[test]
    fn topk_matches_exhaustive_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let index = random_index(&mut rng, 200, 16);
        for trial in 0..20 {
            let q = unit((0..16).map(|_| rng.random_range(-1.0..1.0)).collect());
            let k = 1 + (trial % 12);
            for scope in [Scope::All, Scope::Granularity(Granularity::Leaf), Scope::Doc("d03")] {
                assert_eq!(index.topk(&q, k, scope), naive_topk(&index, &q, k, scope));
            }
        }
    }

    #[test]
    fn topk_breaks_exact_ties_by_key() {
        let mut index = VectorIndex::new(4);
        let v = unit(vec![1.0, 0.0, 0.0, 0.0]);
        for (doc, node) in [("db", "n2"), ("da", "n9"), ("db", "n1"), ("da", "n1")] {
            index
                .insert(
                    NodeEmbedding::new(NodeKey::new(doc, node), Granularity::Leaf, v.clone())
                        .unwrap(),
                )
                .unwrap();
        }
        let hits = index.topk(&v, 4, Scope::All);
        let keys: Vec<String> = hits.iter().map(|h| h.key.to_string()).collect();
        assert_eq!(keys, vec!["da/n1", "da/n9", "db/n1", "db/n2"]);
    }

    #[test]
    fn docs_of_orders_by_best_hit() {
        let hits = vec![
            ScoredKey { key: NodeKey::new("hi", "n1"), score: 0.9 },
            ScoredKey { key: NodeKey::new("lo", "n4"), score: 0.8 },
            ScoredKey { key: NodeKey::new("hi", "n2"), score: 0.7 },
            ScoredKey { key: NodeKey::new("mid", "n3"), score: 0.6 },
        ];
        assert_eq!(docs_of(&hits, 10), vec!["hi", "lo", "mid"]);
        assert_eq!(docs_of(&hits, 2), vec!["hi", "lo"]);
    }

    #[test]
    fn docs_of_matches_group_by_max_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let index = random_index(&mut rng, 150, 8);
        let q = unit((0..8).map(|_| rng.random_range(-1.0..1.0)).collect());
        let hits = index.topk(&q, 150, Scope::All);
        // oracle: group hits by doc, take max score per doc, rank docs
        let mut best: BTreeMap<String, (f64, String)> = BTreeMap::new();
        for h in &hits {
            let entry = best
                .entry(h.key.doc_id.clone())
                .or_insert((h.score, h.key.node_id.clone()));
            if h.score > entry.0 {
                *entry = (h.score, h.key.node_id.clone());
            }
        }
        let mut ranked: Vec<(&String, &(f64, String))> = best.iter().collect();
        ranked.sort_by(|a, b| {
            b.1 .0.partial_cmp(&a.1 .0).unwrap().then_with(|| a.0.cmp(b.0))
        });
        let oracle: Vec<String> = ranked.into_iter().take(4).map(|(d, _)| d.clone()).collect();
        assert_eq!(docs_of(&hits, 4), oracle);
    }

    #[test]
    fn insert_rejects_dimension_mismatch_and_duplicates() {
        let mut index = VectorIndex::new(4);
        let v = unit(vec![1.0, 0.0, 0.0, 0.0]);
        index
            .insert(NodeEmbedding::new(NodeKey::new("d", "n"), Granularity::Leaf, v.clone()).unwrap())
            .unwrap();
        assert!(index
            .insert(NodeEmbedding::new(NodeKey::new("d", "n"), Granularity::Leaf, v).unwrap())
            .is_err());
        let short = unit(vec![1.0, 1.0]);
        let bad = NodeEmbedding::new(NodeKey::new("d", "m"), Granularity::Leaf, short).unwrap();
        assert!(index.insert(bad).is_err());
    }

    #[test]
    fn embedding_norm_is_validated() {
        let err =
            NodeEmbedding::new(NodeKey::new("d", "n"), Granularity::Leaf, vec![3.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::InvariantViolation(_)));
    }
}
