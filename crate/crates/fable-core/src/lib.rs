//! Hierarchical semantic-forest retrieval.
//!
//! Documents are organized into one semantic tree each (chunk leaves under
//! generated section summaries), embedded at every granularity, and queried
//! through two cooperating paths: model-guided selection over tables of
//! contents and vector/structural retrieval with score propagation through
//! tree edges. Output never exceeds the configured token budget.

pub mod config;
pub mod error;
pub mod eval;
pub mod forest;
pub mod fusion;
pub mod gateway;
pub mod pipeline;
pub mod retrieve;
pub mod segment;
pub mod synth;
pub mod testutil;
pub mod tokens;
pub mod tree_build;
pub mod vector;

pub use config::{BudgetPolicy, RetrievalConfig};
pub use error::{Error, GatewayError, Result};
pub use forest::{Chunk, Forest, NodeKind, SemanticTree, TreeNode};
pub use gateway::{Gateway, GatewaySpec, MockScript};
pub use retrieve::{Engine, Mode, RetrievalResult, ScoredNode, Stage};
pub use segment::{SegmenterBackend, SegmenterSpec};
pub use tokens::{Tokenizer, TokenizerSpec};
pub use vector::{Embedder, EmbedderSpec, NodeKey, VectorIndex};
