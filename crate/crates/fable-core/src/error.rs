//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by indexing, persistence, and retrieval.
#[derive(Debug, Error)]
pub enum Error {
    /// A node id was looked up in a tree that does not contain it.
    #[error("node not found: {0}")]
    NodeNotFound(String),

    /// A (doc_id, chunk_id) pair does not resolve in the forest.
    #[error("chunk not found: {doc_id}/{chunk_id}")]
    ChunkNotFound { doc_id: String, chunk_id: String },

    /// A document id was looked up in a forest that does not contain it.
    #[error("document not found: {0}")]
    DocNotFound(String),

    /// The operation was called with an argument outside its contract.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Caller-supplied input (document text, chunk sets, flags) is unusable.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An on-disk artifact was written by an unsupported format version.
    #[error("format version mismatch: found {found}, supported {supported}")]
    VersionMismatch { found: u32, supported: u32 },

    /// An on-disk artifact could not be parsed at all.
    #[error("malformed file: {0}")]
    Malformed(String),

    /// Parsed data violates a structural invariant (dangling refs, bad tree shape).
    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    /// The structuring backend produced output that could not be repaired into a valid tree.
    #[error("structuring failure: {0}")]
    StructuringFailure(String),

    /// Configuration problem detected at startup, before any work ran.
    #[error("configuration error: {0}")]
    Config(String),

    /// Embedding backend failure (retries already exhausted).
    #[error("embedder error: {0}")]
    Embedder(String),

    /// Language-model gateway failure.
    #[error("gateway error: {0}")]
    Gateway(#[from] GatewayError),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Malformed(e.to_string())
    }
}

/// Errors surfaced by the LLM gateway.
#[derive(Debug, Error)]
pub enum GatewayError {
    /// Network-level failure after all retries were spent.
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },

    /// The backend kept returning responses that do not match the role schema.
    #[error("schema violation after {attempts} attempt(s): {message}")]
    Schema { attempts: u32, message: String },

    /// The payload does not fit the backend context window; the caller must shard.
    #[error("context overflow: payload is {payload_tokens} tokens, limit {limit}")]
    ContextOverflow { payload_tokens: usize, limit: usize },
}

impl GatewayError {
    /// Whether retrying the same call could plausibly succeed.
    pub fn is_retriable(&self) -> bool {
        matches!(self, GatewayError::Transport { .. })
    }
}
