//! Token counting.
//!
//! Budget routing, greedy expansion, and the final budget cut all measure text
//! through the same [`Tokenizer`] so that every stage agrees on what a token
//! is. Counts are never assumed additive under concatenation; callers
//! re-measure whatever string they actually account for.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Which token-counting rule to use.
#[derive(Debug, Clone, PartialEq, Eq)]
#[derive(Default)]
pub enum TokenizerSpec {
    /// `ceil(bytes / 4)` — model-agnostic, deterministic, monotone in length.
    #[default]
    ApproxBytes,
    /// Whitespace-separated word count.
    Whitespace,
    /// A named external tokenizer. None are bundled; resolving the spec fails
    /// at startup rather than per call.
    External(String),
}


impl fmt::Display for TokenizerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenizerSpec::ApproxBytes => write!(f, "approx_bytes"),
            TokenizerSpec::Whitespace => write!(f, "whitespace"),
            TokenizerSpec::External(name) => write!(f, "external:{name}"),
        }
    }
}

impl FromStr for TokenizerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "approx_bytes" => Ok(TokenizerSpec::ApproxBytes),
            "whitespace" => Ok(TokenizerSpec::Whitespace),
            other => match other.strip_prefix("external:") {
                Some(name) if !name.is_empty() => Ok(TokenizerSpec::External(name.to_string())),
                _ => Err(Error::Config(format!("unknown tokenizer: {other}"))),
            },
        }
    }
}

impl Serialize for TokenizerSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for TokenizerSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A resolved, callable token counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tokenizer {
    kind: Kind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    ApproxBytes,
    Whitespace,
}

impl Tokenizer {
    /// Resolve a spec into a counter. An `external` spec is a configuration
    /// error here: nothing external ships with the crate.
    pub fn from_spec(spec: &TokenizerSpec) -> Result<Self> {
        match spec {
            TokenizerSpec::ApproxBytes => Ok(Tokenizer { kind: Kind::ApproxBytes }),
            TokenizerSpec::Whitespace => Ok(Tokenizer { kind: Kind::Whitespace }),
            TokenizerSpec::External(name) => Err(Error::Config(format!(
                "external tokenizer '{name}' is not available"
            ))),
        }
    }

    /// Default counter (`approx_bytes`).
    pub fn approx_bytes() -> Self {
        Tokenizer { kind: Kind::ApproxBytes }
    }

    /// Whitespace word counter.
    pub fn whitespace() -> Self {
        Tokenizer { kind: Kind::Whitespace }
    }

    /// Count tokens. Empty text is 0; non-empty text is at least 1.
    pub fn count(&self, text: &str) -> usize {
        if text.is_empty() {
            return 0;
        }
        match self.kind {
            Kind::ApproxBytes => text.len().div_ceil(4),
            Kind::Whitespace => text.split_whitespace().count().max(1),
        }
    }
}
