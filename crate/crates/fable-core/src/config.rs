//! Retrieval tunables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokens::TokenizerSpec;

/// How the final budget cut treats chunks that do not fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[derive(Default)]
pub enum BudgetPolicy {
    /// Take the longest prefix whose token sum fits the budget. This is the
    /// normative behavior.
    #[default]
    Prefix,
    /// Skip chunks that do not fit and keep scanning. Experimental; breaks
    /// position-preserving ordering guarantees of the prefix rule.
    SkipGreedy,
}


/// All retrieval tunables in one place.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    /// Maximum tree depth D, root at depth 1.
    pub max_depth: u32,
    /// Hierarchy threshold L: document selection shows internal nodes with
    /// depth <= L. Must satisfy 1 <= L <= D.
    pub hierarchy_threshold: u32,
    /// How many documents the vector path contributes.
    pub k_doc: usize,
    /// Token budget B_max for the final output.
    pub budget: usize,
    /// Token counting rule shared by routing, expansion, and the budget cut.
    pub tokenizer: TokenizerSpec,
    /// Budget cut behavior.
    #[serde(default)]
    pub budget_policy: BudgetPolicy,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            max_depth: 4,
            hierarchy_threshold: 2,
            k_doc: 5,
            budget: 8192,
            tokenizer: TokenizerSpec::ApproxBytes,
            budget_policy: BudgetPolicy::Prefix,
        }
    }
}

impl RetrievalConfig {
    /// Check field-level invariants.
    pub fn validate(&self) -> Result<()> {
        // Leaves live at depth >= 2, so a depth bound of 1 admits no content.
        if self.max_depth < 2 {
            return Err(Error::Config(format!(
                "max_depth must be >= 2, got {}",
                self.max_depth
            )));
        }
        if self.hierarchy_threshold < 1 || self.hierarchy_threshold > self.max_depth {
            return Err(Error::Config(format!(
                "hierarchy_threshold must be in 1..={}, got {}",
                self.max_depth, self.hierarchy_threshold
            )));
        }
        if self.k_doc < 1 {
            return Err(Error::Config("k_doc must be >= 1".into()));
        }
        if self.budget < 1 {
            return Err(Error::Config("budget must be >= 1".into()));
        }
        Ok(())
    }
}
