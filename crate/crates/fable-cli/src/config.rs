//! Settings resolution: defaults, then the `key=value` config file, then
//! command-line flags.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;

use fable_core::config::BudgetPolicy;
use fable_core::gateway::{BackendSpec, GatewaySpec, MockScript, TOKEN_ENV};
use fable_core::segment::{SegmenterBackend, SegmenterSpec};
use fable_core::vector::{EmbedderBackend, EmbedderSpec};
use fable_core::{RetrievalConfig, TokenizerSpec};

/// Flags shared by `index`, `query`, and `eval`. Every key here can also
/// appear in the config file; flags win.
#[derive(Debug, Clone, Default, Args)]
pub struct SettingsArgs {
    /// Config file with one key=value per line ('#' starts a comment).
    #[arg(long, value_name = "FILE")]
    pub config: Option<std::path::PathBuf>,
    /// Maximum tree depth D.
    #[arg(long)]
    pub max_depth: Option<u32>,
    /// Depth threshold L for document-selection context.
    #[arg(long)]
    pub hierarchy_threshold: Option<u32>,
    /// Documents contributed by the vector path.
    #[arg(long)]
    pub k_doc: Option<usize>,
    /// Output token budget.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub budget: Option<u64>,
    /// Token counting rule: approx_bytes | whitespace | external:<name>.
    #[arg(long)]
    pub tokenizer: Option<String>,
    /// Budget cut behavior: prefix | skip_greedy.
    #[arg(long)]
    pub budget_policy: Option<String>,
    /// Segmenter backend: structural | llm.
    #[arg(long)]
    pub segmenter: Option<String>,
    #[arg(long)]
    pub target_chunk_tokens: Option<usize>,
    #[arg(long)]
    pub max_chunk_tokens: Option<usize>,
    /// Embedder backend: hash_mock | http:<url>.
    #[arg(long)]
    pub embedder: Option<String>,
    /// Embedding dimension.
    #[arg(long)]
    pub dimension: Option<usize>,
    /// Gateway backend: mock | http_chat.
    #[arg(long)]
    pub gateway: Option<String>,
    /// Chat endpoint URL for the http_chat gateway (or FABLE_LLM_ENDPOINT).
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Model name sent to the gateway.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub max_parallel: Option<usize>,
    #[arg(long)]
    pub max_retries: Option<u32>,
    #[arg(long)]
    pub timeout_ms: Option<u64>,
    #[arg(long)]
    pub context_tokens: Option<usize>,
}

/// Fully resolved configuration for one command.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    pub retrieval: RetrievalConfig,
    pub segmenter: SegmenterSpec,
    pub embedder: EmbedderSpec,
    pub gateway: GatewaySpec,
}

impl Settings {
    /// Defaults <- index metadata (optional) <- config file <- flags.
    pub fn resolve(
        args: &SettingsArgs,
        index_meta: Option<&BTreeMap<String, String>>,
    ) -> Result<Settings> {
        let mut settings = Settings::default();
        if let Some(meta) = index_meta {
            for (key, value) in meta {
                // meta keys mirror config keys; ignore the ones that are not
                let _ = apply_kv(&mut settings, key, value);
            }
        }
        if let Some(path) = &args.config {
            let pairs = parse_config_file(path)?;
            for (key, value) in &pairs {
                apply_kv(&mut settings, key, value)
                    .with_context(|| format!("config file {}", path.display()))?;
            }
        }
        apply_flags(&mut settings, args)?;
        Ok(settings)
    }
}

fn parse_config_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config file {}", path.display()))?;
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("{}:{}: expected key=value", path.display(), lineno + 1))?;
        out.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

fn apply_kv(settings: &mut Settings, key: &str, value: &str) -> Result<()> {
    match key {
        "max_depth" | "retrieval.max_depth" => settings.retrieval.max_depth = value.parse()?,
        "hierarchy_threshold" | "retrieval.hierarchy_threshold" => {
            settings.retrieval.hierarchy_threshold = value.parse()?
        }
        "k_doc" | "retrieval.k_doc" => settings.retrieval.k_doc = value.parse()?,
        "budget" | "retrieval.budget" => settings.retrieval.budget = value.parse()?,
        "tokenizer" | "retrieval.tokenizer" => {
            settings.retrieval.tokenizer = value.parse::<TokenizerSpec>()?
        }
        "budget_policy" | "retrieval.budget_policy" => {
            settings.retrieval.budget_policy = parse_budget_policy(value)?
        }
        "segmenter.backend" => settings.segmenter.backend = parse_segmenter(value)?,
        "segmenter.target_chunk_tokens" => settings.segmenter.target_chunk_tokens = value.parse()?,
        "segmenter.max_chunk_tokens" => settings.segmenter.max_chunk_tokens = value.parse()?,
        "embedder.backend" => apply_embedder_backend(settings, value)?,
        "embedder.dimension" => settings.embedder.dimension = value.parse()?,
        "embedder.auth_token_env" => {
            if let EmbedderBackend::Http { auth_token_env, .. } = &mut settings.embedder.backend {
                *auth_token_env = value.to_string();
            }
        }
        "gateway.backend" => apply_gateway_backend(settings, value)?,
        "gateway.endpoint" => {
            settings.gateway.backend = BackendSpec::HttpChat {
                endpoint: value.to_string(),
                auth_token_env: gateway_token_env(&settings.gateway),
            }
        }
        "gateway.auth_token_env" => {
            if let BackendSpec::HttpChat { auth_token_env, .. } = &mut settings.gateway.backend {
                *auth_token_env = value.to_string();
            }
        }
        "gateway.model" => settings.gateway.model = value.to_string(),
        "gateway.max_parallel" => settings.gateway.max_parallel = value.parse()?,
        "gateway.max_retries" => settings.gateway.max_retries = value.parse()?,
        "gateway.timeout_ms" => {
            settings.gateway.timeout = Duration::from_millis(value.parse()?)
        }
        "gateway.retry_backoff_ms" => {
            settings.gateway.retry_backoff = Duration::from_millis(value.parse()?)
        }
        "gateway.context_tokens" => settings.gateway.context_tokens = value.parse()?,
        "gateway.prompt_bundle_version" => {
            settings.gateway.prompt_bundle_version = value.to_string()
        }
        // meta-only keys that need no runtime counterpart
        "prompt_bundle_version" | "embedder.backend_detail" => {}
        other => bail!("unknown configuration key: {other}"),
    }
    Ok(())
}

fn apply_flags(settings: &mut Settings, args: &SettingsArgs) -> Result<()> {
    if let Some(v) = args.max_depth {
        settings.retrieval.max_depth = v;
    }
    if let Some(v) = args.hierarchy_threshold {
        settings.retrieval.hierarchy_threshold = v;
    }
    if let Some(v) = args.k_doc {
        settings.retrieval.k_doc = v;
    }
    if let Some(v) = args.budget {
        settings.retrieval.budget = v as usize;
    }
    if let Some(v) = &args.tokenizer {
        settings.retrieval.tokenizer = v.parse::<TokenizerSpec>()?;
    }
    if let Some(v) = &args.budget_policy {
        settings.retrieval.budget_policy = parse_budget_policy(v)?;
    }
    if let Some(v) = &args.segmenter {
        settings.segmenter.backend = parse_segmenter(v)?;
    }
    if let Some(v) = args.target_chunk_tokens {
        settings.segmenter.target_chunk_tokens = v;
    }
    if let Some(v) = args.max_chunk_tokens {
        settings.segmenter.max_chunk_tokens = v;
    }
    if let Some(v) = &args.embedder {
        apply_embedder_backend(settings, v)?;
    }
    if let Some(v) = args.dimension {
        settings.embedder.dimension = v;
    }
    if let Some(v) = &args.gateway {
        apply_gateway_backend(settings, v)?;
    }
    if let Some(v) = &args.endpoint {
        settings.gateway.backend = BackendSpec::HttpChat {
            endpoint: v.clone(),
            auth_token_env: gateway_token_env(&settings.gateway),
        };
    }
    if let Some(v) = &args.model {
        settings.gateway.model = v.clone();
    }
    if let Some(v) = args.max_parallel {
        settings.gateway.max_parallel = v;
    }
    if let Some(v) = args.max_retries {
        settings.gateway.max_retries = v;
    }
    if let Some(v) = args.timeout_ms {
        settings.gateway.timeout = Duration::from_millis(v);
    }
    if let Some(v) = args.context_tokens {
        settings.gateway.context_tokens = v;
    }
    Ok(())
}

fn gateway_token_env(spec: &GatewaySpec) -> String {
    match &spec.backend {
        BackendSpec::HttpChat { auth_token_env, .. } => auth_token_env.clone(),
        BackendSpec::Mock(_) => TOKEN_ENV.to_string(),
    }
}

fn parse_budget_policy(value: &str) -> Result<BudgetPolicy> {
    match value {
        "prefix" => Ok(BudgetPolicy::Prefix),
        "skip_greedy" => Ok(BudgetPolicy::SkipGreedy),
        other => bail!("unknown budget policy: {other} (expected prefix | skip_greedy)"),
    }
}

fn parse_segmenter(value: &str) -> Result<SegmenterBackend> {
    match value {
        "structural" => Ok(SegmenterBackend::Structural),
        "llm" => Ok(SegmenterBackend::Llm),
        other => bail!("unknown segmenter backend: {other} (expected structural | llm)"),
    }
}

fn apply_embedder_backend(settings: &mut Settings, value: &str) -> Result<()> {
    settings.embedder.backend = match value {
        "hash_mock" => EmbedderBackend::HashMock,
        other => match other.strip_prefix("http:") {
            Some(_) => EmbedderBackend::Http {
                endpoint: other.to_string(),
                auth_token_env: TOKEN_ENV.to_string(),
            },
            None => bail!("unknown embedder backend: {other} (expected hash_mock | http:<url>)"),
        },
    };
    Ok(())
}

fn apply_gateway_backend(settings: &mut Settings, value: &str) -> Result<()> {
    settings.gateway.backend = match value {
        "mock" => BackendSpec::Mock(MockScript::default()),
        "http_chat" => BackendSpec::HttpChat {
            endpoint: String::new(),
            auth_token_env: TOKEN_ENV.to_string(),
        },
        other => match other.strip_prefix("http_chat:") {
            Some(endpoint) => BackendSpec::HttpChat {
                endpoint: endpoint.to_string(),
                auth_token_env: TOKEN_ENV.to_string(),
            },
            None => bail!("unknown gateway backend: {other} (expected mock | http_chat[:<url>])"),
        },
    };
    Ok(())
}
