//! Uniform boundary to language-model backends.
//!
//! Four roles flow through here: `segment`, `structure`, `select_docs`, and
//! `navigate_nodes`. Every response is validated against the role schema on
//! the client side; the http backend retries malformed responses with a
//! repair instruction appended, the mock backend is deterministic and never
//! retried. Calls across threads share one gateway and are capped at
//! `max_parallel` in-flight requests.

mod http;
mod mock;
pub mod schema;

pub use http::{HttpTransport, Transport, TransportResponse};
pub use mock::{
    paragraph_boundaries, significant_tokens, synth_summary, MockRule, MockScript,
    NavigateDefault, SelectDefault,
};

use std::fmt;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, GatewayError, Result};
use crate::tokens::Tokenizer;

use schema::{
    ChunkPayload, MergeRootResponse, NavigateRequest, NavigateResponse, OutlineNode,
    SegmentRequest, SegmentResponse, SelectDocsRequest, SelectDocsResponse, StructureRequest,
    TitleSummary,
};

/// The four model roles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Role {
    Segment,
    Structure,
    SelectDocs,
    NavigateNodes,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Role::Segment => "segment",
            Role::Structure => "structure",
            Role::SelectDocs => "select_docs",
            Role::NavigateNodes => "navigate_nodes",
        };
        f.write_str(name)
    }
}

/// Which backend serves the calls.
#[derive(Debug, Clone)]
pub enum BackendSpec {
    /// JSON-over-HTTP chat completions, OpenAI-compatible. The endpoint may
    /// be given inline or via `FABLE_LLM_ENDPOINT`; the bearer token is read
    /// from the environment variable named by `auth_token_env`.
    HttpChat { endpoint: String, auth_token_env: String },
    /// Deterministic scripted backend for offline runs and tests.
    Mock(MockScript),
}

/// Gateway configuration.
#[derive(Debug, Clone)]
pub struct GatewaySpec {
    pub backend: BackendSpec,
    pub model: String,
    /// Upper bound on concurrently in-flight calls.
    pub max_parallel: usize,
    /// Retries after the first attempt (http backend only).
    pub max_retries: u32,
    pub timeout: Duration,
    /// Base for exponential backoff between retries.
    pub retry_backoff: Duration,
    /// Payload budget in tokens; larger payloads must be sharded by the caller.
    pub context_tokens: usize,
    /// Version tag of the shipped prompt templates, recorded in index metadata.
    pub prompt_bundle_version: String,
}

impl Default for GatewaySpec {
    fn default() -> Self {
        GatewaySpec {
            backend: BackendSpec::Mock(MockScript::default()),
            model: "default".into(),
            max_parallel: 4,
            max_retries: 2,
            timeout: Duration::from_secs(30),
            retry_backoff: Duration::from_millis(200),
            context_tokens: 131_072,
            prompt_bundle_version: PROMPT_BUNDLE_VERSION.into(),
        }
    }
}

impl GatewaySpec {
    pub fn mock(script: MockScript) -> Self {
        GatewaySpec { backend: BackendSpec::Mock(script), ..GatewaySpec::default() }
    }
}

/// Environment variable consulted when an http endpoint is not configured.
pub const ENDPOINT_ENV: &str = "FABLE_LLM_ENDPOINT";
/// Default environment variable holding the bearer token.
pub const TOKEN_ENV: &str = "FABLE_LLM_TOKEN";
/// Set to `1` to log request/response bodies (auth is never logged).
pub const GATEWAY_LOG_ENV: &str = "FABLE_GATEWAY_LOG";

/// Version of the prompt templates bundled with this build.
pub const PROMPT_BUNDLE_VERSION: &str = "v1";

const SEGMENT_PROMPT: &str = include_str!("../../prompts/segment.txt");
const STRUCTURE_PROMPT: &str = include_str!("../../prompts/structure.txt");
const SELECT_DOCS_PROMPT: &str = include_str!("../../prompts/select_docs.txt");
const NAVIGATE_PROMPT: &str = include_str!("../../prompts/navigate_nodes.txt");

fn prompt_for(role: Role) -> &'static str {
    match role {
        Role::Segment => SEGMENT_PROMPT,
        Role::Structure => STRUCTURE_PROMPT,
        Role::SelectDocs => SELECT_DOCS_PROMPT,
        Role::NavigateNodes => NAVIGATE_PROMPT,
    }
}

/// A validated response plus how many retries it took.
#[derive(Debug, Clone)]
pub struct CallOutcome<T> {
    pub value: T,
    pub retries: u32,
}

enum Backend {
    Mock(MockScript),
    Http { endpoint: String, token: Option<String>, transport: Box<dyn Transport> },
}

/// Shared, internally synchronized boundary to the model backend.
pub struct Gateway {
    backend: Backend,
    model: String,
    max_retries: u32,
    timeout: Duration,
    retry_backoff: Duration,
    context_tokens: usize,
    prompt_bundle_version: String,
    limiter: Limiter,
    log_bodies: bool,
}

impl Gateway {
    pub fn new(spec: GatewaySpec) -> Result<Self> {
        Gateway::build(spec, None)
    }

    /// Construct with a caller-provided transport (test seam for the http path).
    pub fn with_transport(spec: GatewaySpec, transport: Box<dyn Transport>) -> Result<Self> {
        Gateway::build(spec, Some(transport))
    }

    fn build(spec: GatewaySpec, transport: Option<Box<dyn Transport>>) -> Result<Self> {
        if spec.max_parallel < 1 {
            return Err(Error::Config("gateway max_parallel must be >= 1".into()));
        }
        let backend = match spec.backend {
            BackendSpec::Mock(script) => Backend::Mock(script),
            BackendSpec::HttpChat { endpoint, auth_token_env } => {
                let endpoint = if endpoint.is_empty() {
                    std::env::var(ENDPOINT_ENV).map_err(|_| {
                        Error::Config(format!(
                            "http_chat backend needs an endpoint (flag/config or {ENDPOINT_ENV})"
                        ))
                    })?
                } else {
                    endpoint
                };
                if !endpoint.starts_with("http://") {
                    return Err(Error::Config(format!(
                        "unsupported endpoint '{endpoint}': only http:// endpoints are supported; \
                         terminate TLS in a local proxy if the upstream requires https"
                    )));
                }
                let token = std::env::var(&auth_token_env).ok();
                Backend::Http {
                    endpoint,
                    token,
                    transport: transport.unwrap_or_else(|| Box::new(HttpTransport)),
                }
            }
        };
        Ok(Gateway {
            backend,
            model: spec.model,
            max_retries: spec.max_retries,
            timeout: spec.timeout,
            retry_backoff: spec.retry_backoff,
            context_tokens: spec.context_tokens,
            prompt_bundle_version: spec.prompt_bundle_version,
            limiter: Limiter::new(spec.max_parallel),
            log_bodies: std::env::var(GATEWAY_LOG_ENV).map(|v| v == "1").unwrap_or(false),
        })
    }

    pub fn prompt_bundle_version(&self) -> &str {
        &self.prompt_bundle_version
    }

    pub fn context_tokens(&self) -> usize {
        self.context_tokens
    }

    /// Chunk boundary proposal over a normalized document.
    pub fn segment(
        &self,
        req: &SegmentRequest,
    ) -> std::result::Result<CallOutcome<SegmentResponse>, GatewayError> {
        let text_len = req.text.len();
        self.call(Role::Segment, req, move |resp: &SegmentResponse| {
            let mut prev = 0usize;
            for &b in &resp.boundaries {
                if b <= prev || b >= text_len {
                    return Err(format!("boundary {b} out of order or out of range"));
                }
                prev = b;
            }
            Ok(())
        })
    }

    /// Nested outline over a chunk sequence.
    pub fn structure_outline(
        &self,
        doc_id: &str,
        chunks: Vec<ChunkPayload>,
    ) -> std::result::Result<CallOutcome<OutlineNode>, GatewayError> {
        let req = StructureRequest::Outline { doc_id: doc_id.to_string(), chunks };
        self.call(Role::Structure, &req, |_: &OutlineNode| Ok(()))
    }

    /// Fresh root title/summary over merged part summaries.
    pub fn structure_merge_root(
        &self,
        doc_id: &str,
        children: Vec<TitleSummary>,
    ) -> std::result::Result<CallOutcome<MergeRootResponse>, GatewayError> {
        let req = StructureRequest::MergeRoot { doc_id: doc_id.to_string(), children };
        self.call(Role::Structure, &req, |_: &MergeRootResponse| Ok(()))
    }

    /// Document selection over shallow ToC context.
    pub fn select_docs(
        &self,
        req: &SelectDocsRequest,
    ) -> std::result::Result<CallOutcome<SelectDocsResponse>, GatewayError> {
        self.call(Role::SelectDocs, req, |_: &SelectDocsResponse| Ok(()))
    }

    /// Node selection over full non-leaf context of the fused documents.
    pub fn navigate(
        &self,
        req: &NavigateRequest,
    ) -> std::result::Result<CallOutcome<NavigateResponse>, GatewayError> {
        self.call(Role::NavigateNodes, req, |_: &NavigateResponse| Ok(()))
    }

    fn call<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        role: Role,
        req: &Req,
        check: impl Fn(&Resp) -> std::result::Result<(), String>,
    ) -> std::result::Result<CallOutcome<Resp>, GatewayError> {
        let payload = serde_json::to_value(req).map_err(|e| GatewayError::Schema {
            attempts: 0,
            message: format!("payload serialization: {e}"),
        })?;
        let payload_text = payload.to_string();
        let payload_tokens = Tokenizer::approx_bytes().count(&payload_text);
        if payload_tokens > self.context_tokens {
            return Err(GatewayError::ContextOverflow {
                payload_tokens,
                limit: self.context_tokens,
            });
        }

        let _permit = self.limiter.acquire();
        if self.log_bodies {
            log::info!(target: "fable::gateway", "request role={role} payload={payload_text}");
        }
        match &self.backend {
            Backend::Mock(script) => {
                let value = script.respond(role, &payload).map_err(|message| {
                    GatewayError::Transport { attempts: 1, message }
                })?;
                if self.log_bodies {
                    log::info!(target: "fable::gateway", "response role={role} body={value}");
                }
                let resp: Resp = serde_json::from_value(value).map_err(|e| GatewayError::Schema {
                    attempts: 1,
                    message: format!("mock response: {e}"),
                })?;
                check(&resp).map_err(|message| GatewayError::Schema { attempts: 1, message })?;
                Ok(CallOutcome { value: resp, retries: 0 })
            }
            Backend::Http { endpoint, token, transport } => {
                self.call_http(role, &payload_text, endpoint, token.as_deref(), transport.as_ref(), check)
            }
        }
    }

    fn call_http<Resp: DeserializeOwned>(
        &self,
        role: Role,
        payload_text: &str,
        endpoint: &str,
        token: Option<&str>,
        transport: &dyn Transport,
        check: impl Fn(&Resp) -> std::result::Result<(), String>,
    ) -> std::result::Result<CallOutcome<Resp>, GatewayError> {
        let mut headers = Vec::new();
        if let Some(token) = token {
            headers.push(("Authorization".to_string(), format!("Bearer {token}")));
        }

        let attempts = self.max_retries + 1;
        let mut last_error = GatewayError::Transport { attempts, message: "no attempt ran".into() };
        let mut repair_note: Option<String> = None;

        for attempt in 0..attempts {
            if attempt > 0 {
                let backoff = self.retry_backoff * 2u32.saturating_pow(attempt - 1);
                if !backoff.is_zero() {
                    std::thread::sleep(backoff);
                }
            }
            let mut user = payload_text.to_string();
            if let Some(note) = &repair_note {
                user.push_str("\n\n");
                user.push_str(note);
            }
            let body = serde_json::json!({
                "model": self.model,
                "temperature": 0,
                "messages": [
                    { "role": "system", "content": prompt_for(role) },
                    { "role": "user", "content": user },
                ],
            })
            .to_string();

            let raw = match transport.post(endpoint, &headers, &body, self.timeout) {
                Ok(r) => r,
                Err(message) => {
                    last_error = GatewayError::Transport { attempts: attempt + 1, message };
                    continue;
                }
            };
            if self.log_bodies {
                log::info!(
                    target: "fable::gateway",
                    "response role={role} status={} body={}",
                    raw.status,
                    raw.body
                );
            }
            if raw.status != 200 {
                last_error = GatewayError::Transport {
                    attempts: attempt + 1,
                    message: format!("http status {}", raw.status),
                };
                continue;
            }
            match parse_chat_content::<Resp>(&raw.body).and_then(|resp| {
                check(&resp).map(|_| resp)
            }) {
                Ok(resp) => return Ok(CallOutcome { value: resp, retries: attempt }),
                Err(message) => {
                    repair_note = Some(
                        "The previous reply was not valid JSON for the required schema. \
                         Respond with exactly one JSON object matching the schema, no prose."
                            .to_string(),
                    );
                    last_error = GatewayError::Schema { attempts: attempt + 1, message };
                    continue;
                }
            }
        }
        Err(last_error)
    }
}

/// Extract the assistant message from a chat-completion envelope and parse it
/// as the role schema. Code fences around the JSON are tolerated.
fn parse_chat_content<Resp: DeserializeOwned>(body: &str) -> std::result::Result<Resp, String> {
    let envelope: Value = serde_json::from_str(body).map_err(|e| format!("envelope: {e}"))?;
    let content = envelope
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| "envelope missing choices[0].message.content".to_string())?;
    let trimmed = strip_fences(content);
    serde_json::from_str(trimmed).map_err(|e| format!("content: {e}"))
}

fn strip_fences(content: &str) -> &str {
    let trimmed = content.trim();
    let Some(inner) = trimmed.strip_prefix("```") else { return trimmed };
    let inner = inner.strip_prefix("json").unwrap_or(inner);
    let inner = inner.strip_suffix("```").unwrap_or(inner);
    inner.trim()
}

/// Counting semaphore bounding in-flight backend calls.
struct Limiter {
    max: usize,
    in_flight: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Limiter);

impl Limiter {
    fn new(max: usize) -> Self {
        Limiter { max, in_flight: Mutex::new(0), cv: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.in_flight.lock().unwrap();
        while *n >= self.max {
            n = self.cv.wait(n).unwrap();
        }
        *n += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.0.in_flight.lock().unwrap();
        *n -= 1;
        self.0.cv.notify_one();
    }
}
