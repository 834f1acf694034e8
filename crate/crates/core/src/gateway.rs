//! Language-model and embedding gateways.
//!
//! Both providers are reached through small traits so the pipeline can run
//! against a real chat-completion / embedding endpoint or against the
//! deterministic mocks defined here.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }
}

/// Request body sent to a chat-completion endpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

/// One prompt/response round trip, kept for the audit trail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmExchange {
    pub id: String,
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub response: String,
    pub latency_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_tokens: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion_tokens: Option<u64>,
}

impl LmExchange {
    pub fn new(model: &str, messages: Vec<ChatMessage>, response: String) -> Self {
        let id = exchange_id(&messages, &response);
        Self {
            id,
            model: model.to_string(),
            messages,
            response,
            latency_ms: 0,
            prompt_tokens: None,
            completion_tokens: None,
        }
    }
}

/// SHA-256 over the canonical JSON encoding of the message list.
pub fn prompt_hash(messages: &[ChatMessage]) -> String {
    let bytes = serde_json::to_vec(messages).expect("messages serialize");
    hex::encode(Sha256::digest(&bytes))
}

fn exchange_id(messages: &[ChatMessage], response: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(prompt_hash(messages).as_bytes());
    hasher.update([0u8]);
    hasher.update(response.as_bytes());
    hex::encode(&hasher.finalize()[..12])
}

pub trait LmGateway: Send + Sync {
    fn model(&self) -> &str;
    fn complete(&self, messages: &[ChatMessage]) -> Result<LmExchange>;
}

pub trait EmbeddingGateway: Send + Sync {
    fn dimension(&self) -> usize;
    /// Returns one vector per input, in input order.
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>>;
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}

// ---------------------------------------------------------------------------
// Retry and in-flight limiting
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay_ms: 250,
        }
    }
}

impl RetryPolicy {
    /// Runs `op` until it succeeds or the retry budget is spent, doubling the
    /// delay after each failure. Only gateway errors are retried.
    pub fn run<T>(&self, mut op: impl FnMut(u32) -> Result<T>) -> Result<T> {
        let mut attempt = 0;
        loop {
            match op(attempt) {
                Ok(v) => return Ok(v),
                Err(Error::Gateway(msg)) if attempt < self.max_retries => {
                    let delay = self.base_delay_ms.saturating_mul(1 << attempt.min(16));
                    tracing::warn!(attempt, delay, "gateway call failed: {msg}");
                    std::thread::sleep(Duration::from_millis(delay));
                    attempt += 1;
                }
                Err(Error::Gateway(msg)) => {
                    return Err(Error::Gateway(format!(
                        "gave up after {} attempts: {msg}",
                        attempt + 1
                    )))
                }
                Err(e) => return Err(e),
            }
        }
    }
}

/// Counting semaphore bounding concurrent requests to one endpoint.
#[derive(Debug)]
pub struct InFlightLimiter {
    max: usize,
    current: Mutex<usize>,
    freed: Condvar,
}

pub struct InFlightPermit<'a>(&'a InFlightLimiter);

impl InFlightLimiter {
    pub fn new(max: usize) -> Self {
        Self {
            max: max.max(1),
            current: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> InFlightPermit<'_> {
        let mut n = self.current.lock().unwrap();
        while *n >= self.max {
            n = self.freed.wait(n).unwrap();
        }
        *n += 1;
        InFlightPermit(self)
    }
}

impl Drop for InFlightPermit<'_> {
    fn drop(&mut self) {
        *self.0.current.lock().unwrap() -= 1;
        self.0.freed.notify_one();
    }
}

// ---------------------------------------------------------------------------
// HTTP gateways
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LmConfig {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: u64,
    pub retry: RetryPolicy,
    pub max_in_flight: usize,
    /// JSON pointer to the generated text in the response body.
    pub response_path: String,
    #[serde(skip)]
    pub api_key: Option<String>,
}

impl LmConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            temperature: 0.0,
            max_tokens: 512,
            timeout_secs: 60,
            retry: RetryPolicy::default(),
            max_in_flight: 4,
            response_path: "/choices/0/message/content".into(),
            api_key: None,
        }
    }
}

pub struct HttpLmGateway {
    config: LmConfig,
    client: reqwest::blocking::Client,
    limiter: InFlightLimiter,
}

impl HttpLmGateway {
    pub fn new(config: LmConfig) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        let limiter = InFlightLimiter::new(config.max_in_flight);
        Ok(Self {
            config,
            client,
            limiter,
        })
    }

    fn post(&self, body: &ChatRequest) -> Result<Value> {
        let _permit = self.limiter.acquire();
        let mut req = self.client.post(&self.config.endpoint).json(body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| Error::Gateway(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(Error::Gateway(format!("status {status}")));
        }
        resp.json::<Value>()
            .map_err(|e| Error::Gateway(format!("bad response body: {e}")))
    }
}

impl LmGateway for HttpLmGateway {
    fn model(&self) -> &str {
        &self.config.model
    }

    fn complete(&self, messages: &[ChatMessage]) -> Result<LmExchange> {
        let body = ChatRequest {
            model: self.config.model.clone(),
            messages: messages.to_vec(),
            temperature: self.config.temperature,
            max_tokens: self.config.max_tokens,
        };
        let started = Instant::now();
        let value = self.config.retry.run(|_| self.post(&body))?;
        let text = value
            .pointer(&self.config.response_path)
            .and_then(Value::as_str)
            .ok_or_else(|| {
                Error::Gateway(format!(
                    "response has no string at {}",
                    self.config.response_path
                ))
            })?;
        let mut exchange = LmExchange::new(&self.config.model, messages.to_vec(), text.to_string());
        exchange.latency_ms = started.elapsed().as_millis() as u64;
        exchange.prompt_tokens = value.pointer("/usage/prompt_tokens").and_then(Value::as_u64);
        exchange.completion_tokens = value
            .pointer("/usage/completion_tokens")
            .and_then(Value::as_u64);
        Ok(exchange)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    pub endpoint: String,
    pub model: String,
    pub dimension: usize,
    pub timeout_secs: u64,
    pub retry: RetryPolicy,
    pub batch_size: usize,
    pub max_in_flight: usize,
    #[serde(skip)]
    pub api_key: Option<String>,
}

impl EmbeddingConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, dimension: usize) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            dimension,
            timeout_secs: 60,
            retry: RetryPolicy::default(),
            batch_size: 32,
            max_in_flight: 4,
            api_key: None,
        }
    }
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

pub struct HttpEmbeddingGateway {
    config: EmbeddingConfig,
    client: reqwest::blocking::Client,
    limiter: InFlightLimiter,
}

impl HttpEmbeddingGateway {
    pub fn new(config: EmbeddingConfig) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        let limiter = InFlightLimiter::new(config.max_in_flight);
        Ok(Self {
            config,
            client,
            limiter,
        })
    }

    fn embed_batch(&self, batch: &[String]) -> Result<Vec<Vec<f64>>> {
        self.config.retry.run(|_| {
            let _permit = self.limiter.acquire();
            let body = json!({ "model": self.config.model, "input": batch });
            let mut req = self.client.post(&self.config.endpoint).json(&body);
            if let Some(key) = &self.config.api_key {
                req = req.bearer_auth(key);
            }
            let resp = req.send().map_err(|e| Error::Gateway(e.to_string()))?;
            if !resp.status().is_success() {
                return Err(Error::Gateway(format!("status {}", resp.status())));
            }
            let parsed: EmbeddingResponse = resp
                .json()
                .map_err(|e| Error::Gateway(format!("bad response body: {e}")))?;
            if parsed.data.len() != batch.len() {
                return Err(Error::Gateway(format!(
                    "expected {} embeddings, got {}",
                    batch.len(),
                    parsed.data.len()
                )));
            }
            let vectors: Vec<Vec<f64>> = parsed.data.into_iter().map(|d| d.embedding).collect();
            if let Some(v) = vectors.iter().find(|v| v.len() != self.config.dimension) {
                return Err(Error::Gateway(format!(
                    "embedding dimension {} != declared {}",
                    v.len(),
                    self.config.dimension
                )));
            }
            Ok(vectors)
        })
    }
}

impl EmbeddingGateway for HttpEmbeddingGateway {
    fn dimension(&self) -> usize {
        self.config.dimension
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        let batches: Vec<&[String]> = texts.chunks(self.config.batch_size.max(1)).collect();
        let results: Vec<Result<Vec<Vec<f64>>>> = std::thread::scope(|scope| {
            let handles: Vec<_> = batches
                .iter()
                .map(|b| scope.spawn(move || self.embed_batch(b)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("embedding worker panicked"))
                .collect()
        });
        let mut out = Vec::with_capacity(texts.len());
        for r in results {
            out.extend(r?);
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Mocks
// ---------------------------------------------------------------------------

/// Hashed bag-of-words embedder: lowercase alphanumeric tokens are counted
/// into `hash(token) mod dimension` buckets (FNV-1a, 64 bit), then the vector
/// is L2-normalised. Empty text maps to the zero vector.
#[derive(Debug, Clone, Copy)]
pub struct HashedBowEmbedder {
    dimension: usize,
}

impl Default for HashedBowEmbedder {
    fn default() -> Self {
        Self { dimension: 256 }
    }
}

impl HashedBowEmbedder {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "dimension must be positive");
        Self { dimension }
    }

    pub fn embed_one(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dimension];
        for tok in crate::text::tokens(text) {
            v[(fnv1a(tok.as_bytes()) % self.dimension as u64) as usize] += 1.0;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl EmbeddingGateway for HashedBowEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

type Responder = Box<dyn Fn(&[ChatMessage]) -> Result<String> + Send + Sync>;

/// One line of a replay file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub prompt_hash: String,
    pub response: String,
}

/// Deterministic language-model stand-in. Responses are looked up by prompt
/// hash; prompts without a replay entry go to the fallback responder, or fail
/// when none is installed.
pub struct MockLmGateway {
    model: String,
    replay: BTreeMap<String, String>,
    fallback: Option<Responder>,
    calls: AtomicUsize,
}

impl MockLmGateway {
    pub fn new() -> Self {
        Self {
            model: "mock".into(),
            replay: BTreeMap::new(),
            fallback: None,
            calls: AtomicUsize::new(0),
        }
    }

    /// Replies with `f(messages)` for every prompt.
    pub fn from_fn(f: impl Fn(&[ChatMessage]) -> Result<String> + Send + Sync + 'static) -> Self {
        Self::new().with_fallback(f)
    }

    /// Replies with the concatenated user content.
    pub fn echo() -> Self {
        Self::from_fn(|msgs| {
            Ok(msgs
                .iter()
                .filter(|m| m.role == Role::User)
                .map(|m| m.content.as_str())
                .collect::<Vec<_>>()
                .join("\n"))
        })
    }

    /// Always returns `text`.
    pub fn fixed(text: impl Into<String>) -> Self {
        let text = text.into();
        Self::from_fn(move |_| Ok(text.clone()))
    }

    /// Builds answers from the prompt content itself; see [`synthetic_reply`].
    pub fn synthetic() -> Self {
        Self::from_fn(|msgs| Ok(synthetic_reply(msgs)))
    }

    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model = model.into();
        self
    }

    pub fn with_fallback(
        mut self,
        f: impl Fn(&[ChatMessage]) -> Result<String> + Send + Sync + 'static,
    ) -> Self {
        self.fallback = Some(Box::new(f));
        self
    }

    pub fn with_replay(mut self, entries: impl IntoIterator<Item = ReplayEntry>) -> Self {
        for e in entries {
            self.replay.insert(e.prompt_hash, e.response);
        }
        self
    }

    pub fn insert(&mut self, messages: &[ChatMessage], response: impl Into<String>) {
        self.replay.insert(prompt_hash(messages), response.into());
    }

    pub fn load_replay_file(self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: ReplayEntry = serde_json::from_str(line)
                .map_err(|e| Error::parse(i + 1, format!("replay entry: {e}")))?;
            entries.push(entry);
        }
        Ok(self.with_replay(entries))
    }

    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Default for MockLmGateway {
    fn default() -> Self {
        Self::new()
    }
}

impl LmGateway for MockLmGateway {
    fn model(&self) -> &str {
        &self.model
    }

    fn complete(&self, messages: &[ChatMessage]) -> Result<LmExchange> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let hash = prompt_hash(messages);
        let response = match (self.replay.get(&hash), &self.fallback) {
            (Some(r), _) => r.clone(),
            (None, Some(f)) => f(messages)?,
            (None, None) => {
                return Err(Error::Gateway(format!("no replay entry for prompt {hash}")))
            }
        };
        Ok(LmExchange::new(&self.model, messages.to_vec(), response))
    }
}

/// Writes exchanges as a replay file that [`MockLmGateway::load_replay_file`] reads back.
pub fn write_replay_file(path: &Path, exchanges: &[LmExchange]) -> Result<()> {
    let mut out = String::new();
    for ex in exchanges {
        let entry = ReplayEntry {
            prompt_hash: prompt_hash(&ex.messages),
            response: ex.response.clone(),
        };
        out.push_str(&serde_json::to_string(&entry)?);
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Deterministic reply generator used by the offline mock. It reads the
/// labelled lines of the shipped prompt templates (`Genes:`, `Term name:`,
/// `[PMID:n]`, `Anatomical location:` ...) and composes a plausible answer.
pub fn synthetic_reply(messages: &[ChatMessage]) -> String {
    let system = messages
        .iter()
        .find(|m| m.role == Role::System)
        .map(|m| m.content.as_str())
        .unwrap_or("");
    let user: String = messages
        .iter()
        .filter(|m| m.role == Role::User)
        .map(|m| m.content.as_str())
        .collect::<Vec<_>>()
        .join("\n");

    let field = |label: &str| -> Option<String> {
        user.lines()
            .find_map(|l| l.trim().strip_prefix(label))
            .map(|v| v.trim().to_string())
            .filter(|v| !v.is_empty())
    };
    let pmid_re = Regex::new(r"\[PMID:(\d+)\]\s*([^\n]*)").unwrap();
    let evidence: Vec<(String, String)> = pmid_re
        .captures_iter(&user)
        .map(|c| (c[1].to_string(), c[2].to_string()))
        .collect();
    let genes: Vec<String> = field("Genes:")
        .map(|g| g.split([',', ' ']).filter(|s| !s.is_empty()).map(String::from).collect())
        .unwrap_or_default();
    let lead = genes.iter().take(3).cloned().collect::<Vec<_>>().join(", ");

    if system.contains("ontology narrator") {
        let name = field("Term name:").unwrap_or_else(|| "this process".into());
        let def = field("Definition:").unwrap_or_default();
        return format!("Genes in this set are involved in {name}. {def}").trim().to_string();
    }
    if system.contains("Cell-Summary Agent") {
        let location = field("Anatomical location:").unwrap_or_else(|| "the brain".into());
        let nt = field("Neurotransmitter:").unwrap_or_else(|| "unassigned".into());
        let first = field("Annotation:").unwrap_or_else(|| "shared neuronal functions".into());
        let first = crate::text::truncate_sentences(&first, 1);
        let cites: Vec<String> = evidence.iter().take(2).map(|(p, _)| format!("[PMID:{p}]")).collect();
        return format!(
            "BRIEF: This {nt} cell type is located in {location}. {first} {}\nDETAILED: Marker gene set annotations were combined with the anatomical context ({location}) and neurotransmitter identity ({nt}). {first} Supporting literature: {}.",
            cites.join(" "),
            if cites.is_empty() { "none".to_string() } else { cites.join(", ") }
        )
        .replace("  ", " ");
    }
    if system.contains("editor") {
        let previous = field("Previous answer:").unwrap_or_default();
        return crate::text::truncate_sentences(&previous, 2);
    }
    if system.contains("RAG Agent") {
        if let Some((pmid, title)) = evidence.first() {
            let topic = title
                .split(['.', '\n'])
                .next()
                .unwrap_or("")
                .trim()
                .to_lowercase();
            return format!(
                "The {lead} genes contribute to {topic} [PMID:{pmid}]. Together these marker genes define a specialised neuronal population."
            );
        }
        return format!("The {lead} genes share neuronal functions. No literature was supplied.");
    }
    if genes.is_empty() {
        return "Functions in neuronal signaling.".into();
    }
    format!("The {lead} genes act together in neuronal signaling and synaptic transmission.")
}
