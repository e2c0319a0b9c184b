//! Blocking JSON-over-HTTP backends with retry, plus a JSONL call tracer.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::{json, Value};

use crate::llm::{check_budget, LlmClient, LlmError};
use crate::retrieval::{EmbeddingProvider, RetrievalError};
use crate::tokens::TokenCounter;

pub const API_KEY_ENV: &str = "AFIE_API_KEY";

/// Appends one JSON object per backend call.
pub struct Tracer {
    out: Mutex<BufWriter<File>>,
}

impl Tracer {
    pub fn create(path: &Path) -> std::io::Result<Self> {
        Ok(Self {
            out: Mutex::new(BufWriter::new(File::create(path)?)),
        })
    }

    pub fn record(&self, kind: &str, request: &Value, outcome: Result<&Value, &str>, elapsed: Duration) {
        let mut entry = json!({
            "kind": kind,
            "request": request,
            "elapsed_ms": elapsed.as_millis() as u64,
        });
        match outcome {
            Ok(resp) => entry["response"] = resp.clone(),
            Err(e) => entry["error"] = Value::String(e.to_string()),
        }
        let mut out = self.out.lock().expect("trace lock");
        // tracing is best effort; a full disk must not fail the run
        if writeln!(out, "{entry}").and_then(|_| out.flush()).is_err() {
            log::warn!("failed to write trace entry");
        }
    }
}

#[derive(Debug, Clone)]
pub struct HttpSettings {
    pub url: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub attempts: u32,
    pub backoff: Duration,
}

impl HttpSettings {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            timeout: Duration::from_secs(60),
            attempts: 3,
            backoff: Duration::from_millis(500),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PostError {
    /// Non-retryable client error.
    Rejected { status: u16, body: String },
    /// Retries exhausted on connection failures or 5xx/429 responses.
    Exhausted { attempts: u32, message: String },
    Decode(String),
}

impl std::fmt::Display for PostError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PostError::Rejected { status, body } => write!(f, "status {status}: {body}"),
            PostError::Exhausted { attempts, message } => write!(f, "failed after {attempts} attempts: {message}"),
            PostError::Decode(m) => write!(f, "undecodable response: {m}"),
        }
    }
}

impl std::error::Error for PostError {}

struct JsonPoster {
    settings: HttpSettings,
    client: reqwest::blocking::Client,
}

impl JsonPoster {
    fn new(settings: HttpSettings) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(settings.timeout)
            .build()
            .expect("TLS backend initialises");
        Self { settings, client }
    }

    fn post(&self, body: &Value) -> Result<Value, PostError> {
        let attempts = self.settings.attempts.max(1);
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(self.settings.backoff * 2u32.pow(attempt - 1));
            }
            let mut req = self.client.post(&self.settings.url).json(body);
            if let Some(key) = &self.settings.api_key {
                req = req.bearer_auth(key);
            }
            match req.send() {
                Err(e) => last = e.to_string(),
                Ok(resp) => {
                    let status = resp.status();
                    let text = resp.text().unwrap_or_default();
                    if status.is_success() {
                        return serde_json::from_str(&text).map_err(|e| PostError::Decode(e.to_string()));
                    }
                    if status.is_client_error() && status.as_u16() != 429 {
                        return Err(PostError::Rejected {
                            status: status.as_u16(),
                            body: text,
                        });
                    }
                    last = format!("status {}: {text}", status.as_u16());
                }
            }
            log::warn!("POST {} attempt {} failed: {last}", self.settings.url, attempt + 1);
        }
        Err(PostError::Exhausted { attempts, message: last })
    }

    fn traced_post(&self, kind: &str, tracer: Option<&Tracer>, body: &Value) -> Result<Value, PostError> {
        let start = Instant::now();
        let out = self.post(body);
        if let Some(t) = tracer {
            match &out {
                Ok(v) => t.record(kind, body, Ok(v), start.elapsed()),
                Err(e) => t.record(kind, body, Err(&e.to_string()), start.elapsed()),
            }
        }
        out
    }
}

/// Completion endpoint: POST {prompt, max_tokens, temperature, model} -> {text}.
pub struct HttpLlm {
    poster: JsonPoster,
    model: String,
    window: usize,
    counter: Arc<dyn TokenCounter>,
    tracer: Option<Arc<Tracer>>,
}

impl HttpLlm {
    pub fn new(settings: HttpSettings, model: impl Into<String>, window: usize, counter: Arc<dyn TokenCounter>) -> Self {
        Self {
            poster: JsonPoster::new(settings),
            model: model.into(),
            window,
            counter,
            tracer: None,
        }
    }

    pub fn with_tracer(mut self, tracer: Arc<Tracer>) -> Self {
        self.tracer = Some(tracer);
        self
    }
}

#[derive(Deserialize)]
struct CompletionResponse {
    text: String,
}

impl LlmClient for HttpLlm {
    fn complete(&self, prompt: &str, max_output_tokens: usize) -> Result<String, LlmError> {
        check_budget(self.counter.as_ref(), prompt, max_output_tokens, self.window)?;
        let body = json!({
            "prompt": prompt,
            "max_tokens": max_output_tokens,
            "temperature": 0,
            "model": self.model,
        });
        let value = self
            .poster
            .traced_post("llm", self.tracer.as_deref(), &body)
            .map_err(|e| match e {
                PostError::Rejected { status, body } => LlmError::Rejected { status, body },
                PostError::Exhausted { attempts, message } => LlmError::Transport { attempts, message },
                PostError::Decode(m) => LlmError::BadResponse(m),
            })?;
        let resp: CompletionResponse =
            serde_json::from_value(value).map_err(|e| LlmError::BadResponse(e.to_string()))?;
        Ok(resp.text)
    }

    fn window(&self) -> usize {
        self.window
    }
}

/// Embedding endpoint: POST {texts} -> {vectors}. Vectors are L2-normalized locally.
pub struct HttpEmbedder {
    poster: JsonPoster,
    max_input_tokens: usize,
    tracer: Option<Arc<Tracer>>,
}

impl HttpEmbedder {
    pub fn new(settings: HttpSettings, max_input_tokens: usize) -> Self {
        Self {
            poster: JsonPoster::new(settings),
            max_input_tokens,
            tracer: None,
        }
    }

    pub fn with_tracer(mut self, tracer: Arc<Tracer>) -> Self {
        self.tracer = Some(tracer);
        self
    }
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    vectors: Vec<Vec<f64>>,
}

impl EmbeddingProvider for HttpEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, RetrievalError> {
        let value = self
            .poster
            .traced_post("embedding", self.tracer.as_deref(), &json!({ "texts": texts }))
            .map_err(|e| RetrievalError::Provider(Box::new(e)))?;
        let resp: EmbeddingResponse =
            serde_json::from_value(value).map_err(|e| RetrievalError::Provider(Box::new(e)))?;
        Ok(resp
            .vectors
            .into_iter()
            .map(|mut v| {
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    v.iter_mut().for_each(|x| *x /= norm);
                }
                v
            })
            .collect())
    }

    fn max_input_tokens(&self) -> usize {
        self.max_input_tokens
    }
}

/// Wraps any client so its calls land in the trace file.
pub struct TracedLlm<C> {
    inner: C,
    tracer: Arc<Tracer>,
}

impl<C: LlmClient> TracedLlm<C> {
    pub fn new(inner: C, tracer: Arc<Tracer>) -> Self {
        Self { inner, tracer }
    }
}

impl<C: LlmClient> LlmClient for TracedLlm<C> {
    fn complete(&self, prompt: &str, max_output_tokens: usize) -> Result<String, LlmError> {
        let start = Instant::now();
        let out = self.inner.complete(prompt, max_output_tokens);
        let request = json!({ "prompt": prompt, "max_tokens": max_output_tokens });
        match &out {
            Ok(text) => self.tracer.record("llm", &request, Ok(&json!({ "text": text })), start.elapsed()),
            Err(e) => self.tracer.record("llm", &request, Err(&e.to_string()), start.elapsed()),
        }
        out
    }

    fn window(&self) -> usize {
        self.inner.window()
    }
}

/// Wraps any embedder so its calls land in the trace file.
pub struct TracedEmbedder<E> {
    inner: E,
    tracer: Arc<Tracer>,
}

impl<E: EmbeddingProvider> TracedEmbedder<E> {
    pub fn new(inner: E, tracer: Arc<Tracer>) -> Self {
        Self { inner, tracer }
    }
}

impl<E: EmbeddingProvider> EmbeddingProvider for TracedEmbedder<E> {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, RetrievalError> {
        let start = Instant::now();
        let out = self.inner.embed(texts);
        let request = json!({ "texts": texts });
        match &out {
            Ok(v) => self.tracer.record("embedding", &request, Ok(&json!({ "vectors": v })), start.elapsed()),
            Err(e) => self.tracer.record("embedding", &request, Err(&e.to_string()), start.elapsed()),
        }
        out
    }

    fn max_input_tokens(&self) -> usize {
        self.inner.max_input_tokens()
    }
}
