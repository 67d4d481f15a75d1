//! Chat-completion backends: a minimal HTTP client with retry/backoff,
//! plus stub, scripted, recording, and replay backends for offline runs.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rate limited (status 429)")]
    RateLimited,
    #[error("http status {status}: {body}")]
    Http { status: u16, body: String },
    #[error("response missing message content")]
    MalformedResponse,
    #[error("no recorded fixture for prompt (sha prefix {0})")]
    MissingFixture(String),
    #[error("fixture file error: {0}")]
    FixtureIo(String),
    #[error("api key environment variable {0} is not set")]
    MissingCredentials(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// A chat-completion request: the minimal JSON exchange understood by
/// common public endpoints.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

impl ChatRequest {
    pub fn user_prompt(model: &str, prompt: &str, temperature: f64) -> Self {
        ChatRequest {
            model: model.to_string(),
            messages: vec![ChatMessage {
                role: "user".to_string(),
                content: prompt.to_string(),
            }],
            temperature,
        }
    }

    /// The final user-message content; fixture keys are derived from it.
    pub fn prompt_text(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == "user")
            .map(|m| m.content.as_str())
            .unwrap_or("")
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub prompt_tokens: Option<u32>,
    pub completion_tokens: Option<u32>,
    pub latency_ms: Option<u64>,
}

impl ChatResponse {
    pub fn text(content: impl Into<String>) -> Self {
        ChatResponse {
            content: content.into(),
            prompt_tokens: None,
            completion_tokens: None,
            latency_ms: None,
        }
    }
}

pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError>;

    fn name(&self) -> &str {
        "chat"
    }
}

// ---------------------------------------------------------------------------
// HTTP backend

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    content: String,
}

#[derive(Deserialize)]
struct WireUsage {
    prompt_tokens: Option<u32>,
    completion_tokens: Option<u32>,
}

/// Blocking chat-completion client. Credentials come from the environment,
/// never from source or config files.
pub struct HttpChatBackend {
    endpoint: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
    max_attempts: usize,
    base_backoff: Duration,
}

impl HttpChatBackend {
    pub fn new(endpoint: &str, api_key_env: &str) -> Result<Self, BackendError> {
        let api_key = match std::env::var(api_key_env) {
            Ok(key) if !key.is_empty() => Some(key),
            _ if api_key_env.is_empty() => None,
            _ => return Err(BackendError::MissingCredentials(api_key_env.to_string())),
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(HttpChatBackend {
            endpoint: endpoint.to_string(),
            api_key,
            client,
            max_attempts: 5,
            base_backoff: Duration::from_millis(500),
        })
    }

    fn attempt(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let start = Instant::now();
        let mut builder = self.client.post(&self.endpoint).json(request);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder
            .send()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = response.status();
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err(BackendError::Auth(format!("status {status}")));
        }
        if status.as_u16() == 429 {
            return Err(BackendError::RateLimited);
        }
        if !status.is_success() {
            let body = response.text().unwrap_or_default();
            return Err(BackendError::Http {
                status: status.as_u16(),
                body: body.chars().take(500).collect(),
            });
        }
        let wire: WireResponse = response
            .json()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let latency_ms = start.elapsed().as_millis() as u64;
        let usage = wire.usage;
        let content = wire
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or(BackendError::MalformedResponse)?;
        Ok(ChatResponse {
            content,
            prompt_tokens: usage.as_ref().and_then(|u| u.prompt_tokens),
            completion_tokens: usage.as_ref().and_then(|u| u.completion_tokens),
            latency_ms: Some(latency_ms),
        })
    }
}

impl ChatBackend for HttpChatBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let mut backoff = self.base_backoff;
        let mut last_err = BackendError::Transport("no attempts made".into());
        for attempt in 0..self.max_attempts {
            match self.attempt(request) {
                Ok(resp) => return Ok(resp),
                Err(e @ (BackendError::Auth(_) | BackendError::MalformedResponse)) => {
                    return Err(e)
                }
                Err(e @ BackendError::Http { status, .. }) if status < 500 => return Err(e),
                Err(e) => {
                    log::warn!("chat request attempt {} failed: {e}", attempt + 1);
                    last_err = e;
                    std::thread::sleep(backoff);
                    backoff = backoff.saturating_mul(2);
                }
            }
        }
        Err(last_err)
    }

    fn name(&self) -> &str {
        "http"
    }
}

// ---------------------------------------------------------------------------
// Test and offline backends

/// Returns canned responses in order, then repeats the last one.
pub struct StubBackend {
    responses: Mutex<VecDeque<String>>,
    last: Mutex<String>,
}

impl StubBackend {
    pub fn new(responses: Vec<String>) -> Self {
        let last = responses.last().cloned().unwrap_or_default();
        StubBackend {
            responses: Mutex::new(responses.into()),
            last: Mutex::new(last),
        }
    }

    pub fn fixed(response: &str) -> Self {
        Self::new(vec![response.to_string()])
    }
}

impl ChatBackend for StubBackend {
    fn complete(&self, _request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let mut queue = self.responses.lock().unwrap();
        let content = match queue.pop_front() {
            Some(r) => {
                *self.last.lock().unwrap() = r.clone();
                r
            }
            None => self.last.lock().unwrap().clone(),
        };
        Ok(ChatResponse::text(content))
    }

    fn name(&self) -> &str {
        "stub"
    }
}

/// Deterministic offline responder: reads the two bundle lines out of the
/// prompt and prefers the bundle whose course-id sum is smaller, answering
/// in the full tagged format. Exercises the render/parse path without a
/// live model.
pub struct ScriptedChoiceBackend;

fn bundle_ids(prompt: &str, label: &str) -> Vec<u32> {
    prompt
        .lines()
        .find_map(|line| line.strip_prefix(&format!("Bundle {label}: ")))
        .map(|rest| {
            rest.split(',')
                .filter_map(|part| part.trim().strip_prefix("Course ")?.trim().parse().ok())
                .collect()
        })
        .unwrap_or_default()
}

impl ChatBackend for ScriptedChoiceBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let prompt = request.prompt_text();
        let a = bundle_ids(prompt, "A");
        let b = bundle_ids(prompt, "B");
        let pick = if a.iter().sum::<u32>() <= b.iter().sum::<u32>() {
            "A"
        } else {
            "B"
        };
        let content = format!(
            "<PREFERENCES>\nBundle A: Bundle A contains {} courses. Bundle B: Bundle B \
             contains {} courses.\n</PREFERENCES>\n<COMPLEMENTS>\nBundle A: None. Bundle B: \
             None.\n</COMPLEMENTS>\n<SUBSTITUTES>\nBundle A: None. Bundle B: None.\n\
             </SUBSTITUTES>\n<REASONING>\nComparing the two bundles on the stated \
             preferences, Bundle {pick} comes out ahead.\n</REASONING>\n<CHOICE>Bundle \
             {pick}</CHOICE>",
            a.len(),
            b.len()
        );
        Ok(ChatResponse {
            content,
            prompt_tokens: Some(prompt.split_whitespace().count() as u32),
            completion_tokens: Some(48),
            latency_ms: Some(0),
        })
    }

    fn name(&self) -> &str {
        "scripted"
    }
}

// ---------------------------------------------------------------------------
// Record / replay

/// One recorded request/response exchange. The fixture format is versioned
/// line-delimited JSON keyed by the verbatim prompt.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub version: u32,
    pub prompt: String,
    pub response: String,
    pub prompt_tokens: Option<u32>,
    pub completion_tokens: Option<u32>,
    pub latency_ms: Option<u64>,
}

pub const FIXTURE_VERSION: u32 = 1;

/// Wraps a backend and appends every exchange to a fixture file.
pub struct RecordingBackend<B: ChatBackend> {
    inner: B,
    sink: Mutex<Box<dyn Write + Send>>,
}

impl<B: ChatBackend> RecordingBackend<B> {
    pub fn create<P: AsRef<Path>>(inner: B, path: P) -> Result<Self, BackendError> {
        let file = std::fs::File::create(path).map_err(|e| BackendError::FixtureIo(e.to_string()))?;
        Ok(RecordingBackend {
            inner,
            sink: Mutex::new(Box::new(std::io::BufWriter::new(file))),
        })
    }
}

impl<B: ChatBackend> ChatBackend for RecordingBackend<B> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let response = self.inner.complete(request)?;
        let entry = FixtureEntry {
            version: FIXTURE_VERSION,
            prompt: request.prompt_text().to_string(),
            response: response.content.clone(),
            prompt_tokens: response.prompt_tokens,
            completion_tokens: response.completion_tokens,
            latency_ms: response.latency_ms,
        };
        let mut sink = self.sink.lock().unwrap();
        let line = serde_json::to_string(&entry).map_err(|e| BackendError::FixtureIo(e.to_string()))?;
        writeln!(sink, "{line}").map_err(|e| BackendError::FixtureIo(e.to_string()))?;
        sink.flush().map_err(|e| BackendError::FixtureIo(e.to_string()))?;
        Ok(response)
    }

    fn name(&self) -> &str {
        "recording"
    }
}

/// Replays recorded exchanges keyed by the verbatim prompt; repeated asks
/// of the same prompt consume recorded responses in order, then repeat the
/// last. Makes the whole pipeline reproducible without a network.
pub struct ReplayBackend {
    fixtures: Mutex<HashMap<String, VecDeque<FixtureEntry>>>,
}

impl ReplayBackend {
    pub fn from_path<P: AsRef<Path>>(path: P) -> Result<Self, BackendError> {
        let file = std::fs::File::open(path).map_err(|e| BackendError::FixtureIo(e.to_string()))?;
        let mut fixtures: HashMap<String, VecDeque<FixtureEntry>> = HashMap::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| BackendError::FixtureIo(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: FixtureEntry =
                serde_json::from_str(&line).map_err(|e| BackendError::FixtureIo(e.to_string()))?;
            if entry.version != FIXTURE_VERSION {
                return Err(BackendError::FixtureIo(format!(
                    "unsupported fixture version {}",
                    entry.version
                )));
            }
            fixtures.entry(entry.prompt.clone()).or_default().push_back(entry);
        }
        Ok(ReplayBackend {
            fixtures: Mutex::new(fixtures),
        })
    }
}

impl ChatBackend for ReplayBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let prompt = request.prompt_text();
        let mut fixtures = self.fixtures.lock().unwrap();
        let queue = fixtures.get_mut(prompt).ok_or_else(|| {
            let prefix: String = prompt.chars().take(40).collect();
            BackendError::MissingFixture(prefix)
        })?;
        let entry = if queue.len() > 1 {
            queue.pop_front().expect("non-empty queue")
        } else {
            queue.front().cloned().expect("non-empty queue")
        };
        Ok(ChatResponse {
            content: entry.response,
            prompt_tokens: entry.prompt_tokens,
            completion_tokens: entry.completion_tokens,
            latency_ms: entry.latency_ms,
        })
    }

    fn name(&self) -> &str {
        "replay"
    }
}
