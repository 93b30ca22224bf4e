//! Chat-completion sessions with live HTTP, scripted replay and recording backends.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Condvar, Mutex, OnceLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub const API_KEY_ENV: &str = "ROBOTGPT_API_KEY";
pub const DECISION_TEMPERATURE: f32 = 1.0;
pub const EVAL_TEMPERATURE: f32 = 0.0;
pub const CORRECTOR_TEMPERATURE: f32 = 0.0;

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("TRANSPORT: {0}")]
    Transport(String),
    #[error("API_ERROR: HTTP {status}: {body}")]
    Api { status: u16, body: String },
    #[error("FIXTURE_EXHAUSTED: no scripted reply left after {consumed} replies")]
    FixtureExhausted { consumed: usize },
    #[error("FIXTURE_MISMATCH at message {index}: expected {expected:?}, got {actual:?}")]
    FixtureMismatch { index: usize, expected: String, actual: String },
    #[error("IO: {0}")]
    Io(#[from] std::io::Error),
    #[error("MALFORMED_FIXTURE: {0}")]
    MalformedFixture(String),
    #[error("missing API key: set {API_KEY_ENV}")]
    MissingApiKey,
    #[error("invalid transcript: {0}")]
    Transcript(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

/// Append-only conversation; after an optional system message, roles
/// alternate starting with the user.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatTranscript {
    pub model: String,
    pub temperature: f32,
    pub messages: Vec<ChatMessage>,
}

impl ChatTranscript {
    pub fn new(model: &str, temperature: f32, system: Option<&str>) -> Self {
        let messages = system
            .map(|s| vec![ChatMessage { role: Role::System, content: s.to_string() }])
            .unwrap_or_default();
        Self { model: model.to_string(), temperature, messages }
    }

    fn expected_next(&self) -> Role {
        match self.messages.last().map(|m| m.role) {
            None | Some(Role::System) | Some(Role::Assistant) => Role::User,
            Some(Role::User) => Role::Assistant,
        }
    }

    pub fn push(&mut self, role: Role, content: &str) -> Result<(), LlmError> {
        let want = self.expected_next();
        if role != want {
            return Err(LlmError::Transcript(format!("expected a {want:?} message, got {role:?}")));
        }
        self.messages.push(ChatMessage { role, content: content.to_string() });
        Ok(())
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        let mut check = ChatTranscript::new(&self.model, self.temperature, None);
        for (i, m) in self.messages.iter().enumerate() {
            if m.role == Role::System {
                if i != 0 {
                    return Err(LlmError::Transcript(format!("system message at position {i}")));
                }
                check.messages.push(m.clone());
                continue;
            }
            check.push(m.role, &m.content)?;
        }
        Ok(())
    }

    pub fn assistant_replies(&self) -> impl Iterator<Item = &str> {
        self.messages.iter().filter(|m| m.role == Role::Assistant).map(|m| m.content.as_str())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("transcript serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, LlmError> {
        let t: ChatTranscript = serde_json::from_str(text).map_err(|e| LlmError::MalformedFixture(e.to_string()))?;
        t.validate().map_err(|e| LlmError::MalformedFixture(e.to_string()))?;
        Ok(t)
    }

    pub fn save(&self, path: &Path) -> Result<(), LlmError> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, LlmError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Produces the assistant reply to a transcript ending in a user message.
pub trait ChatBackend: Send {
    fn complete(&mut self, transcript: &ChatTranscript) -> Result<String, LlmError>;
}

/// Replays assistant messages from a recorded transcript.
///
/// In strict mode every message sent so far must equal the fixture's message
/// at the same position.
#[derive(Clone, Debug)]
pub struct ScriptedBackend {
    fixture: ChatTranscript,
    strict: bool,
    consumed: usize,
}

impl ScriptedBackend {
    pub fn new(fixture: ChatTranscript, strict: bool) -> Self {
        Self { fixture, strict, consumed: 0 }
    }

    pub fn from_file(path: &Path, strict: bool) -> Result<Self, LlmError> {
        Ok(Self::new(ChatTranscript::load(path)?, strict))
    }

    /// Builds a fixture from bare replies; only useful without strict matching.
    pub fn from_replies<S: AsRef<str>>(replies: &[S]) -> Self {
        let messages = replies
            .iter()
            .flat_map(|r| {
                [
                    ChatMessage { role: Role::User, content: String::new() },
                    ChatMessage { role: Role::Assistant, content: r.as_ref().to_string() },
                ]
            })
            .collect();
        Self::new(ChatTranscript { model: "scripted".into(), temperature: 0.0, messages }, false)
    }

    pub fn consumed(&self) -> usize {
        self.consumed
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&mut self, transcript: &ChatTranscript) -> Result<String, LlmError> {
        let exhausted = LlmError::FixtureExhausted { consumed: self.consumed };
        if self.strict {
            let n = transcript.messages.len();
            for (i, sent) in transcript.messages.iter().enumerate() {
                let Some(want) = self.fixture.messages.get(i) else {
                    return Err(exhausted);
                };
                if want != sent {
                    return Err(LlmError::FixtureMismatch {
                        index: i,
                        expected: want.content.clone(),
                        actual: sent.content.clone(),
                    });
                }
            }
            match self.fixture.messages.get(n) {
                Some(m) if m.role == Role::Assistant => {
                    self.consumed += 1;
                    Ok(m.content.clone())
                }
                _ => Err(exhausted),
            }
        } else {
            let reply = self.fixture.assistant_replies().nth(self.consumed).map(str::to_string).ok_or(exhausted)?;
            self.consumed += 1;
            Ok(reply)
        }
    }
}

/// Wraps a backend and rewrites `path` with the full transcript after every reply.
pub struct RecordingBackend<B> {
    inner: B,
    path: PathBuf,
}

impl<B: ChatBackend> RecordingBackend<B> {
    pub fn new(inner: B, path: impl Into<PathBuf>) -> Self {
        Self { inner, path: path.into() }
    }
}

impl<B: ChatBackend> ChatBackend for RecordingBackend<B> {
    fn complete(&mut self, transcript: &ChatTranscript) -> Result<String, LlmError> {
        let reply = self.inner.complete(transcript)?;
        let mut record = transcript.clone();
        record.push(Role::Assistant, &reply)?;
        record.save(&self.path)?;
        Ok(reply)
    }
}

/// Counting semaphore bounding concurrent HTTP requests.
#[derive(Debug)]
pub struct Limiter {
    max: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
}

impl Limiter {
    pub fn new(max: usize) -> Self {
        Self { max: max.max(1), in_flight: Mutex::new(0), freed: Condvar::new() }
    }

    /// Process-wide limiter; the first caller fixes its size.
    pub fn global(max: usize) -> Arc<Limiter> {
        static GLOBAL: OnceLock<Arc<Limiter>> = OnceLock::new();
        GLOBAL.get_or_init(|| Arc::new(Limiter::new(max))).clone()
    }

    fn acquire(&self) -> LimiterGuard<'_> {
        let mut n = self.in_flight.lock().expect("limiter lock");
        while *n >= self.max {
            n = self.freed.wait(n).expect("limiter lock");
        }
        *n += 1;
        LimiterGuard(self)
    }
}

struct LimiterGuard<'a>(&'a Limiter);

impl Drop for LimiterGuard<'_> {
    fn drop(&mut self) {
        *self.0.in_flight.lock().expect("limiter lock") -= 1;
        self.0.freed.notify_one();
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HttpConfig {
    /// Full chat-completions URL.
    pub endpoint: String,
    pub timeout: Duration,
    /// Retries after the first attempt for transport failures.
    pub retries: u32,
    pub backoff: Duration,
    pub max_in_flight: usize,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            timeout: Duration::from_secs(120),
            retries: 3,
            backoff: Duration::from_millis(500),
            max_in_flight: 4,
        }
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f32,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    content: String,
}

pub struct HttpBackend {
    cfg: HttpConfig,
    key: String,
    agent: ureq::Agent,
    limiter: Arc<Limiter>,
}

impl HttpBackend {
    /// Reads the key from `ROBOTGPT_API_KEY`.
    pub fn from_env(cfg: HttpConfig) -> Result<Self, LlmError> {
        let key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()).ok_or(LlmError::MissingApiKey)?;
        Ok(Self::with_key(cfg, key))
    }

    pub fn with_key(cfg: HttpConfig, key: String) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let limiter = Limiter::global(cfg.max_in_flight);
        Self { cfg, key, agent, limiter }
    }

    fn attempt(&self, body: &WireRequest<'_>) -> Result<Result<String, LlmError>, ureq::Error> {
        let _slot = self.limiter.acquire();
        let mut resp = self
            .agent
            .post(&self.cfg.endpoint)
            .header("Authorization", &format!("Bearer {}", self.key))
            .send_json(body)?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string()?;
        if !(200..300).contains(&status) {
            return Ok(Err(LlmError::Api { status, body: text }));
        }
        Ok(serde_json::from_str::<WireResponse>(&text)
            .map_err(|e| LlmError::Api { status, body: format!("unreadable response ({e}): {text}") })
            .and_then(|r| {
                r.choices
                    .into_iter()
                    .next()
                    .map(|c| c.message.content)
                    .ok_or(LlmError::Api { status, body: "response has no choices".into() })
            }))
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&mut self, transcript: &ChatTranscript) -> Result<String, LlmError> {
        let body = WireRequest { model: &transcript.model, messages: &transcript.messages, temperature: transcript.temperature };
        let mut delay = self.cfg.backoff;
        let mut last = String::new();
        for attempt in 0..=self.cfg.retries {
            match self.attempt(&body) {
                Ok(result) => return result,
                Err(e) => {
                    last = e.to_string();
                    log::warn!("chat request attempt {} failed: {last}", attempt + 1);
                    if attempt < self.cfg.retries {
                        std::thread::sleep(delay);
                        delay *= 2;
                    }
                }
            }
        }
        Err(LlmError::Transport(last))
    }
}

/// A transcript bound to a backend.
pub struct BotSession {
    pub transcript: ChatTranscript,
    backend: Box<dyn ChatBackend>,
}

impl BotSession {
    pub fn new(model: &str, temperature: f32, system: &str, backend: Box<dyn ChatBackend>) -> Self {
        Self { transcript: ChatTranscript::new(model, temperature, Some(system)), backend }
    }

    /// Appends `message`, fetches the reply, appends and returns it. On error
    /// the transcript is left unchanged.
    pub fn send(&mut self, message: &str) -> Result<String, LlmError> {
        self.transcript.push(Role::User, message)?;
        match self.backend.complete(&self.transcript) {
            Ok(reply) => {
                self.transcript.push(Role::Assistant, &reply)?;
                Ok(reply)
            }
            Err(e) => {
                self.transcript.messages.pop();
                Err(e)
            }
        }
    }

    /// True once the session has a system prompt and no exchange yet.
    pub fn is_fresh(&self) -> bool {
        self.transcript.messages.len() <= 1
    }
}
