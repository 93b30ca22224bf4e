use std::path::{Path, PathBuf};

use crate::llm::{
    BotSession, ChatBackend, ChatTranscript, HttpBackend, HttpConfig, LlmError, RecordingBackend, ScriptedBackend,
    CORRECTOR_TEMPERATURE, DECISION_TEMPERATURE, EVAL_TEMPERATURE,
};
use crate::promptgen::BotRole;

/// Creates chat sessions for each bot role. The evaluation bot is per task
/// (`seed = None`); decision and corrector bots are per scene.
pub trait BotFactory: Sync {
    fn session(&self, role: BotRole, seed: Option<u64>, system: &str) -> Result<BotSession, LlmError>;
}

/// Fixture location for a role within a fixture directory.
///
/// ```text
/// <dir>/eval.json
/// <dir>/seed_<n>/decision.json
/// <dir>/seed_<n>/corrector.json
/// ```
pub fn fixture_path(dir: &Path, role: BotRole, seed: Option<u64>) -> PathBuf {
    let name = match role {
        BotRole::Decision => "decision.json",
        BotRole::Evaluation => "eval.json",
        BotRole::Corrector => "corrector.json",
    };
    match seed {
        Some(s) if role != BotRole::Evaluation => dir.join(format!("seed_{s}")).join(name),
        _ => dir.join(name),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Temperatures {
    pub decision: f32,
    pub eval: f32,
    pub corrector: f32,
}

impl Default for Temperatures {
    fn default() -> Self {
        Self { decision: DECISION_TEMPERATURE, eval: EVAL_TEMPERATURE, corrector: CORRECTOR_TEMPERATURE }
    }
}

impl Temperatures {
    pub fn for_role(&self, role: BotRole) -> f32 {
        match role {
            BotRole::Decision => self.decision,
            BotRole::Evaluation => self.eval,
            BotRole::Corrector => self.corrector,
        }
    }
}

/// Replays recorded transcripts. A missing corrector fixture replays as empty,
/// since the corrector is only consulted after an evaluation failure.
#[derive(Clone, Debug)]
pub struct ScriptedFactory {
    pub dir: PathBuf,
    pub strict: bool,
    pub model: String,
    pub temperatures: Temperatures,
}

impl ScriptedFactory {
    pub fn new(dir: impl Into<PathBuf>, strict: bool) -> Self {
        Self { dir: dir.into(), strict, model: "scripted".into(), temperatures: Temperatures::default() }
    }
}

impl BotFactory for ScriptedFactory {
    fn session(&self, role: BotRole, seed: Option<u64>, system: &str) -> Result<BotSession, LlmError> {
        let path = fixture_path(&self.dir, role, seed);
        let temperature = self.temperatures.for_role(role);
        let backend = if role == BotRole::Corrector && !path.exists() {
            ScriptedBackend::new(ChatTranscript::new(&self.model, temperature, Some(system)), self.strict)
        } else {
            ScriptedBackend::from_file(&path, self.strict)?
        };
        Ok(BotSession::new(&self.model, temperature, system, Box::new(backend)))
    }
}

/// Talks to a chat-completions endpoint, optionally recording fixtures in the
/// scripted layout under `record_dir`. Not `Debug`, so the key cannot leak into logs.
#[derive(Clone)]
pub struct LiveFactory {
    pub http: HttpConfig,
    key: String,
    pub model: String,
    pub temperatures: Temperatures,
    pub record_dir: Option<PathBuf>,
}

impl LiveFactory {
    pub fn new(http: HttpConfig, key: String, model: &str) -> Self {
        Self { http, key, model: model.into(), temperatures: Temperatures::default(), record_dir: None }
    }

    pub fn from_env(http: HttpConfig, model: &str) -> Result<Self, LlmError> {
        let key = std::env::var(crate::llm::API_KEY_ENV).ok().filter(|k| !k.is_empty()).ok_or(LlmError::MissingApiKey)?;
        Ok(Self::new(http, key, model))
    }
}

impl BotFactory for LiveFactory {
    fn session(&self, role: BotRole, seed: Option<u64>, system: &str) -> Result<BotSession, LlmError> {
        let http = HttpBackend::with_key(self.http.clone(), self.key.clone());
        let backend: Box<dyn ChatBackend> = match &self.record_dir {
            Some(dir) => {
                let path = fixture_path(dir, role, seed);
                if let Some(parent) = path.parent() {
                    std::fs::create_dir_all(parent)?;
                }
                Box::new(RecordingBackend::new(http, path))
            }
            None => Box::new(http),
        };
        Ok(BotSession::new(&self.model, self.temperatures.for_role(role), system, backend))
    }
}
