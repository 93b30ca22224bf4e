//! Plain-text `key = value` configuration. Unknown keys are rejected.

use std::path::{Path, PathBuf};
use std::time::Duration;

use crate::blockworld::SimConfig;
use crate::demostore::StoreGrid;
use crate::learner::LearnerConfig;
use crate::llm::HttpConfig;
use crate::orchestrator::Temperatures;
use crate::promptgen::{PromptBuilder, Templates};

pub const CONFIG_ENV: &str = "ROBOTGPT_CONFIG";

/// Every key with its default and meaning.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("llm.endpoint", "https://api.openai.com/v1/chat/completions", "chat-completions URL"),
    ("llm.model", "gpt-3.5-turbo", "model name sent with every request"),
    ("llm.temperature_decision", "1.0", "decision bot temperature"),
    ("llm.temperature_eval", "0.0", "evaluation bot temperature"),
    ("llm.temperature_corrector", "0.0", "corrector bot temperature"),
    ("llm.timeout_secs", "120", "per-request timeout"),
    ("llm.retries", "3", "retries after a transport failure"),
    ("llm.max_in_flight", "4", "concurrent requests across all sessions"),
    ("llm.token_budget", "8000", "prompt size limit in characters"),
    ("sim.W", "0.4", "workspace side in meters"),
    ("sim.G", "64", "simulator heightmap resolution"),
    ("sim.C", "24", "simulator in-hand crop size"),
    ("learner.G", "32", "stored and learned heightmap resolution (divides sim.G)"),
    ("learner.R", "8", "rotation bins over [0, pi)"),
    ("learner.gamma", "0.9", "discount"),
    ("learner.n_step", "3", "TD horizon"),
    ("learner.margin", "0.1", "large-margin lambda"),
    ("learner.slm_weight", "1.0", "weight of the margin loss"),
    ("learner.lr", "0.001", "Adam learning rate"),
    ("learner.batch_size", "16", "transitions per step"),
    ("learner.target_sync", "100", "steps between target network copies"),
    ("learner.steps", "1500", "training steps"),
    ("learner.seed", "0", "initialization and sampling seed"),
    ("learner.arch", "conv", "conv or patch_linear"),
    ("learner.hidden", "16", "hidden channels of the conv network"),
    ("paths.demos", "demos", "demonstration store directory"),
    ("paths.models", "models", "checkpoint directory"),
    ("paths.fixtures", "fixtures", "scripted transcript directory"),
    ("paths.templates", "", "directory of prompt template overrides; empty uses the built-in set"),
];

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("IO: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: {key}: {message}")]
    BadValue { line: usize, key: String, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LlmSettings {
    pub http: HttpConfig,
    pub model: String,
    pub temperatures: Temperatures,
    pub token_budget: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Paths {
    pub demos: PathBuf,
    pub models: PathBuf,
    pub fixtures: PathBuf,
    pub templates: PathBuf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub llm: LlmSettings,
    pub sim: SimConfig,
    pub learner: LearnerConfig,
    /// Resolution of stored observations and of the learned Q-map.
    pub learner_grid: usize,
    pub paths: Paths,
}

impl Default for Config {
    fn default() -> Self {
        let mut c = Config {
            llm: LlmSettings {
                http: HttpConfig::default(),
                model: String::new(),
                temperatures: Temperatures::default(),
                token_budget: 0,
            },
            sim: SimConfig::default(),
            learner: LearnerConfig::default(),
            learner_grid: 0,
            paths: Paths { demos: PathBuf::new(), models: PathBuf::new(), fixtures: PathBuf::new(), templates: PathBuf::new() },
        };
        for (key, value, _) in KEYS {
            c.set(key, value).expect("defaults are valid");
        }
        c
    }
}

fn num<T: std::str::FromStr>(value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| format!("'{value}': {e}"))
}

impl Config {
    /// Applies one setting. Returns `Ok(false)` for an unknown key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool, String> {
        let l = &mut self.learner;
        match key {
            "llm.endpoint" => self.llm.http.endpoint = value.to_string(),
            "llm.model" => self.llm.model = value.to_string(),
            "llm.temperature_decision" => self.llm.temperatures.decision = num(value)?,
            "llm.temperature_eval" => self.llm.temperatures.eval = num(value)?,
            "llm.temperature_corrector" => self.llm.temperatures.corrector = num(value)?,
            "llm.timeout_secs" => self.llm.http.timeout = Duration::from_secs_f64(num::<f64>(value)?.max(0.0)),
            "llm.retries" => self.llm.http.retries = num(value)?,
            "llm.max_in_flight" => self.llm.http.max_in_flight = num(value)?,
            "llm.token_budget" => self.llm.token_budget = num(value)?,
            "sim.W" => self.sim.side = num(value)?,
            "sim.G" => self.sim.grid = num(value)?,
            "sim.C" => self.sim.crop = num(value)?,
            "learner.G" => self.learner_grid = num(value)?,
            "learner.R" => l.rotations = num(value)?,
            "learner.gamma" => l.gamma = num(value)?,
            "learner.n_step" => l.n_step = num(value)?,
            "learner.margin" => l.margin = num(value)?,
            "learner.slm_weight" => l.slm_weight = num(value)?,
            "learner.lr" => l.lr = num(value)?,
            "learner.batch_size" => l.batch_size = num(value)?,
            "learner.target_sync" => l.target_sync = num(value)?,
            "learner.steps" => l.steps = num(value)?,
            "learner.seed" => l.seed = num(value)?,
            "learner.arch" => l.arch = value.parse()?,
            "learner.hidden" => l.hidden = num(value)?,
            "paths.demos" => self.paths.demos = value.into(),
            "paths.models" => self.paths.models = value.into(),
            "paths.fixtures" => self.paths.fixtures = value.into(),
            "paths.templates" => self.paths.templates = value.into(),
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// Defaults overridden by `text`. Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut c = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let (key, value) = (key.trim(), value.trim());
            match c.set(key, value) {
                Ok(true) => {}
                Ok(false) => return Err(ConfigError::UnknownKey { line, key: key.to_string() }),
                Err(message) => return Err(ConfigError::BadValue { line, key: key.to_string(), message }),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// `explicit` if given, else `$ROBOTGPT_CONFIG`, else defaults.
    pub fn resolve(explicit: Option<&Path>) -> Result<Self, ConfigError> {
        match explicit {
            Some(p) => Self::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
                _ => Ok(Self::default()),
            },
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if !(self.sim.side > 0.0 && self.sim.side.is_finite()) {
            return bad("sim.W must be positive");
        }
        if self.sim.grid == 0 || self.sim.crop == 0 || self.learner_grid == 0 {
            return bad("grid sizes must be positive");
        }
        if !self.sim.grid.is_multiple_of(self.learner_grid) {
            return bad("learner.G must divide sim.G");
        }
        if !self.sim.crop.is_multiple_of(self.sim.grid / self.learner_grid) {
            return bad("sim.C must be divisible by sim.G / learner.G");
        }
        if self.learner_grid > u16::MAX as usize || self.learner.rotations > u16::MAX as usize {
            return bad("learner.G and learner.R must fit in 16 bits");
        }
        if self.llm.http.max_in_flight == 0 {
            return bad("llm.max_in_flight must be at least 1");
        }
        self.learner.validate().map_err(ConfigError::Invalid)
    }

    /// Prompt builder with any template overrides applied.
    pub fn prompt_builder(&self) -> std::io::Result<PromptBuilder> {
        let templates =
            if self.paths.templates.as_os_str().is_empty() { Templates::default() } else { Templates::from_dir(&self.paths.templates)? };
        Ok(PromptBuilder::new(templates, self.llm.token_budget))
    }

    pub fn store_grid(&self) -> StoreGrid {
        let factor = self.sim.grid / self.learner_grid;
        StoreGrid { g: self.learner_grid as u16, c: (self.sim.crop / factor) as u16, r: self.learner.rotations as u16 }
    }

    /// All keys with their current values, in documentation order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (key, _, doc) in KEYS {
            out.push_str(&format!("# {doc}\n{key} = {}\n", self.get(key).unwrap_or_default()));
        }
        out
    }

    /// Current value of `key` as it would be written in a file.
    pub fn get(&self, key: &str) -> Option<String> {
        let l = &self.learner;
        Some(match key {
            "llm.endpoint" => self.llm.http.endpoint.clone(),
            "llm.model" => self.llm.model.clone(),
            "llm.temperature_decision" => self.llm.temperatures.decision.to_string(),
            "llm.temperature_eval" => self.llm.temperatures.eval.to_string(),
            "llm.temperature_corrector" => self.llm.temperatures.corrector.to_string(),
            "llm.timeout_secs" => self.llm.http.timeout.as_secs_f64().to_string(),
            "llm.retries" => self.llm.http.retries.to_string(),
            "llm.max_in_flight" => self.llm.http.max_in_flight.to_string(),
            "llm.token_budget" => self.llm.token_budget.to_string(),
            "sim.W" => self.sim.side.to_string(),
            "sim.G" => self.sim.grid.to_string(),
            "sim.C" => self.sim.crop.to_string(),
            "learner.G" => self.learner_grid.to_string(),
            "learner.R" => l.rotations.to_string(),
            "learner.gamma" => l.gamma.to_string(),
            "learner.n_step" => l.n_step.to_string(),
            "learner.margin" => l.margin.to_string(),
            "learner.slm_weight" => l.slm_weight.to_string(),
            "learner.lr" => l.lr.to_string(),
            "learner.batch_size" => l.batch_size.to_string(),
            "learner.target_sync" => l.target_sync.to_string(),
            "learner.steps" => l.steps.to_string(),
            "learner.seed" => l.seed.to_string(),
            "learner.arch" => match l.arch {
                crate::learner::Architecture::Conv => "conv".into(),
                crate::learner::Architecture::PatchLinear => "patch_linear".into(),
            },
            "learner.hidden" => l.hidden.to_string(),
            "paths.demos" => self.paths.demos.display().to_string(),
            "paths.models" => self.paths.models.display().to_string(),
            "paths.fixtures" => self.paths.fixtures.display().to_string(),
            "paths.templates" => self.paths.templates.display().to_string(),
            _ => return None,
        })
    }
}
