//! The decision / evaluation / corrector loop that turns LLM-written programs
//! into verified demonstrations.

mod factory;
mod review;

#[cfg(test)]
mod tests;

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blockworld::{Scene, SimConfig};
use crate::demostore::{self, Episode, Source, StoreError, StoreGrid};
use crate::dsl::{self, execute, ApiSurface, ExecConfig, ExecTrace, Program};
use crate::llm::{BotSession, ChatTranscript, LlmError};
use crate::promptgen::{BotRole, Correction, PromptBuilder};
use crate::tasks::{oracle_check, TaskName, TaskSpec};

pub use factory::{fixture_path, BotFactory, LiveFactory, ScriptedFactory, Temperatures};
pub use review::{
    check_against_oracle, eval_verdict, oracle_probes, Approver, AutoReview, Probe, ProbeReport, ReviewDecision,
    ReviewHook, PROBE_SEEDS, PROBE_SEED_BASE,
};

/// Correction rounds shared by runtime and evaluation failures.
pub const MAX_ITERATIONS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Success,
    RuntimeFailure,
    EvalFailure,
    NoCode,
    BudgetExhausted,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Success => "SUCCESS",
            Status::RuntimeFailure => "RUNTIME_FAILURE",
            Status::EvalFailure => "EVAL_FAILURE",
            Status::NoCode => "NO_CODE",
            Status::BudgetExhausted => "BUDGET_EXHAUSTED",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum OrchestratorError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("REVIEW_REJECTED: the evaluation program for {0} was rejected")]
    ReviewRejected(TaskName),
    #[error("no usable evaluation program: {0}")]
    EvalUnusable(String),
    #[error("the evaluation program has not been approved")]
    NotApproved,
    #[error("scene: {0}")]
    Scene(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Clone, Debug)]
pub struct EvalCodeRecord {
    pub task: TaskName,
    pub program: Program,
    pub approved: bool,
    pub approver: Approver,
    /// The eval bot's conversation.
    pub transcript: ChatTranscript,
}

/// One program request and its result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub status: Status,
    pub source: Option<String>,
    pub error: Option<String>,
    /// Digest of the scene the program started from.
    pub initial_digest: String,
    pub eval_verdict: Option<bool>,
    pub oracle_verdict: Option<bool>,
}

impl Attempt {
    fn summary(&self, index: usize) -> String {
        match &self.error {
            Some(e) => format!("attempt {}: {}: {e}", index + 1, self.status),
            None => format!("attempt {}: {}", index + 1, self.status),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EpisodeOutcome {
    pub task: TaskName,
    pub seed: u64,
    pub status: Status,
    /// Status of the final failed attempt when the budget ran out.
    pub last_failure: Option<Status>,
    pub iterations_used: usize,
    /// Trace of the last program that ran to completion (empty if none did).
    pub trace: ExecTrace,
    pub final_scene: Scene,
    pub eval_verdict: Option<bool>,
    pub oracle_verdict: Option<bool>,
    /// Some attempt's eval verdict disagreed with the oracle.
    pub divergent: bool,
    pub attempts: Vec<Attempt>,
    pub decision_transcript: ChatTranscript,
    pub corrector_transcript: ChatTranscript,
}

impl EpisodeOutcome {
    /// Success confirmed by the oracle and free of divergence.
    pub fn verified(&self) -> bool {
        self.status == Status::Success && self.oracle_verdict == Some(true) && !self.divergent
    }

    pub fn program_requests(&self) -> usize {
        self.attempts.len()
    }
}

fn accept(task: TaskName, source: String, approver: Approver, transcript: &ChatTranscript) -> Result<EvalCodeRecord, OrchestratorError> {
    let program = dsl::parse(&source).map_err(|e| OrchestratorError::EvalUnusable(format!("edited program: {e}")))?;
    Ok(EvalCodeRecord { task, program, approved: true, approver, transcript: transcript.clone() })
}

/// Asks the eval bot for a success check and submits it for review.
///
/// A reply without a parseable program gets one correction message. A human
/// rejection is an error; an automatic rejection yields an unapproved record.
pub fn obtain_eval_code(
    task: &TaskSpec,
    scene: &Scene,
    bot: &mut BotSession,
    review: &mut dyn ReviewHook,
    builder: &PromptBuilder,
) -> Result<EvalCodeRecord, OrchestratorError> {
    let bundle = builder.eval(scene, task);
    let mut reply = bot.send(&bundle.user)?;
    let mut retried = false;
    let program = loop {
        let code = dsl::extract_code(&reply);
        let fault = match &code {
            Err(_) => builder.correction_message(&Correction::NoCode),
            Ok(src) => match dsl::parse(src) {
                Ok(p) => break p,
                Err(e) => builder.correction_message(&Correction::Runtime { error: &e, source: src }),
            },
        };
        if retried {
            let why = match code {
                Err(_) => "no code block in the reply".to_string(),
                Ok(src) => dsl::parse(&src).err().map(|e| e.to_string()).unwrap_or_default(),
            };
            return Err(OrchestratorError::EvalUnusable(why));
        }
        retried = true;
        reply = bot.send(&fault)?;
    };
    match review.review(task.name, &program.source) {
        ReviewDecision::Approve => Ok(EvalCodeRecord {
            task: task.name,
            program,
            approved: true,
            approver: review.approver(),
            transcript: bot.transcript.clone(),
        }),
        ReviewDecision::Edit(text) => accept(task.name, text, Approver::Human, &bot.transcript),
        ReviewDecision::Reject => match review.approver() {
            Approver::Human => Err(OrchestratorError::ReviewRejected(task.name)),
            approver => Ok(EvalCodeRecord { task: task.name, program, approved: false, approver, transcript: bot.transcript.clone() }),
        },
    }
}

/// Approved eval programs, one per task.
#[derive(Default)]
pub struct EvalCache {
    records: HashMap<TaskName, EvalCodeRecord>,
}

impl EvalCache {
    pub fn get(&self, task: TaskName) -> Option<&EvalCodeRecord> {
        self.records.get(&task)
    }

    pub fn get_or_obtain(
        &mut self,
        task: &TaskSpec,
        scene: &Scene,
        bot: &mut BotSession,
        review: &mut dyn ReviewHook,
        builder: &PromptBuilder,
    ) -> Result<&EvalCodeRecord, OrchestratorError> {
        if let std::collections::hash_map::Entry::Vacant(e) = self.records.entry(task.name) {
            let record = obtain_eval_code(task, scene, bot, review, builder)?;
            if !record.approved {
                return Err(OrchestratorError::ReviewRejected(task.name));
            }
            e.insert(record);
        }
        Ok(&self.records[&task.name])
    }
}

/// Runs the correction loop for one scene.
///
/// Every failed attempt consumes one iteration; once `MAX_ITERATIONS` are
/// consumed the episode ends with `BUDGET_EXHAUSTED`. Each program starts from
/// the same initial scene.
#[allow(clippy::too_many_arguments)]
pub fn run_episode(
    task: &TaskSpec,
    seed: u64,
    scene: &Scene,
    decision: &mut BotSession,
    corrector: &mut BotSession,
    eval_code: &EvalCodeRecord,
    builder: &PromptBuilder,
    exec: &ExecConfig,
) -> Result<EpisodeOutcome, OrchestratorError> {
    if !eval_code.approved {
        return Err(OrchestratorError::NotApproved);
    }
    let initial_digest = scene.digest();
    let mut out = EpisodeOutcome {
        task: task.name,
        seed,
        status: Status::BudgetExhausted,
        last_failure: None,
        iterations_used: 0,
        trace: ExecTrace::default(),
        final_scene: scene.clone(),
        eval_verdict: None,
        oracle_verdict: None,
        divergent: false,
        attempts: Vec::new(),
        decision_transcript: decision.transcript.clone(),
        corrector_transcript: corrector.transcript.clone(),
    };
    let mut message = builder.decision(scene, task).user;
    loop {
        let reply = decision.send(&message)?;
        let (attempt, correction) = attempt_program(task, seed, scene, &reply, eval_code, builder, exec, &mut out);
        if attempt.initial_digest != initial_digest {
            return Err(OrchestratorError::Scene("initial scene changed between attempts".into()));
        }
        let status = attempt.status;
        out.attempts.push(attempt);
        if status == Status::Success {
            out.status = Status::Success;
            break;
        }
        out.iterations_used += 1;
        if out.iterations_used >= MAX_ITERATIONS {
            out.last_failure = Some(status);
            break;
        }
        message = match correction {
            Some(m) => m,
            None => {
                let n = out.attempts.len();
                let history: Vec<String> = out.attempts[..n - 1].iter().enumerate().map(|(i, a)| a.summary(i)).collect();
                let src = out.attempts[n - 1].source.as_deref().unwrap_or_default();
                let request = builder.corrector(&out.final_scene, task, src, false, &history);
                let analysis = corrector.send(&request.user)?;
                builder.correction_message(&Correction::EvalFailure { analysis: analysis.trim() })
            }
        };
    }
    out.decision_transcript = decision.transcript.clone();
    out.corrector_transcript = corrector.transcript.clone();
    Ok(out)
}

/// Extracts, parses and runs one reply; clean runs are checked by the eval
/// program and the oracle. Updates the trace, final scene and verdicts in `out`.
/// Also returns the correction for the decision bot; `None` after an eval
/// failure, which goes through the corrector bot first.
#[allow(clippy::too_many_arguments)]
fn attempt_program(
    task: &TaskSpec,
    seed: u64,
    scene: &Scene,
    reply: &str,
    eval_code: &EvalCodeRecord,
    builder: &PromptBuilder,
    exec: &ExecConfig,
    out: &mut EpisodeOutcome,
) -> (Attempt, Option<String>) {
    let mut attempt = Attempt {
        status: Status::NoCode,
        source: None,
        error: None,
        initial_digest: scene.digest(),
        eval_verdict: None,
        oracle_verdict: None,
    };
    let Ok(src) = dsl::extract_code(reply) else {
        attempt.error = Some("no code block in the reply".into());
        return (attempt, Some(builder.correction_message(&Correction::NoCode)));
    };
    attempt.source = Some(src.clone());
    let run = dsl::parse(&src)
        .map_err(|e| (e, None))
        .and_then(|p| execute(&p, scene, ApiSurface::Actor, exec).map_err(|f| (f.error, Some((f.trace, f.scene)))));
    match run {
        Err((error, partial)) => {
            attempt.status = Status::RuntimeFailure;
            attempt.error = Some(error.to_string());
            if let Some((trace, end)) = partial {
                out.trace = trace;
                out.final_scene = end;
            }
            let correction = builder.correction_message(&Correction::Runtime { error: &error, source: &src });
            (attempt, Some(correction))
        }
        Ok(done) => {
            let ev = eval_verdict(&eval_code.program, &done.scene);
            let or = oracle_check(task.name, &done.scene);
            if ev != or {
                out.divergent = true;
                log::warn!("EVAL_DIVERGENCE {} seed {seed}: eval={ev} oracle={or}", task.name);
            }
            attempt.status = if ev { Status::Success } else { Status::EvalFailure };
            (attempt.eval_verdict, attempt.oracle_verdict) = (Some(ev), Some(or));
            (out.eval_verdict, out.oracle_verdict) = (Some(ev), Some(or));
            out.trace = done.trace;
            out.final_scene = done.scene;
            (attempt, None)
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuccessStats {
    pub success: usize,
    pub fail: usize,
    /// Episodes excluded because the eval verdict disagreed with the oracle.
    pub divergent: usize,
    /// Episodes that ended on an LLM or other error; counted as failures.
    pub errors: usize,
}

impl SuccessStats {
    pub fn total(&self) -> usize {
        self.success + self.fail
    }

    /// Success rate, undefined for an empty batch.
    pub fn ap(&self) -> Option<f64> {
        (self.total() > 0).then(|| self.success as f64 / self.total() as f64)
    }

    /// `success fail ap` with AP to two decimals, or `n/a`.
    pub fn table_line(&self) -> String {
        format!("{} {} {}", self.success, self.fail, format_ap(self.ap()))
    }
}

/// Two decimals, trailing zeros after the first dropped: 1.0, 0.88, 0.9.
pub fn format_ap(ap: Option<f64>) -> String {
    match ap {
        None => "n/a".into(),
        Some(v) => {
            let s = format!("{v:.2}");
            let s = s.trim_end_matches('0');
            if s.ends_with('.') {
                format!("{s}0")
            } else {
                s.to_string()
            }
        }
    }
}

#[derive(Clone, Debug)]
#[derive(Default)]
pub struct HarvestConfig {
    pub sim: SimConfig,
    pub grid: StoreGrid,
    pub exec: ExecConfig,
    pub builder: PromptBuilder,
}


#[derive(Debug)]
pub struct HarvestReport {
    pub task: TaskName,
    pub grid: StoreGrid,
    pub stats: SuccessStats,
    /// Demonstrations from verified, non-divergent successes, in seed order.
    pub demos: Vec<Episode>,
    pub outcomes: Vec<(u64, Result<EpisodeOutcome, OrchestratorError>)>,
}

impl HarvestReport {
    pub fn has_transport_errors(&self) -> bool {
        self.outcomes.iter().any(|(_, r)| matches!(r, Err(OrchestratorError::Llm(LlmError::Transport(_) | LlmError::Api { .. } | LlmError::MissingApiKey))))
    }

    pub fn write_demos(&self, dir: &Path) -> Result<Vec<PathBuf>, StoreError> {
        demostore::write(&self.demos, dir, self.grid)
    }
}

fn episode_for_seed(
    task: &TaskSpec,
    seed: u64,
    factory: &dyn BotFactory,
    eval_code: &EvalCodeRecord,
    cfg: &HarvestConfig,
) -> Result<(EpisodeOutcome, Option<Episode>), OrchestratorError> {
    let scene = task.make_scene(seed, &cfg.sim).map_err(|e| OrchestratorError::Scene(e.to_string()))?;
    let b = &cfg.builder;
    let mut decision = factory.session(BotRole::Decision, Some(seed), &b.decision(&scene, task).system)?;
    let mut corrector = factory.session(BotRole::Corrector, Some(seed), &b.corrector(&scene, task, "", false, &[]).system)?;
    let outcome = run_episode(task, seed, &scene, &mut decision, &mut corrector, eval_code, b, &cfg.exec)?;
    let demo = if outcome.verified() {
        Some(demostore::from_trace(&outcome.trace, true, task.name.as_str(), seed, Source::Llm, cfg.grid, cfg.sim.side)?)
    } else {
        None
    };
    Ok((outcome, demo))
}

/// Runs one episode per seed in parallel. Results are collected in seed
/// order, so the report does not depend on scheduling.
pub fn harvest(
    task: &TaskSpec,
    seeds: &[u64],
    factory: &dyn BotFactory,
    eval_code: &EvalCodeRecord,
    cfg: &HarvestConfig,
) -> Result<HarvestReport, OrchestratorError> {
    if !eval_code.approved {
        return Err(OrchestratorError::NotApproved);
    }
    let results: Vec<_> = seeds.par_iter().map(|&seed| (seed, episode_for_seed(task, seed, factory, eval_code, cfg))).collect();
    let mut stats = SuccessStats::default();
    let mut demos = Vec::new();
    let mut outcomes = Vec::with_capacity(results.len());
    for (seed, r) in results {
        match r {
            Ok((outcome, demo)) => {
                if outcome.divergent {
                    stats.divergent += 1;
                }
                if outcome.status == Status::Success && outcome.oracle_verdict == Some(true) {
                    stats.success += 1;
                } else {
                    stats.fail += 1;
                }
                demos.extend(demo);
                outcomes.push((seed, Ok(outcome)));
            }
            Err(e) => {
                log::error!("{} seed {seed}: {e}", task.name);
                stats.fail += 1;
                stats.errors += 1;
                outcomes.push((seed, Err(e)));
            }
        }
    }
    Ok(HarvestReport { task: task.name, grid: cfg.grid, stats, demos, outcomes })
}
