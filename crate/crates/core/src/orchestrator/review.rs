use serde::{Deserialize, Serialize};

use crate::blockworld::{Scene, SimConfig};
use crate::dsl::{self, execute, ApiSurface, ExecConfig, Program, Value};
use crate::tasks::{expert_source, make_scene, oracle_check, TaskName};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Approver {
    Human,
    AutoOracleAgreement,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReviewDecision {
    Approve,
    Edit(String),
    Reject,
}

/// Gatekeeper for generated evaluation programs.
pub trait ReviewHook {
    fn review(&mut self, task: TaskName, source: &str) -> ReviewDecision;
    fn approver(&self) -> Approver;
}

/// Number of seeds used to build probe scenes; each seed yields one positive and one negative.
pub const PROBE_SEEDS: u64 = 10;
pub const PROBE_SEED_BASE: u64 = 1_000_000;

/// A terminal scene with its ground-truth label.
#[derive(Clone, Debug)]
pub struct Probe {
    pub seed: u64,
    pub scene: Scene,
    pub label: bool,
}

/// Runs an eval program on `scene`. Only a clean run returning `True` counts as success.
pub fn eval_verdict(program: &Program, scene: &Scene) -> bool {
    let cfg = ExecConfig { record_observations: false, ..ExecConfig::default() };
    matches!(execute(program, scene, ApiSurface::Query, &cfg), Ok(out) if out.value == Some(Value::Bool(true)))
}

/// Probe scenes for `task`: the expert's final scene and the scene reached
/// by dropping its last pick/place pair. Labels come from the oracle.
pub fn oracle_probes(task: TaskName, sim: &SimConfig) -> Result<Vec<Probe>, String> {
    let quiet = ExecConfig { record_observations: false, ..ExecConfig::default() };
    let mut probes = Vec::new();
    for seed in PROBE_SEED_BASE..PROBE_SEED_BASE + PROBE_SEEDS {
        let scene = make_scene(task, seed, sim).map_err(|e| e.to_string())?;
        let full = expert_source(task, &scene).map_err(|e| e.to_string())?;
        let lines: Vec<&str> = full.lines().collect();
        let partial = lines[..lines.len().saturating_sub(2)].join("\n");
        for src in [full.as_str(), partial.as_str()] {
            let program = dsl::parse(src).map_err(|e| e.to_string())?;
            let end = execute(&program, &scene, ApiSurface::Actor, &quiet).map_err(|f| f.error.to_string())?.scene;
            let label = oracle_check(task, &end);
            probes.push(Probe { seed, scene: end, label });
        }
    }
    Ok(probes)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProbeReport {
    pub total: usize,
    pub agreed: usize,
    /// Seeds and labels of disagreeing probes.
    pub disagreements: Vec<(u64, bool)>,
}

impl ProbeReport {
    pub fn passed(&self) -> bool {
        self.total > 0 && self.agreed == self.total
    }
}

pub fn check_against_oracle(program: &Program, probes: &[Probe]) -> ProbeReport {
    let disagreements: Vec<(u64, bool)> =
        probes.iter().filter(|p| eval_verdict(program, &p.scene) != p.label).map(|p| (p.seed, p.label)).collect();
    ProbeReport { total: probes.len(), agreed: probes.len() - disagreements.len(), disagreements }
}

/// Approves an eval program iff it agrees with the oracle on every probe.
#[derive(Clone, Debug)]
pub struct AutoReview {
    pub sim: SimConfig,
    pub last_report: Option<ProbeReport>,
}

impl AutoReview {
    pub fn new(sim: SimConfig) -> Self {
        Self { sim, last_report: None }
    }
}

impl ReviewHook for AutoReview {
    fn review(&mut self, task: TaskName, source: &str) -> ReviewDecision {
        self.last_report = None;
        let Ok(program) = dsl::parse(source) else {
            return ReviewDecision::Reject;
        };
        let probes = match oracle_probes(task, &self.sim) {
            Ok(p) => p,
            Err(e) => {
                log::error!("cannot build probes for {task}: {e}");
                return ReviewDecision::Reject;
            }
        };
        let report = check_against_oracle(&program, &probes);
        let ok = report.passed();
        if !ok {
            log::warn!("eval program for {task} disagrees with the oracle on {} of {} probes", report.total - report.agreed, report.total);
        }
        self.last_report = Some(report);
        if ok {
            ReviewDecision::Approve
        } else {
            ReviewDecision::Reject
        }
    }

    fn approver(&self) -> Approver {
        Approver::AutoOracleAgreement
    }
}
