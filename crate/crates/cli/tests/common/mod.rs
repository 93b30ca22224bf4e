#![allow(dead_code)]

use std::io::Write;
use std::path::Path;
use std::process::{Command, Stdio};

use robotgpt::llm::{BotSession, RecordingBackend, ScriptedBackend};
use robotgpt::orchestrator::{fixture_path, obtain_eval_code, run_episode, AutoReview, HarvestConfig, Temperatures};
use robotgpt::promptgen::BotRole;
use robotgpt::tasks::TaskSpec;

pub const EVAL_IS_ON: &str = "```\nreturn is_on(\"cube_small\", \"cube_big\")\n```";
pub const EVAL_TRUE: &str = "```\nreturn True\n```";
pub const CORRECT: &str = "Sure.\n```python\npick(\"cube_small\")\nplace_on(\"cube_big\")\n```";
pub const DIV_ZERO: &str = "```\nx = 1\ny = x / 0\n```";
pub const PUT_BACK: &str = "```\np = pose(\"cube_small\")\npick(\"cube_small\")\nplace(p.x, p.y, p.theta)\n```";
pub const OFF_CENTER: &str = "```\nb = pose(\"cube_big\")\npick(\"cube_small\")\nplace(b.x + 0.0063, b.y, b.theta)\n```";

pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn robotgpt(args: &[&str], cwd: &Path) -> Output {
    robotgpt_with_input(args, cwd, "")
}

pub fn robotgpt_with_input(args: &[&str], cwd: &Path, input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_robotgpt"))
        .args(args)
        .current_dir(cwd)
        .env_remove("ROBOTGPT_CONFIG")
        .env_remove("ROBOTGPT_API_KEY")
        .env_remove("RUST_LOG")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    Output {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn recorder(replies: &[&str], path: &Path, role: BotRole, system: &str) -> BotSession {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    let backend = RecordingBackend::new(ScriptedBackend::from_replies(replies), path);
    BotSession::new("scripted", Temperatures::default().for_role(role), system, Box::new(backend))
}

/// Scripted replies for one scene.
pub struct Plan<'a> {
    pub seed: u64,
    pub decision: Vec<&'a str>,
    pub corrector: Vec<&'a str>,
}

impl<'a> Plan<'a> {
    pub fn new(seed: u64, decision: &[&'a str], corrector: &[&'a str]) -> Self {
        Self { seed, decision: decision.to_vec(), corrector: corrector.to_vec() }
    }
}

/// Records the eval fixture on the scene of `seed`, as `gen-demos` asks for it
/// on the scene of its first seed.
pub fn record_eval(dir: &Path, task: &TaskSpec, seed: u64, reply: &str) {
    let cfg = HarvestConfig::default();
    let scene = task.make_scene(seed, &cfg.sim).unwrap();
    let path = fixture_path(dir, BotRole::Evaluation, None);
    let mut bot = recorder(&[reply], &path, BotRole::Evaluation, &cfg.builder.eval(&scene, task).system);
    obtain_eval_code(task, &scene, &mut bot, &mut AutoReview::new(cfg.sim.clone()), &cfg.builder).unwrap();
}

/// Writes decision and corrector fixtures by playing the scripted replies
/// through the real prompts and correction loop.
pub fn record_plans(dir: &Path, task: &TaskSpec, plans: &[Plan<'_>]) {
    let cfg = HarvestConfig::default();
    let b = &cfg.builder;
    let probe_scene = task.make_scene(0, &cfg.sim).unwrap();
    let mut check = BotSession::new("scripted", 0.0, "check", Box::new(ScriptedBackend::from_replies(&[EVAL_IS_ON])));
    let eval = obtain_eval_code(task, &probe_scene, &mut check, &mut AutoReview::new(cfg.sim.clone()), b).unwrap();
    for p in plans {
        let scene = task.make_scene(p.seed, &cfg.sim).unwrap();
        let d_path = fixture_path(dir, BotRole::Decision, Some(p.seed));
        let c_path = fixture_path(dir, BotRole::Corrector, Some(p.seed));
        let mut d = recorder(&p.decision, &d_path, BotRole::Decision, &b.decision(&scene, task).system);
        let mut c = recorder(&p.corrector, &c_path, BotRole::Corrector, &b.corrector(&scene, task, "", false, &[]).system);
        run_episode(task, p.seed, &scene, &mut d, &mut c, &eval, b, &cfg.exec).unwrap();
    }
}

pub fn record_fixtures(dir: &Path, task: &TaskSpec, plans: &[Plan<'_>]) {
    record_eval(dir, task, plans[0].seed, EVAL_IS_ON);
    record_plans(dir, task, plans);
}

/// 22 successes and 3 failures over seeds 0..25.
pub fn mixed_plans() -> Vec<Plan<'static>> {
    (0..25u64)
        .map(|seed| match seed {
            3 | 11 => Plan::new(seed, &[PUT_BACK, PUT_BACK, PUT_BACK], &["place it on cube_big", "on top of cube_big"]),
            19 => Plan::new(seed, &[DIV_ZERO, "I cannot do that.", DIV_ZERO], &[]),
            5 => Plan::new(seed, &[DIV_ZERO, CORRECT], &[]),
            8 => Plan::new(seed, &[PUT_BACK, CORRECT], &["place it on cube_big"]),
            _ => Plan::new(seed, &[CORRECT], &[]),
        })
        .collect()
}
