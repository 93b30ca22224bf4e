//! End-to-end paths through the public API: expert and scripted demonstrations
//! into the store, the store into training, and checkpoints back out.

use std::path::Path;

use robotgpt::blockworld::SimConfig;
use robotgpt::demostore::{self, Episode, Source, StoreError, StoreGrid};
use robotgpt::dsl::{execute, ApiSurface, ExecConfig};
use robotgpt::learner::{self, Architecture, Dataset, LearnerConfig, LearnerError, QNet, QNet64, Trainer};
use robotgpt::llm::{BotSession, RecordingBackend, ScriptedBackend};
use robotgpt::orchestrator::{
    fixture_path, harvest, obtain_eval_code, run_episode, AutoReview, BotFactory, HarvestConfig, ScriptedFactory, Status,
    Temperatures,
};
use robotgpt::promptgen::BotRole;
use robotgpt::tasks::{expert_plan, oracle_check, TaskName, TaskSpec};

fn expert_episode(task: TaskName, seed: u64) -> Episode {
    let sim = SimConfig::default();
    let scene = task.spec().make_scene(seed, &sim).unwrap();
    let plan = expert_plan(task, &scene).unwrap();
    let run = execute(&plan, &scene, ApiSurface::Actor, &ExecConfig::default()).unwrap();
    assert!(oracle_check(task, &run.scene));
    demostore::from_trace(&run.trace, true, task.as_str(), seed, Source::Expert, StoreGrid::default(), sim.side).unwrap()
}

#[test]
fn expert_demos_round_trip_for_every_task() {
    let dir = tempfile::tempdir().unwrap();
    let episodes: Vec<Episode> = TaskName::ALL.iter().flat_map(|&t| (0..3).map(move |s| expert_episode(t, s))).collect();
    let files = demostore::write(&episodes, dir.path(), StoreGrid::default()).unwrap();
    assert_eq!(files.len(), TaskName::ALL.len());
    let (grid, back) = demostore::read(dir.path()).unwrap();
    assert_eq!(grid, Some(StoreGrid::default()));
    let mut want = episodes.clone();
    want.sort_by(|a, b| (&a.task, a.seed).cmp(&(&b.task, b.seed)));
    let mut got = back;
    got.sort_by(|a, b| (&a.task, a.seed).cmp(&(&b.task, b.seed)));
    assert_eq!(got, want);

    for f in &files {
        let bytes = std::fs::read(f).unwrap();
        let (g, eps) = demostore::decode(&bytes).unwrap();
        assert_eq!(demostore::encode(&eps, g).unwrap(), bytes);
    }
}

#[test]
fn damaged_store_files_are_rejected() {
    let eps = vec![expert_episode(TaskName::MoveCube, 0)];
    let bytes = demostore::encode(&eps, StoreGrid::default()).unwrap();
    for pos in (0..bytes.len()).step_by(97).chain([bytes.len() - 1]) {
        let mut bad = bytes.clone();
        bad[pos] ^= 0x20;
        assert!(demostore::decode(&bad).is_err(), "flip at {pos} went unnoticed");
    }
    assert!(matches!(demostore::decode(&bytes[..bytes.len() - 3]), Err(StoreError::Corrupt(_))));
}

#[test]
fn checkpoints_round_trip_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let a = QNet::new(Architecture::Conv, 32, 8, 8, 3);
    let b = QNet64::new(Architecture::PatchLinear, 16, 4, 1, 4);
    learner::save_checkpoint(&a, &dir.path().join("a.qnet")).unwrap();
    learner::save_checkpoint(&b, &dir.path().join("b.qnet")).unwrap();
    let a2: QNet = learner::load_checkpoint(&dir.path().join("a.qnet")).unwrap();
    let b2: QNet64 = learner::load_checkpoint(&dir.path().join("b.qnet")).unwrap();
    assert_eq!(a2, a);
    assert_eq!(b2, b);
    assert!(a.params().iter().zip(a2.params()).all(|(x, y)| x.to_bits() == y.to_bits()));

    let bytes = learner::write_checkpoint(&a).unwrap();
    let mut bad = bytes.clone();
    bad[bytes.len() / 2] ^= 1;
    assert!(matches!(learner::read_checkpoint::<f32>(&bad), Err(LearnerError::Corrupt(_))));
    assert!(learner::read_checkpoint::<f64>(&bytes).is_err());
}

const EVAL: &str = "```\nreturn is_on(\"cube_small\", \"cube_big\")\n```";
const CORRECT: &str = "```\npick(\"cube_small\")\nplace_on(\"cube_big\")\n```";
const PUT_BACK: &str = "```\np = pose(\"cube_small\")\npick(\"cube_small\")\nplace(p.x, p.y, p.theta)\n```";

fn scripted(replies: &[&str], path: &Path, role: BotRole, system: &str) -> BotSession {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    let backend = RecordingBackend::new(ScriptedBackend::from_replies(replies), path);
    BotSession::new("scripted", Temperatures::default().for_role(role), system, Box::new(backend))
}

/// Records the eval fixture on the first plan's scene, then the decision and corrector fixtures of each plan.
fn record(dir: &Path, task: &TaskSpec, plans: &[(u64, &[&str])]) {
    let cfg = HarvestConfig::default();
    let b = &cfg.builder;
    let first = task.make_scene(plans[0].0, &cfg.sim).unwrap();
    let mut eval_bot = scripted(&[EVAL], &fixture_path(dir, BotRole::Evaluation, None), BotRole::Evaluation, &b.eval(&first, task).system);
    let eval = obtain_eval_code(task, &first, &mut eval_bot, &mut AutoReview::new(cfg.sim.clone()), b).unwrap();
    for &(seed, replies) in plans {
        let scene = task.make_scene(seed, &cfg.sim).unwrap();
        let mut d = scripted(replies, &fixture_path(dir, BotRole::Decision, Some(seed)), BotRole::Decision, &b.decision(&scene, task).system);
        let system = b.corrector(&scene, task, "", false, &[]).system;
        let mut c = scripted(&["put it on cube_big", "on cube_big"], &fixture_path(dir, BotRole::Corrector, Some(seed)), BotRole::Corrector, &system);
        run_episode(task, seed, &scene, &mut d, &mut c, &eval, b, &cfg.exec).unwrap();
    }
}

#[test]
fn scripted_harvest_feeds_the_learner() {
    let task = TaskName::MoveCube.spec();
    let fixtures = tempfile::tempdir().unwrap();
    let plans: Vec<(u64, &[&str])> = vec![(0, &[CORRECT]), (1, &[PUT_BACK, PUT_BACK, PUT_BACK]), (2, &[CORRECT]), (3, &[CORRECT])];
    record(fixtures.path(), &task, &plans);

    let cfg = HarvestConfig::default();
    let scene = task.make_scene(0, &cfg.sim).unwrap();
    let factory = ScriptedFactory::new(fixtures.path(), true);
    let mut eval_bot = factory.session(BotRole::Evaluation, None, &cfg.builder.eval(&scene, &task).system).unwrap();
    let eval = obtain_eval_code(&task, &scene, &mut eval_bot, &mut AutoReview::new(cfg.sim.clone()), &cfg.builder).unwrap();
    let report = harvest(&task, &[0, 1, 2, 3], &factory, &eval, &cfg).unwrap();
    assert_eq!(report.stats.table_line(), "3 1 0.75");
    assert_eq!(report.outcomes[1].1.as_ref().unwrap().status, Status::BudgetExhausted);

    let store = tempfile::tempdir().unwrap();
    report.write_demos(store.path()).unwrap();
    let (grid, episodes) = demostore::read(store.path()).unwrap();
    let grid = grid.unwrap();
    assert_eq!(episodes.iter().map(|e| e.seed).collect::<Vec<_>>(), vec![0, 2, 3]);
    assert!(episodes.iter().all(|e| e.source == Source::Llm));

    let data = Dataset::<f32>::new(&episodes, grid.g as usize, grid.r as usize).unwrap();
    let cfg = LearnerConfig { steps: 5, hidden: 4, ..LearnerConfig::default() };
    let mut trainer = Trainer::<f32>::new(cfg, grid.g as usize);
    trainer.train(&data, |_, loss| assert!(loss.is_finite())).unwrap();
    assert_eq!(trainer.step, 5);
}
