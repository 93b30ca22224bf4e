use super::*;
use crate::llm::ScriptedBackend;

const CORRECT: &str = "Here you go.\n```python\npick(\"cube_small\")\nplace_on(\"cube_big\")\n```";
const DIV_ZERO: &str = "```\nx = 1\ny = x / 0\n```";
const PUT_BACK: &str = "```\np = pose(\"cube_small\")\npick(\"cube_small\")\nplace(p.x, p.y, p.theta)\n```";
const OFF_CENTER: &str = "```\nb = pose(\"cube_big\")\npick(\"cube_small\")\nplace(b.x + 0.0063, b.y, b.theta)\n```";
const EVAL_IS_ON: &str = "```\nreturn is_on(\"cube_small\", \"cube_big\")\n```";
const EVAL_TRUE: &str = "```\nreturn True\n```";

fn session(replies: &[&str]) -> BotSession {
    BotSession::new("scripted", 0.0, "system", Box::new(ScriptedBackend::from_replies(replies)))
}

fn move_cube() -> (TaskSpec, Scene) {
    let spec = TaskName::MoveCube.spec();
    let scene = spec.make_scene(7, &SimConfig::default()).unwrap();
    (spec, scene)
}

fn approved(task: &TaskSpec, scene: &Scene, reply: &str) -> EvalCodeRecord {
    let mut review = AutoReview::new(SimConfig::default());
    let rec = obtain_eval_code(task, scene, &mut session(&[reply]), &mut review, &PromptBuilder::default()).unwrap();
    assert!(rec.approved);
    rec
}

fn run(decision: &[&str], corrector: &[&str]) -> EpisodeOutcome {
    let (task, scene) = move_cube();
    let eval = approved(&task, &scene, EVAL_IS_ON);
    let mut d = session(decision);
    let mut c = session(corrector);
    let out = run_episode(&task, 7, &scene, &mut d, &mut c, &eval, &PromptBuilder::default(), &ExecConfig::default()).unwrap();
    assert!(out.iterations_used <= MAX_ITERATIONS);
    assert!(out.program_requests() <= MAX_ITERATIONS + 1);
    assert!(out.attempts.iter().all(|a| a.initial_digest == scene.digest()));
    if out.status == Status::Success {
        assert_eq!(out.eval_verdict, Some(true));
    }
    out
}

#[test]
fn success_first_try() {
    let out = run(&[CORRECT], &[]);
    assert_eq!(out.status, Status::Success);
    assert_eq!(out.iterations_used, 0);
    assert_eq!(out.trace.len(), 2);
    assert!(out.verified());
    // system, prompt, reply
    assert_eq!(out.decision_transcript.messages.len(), 3);
}

#[test]
fn runtime_error_then_fix() {
    let out = run(&[DIV_ZERO, CORRECT], &[]);
    assert_eq!(out.status, Status::Success);
    assert_eq!(out.iterations_used, 1);
    assert_eq!(out.attempts[0].status, Status::RuntimeFailure);
    let feedback = &out.decision_transcript.messages[3].content;
    assert!(feedback.contains("line 2") && feedback.contains("DIV_ZERO"), "{feedback}");
    assert_eq!(out.corrector_transcript.messages.len(), 1);
}

#[test]
fn eval_failure_then_fix_through_corrector() {
    let analysis = "The cube was put back where it started; place it on cube_big instead.";
    let out = run(&[PUT_BACK, CORRECT], &[analysis]);
    assert_eq!(out.status, Status::Success);
    assert_eq!(out.iterations_used, 1);
    assert_eq!(out.attempts[0].status, Status::EvalFailure);
    assert_eq!(out.corrector_transcript.messages.len(), 3);
    let request = &out.corrector_transcript.messages[1].content;
    assert!(request.contains("place(p.x, p.y, p.theta)") && request.contains("False"));
    assert!(out.decision_transcript.messages[3].content.contains(analysis));
}

#[test]
fn three_failures_exhaust_the_budget() {
    let out = run(&[PUT_BACK, PUT_BACK, PUT_BACK, CORRECT], &["a", "b", "c"]);
    assert_eq!(out.status, Status::BudgetExhausted);
    assert_eq!(out.last_failure, Some(Status::EvalFailure));
    assert_eq!(out.iterations_used, 3);
    assert_eq!(out.program_requests(), 3);
    // the corrector is not consulted after the last failure
    assert_eq!(out.corrector_transcript.assistant_replies().count(), 2);

    let out = run(&["no code here", DIV_ZERO, "still nothing"], &[]);
    assert_eq!(out.status, Status::BudgetExhausted);
    assert_eq!(out.last_failure, Some(Status::NoCode));
    assert_eq!(out.attempts.iter().map(|a| a.status).collect::<Vec<_>>(), [Status::NoCode, Status::RuntimeFailure, Status::NoCode]);
}

#[test]
fn parse_error_is_a_runtime_failure() {
    let out = run(&["```\npick(\"cube_small\"\n```", CORRECT], &[]);
    assert_eq!(out.attempts[0].status, Status::RuntimeFailure);
    assert!(out.attempts[0].error.as_deref().unwrap().starts_with("PARSE"));
    assert_eq!(out.status, Status::Success);
}

#[test]
fn llm_errors_propagate() {
    let (task, scene) = move_cube();
    let eval = approved(&task, &scene, EVAL_IS_ON);
    let r = run_episode(&task, 7, &scene, &mut session(&[]), &mut session(&[]), &eval, &PromptBuilder::default(), &ExecConfig::default());
    assert!(matches!(r, Err(OrchestratorError::Llm(LlmError::FixtureExhausted { .. }))));
}

#[test]
fn divergent_success_is_flagged() {
    let out = run(&[OFF_CENTER], &[]);
    assert_eq!(out.status, Status::Success);
    assert_eq!((out.eval_verdict, out.oracle_verdict), (Some(true), Some(false)));
    assert!(out.divergent);
    assert!(!out.verified());
}

#[test]
fn auto_review_gatekeeping() {
    let (task, scene) = move_cube();
    let mut review = AutoReview::new(SimConfig::default());
    let rec = obtain_eval_code(&task, &scene, &mut session(&[EVAL_TRUE]), &mut review, &PromptBuilder::default()).unwrap();
    assert!(!rec.approved);
    let report = review.last_report.clone().unwrap();
    assert_eq!(report.total, 20);
    assert_eq!(report.agreed, 10);
    assert!(report.disagreements.iter().all(|&(_, label)| !label));

    let rec = obtain_eval_code(&task, &scene, &mut session(&[EVAL_IS_ON]), &mut review, &PromptBuilder::default()).unwrap();
    assert!(rec.approved);
    assert_eq!(rec.approver, Approver::AutoOracleAgreement);
    assert!(review.last_report.unwrap().passed());

    let r = run_episode(&task, 7, &scene, &mut session(&[CORRECT]), &mut session(&[]), &EvalCodeRecord { approved: false, ..rec }, &PromptBuilder::default(), &ExecConfig::default());
    assert!(matches!(r, Err(OrchestratorError::NotApproved)));
}

#[test]
fn probes_are_balanced_for_every_task() {
    for t in TaskName::ALL {
        let probes = oracle_probes(t, &SimConfig::default()).unwrap();
        assert_eq!(probes.len(), 20);
        assert_eq!(probes.iter().filter(|p| p.label).count(), 10, "{t}");
    }
}

struct Human(ReviewDecision);

impl ReviewHook for Human {
    fn review(&mut self, _: TaskName, _: &str) -> ReviewDecision {
        self.0.clone()
    }

    fn approver(&self) -> Approver {
        Approver::Human
    }
}

#[test]
fn human_review() {
    let (task, scene) = move_cube();
    let b = PromptBuilder::default();
    let edit = "return is_on(\"cube_small\", \"cube_big\") and dist_xy(\"cube_small\", \"cube_big\") < 0.003";
    let rec = obtain_eval_code(&task, &scene, &mut session(&[EVAL_TRUE]), &mut Human(ReviewDecision::Edit(edit.into())), &b).unwrap();
    assert!(rec.approved);
    assert_eq!(rec.approver, Approver::Human);
    assert_eq!(rec.program.source, edit);

    let r = obtain_eval_code(&task, &scene, &mut session(&[EVAL_TRUE]), &mut Human(ReviewDecision::Reject), &b);
    assert!(matches!(r, Err(OrchestratorError::ReviewRejected(TaskName::MoveCube))));
}

#[test]
fn eval_bot_gets_one_retry() {
    let (task, scene) = move_cube();
    let b = PromptBuilder::default();
    let mut review = AutoReview::new(SimConfig::default());
    let mut bot = session(&["no code", EVAL_IS_ON]);
    let rec = obtain_eval_code(&task, &scene, &mut bot, &mut review, &b).unwrap();
    assert!(rec.approved);
    assert_eq!(rec.transcript.assistant_replies().count(), 2);

    let r = obtain_eval_code(&task, &scene, &mut session(&["```\nreturn (\n```", "```\nif True\n```"]), &mut review, &b);
    assert!(matches!(r, Err(OrchestratorError::EvalUnusable(_))));
}

#[test]
fn eval_cache_asks_once_per_task() {
    let (task, scene) = move_cube();
    let b = PromptBuilder::default();
    let mut review = AutoReview::new(SimConfig::default());
    let mut bot = session(&[EVAL_IS_ON]);
    let mut cache = EvalCache::default();
    cache.get_or_obtain(&task, &scene, &mut bot, &mut review, &b).unwrap();
    // a second request would exhaust the fixture
    cache.get_or_obtain(&task, &scene, &mut bot, &mut review, &b).unwrap();
    assert!(cache.get(TaskName::MoveCube).is_some());
}

#[test]
fn ap_formatting() {
    assert_eq!(format_ap(Some(1.0)), "1.0");
    assert_eq!(format_ap(Some(22.0 / 25.0)), "0.88");
    assert_eq!(format_ap(Some(0.9)), "0.9");
    assert_eq!(format_ap(Some(0.0)), "0.0");
    assert_eq!(format_ap(None), "n/a");
    assert_eq!(SuccessStats::default().table_line(), "0 0 n/a");
}

/// Writes a fixture tree by recording scripted replies through the real prompts.
fn record_fixtures(dir: &Path, task: &TaskSpec, plan: &[(u64, Vec<&str>, Vec<&str>)]) {
    use crate::llm::RecordingBackend;
    let cfg = HarvestConfig::default();
    let b = &cfg.builder;
    for (seed, decision, corrector) in plan {
        let scene = task.make_scene(*seed, &cfg.sim).unwrap();
        let mk = |role, replies: &[&str], system: &str| {
            let path = fixture_path(dir, role, Some(*seed));
            std::fs::create_dir_all(path.parent().unwrap()).unwrap();
            let backend = RecordingBackend::new(ScriptedBackend::from_replies(replies), path);
            BotSession::new("scripted", Temperatures::default().for_role(role), system, Box::new(backend))
        };
        let mut d = mk(BotRole::Decision, decision, &b.decision(&scene, task).system);
        let mut c = mk(BotRole::Corrector, corrector, &b.corrector(&scene, task, "", false, &[]).system);
        let eval = approved(task, &scene, EVAL_IS_ON);
        run_episode(task, *seed, &scene, &mut d, &mut c, &eval, b, &cfg.exec).unwrap();
    }
}

fn mixed_plan() -> Vec<(u64, Vec<&'static str>, Vec<&'static str>)> {
    (0..25u64)
        .map(|seed| match seed {
            3 | 11 => (seed, vec![PUT_BACK, PUT_BACK, PUT_BACK], vec!["a", "b"]),
            19 => (seed, vec![DIV_ZERO, "nothing", DIV_ZERO], vec![]),
            5 => (seed, vec![DIV_ZERO, CORRECT], vec![]),
            8 => (seed, vec![PUT_BACK, CORRECT], vec!["place it on cube_big"]),
            _ => (seed, vec![CORRECT], vec![]),
        })
        .collect()
}

#[test]
fn harvest_mixed_batch_is_deterministic() {
    let (task, scene) = move_cube();
    let dir = tempfile::tempdir().unwrap();
    record_fixtures(dir.path(), &task, &mixed_plan());
    let eval = approved(&task, &scene, EVAL_IS_ON);
    let factory = ScriptedFactory::new(dir.path(), true);
    let seeds: Vec<u64> = (0..25).collect();
    let cfg = HarvestConfig::default();

    let a = harvest(&task, &seeds, &factory, &eval, &cfg).unwrap();
    assert_eq!(a.stats.table_line(), "22 3 0.88");
    assert_eq!(a.stats.errors, 0);
    assert_eq!(a.demos.len(), 22);
    assert!(!a.has_transport_errors());

    let b = harvest(&task, &seeds, &factory, &eval, &cfg).unwrap();
    let statuses = |r: &HarvestReport| {
        r.outcomes.iter().map(|(s, o)| (*s, o.as_ref().unwrap().status, o.as_ref().unwrap().iterations_used)).collect::<Vec<_>>()
    };
    assert_eq!(statuses(&a), statuses(&b));

    let out_a = tempfile::tempdir().unwrap();
    let out_b = tempfile::tempdir().unwrap();
    a.write_demos(out_a.path()).unwrap();
    b.write_demos(out_b.path()).unwrap();
    let bytes = |d: &Path| std::fs::read(d.join("move_cube_llm.rgd")).unwrap();
    assert_eq!(bytes(out_a.path()), bytes(out_b.path()));
}

#[test]
fn harvest_excludes_divergent_episodes() {
    let (task, scene) = move_cube();
    let dir = tempfile::tempdir().unwrap();
    let plan = vec![(0, vec![CORRECT], vec![]), (1, vec![OFF_CENTER], vec![]), (2, vec![CORRECT], vec![])];
    record_fixtures(dir.path(), &task, &plan);
    let eval = approved(&task, &scene, EVAL_IS_ON);
    let report = harvest(&task, &[0, 1, 2], &ScriptedFactory::new(dir.path(), true), &eval, &HarvestConfig::default()).unwrap();
    assert_eq!(report.stats.divergent, 1);
    assert_eq!(report.stats.table_line(), "2 1 0.67");
    assert_eq!(report.demos.iter().map(|d| d.seed).collect::<Vec<_>>(), vec![0, 2]);
}

#[test]
fn harvest_edge_cases() {
    let (task, scene) = move_cube();
    let eval = approved(&task, &scene, EVAL_IS_ON);
    let dir = tempfile::tempdir().unwrap();
    let factory = ScriptedFactory::new(dir.path(), true);
    let empty = harvest(&task, &[], &factory, &eval, &HarvestConfig::default()).unwrap();
    assert_eq!(empty.stats.ap(), None);
    assert!(empty.demos.is_empty());

    // missing decision fixtures are reported per episode without aborting
    let missing = harvest(&task, &[4, 5], &factory, &eval, &HarvestConfig::default()).unwrap();
    assert_eq!((missing.stats.fail, missing.stats.errors), (2, 2));

    // 25 all-success fixtures
    let plan: Vec<_> = (0..25u64).map(|s| (s, vec![CORRECT], vec![])).collect();
    record_fixtures(dir.path(), &task, &plan);
    let all = harvest(&task, &(0..25).collect::<Vec<_>>(), &factory, &eval, &HarvestConfig::default()).unwrap();
    assert_eq!(all.stats.table_line(), "25 0 1.0");
}
