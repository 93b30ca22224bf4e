use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Value as Json};

use robotgpt::blockworld::{Grid, Scene};
use robotgpt::config::Config;
use robotgpt::demostore::{self, Episode, Source, StoreGrid};
use robotgpt::difficulty::{self, DifficultyInput};
use robotgpt::dsl::{self, ApiSurface, ExecConfig, Skill};
use robotgpt::learner::{self, Dataset, EvalSettings, QModel, Trainer};
use robotgpt::llm::BotSession;
use robotgpt::orchestrator::{
    self, fixture_path, harvest, AutoReview, BotFactory, HarvestConfig, LiveFactory, ReviewHook, ScriptedFactory,
};
use robotgpt::promptgen::BotRole;
use robotgpt::tasks::{expert_plan, make_scene, oracle_check, TaskName};

use crate::error::{runtime, usage, CliError};
use crate::review::InteractiveReview;
use crate::{ApiKind, BotKind, Cli, Command, ReviewKind};

type Result<T> = std::result::Result<T, CliError>;

struct Out {
    json: bool,
}

/// Writes to stdout, ignoring a closed pipe.
fn print_out(text: &str) {
    let mut stdout = std::io::stdout().lock();
    let _ = stdout.write_all(text.as_bytes());
    if !text.ends_with('\n') {
        let _ = stdout.write_all(b"\n");
    }
}

impl Out {
    fn emit(&self, text: impl AsRef<str>, value: impl FnOnce() -> Json) {
        if self.json {
            print_out(&value().to_string());
        } else {
            print_out(text.as_ref());
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(runtime)?;
    }
    let cfg = Config::resolve(cli.config.as_deref())?;
    let out = Out { json: cli.json };
    match &cli.command {
        Command::Score(a) => score(a, &out),
        Command::GenDemos(a) => gen_demos(a, &cfg, &out),
        Command::ExpertDemos(a) => expert_demos(a, &cfg, &out),
        Command::Train(a) => train(a, &cfg, &out),
        Command::Eval(a) => eval(a, &cfg, &out),
        Command::DslRun(a) => dsl_run(a, &cfg, &out),
        Command::Replay(a) => replay(a, &cfg, &out),
        Command::Scene(a) => scene(a, &cfg, &out),
        Command::ShowConfig => {
            out.emit(cfg.to_text(), || {
                let map = robotgpt::config::KEYS.iter().map(|(k, _, _)| (k.to_string(), json!(cfg.get(k)))).collect();
                Json::Object(map)
            });
            Ok(())
        }
    }
}

fn task_name(s: &str) -> Result<TaskName> {
    s.parse().map_err(usage)
}

fn score(a: &crate::ScoreArgs, out: &Out) -> Result<()> {
    let one = |input: DifficultyInput| difficulty::score(input).map_err(usage);
    if a.table {
        let mut text = String::new();
        let mut rows = Vec::new();
        for t in TaskName::ALL {
            let input = t.spec().difficulty_input;
            let s = one(input)?;
            text.push_str(&format!("{:<18} {} {} {} {:>2} {}\n", t.as_str(), input.o, input.c, input.s, s.score, s.band));
            rows.push(json!({"task": t.as_str(), "o": input.o, "c": input.c, "s": input.s, "score": s.score, "band": s.band}));
        }
        out.emit(text, || Json::Array(rows));
        return Ok(());
    }
    let input = match (&a.task, a.objects, a.categories, a.steps) {
        (Some(t), ..) => task_name(t)?.spec().difficulty_input,
        (None, Some(o), Some(c), Some(s)) => DifficultyInput::new(o, c, s),
        _ => return Err(usage("give --task, --table, or --objects with --categories and --steps")),
    };
    let s = one(input)?;
    out.emit(format!("{} {}", s.score, s.band), || json!({"score": s.score, "band": s.band}));
    Ok(())
}

fn scene(a: &crate::SceneArgs, cfg: &Config, out: &Out) -> Result<()> {
    if let Some(path) = &a.load {
        let scene = Scene::from_json(&fs::read_to_string(path)?).map_err(runtime)?;
        let digest = scene.digest();
        out.emit(format!("{digest}\n{}", scene.to_text()), || json!({"digest": digest, "objects": scene.objects.len()}));
        return Ok(());
    }
    let task = task_name(a.task.as_deref().expect("clap requires --task"))?;
    let scene = make_scene(task, a.seed, &cfg.sim).map_err(runtime)?;
    let digest = scene.digest();
    match &a.out {
        Some(path) => {
            fs::write(path, scene.to_json())?;
            out.emit(digest.clone(), || json!({"path": path, "digest": digest}));
        }
        None => print_out(&scene.to_json()),
    }
    Ok(())
}

/// The task whose inventory has exactly the scene's object ids.
fn infer_task(scene: &Scene) -> Option<TaskName> {
    let mut ids: Vec<&str> = scene.objects.iter().map(|o| o.id.as_str()).collect();
    ids.sort_unstable();
    let mut matches = TaskName::ALL.into_iter().filter(|t| {
        let spec = t.spec();
        let mut want: Vec<&str> = spec.inventory.iter().map(|o| o.id.as_str()).collect();
        want.sort_unstable();
        want == ids
    });
    let first = matches.next();
    first.filter(|_| matches.next().is_none())
}

fn skill_name(s: Skill) -> &'static str {
    match s {
        Skill::Pick => "PICK",
        Skill::Place => "PLACE",
    }
}

fn dsl_run(a: &crate::DslRunArgs, cfg: &Config, out: &Out) -> Result<()> {
    let source = fs::read_to_string(&a.file)?;
    let scene = Scene::from_json(&fs::read_to_string(&a.scene)?).map_err(runtime)?;
    let task = match &a.task {
        Some(t) => Some(task_name(t)?),
        None => infer_task(&scene),
    };
    let api = match a.api {
        ApiKind::Actor => ApiSurface::Actor,
        ApiKind::Query => ApiSurface::Query,
    };
    let exec = ExecConfig { render: cfg.sim.render(), ..ExecConfig::default() };
    let (trace, end, value, error) = match dsl::parse(&source) {
        Err(e) => (Default::default(), scene.clone(), None, Some(e)),
        Ok(program) => match dsl::execute(&program, &scene, api, &exec) {
            Ok(o) => (o.trace, o.scene, o.value, None),
            Err(f) => (f.trace, f.scene, None, Some(f.error)),
        },
    };
    let oracle = task.map(|t| oracle_check(t, &end));
    if let Some(path) = &a.out {
        fs::write(path, end.to_json())?;
    }
    let mut text = String::new();
    for (n, step) in trace.steps.iter().enumerate() {
        let act = step.action;
        text.push_str(&format!(
            "{} line {}: {} x={:.4} y={:.4} theta={:.4}\n",
            n + 1,
            step.line,
            skill_name(act.skill),
            act.x,
            act.y,
            act.theta
        ));
    }
    if let Some(v) = &value {
        text.push_str(&format!("value={v}\n"));
    }
    if let Some(e) = &error {
        text.push_str(&format!("error={e}\n"));
    }
    text.push_str(&format!("oracle={}\n", oracle.map_or("n/a".to_string(), |o| o.to_string())));
    out.emit(text, || {
        let actions: Vec<Json> = trace
            .steps
            .iter()
            .map(|s| json!({"line": s.line, "skill": skill_name(s.action.skill), "x": s.action.x, "y": s.action.y, "theta": s.action.theta}))
            .collect();
        json!({
            "task": task.map(|t| t.as_str()),
            "actions": actions,
            "value": value.as_ref().map(|v| v.to_string()),
            "error": error.as_ref().map(|e| json!({"kind": e.kind.to_string(), "line": e.line, "message": e.message})),
            "oracle": oracle,
        })
    });
    match error {
        Some(e) => Err(runtime(format!("program failed: {e}"))),
        None => Ok(()),
    }
}

fn expert_demos(a: &crate::ExpertDemosArgs, cfg: &Config, out: &Out) -> Result<()> {
    let task = task_name(&a.task)?;
    let grid = cfg.store_grid();
    let exec = ExecConfig { render: cfg.sim.render(), ..ExecConfig::default() };
    let seeds: Vec<u64> = (a.seed..a.seed + a.episodes).collect();
    let episodes: Vec<Episode> = seeds
        .par_iter()
        .map(|&seed| -> Result<Episode> {
            let scene = make_scene(task, seed, &cfg.sim).map_err(|e| runtime(format!("seed {seed}: {e}")))?;
            let program = expert_plan(task, &scene).map_err(|e| runtime(format!("seed {seed}: {e}")))?;
            let run = dsl::execute(&program, &scene, ApiSurface::Actor, &exec)
                .map_err(|f| runtime(format!("seed {seed}: expert program failed: {}", f.error)))?;
            if !oracle_check(task, &run.scene) {
                return Err(runtime(format!("seed {seed}: expert plan does not satisfy the task")));
            }
            Ok(demostore::from_trace(&run.trace, true, task.as_str(), seed, Source::Expert, grid, cfg.sim.side)?)
        })
        .collect::<Result<_>>()?;
    let dir = a.out.clone().unwrap_or_else(|| cfg.paths.demos.clone());
    let paths = demostore::write(&episodes, &dir, grid)?;
    let transitions: usize = episodes.iter().map(|e| e.transitions.len()).sum();
    out.emit(format!("wrote {} episodes ({transitions} transitions) to {}", episodes.len(), dir.display()), || {
        json!({"episodes": episodes.len(), "transitions": transitions, "files": paths})
    });
    Ok(())
}

/// Episodes and grid from a store file or directory.
fn load_store(path: &Path) -> Result<(StoreGrid, Vec<Episode>)> {
    if path.is_file() {
        return Ok(demostore::read_file(path)?);
    }
    if !path.is_dir() {
        return Err(runtime(format!("no demo store at {}", path.display())));
    }
    match demostore::read(path)? {
        (Some(grid), eps) => Ok((grid, eps)),
        (None, _) => Err(runtime(format!("no .{} files in {}", demostore::FILE_EXTENSION, path.display()))),
    }
}

fn train(a: &crate::TrainArgs, cfg: &Config, out: &Out) -> Result<()> {
    let task = task_name(&a.task)?;
    let dir = a.demos.clone().unwrap_or_else(|| cfg.paths.demos.clone());
    let (grid, all) = load_store(&dir)?;
    let episodes: Vec<Episode> = all.into_iter().filter(|e| e.task == task.as_str()).collect();
    if episodes.is_empty() {
        return Err(runtime(format!("no {task} episodes in {}", dir.display())));
    }
    let mut lc = cfg.learner.clone();
    if let Some(s) = a.steps {
        lc.steps = s;
    }
    if let Some(s) = a.seed {
        lc.seed = s;
    }
    if lc.rotations != grid.r as usize {
        log::warn!("store uses {} rotations; overriding learner.R = {}", grid.r, lc.rotations);
        lc.rotations = grid.r as usize;
    }
    let (g, r) = (grid.g as usize, grid.r as usize);
    let data = Dataset::<f32>::new(&episodes, g, r)?;
    let mut trainer = Trainer::<f32>::new(lc, g);
    let total = trainer.cfg.steps;
    trainer.train(&data, |step, loss| {
        if step % 100 == 0 || step == total {
            log::info!("step {step}/{total} loss {loss:.5}");
        }
    })?;
    let tail = &trainer.losses[trainer.losses.len().saturating_sub(50)..];
    let loss = if tail.is_empty() { f32::NAN } else { tail.iter().sum::<f32>() / tail.len() as f32 };
    let path = a.out.clone().unwrap_or_else(|| cfg.paths.models.join(format!("{task}.qnet")));
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    learner::save_checkpoint(&trainer.model, &path)?;
    out.emit(
        format!("trained {} steps on {} episodes, loss {loss:.5}, saved {}", trainer.step, episodes.len(), path.display()),
        || json!({"steps": trainer.step, "episodes": episodes.len(), "transitions": data.len(), "loss": loss, "model": path}),
    );
    Ok(())
}

fn eval(a: &crate::EvalArgs, cfg: &Config, out: &Out) -> Result<()> {
    let task = task_name(&a.task)?;
    let model = learner::load_checkpoint::<f32>(&a.model)?;
    let g = model.grid();
    if g == 0 || !cfg.sim.grid.is_multiple_of(g) || !cfg.sim.crop.is_multiple_of(cfg.sim.grid / g) {
        return Err(usage(format!("model grid {g} does not divide sim.G = {} and sim.C = {}", cfg.sim.grid, cfg.sim.crop)));
    }
    let grid = StoreGrid { g: g as u16, c: (cfg.sim.crop / (cfg.sim.grid / g)) as u16, r: model.rotations() as u16 };
    let settings = EvalSettings { sim: cfg.sim.clone(), grid, mask: !a.no_mask };
    let seeds: Vec<u64> = (a.seed..a.seed + a.episodes).collect();
    let report = learner::evaluate(&model, task, &seeds, &settings);
    for r in &report.rollouts {
        log::info!("seed {} success={} steps={} fault={:?}", r.seed, r.success, r.actions.len(), r.fault);
    }
    let ap = orchestrator::format_ap(report.ap());
    out.emit(format!("AP {ap} ({}/{})", report.successes(), report.rollouts.len()), || {
        let rollouts: Vec<Json> = report
            .rollouts
            .iter()
            .map(|r| json!({"seed": r.seed, "success": r.success, "steps": r.actions.len(), "fault": r.fault}))
            .collect();
        json!({"task": task.as_str(), "ap": report.ap(), "successes": report.successes(), "episodes": report.rollouts.len(), "rollouts": rollouts})
    });
    Ok(())
}

fn gen_demos(a: &crate::GenDemosArgs, cfg: &Config, out: &Out) -> Result<()> {
    let task = task_name(&a.task)?.spec();
    let seeds: Vec<u64> = (a.seed..a.seed + a.episodes).collect();
    let factory: Box<dyn BotFactory> = match a.bot {
        BotKind::Scripted => {
            let dir = a.fixtures.clone().unwrap_or_else(|| cfg.paths.fixtures.clone());
            let missing = std::iter::once(fixture_path(&dir, BotRole::Evaluation, None))
                .chain(seeds.iter().map(|&s| fixture_path(&dir, BotRole::Decision, Some(s))))
                .find(|p| !p.is_file());
            if let Some(p) = missing {
                return Err(runtime(format!("missing fixture {}", p.display())));
            }
            let mut f = ScriptedFactory::new(dir, true);
            f.temperatures = cfg.llm.temperatures;
            Box::new(f)
        }
        BotKind::Live => {
            let mut f = LiveFactory::from_env(cfg.llm.http.clone(), &cfg.llm.model)?;
            f.temperatures = cfg.llm.temperatures;
            f.record_dir = a.record.clone();
            Box::new(f)
        }
    };
    let builder = cfg.prompt_builder()?;
    let first = seeds.first().copied().unwrap_or(a.seed);
    let scene = task.make_scene(first, &cfg.sim).map_err(runtime)?;
    let mut eval_bot: BotSession = factory.session(BotRole::Evaluation, None, &builder.eval(&scene, &task).system)?;
    let mut auto = AutoReview::new(cfg.sim.clone());
    let stdin = std::io::stdin();
    let mut interactive = InteractiveReview::new(stdin.lock(), std::io::stderr());
    let review: &mut dyn ReviewHook = match a.review {
        ReviewKind::Auto => &mut auto,
        ReviewKind::Interactive => &mut interactive,
    };
    let record = orchestrator::obtain_eval_code(&task, &scene, &mut eval_bot, review, &builder)?;
    if !record.approved {
        let detail = auto.last_report.as_ref().map(|r| format!(" ({} of {} probes agree)", r.agreed, r.total)).unwrap_or_default();
        return Err(runtime(format!("evaluation program for {} rejected by the oracle check{detail}", task.name)));
    }
    log::info!("evaluation program ({:?}):\n{}", record.approver, record.program.source);
    let hc = HarvestConfig {
        sim: cfg.sim.clone(),
        grid: cfg.store_grid(),
        exec: ExecConfig { render: cfg.sim.render(), ..ExecConfig::default() },
        builder,
    };
    let report = harvest(&task, &seeds, factory.as_ref(), &record, &hc)?;
    let dir: PathBuf = a.out.clone().unwrap_or_else(|| cfg.paths.demos.clone());
    let files = if report.demos.is_empty() { Vec::new() } else { report.write_demos(&dir)? };
    let stats = &report.stats;
    out.emit(stats.table_line(), || {
        let episodes: Vec<Json> = report
            .outcomes
            .iter()
            .map(|(seed, r)| match r {
                Ok(o) => json!({
                    "seed": seed,
                    "status": o.status.to_string(),
                    "iterations": o.iterations_used,
                    "attempts": o.attempts.iter().map(|a| a.status.to_string()).collect::<Vec<_>>(),
                    "divergent": o.divergent,
                }),
                Err(e) => json!({"seed": seed, "error": e.to_string()}),
            })
            .collect();
        json!({
            "task": task.name.as_str(),
            "success": stats.success,
            "fail": stats.fail,
            "ap": stats.ap(),
            "divergent": stats.divergent,
            "errors": stats.errors,
            "demos": report.demos.len(),
            "files": files,
            "episodes": episodes,
        })
    });
    if report.has_transport_errors() {
        return Err(CliError::External(format!("{} episodes hit LLM service errors", stats.errors)));
    }
    Ok(())
}

fn replay(a: &crate::ReplayArgs, cfg: &Config, out: &Out) -> Result<()> {
    let path = a.store.clone().unwrap_or_else(|| cfg.paths.demos.clone());
    let (grid, episodes) = load_store(&path)?;
    let ep = episodes
        .get(a.episode)
        .ok_or_else(|| usage(format!("episode {} out of range: the store holds {}", a.episode, episodes.len())))?;
    let mut maps: Vec<&Grid> = ep.transitions.iter().map(|t| &t.obs.heightmap).collect();
    if let Some(last) = ep.transitions.last() {
        maps.push(&last.next_obs.heightmap);
    }
    let mut text = format!(
        "{} seed {} source {} grid G={} C={} R={} transitions {}\n",
        ep.task,
        ep.seed,
        ep.source.as_str(),
        grid.g,
        grid.c,
        grid.r,
        ep.transitions.len()
    );
    for (t, tr) in ep.transitions.iter().enumerate() {
        if a.ascii {
            text.push_str(&maps[t].to_ascii());
        }
        let act = tr.action;
        text.push_str(&format!(
            "t={t} {} i={} j={} k={} gripper={} reward={} done={}\n",
            skill_name(act.skill),
            act.i,
            act.j,
            act.k,
            tr.obs.gripper,
            tr.reward,
            tr.done
        ));
    }
    if a.ascii {
        if let Some(m) = maps.last() {
            text.push_str(&m.to_ascii());
        }
    }
    let mut written = Vec::new();
    if let Some(dir) = &a.pgm {
        fs::create_dir_all(dir)?;
        let top = maps.iter().map(|m| m.max()).fold(1e-6f32, f32::max);
        for (t, m) in maps.iter().enumerate() {
            let p = dir.join(format!("{}_{}_{t:02}.pgm", ep.task, ep.seed));
            fs::write(&p, m.to_pgm(top))?;
            written.push(p);
        }
    }
    out.emit(text, || {
        let transitions: Vec<Json> = ep
            .transitions
            .iter()
            .map(|t| {
                json!({"skill": skill_name(t.action.skill), "i": t.action.i, "j": t.action.j, "k": t.action.k,
                       "gripper": t.obs.gripper, "reward": t.reward, "done": t.done})
            })
            .collect();
        json!({"task": ep.task, "seed": ep.seed, "source": ep.source, "transitions": transitions, "pgm": written})
    });
    Ok(())
}
