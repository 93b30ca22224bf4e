//! Five-part prompts for the decision, evaluation and corrector bots.
//!
//! Phrasing lives in plain-text templates under `templates/` with `{name}`
//! slots. [`Templates::from_dir`] overrides any subset of them at runtime.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::blockworld::{Gripper, Scene};
use crate::dsl::{ApiSurface, RuntimeError};
use crate::tasks::TaskSpec;

/// Section headers of the user message, in order.
pub const SECTIONS: [&str; 5] = ["BACKGROUND", "OBJECTS", "ENVIRONMENT", "TASK", "EXAMPLES"];

pub const DEFAULT_TOKEN_BUDGET: usize = 8000;

const PROGRAM_REPLY: &str = "Reply with the complete program in a single ``` fenced code block.";
const CORRECTOR_REPLY: &str = "Reply in plain text.";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BotRole {
    Decision,
    Evaluation,
    Corrector,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub role: BotRole,
    pub system: String,
    pub user: String,
    /// Examples were dropped to fit the budget.
    pub truncated: bool,
}

impl PromptBundle {
    pub fn len(&self) -> usize {
        self.system.chars().count() + self.user.chars().count()
    }

    pub fn is_empty(&self) -> bool {
        self.system.is_empty() && self.user.is_empty()
    }
}

const TEMPLATE_FILES: &[(&str, &str)] = &[
    ("background_decision", include_str!("../templates/background_decision.txt")),
    ("background_eval", include_str!("../templates/background_eval.txt")),
    ("background_corrector", include_str!("../templates/background_corrector.txt")),
    ("language", include_str!("../templates/language.txt")),
    ("system", include_str!("../templates/system.txt")),
    ("user", include_str!("../templates/user.txt")),
    ("environment", include_str!("../templates/environment.txt")),
    ("task_decision", include_str!("../templates/task_decision.txt")),
    ("task_eval", include_str!("../templates/task_eval.txt")),
    ("task_corrector", include_str!("../templates/task_corrector.txt")),
    ("correction_runtime", include_str!("../templates/correction_runtime.txt")),
    ("correction_no_code", include_str!("../templates/correction_no_code.txt")),
    ("correction_eval", include_str!("../templates/correction_eval.txt")),
    ("example_place", include_str!("../templates/example_place.txt")),
    ("example_loop", include_str!("../templates/example_loop.txt")),
    ("example_query", include_str!("../templates/example_query.txt")),
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Templates {
    texts: BTreeMap<String, String>,
}

impl Default for Templates {
    fn default() -> Self {
        let texts = TEMPLATE_FILES
            .iter()
            .map(|(name, text)| (name.to_string(), text.trim_end_matches('\n').to_string()))
            .collect();
        Self { texts }
    }
}

impl Templates {
    /// Built-in templates with any `<name>.txt` found in `dir` substituted.
    pub fn from_dir(dir: &Path) -> std::io::Result<Self> {
        let mut t = Self::default();
        for (name, _) in TEMPLATE_FILES {
            let path = dir.join(format!("{name}.txt"));
            if path.is_file() {
                let text = std::fs::read_to_string(&path)?;
                t.texts.insert(name.to_string(), text.trim_end_matches('\n').to_string());
            }
        }
        Ok(t)
    }

    pub fn names() -> impl Iterator<Item = &'static str> {
        TEMPLATE_FILES.iter().map(|(n, _)| *n)
    }

    pub fn get(&self, name: &str) -> &str {
        self.texts.get(name).map(String::as_str).unwrap_or("")
    }
}

/// Replaces `{key}` slots in one pass; substituted text is not rescanned and
/// unknown slots are left as written.
pub fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let close = after.find('}');
        let key = close.map(|c| &after[..c]);
        match key.and_then(|k| vars.iter().find(|(name, _)| *name == k)) {
            Some((k, v)) => {
                out.push_str(v);
                rest = &after[k.len() + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

/// One line per builtin on the given surface.
pub fn api_reference(api: ApiSurface) -> String {
    let mut lines = vec![
        "objects() -> list of all object names",
        "pose(name) -> pose record (x, y, z, theta); (x, y) is the footprint center and z the bottom height",
        "size(name) -> size record (w, l, h); w runs along the object's theta direction",
    ];
    match api {
        ApiSurface::Actor => lines.extend([
            "pick(name) -> grasp the named object at its center, aligned with it",
            "pick_at(x, y, theta) -> grasp whatever is topmost at (x, y) with the gripper turned to theta",
            "place(x, y, theta) -> release the held object centered at (x, y), turned to theta; it rests on whatever is below",
            "place_on(name) -> release the held object centered on top of the named object, aligned with it",
        ]),
        ApiSurface::Query => lines.extend([
            "is_on(a, b) -> True if object a rests directly on object b",
            "dist_xy(a, b) -> horizontal distance between the centers of a and b",
            "inside(a, b) -> True if the footprint of a lies within the footprint of b",
        ]),
    }
    lines.extend([
        "len(list), range(n), abs(x) -> as in Python",
        "print(...) -> ignored",
    ]);
    lines.join("\n")
}

/// What went wrong in the previous attempt.
#[derive(Clone, Debug, PartialEq)]
pub enum Correction<'a> {
    Runtime { error: &'a RuntimeError, source: &'a str },
    NoCode,
    EvalFailure { analysis: &'a str },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptBuilder {
    pub templates: Templates,
    /// Upper bound on system + user characters.
    pub token_budget: usize,
}

impl Default for PromptBuilder {
    fn default() -> Self {
        Self { templates: Templates::default(), token_budget: DEFAULT_TOKEN_BUDGET }
    }
}

fn first_sentence(text: &str) -> &str {
    match text.find(". ") {
        Some(i) => &text[..=i],
        None => text,
    }
}

impl PromptBuilder {
    pub fn new(templates: Templates, token_budget: usize) -> Self {
        Self { templates, token_budget }
    }

    fn t(&self, name: &str) -> &str {
        self.templates.get(name)
    }

    fn environment(&self, scene: &Scene) -> String {
        let gripper = match &scene.gripper {
            Gripper::Empty => "empty".to_string(),
            Gripper::Holding { id, .. } => format!("holding {id}"),
        };
        fill(self.t("environment"), &[("side", &format!("{}", scene.workspace.side)), ("gripper", &gripper)])
    }

    fn bundle(&self, role: BotRole, scene: &Scene, task_text: &str, examples: &[&str]) -> PromptBundle {
        let (background, api) = match role {
            BotRole::Decision => (self.t("background_decision"), ApiSurface::Actor),
            BotRole::Evaluation => (self.t("background_eval"), ApiSurface::Query),
            BotRole::Corrector => (self.t("background_corrector"), ApiSurface::Actor),
        };
        let system = fill(
            self.t("system"),
            &[
                ("background", background),
                ("api", &api_reference(api)),
                ("language", self.t("language")),
                ("reply", if role == BotRole::Corrector { CORRECTOR_REPLY } else { PROGRAM_REPLY }),
            ],
        );
        let objects = scene.to_text();
        let objects = objects.rsplit_once('\n').map_or("", |(objs, _gripper)| objs);
        let environment = self.environment(scene);
        let user_for = |examples: &str| {
            fill(
                self.t("user"),
                &[
                    ("summary", first_sentence(background)),
                    ("objects", objects),
                    ("environment", &environment),
                    ("task", task_text),
                    ("examples", examples),
                ],
            )
        };
        let sys_len = system.chars().count();
        let mut kept = examples.len();
        loop {
            let text = if kept == 0 { "(none)".to_string() } else { examples[..kept].join("\n\n") };
            let user = user_for(&text);
            if sys_len + user.chars().count() <= self.token_budget || kept == 0 {
                return PromptBundle { role, system, user, truncated: kept < examples.len() };
            }
            kept -= 1;
        }
    }

    pub fn decision(&self, scene: &Scene, task: &TaskSpec) -> PromptBundle {
        let task_text = fill(self.t("task_decision"), &[("instruction", task.instruction)]);
        self.bundle(BotRole::Decision, scene, &task_text, &[self.t("example_place"), self.t("example_loop")])
    }

    pub fn eval(&self, scene: &Scene, task: &TaskSpec) -> PromptBundle {
        let task_text = fill(self.t("task_eval"), &[("instruction", task.instruction)]);
        self.bundle(BotRole::Evaluation, scene, &task_text, &[self.t("example_query")])
    }

    /// Failure-analysis request; `scene` is the final scene of the failed run.
    pub fn corrector(&self, scene: &Scene, task: &TaskSpec, program: &str, verdict: bool, history: &[String]) -> PromptBundle {
        let verdict = if verdict { "True" } else { "False" };
        let history = if history.is_empty() { "(first attempt)".to_string() } else { history.join("\n") };
        let task_text = fill(
            self.t("task_corrector"),
            &[("instruction", task.instruction), ("verdict", verdict), ("program", program), ("history", &history)],
        );
        self.bundle(BotRole::Corrector, scene, &task_text, &[])
    }

    pub fn correction_message(&self, c: &Correction<'_>) -> String {
        match c {
            Correction::Runtime { error, source } => {
                let source_line = source.split('\n').nth(error.line.saturating_sub(1)).unwrap_or("").trim();
                fill(
                    self.t("correction_runtime"),
                    &[
                        ("line", &error.line.to_string()),
                        ("source_line", source_line),
                        ("kind", &error.kind.to_string()),
                        ("message", &error.message),
                    ],
                )
            }
            Correction::NoCode => self.t("correction_no_code").to_string(),
            Correction::EvalFailure { analysis } => fill(self.t("correction_eval"), &[("analysis", analysis)]),
        }
    }
}

pub fn build_decision_prompt(scene: &Scene, task: &TaskSpec) -> PromptBundle {
    PromptBuilder::default().decision(scene, task)
}

pub fn build_eval_prompt(scene: &Scene, task: &TaskSpec) -> PromptBundle {
    PromptBuilder::default().eval(scene, task)
}

pub fn build_correction_message(c: &Correction<'_>) -> String {
    PromptBuilder::default().correction_message(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockworld::SimConfig;
    use crate::dsl::{parse, ErrorKind};
    use crate::tasks::{make_scene, TaskName};

    fn scene(task: TaskName) -> Scene {
        make_scene(task, 0, &SimConfig::default()).unwrap()
    }

    /// Positions of the section headers as whole lines, in order of appearance.
    fn headers(text: &str) -> Vec<&str> {
        text.lines().filter(|l| SECTIONS.contains(l)).collect()
    }

    fn section<'a>(text: &'a str, name: &str) -> &'a str {
        let start = text.find(&format!("{name}\n")).unwrap() + name.len() + 1;
        let end = SECTIONS
            .iter()
            .filter_map(|h| text[start..].find(&format!("\n\n{h}\n")))
            .min()
            .map_or(text.len(), |e| start + e);
        &text[start..end]
    }

    #[test]
    fn decision_prompt_has_instruction_and_sections() {
        let task = TaskName::MoveCube.spec();
        let b = build_decision_prompt(&scene(TaskName::MoveCube), &task);
        assert_eq!(b.role, BotRole::Decision);
        assert!(b.user.contains("Move small cube above onto big cube"));
        assert_eq!(headers(&b.user), SECTIONS.to_vec());
        assert!(b.system.contains("place_on(name)"));
        assert!(!b.system.contains("is_on("));
        assert!(!b.truncated);
        assert!(b.len() <= DEFAULT_TOKEN_BUDGET);
    }

    #[test]
    fn prompts_are_byte_stable() {
        for t in TaskName::ALL {
            let s = scene(t);
            let task = t.spec();
            assert_eq!(build_decision_prompt(&s, &task), build_decision_prompt(&s, &task));
            assert_eq!(build_eval_prompt(&s, &task), build_eval_prompt(&s, &task));
        }
    }

    #[test]
    fn objects_section_lists_every_object() {
        let s = scene(TaskName::BinPacking);
        let b = build_decision_prompt(&s, &TaskName::BinPacking.spec());
        let objects = section(&b.user, "OBJECTS");
        assert_eq!(objects.lines().count(), 9);
        let s = scene(TaskName::HouseBuilding3);
        let b = build_decision_prompt(&s, &TaskName::HouseBuilding3.spec());
        assert_eq!(section(&b.user, "OBJECTS").lines().count(), 4);
    }

    #[test]
    fn eval_prompt_uses_query_surface() {
        let b = build_eval_prompt(&scene(TaskName::MoveCube), &TaskName::MoveCube.spec());
        assert_eq!(b.role, BotRole::Evaluation);
        assert!(b.system.contains("is_on(a, b)"));
        assert!(!b.system.contains("pick("));
        assert!(section(&b.user, "TASK").contains("return"));
        assert_eq!(headers(&b.user), SECTIONS.to_vec());
    }

    #[test]
    fn examples_parse_and_are_not_task_solutions() {
        let t = Templates::default();
        for name in ["example_place", "example_loop", "example_query"] {
            let code = crate::dsl::extract_code(t.get(name)).unwrap();
            parse(&code).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        for task in TaskName::ALL {
            let s = scene(task);
            let b = build_decision_prompt(&s, &task.spec());
            let expert = crate::tasks::expert_source(task, &s).unwrap();
            assert!(!b.user.contains(&expert), "{task}");
        }
    }

    #[test]
    fn no_tolerances_leak() {
        for task in TaskName::ALL {
            let s = scene(task);
            for b in [build_decision_prompt(&s, &task.spec()), build_eval_prompt(&s, &task.spec())] {
                let all = format!("{}{}", b.system, b.user);
                for leak in ["0.003125", "0.00625", "epsilon", "tolerance", "oracle"] {
                    assert!(!all.contains(leak), "{task}: {leak}");
                }
            }
        }
    }

    #[test]
    fn budget_drops_examples_first() {
        let s = scene(TaskName::MoveCube);
        let task = TaskName::MoveCube.spec();
        let full = build_decision_prompt(&s, &task);
        let tight = PromptBuilder { token_budget: full.len() - 1, ..PromptBuilder::default() }.decision(&s, &task);
        assert!(tight.truncated);
        assert!(tight.len() < full.len());
        assert_eq!(headers(&tight.user), SECTIONS.to_vec());
        assert_eq!(section(&tight.user, "OBJECTS"), section(&full.user, "OBJECTS"));
        let tiny = PromptBuilder { token_budget: 10, ..PromptBuilder::default() }.decision(&s, &task);
        assert!(tiny.truncated);
        assert_eq!(section(&tiny.user, "EXAMPLES"), "(none)");
    }

    #[test]
    fn runtime_correction_quotes_line() {
        let src = "a = 1\nb = 2\nx = a / 0";
        let err = RuntimeError::new(ErrorKind::DivZero, 3, "division by zero");
        let m = build_correction_message(&Correction::Runtime { error: &err, source: src });
        assert!(m.contains("line 3"));
        assert!(m.contains("x = a / 0"));
        assert!(m.contains("DIV_ZERO"));
        assert_eq!(m, build_correction_message(&Correction::Runtime { error: &err, source: src }));
    }

    #[test]
    fn eval_correction_embeds_analysis() {
        let m = build_correction_message(&Correction::EvalFailure { analysis: "placed before grasping" });
        assert!(m.contains("placed before grasping"));
    }

    #[test]
    fn fill_is_single_pass() {
        assert_eq!(fill("a {x} b {y} {z}", &[("x", "{y}"), ("y", "2")]), "a {y} b 2 {z}");
        assert_eq!(fill("{", &[]), "{");
        assert_eq!(fill("{x", &[("x", "1")]), "{x");
    }

    #[test]
    fn template_dir_overrides() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("task_decision.txt"), "DO: {instruction}\n").unwrap();
        let b = PromptBuilder::new(Templates::from_dir(dir.path()).unwrap(), DEFAULT_TOKEN_BUDGET);
        let p = b.decision(&scene(TaskName::MoveCube), &TaskName::MoveCube.spec());
        assert!(p.user.contains("DO: Move small cube above onto big cube"));
    }
}
