use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::parser::{BinOp, Expr, Stmt, StmtKind, UnaryOp};
use super::{ErrorKind, Program, RuntimeError};
use crate::blockworld::{observe, Observation, RenderConfig, Scene};

/// Which builtins a program may call.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ApiSurface {
    /// Full robot API: can move objects.
    Actor,
    /// Read-only inspection API used for success checks.
    Query,
}

pub const ACTOR_BUILTINS: &[&str] = &["objects", "pose", "size", "pick", "pick_at", "place", "place_on"];
pub const QUERY_BUILTINS: &[&str] = &["objects", "pose", "size", "is_on", "dist_xy", "inside"];
/// Language helpers available on both surfaces.
pub const COMMON_BUILTINS: &[&str] = &["len", "range", "abs", "print"];

impl ApiSurface {
    pub fn builtins(self) -> &'static [&'static str] {
        match self {
            ApiSurface::Actor => ACTOR_BUILTINS,
            ApiSurface::Query => QUERY_BUILTINS,
        }
    }

    fn allows(self, name: &str) -> bool {
        self.builtins().contains(&name) || COMMON_BUILTINS.contains(&name)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    None,
    Bool(bool),
    Num(f64),
    Str(String),
    List(Vec<Value>),
    Pose { x: f64, y: f64, z: f64, theta: f64 },
    Size { w: f64, l: f64, h: f64 },
}

impl Value {
    fn type_name(&self) -> &'static str {
        match self {
            Value::None => "None",
            Value::Bool(_) => "bool",
            Value::Num(_) => "number",
            Value::Str(_) => "string",
            Value::List(_) => "list",
            Value::Pose { .. } => "pose",
            Value::Size { .. } => "size",
        }
    }

    fn truthy(&self) -> bool {
        match self {
            Value::None => false,
            Value::Bool(b) => *b,
            Value::Num(n) => *n != 0.0,
            Value::Str(s) => !s.is_empty(),
            Value::List(l) => !l.is_empty(),
            Value::Pose { .. } | Value::Size { .. } => true,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::None => f.write_str("None"),
            Value::Bool(true) => f.write_str("True"),
            Value::Bool(false) => f.write_str("False"),
            Value::Num(n) => write!(f, "{n}"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::List(items) => {
                f.write_str("[")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
            Value::Pose { x, y, z, theta } => write!(f, "pose(x={x}, y={y}, z={z}, theta={theta})"),
            Value::Size { w, l, h } => write!(f, "size(w={w}, l={l}, h={h})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Skill {
    Pick,
    Place,
}

/// A concrete robot action as executed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotAction {
    pub skill: Skill,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceStep {
    pub line: usize,
    pub pre: Observation,
    pub action: RobotAction,
    pub post: Observation,
}

/// One snapshot per successful pick/place.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExecTrace {
    pub steps: Vec<TraceStep>,
}

impl ExecTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn actions(&self) -> impl Iterator<Item = &RobotAction> {
        self.steps.iter().map(|s| &s.action)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExecConfig {
    pub render: RenderConfig,
    pub loop_limit: usize,
    /// Skip rendering observations (query programs and quick checks).
    pub record_observations: bool,
}

impl Default for ExecConfig {
    fn default() -> Self {
        Self {
            render: crate::blockworld::SimConfig::default().render(),
            loop_limit: 1000,
            record_observations: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExecOutcome {
    pub scene: Scene,
    pub trace: ExecTrace,
    pub value: Option<Value>,
}

#[derive(Clone, Debug)]
pub struct ExecFailure {
    pub error: RuntimeError,
    pub trace: ExecTrace,
    /// Scene at the moment of failure.
    pub scene: Scene,
}

enum Flow {
    Next,
    Return(Value),
}

struct Interp<'a> {
    scene: Scene,
    api: ApiSurface,
    cfg: &'a ExecConfig,
    vars: HashMap<String, Value>,
    trace: ExecTrace,
    iterations: usize,
    line: usize,
}

type IResult<T> = Result<T, RuntimeError>;

/// Runs `program` statement by statement on a copy of `scene`.
pub fn execute(program: &Program, scene: &Scene, api: ApiSurface, cfg: &ExecConfig) -> Result<ExecOutcome, ExecFailure> {
    let mut it = Interp {
        scene: scene.clone(),
        api,
        cfg,
        vars: HashMap::new(),
        trace: ExecTrace::default(),
        iterations: 0,
        line: 0,
    };
    match it.block(&program.statements) {
        Ok(Flow::Next) => Ok(ExecOutcome { scene: it.scene, trace: it.trace, value: None }),
        Ok(Flow::Return(v)) => Ok(ExecOutcome { scene: it.scene, trace: it.trace, value: Some(v) }),
        Err(error) => Err(ExecFailure { error, trace: it.trace, scene: it.scene }),
    }
}

impl Interp<'_> {
    fn err(&self, kind: ErrorKind, message: impl Into<String>) -> RuntimeError {
        RuntimeError::new(kind, self.line, message)
    }

    fn block(&mut self, stmts: &[Stmt]) -> IResult<Flow> {
        for stmt in stmts {
            self.line = stmt.line;
            match &stmt.kind {
                StmtKind::Assign { name, value } => {
                    let v = self.eval(value)?;
                    self.vars.insert(name.clone(), v);
                }
                StmtKind::Expr(e) => {
                    self.eval(e)?;
                }
                StmtKind::Pass => {}
                StmtKind::Return(e) => {
                    let v = match e {
                        Some(e) => self.eval(e)?,
                        None => Value::None,
                    };
                    return Ok(Flow::Return(v));
                }
                StmtKind::If { cond, then, otherwise } => {
                    let branch = if self.eval(cond)?.truthy() { then } else { otherwise };
                    if let Flow::Return(v) = self.block(branch)? {
                        return Ok(Flow::Return(v));
                    }
                }
                StmtKind::For { var, iter, body } => {
                    let items = match self.eval(iter)? {
                        Value::List(items) => items,
                        other => return Err(self.err(ErrorKind::Type, format!("cannot iterate over {}", other.type_name()))),
                    };
                    for item in items {
                        self.line = stmt.line;
                        self.iterations += 1;
                        if self.iterations > self.cfg.loop_limit {
                            return Err(self.err(
                                ErrorKind::LoopLimit,
                                format!("loop iteration limit of {} exceeded", self.cfg.loop_limit),
                            ));
                        }
                        self.vars.insert(var.clone(), item);
                        if let Flow::Return(v) = self.block(body)? {
                            return Ok(Flow::Return(v));
                        }
                    }
                }
            }
        }
        Ok(Flow::Next)
    }

    fn eval(&mut self, e: &Expr) -> IResult<Value> {
        match e {
            Expr::Num(n) => Ok(Value::Num(*n)),
            Expr::Str(s) => Ok(Value::Str(s.clone())),
            Expr::Bool(b) => Ok(Value::Bool(*b)),
            Expr::None => Ok(Value::None),
            Expr::Var(name) => self
                .vars
                .get(name)
                .cloned()
                .ok_or_else(|| self.err(ErrorKind::UnknownIdent, format!("name '{name}' is not defined"))),
            Expr::List(items) => Ok(Value::List(items.iter().map(|i| self.eval(i)).collect::<IResult<_>>()?)),
            Expr::Call { name, args } => {
                if !self.api.allows(name) {
                    return Err(self.err(ErrorKind::UnknownIdent, format!("function '{name}' is not defined")));
                }
                let args = args.iter().map(|a| self.eval(a)).collect::<IResult<Vec<_>>>()?;
                self.call(name, args)
            }
            Expr::Field { base, field } => {
                let v = self.eval(base)?;
                let got = match (&v, field.as_str()) {
                    (Value::Pose { x, .. }, "x") => *x,
                    (Value::Pose { y, .. }, "y") => *y,
                    (Value::Pose { z, .. }, "z") => *z,
                    (Value::Pose { theta, .. }, "theta") => *theta,
                    (Value::Size { w, .. }, "w") => *w,
                    (Value::Size { l, .. }, "l") => *l,
                    (Value::Size { h, .. }, "h") => *h,
                    (Value::Pose { .. } | Value::Size { .. }, _) => {
                        return Err(self.err(ErrorKind::UnknownIdent, format!("{} has no field '{field}'", v.type_name())))
                    }
                    _ => return Err(self.err(ErrorKind::Type, format!("{} has no fields", v.type_name()))),
                };
                Ok(Value::Num(got))
            }
            Expr::Index { base, index } => {
                let b = self.eval(base)?;
                let i = self.eval(index)?;
                let Value::List(items) = b else {
                    return Err(self.err(ErrorKind::Type, format!("{} is not indexable", b.type_name())));
                };
                let Value::Num(n) = i else {
                    return Err(self.err(ErrorKind::Type, format!("list index must be a number, not {}", i.type_name())));
                };
                if n.fract() != 0.0 {
                    return Err(self.err(ErrorKind::Type, format!("list index {n} is not an integer")));
                }
                let len = items.len() as f64;
                let k = if n < 0.0 { n + len } else { n };
                if k < 0.0 || k >= len {
                    return Err(self.err(ErrorKind::Type, format!("list index {n} out of range")));
                }
                Ok(items[k as usize].clone())
            }
            Expr::Unary { op, expr } => {
                let v = self.eval(expr)?;
                match op {
                    UnaryOp::Not => Ok(Value::Bool(!v.truthy())),
                    UnaryOp::Neg => match v {
                        Value::Num(n) => Ok(Value::Num(-n)),
                        other => Err(self.err(ErrorKind::Type, format!("cannot negate {}", other.type_name()))),
                    },
                }
            }
            Expr::Binary { op: BinOp::And, lhs, rhs } => {
                if !self.eval(lhs)?.truthy() {
                    return Ok(Value::Bool(false));
                }
                Ok(Value::Bool(self.eval(rhs)?.truthy()))
            }
            Expr::Binary { op: BinOp::Or, lhs, rhs } => {
                if self.eval(lhs)?.truthy() {
                    return Ok(Value::Bool(true));
                }
                Ok(Value::Bool(self.eval(rhs)?.truthy()))
            }
            Expr::Binary { op, lhs, rhs } => {
                let a = self.eval(lhs)?;
                let b = self.eval(rhs)?;
                self.binary(*op, a, b)
            }
        }
    }

    fn binary(&self, op: BinOp, a: Value, b: Value) -> IResult<Value> {
        use BinOp::*;
        match (op, &a, &b) {
            (Eq, _, _) => Ok(Value::Bool(a == b)),
            (Ne, _, _) => Ok(Value::Bool(a != b)),
            (Add, Value::Num(x), Value::Num(y)) => Ok(Value::Num(x + y)),
            (Sub, Value::Num(x), Value::Num(y)) => Ok(Value::Num(x - y)),
            (Mul, Value::Num(x), Value::Num(y)) => Ok(Value::Num(x * y)),
            (Div, Value::Num(_), Value::Num(y)) if *y == 0.0 => Err(self.err(ErrorKind::DivZero, "division by zero")),
            (Div, Value::Num(x), Value::Num(y)) => Ok(Value::Num(x / y)),
            (Add, Value::Str(x), Value::Str(y)) => Ok(Value::Str(format!("{x}{y}"))),
            (Add, Value::List(x), Value::List(y)) => Ok(Value::List(x.iter().chain(y).cloned().collect())),
            (Lt | Le | Gt | Ge, Value::Num(x), Value::Num(y)) => Ok(Value::Bool(compare(op, x.partial_cmp(y)))),
            (Lt | Le | Gt | Ge, Value::Str(x), Value::Str(y)) => Ok(Value::Bool(compare(op, Some(x.cmp(y))))),
            _ => Err(self.err(
                ErrorKind::Type,
                format!("unsupported operand types for {}: {} and {}", op_symbol(op), a.type_name(), b.type_name()),
            )),
        }
    }

    fn arity(&self, name: &str, args: &[Value], want: usize) -> IResult<()> {
        if args.len() != want {
            let plural = if want == 1 { "" } else { "s" };
            return Err(self.err(
                ErrorKind::Arity,
                format!("{name}() takes {want} argument{plural} but {} were given", args.len()),
            ));
        }
        Ok(())
    }

    fn num(&self, name: &str, v: &Value) -> IResult<f64> {
        match v {
            Value::Num(n) if n.is_finite() => Ok(*n),
            Value::Num(n) => Err(self.err(ErrorKind::Type, format!("{name}() got non-finite number {n}"))),
            other => Err(self.err(ErrorKind::Type, format!("{name}() expects a number, got {}", other.type_name()))),
        }
    }

    fn object_id<'v>(&self, name: &str, v: &'v Value) -> IResult<&'v str> {
        let Value::Str(id) = v else {
            return Err(self.err(ErrorKind::Type, format!("{name}() expects an object name, got {}", v.type_name())));
        };
        if self.scene.object(id).is_none() {
            return Err(self.err(ErrorKind::UnknownIdent, format!("unknown object '{id}'")));
        }
        Ok(id)
    }

    fn call(&mut self, name: &str, args: Vec<Value>) -> IResult<Value> {
        match name {
            "print" => Ok(Value::None),
            "len" => {
                self.arity(name, &args, 1)?;
                match &args[0] {
                    Value::List(l) => Ok(Value::Num(l.len() as f64)),
                    Value::Str(s) => Ok(Value::Num(s.chars().count() as f64)),
                    other => Err(self.err(ErrorKind::Type, format!("len() of {}", other.type_name()))),
                }
            }
            "range" => {
                self.arity(name, &args, 1)?;
                let n = self.num(name, &args[0])?;
                if n.fract() != 0.0 {
                    return Err(self.err(ErrorKind::Type, format!("range() expects an integer, got {n}")));
                }
                if n > self.cfg.loop_limit as f64 {
                    return Err(self.err(ErrorKind::LoopLimit, format!("range({n}) exceeds the loop limit")));
                }
                Ok(Value::List((0..n.max(0.0) as usize).map(|i| Value::Num(i as f64)).collect()))
            }
            "abs" => {
                self.arity(name, &args, 1)?;
                Ok(Value::Num(self.num(name, &args[0])?.abs()))
            }
            "objects" => {
                self.arity(name, &args, 0)?;
                Ok(Value::List(self.scene.objects.iter().map(|o| Value::Str(o.id.clone())).collect()))
            }
            "pose" => {
                self.arity(name, &args, 1)?;
                let id = self.object_id(name, &args[0])?;
                let p = self.scene.object(id).expect("checked").pose;
                Ok(Value::Pose { x: p.x, y: p.y, z: p.z, theta: p.theta })
            }
            "size" => {
                self.arity(name, &args, 1)?;
                let id = self.object_id(name, &args[0])?;
                let s = self.scene.object(id).expect("checked").size;
                Ok(Value::Size { w: s.w, l: s.l, h: s.h })
            }
            "pick" => {
                self.arity(name, &args, 1)?;
                let id = self.object_id(name, &args[0])?;
                let p = self.scene.object(id).expect("checked").pose;
                self.robot(Skill::Pick, p.x, p.y, p.theta)
            }
            "pick_at" | "place" => {
                self.arity(name, &args, 3)?;
                let x = self.num(name, &args[0])?;
                let y = self.num(name, &args[1])?;
                let theta = self.num(name, &args[2])?;
                let skill = if name == "pick_at" { Skill::Pick } else { Skill::Place };
                self.robot(skill, x, y, theta)
            }
            "place_on" => {
                self.arity(name, &args, 1)?;
                let id = self.object_id(name, &args[0])?;
                let p = self.scene.object(id).expect("checked").pose;
                self.robot(Skill::Place, p.x, p.y, p.theta)
            }
            "is_on" => {
                self.arity(name, &args, 2)?;
                let a = self.object_id(name, &args[0])?;
                let b = self.object_id(name, &args[1])?;
                let on = self.scene.object(a).expect("checked").support.iter().any(|s| s == b);
                Ok(Value::Bool(on))
            }
            "dist_xy" => {
                self.arity(name, &args, 2)?;
                let a = self.scene.object(self.object_id(name, &args[0])?).expect("checked").pose;
                let b = self.scene.object(self.object_id(name, &args[1])?).expect("checked").pose;
                Ok(Value::Num((a.x - b.x).hypot(a.y - b.y)))
            }
            "inside" => {
                self.arity(name, &args, 2)?;
                let a = self.scene.object(self.object_id(name, &args[0])?).expect("checked");
                let c = self.scene.object(self.object_id(name, &args[1])?).expect("checked");
                Ok(Value::Bool(a.footprint().inside(&c.footprint(), 1e-9)))
            }
            _ => Err(self.err(ErrorKind::UnknownIdent, format!("function '{name}' is not defined"))),
        }
    }

    fn robot(&mut self, skill: Skill, x: f64, y: f64, theta: f64) -> IResult<Value> {
        let result = match skill {
            Skill::Pick => self.scene.pick(x, y, theta),
            Skill::Place => self.scene.place(x, y, theta),
        };
        let next = result.map_err(|fault| {
            let message = fault.to_string();
            self.err(ErrorKind::RobotFault(fault.code().to_string()), message)
        })?;
        if self.cfg.record_observations {
            let pre = observe(&self.scene, self.cfg.render);
            let post = observe(&next, self.cfg.render);
            self.trace.steps.push(TraceStep { line: self.line, pre, action: RobotAction { skill, x, y, theta }, post });
        } else {
            let empty = Observation {
                heightmap: crate::blockworld::Grid::zeros(0),
                inhand: crate::blockworld::Grid::zeros(0),
                gripper: u8::from(self.scene.held_id().is_some()),
            };
            let post = Observation { gripper: u8::from(next.held_id().is_some()), ..empty.clone() };
            self.trace.steps.push(TraceStep { line: self.line, pre: empty, action: RobotAction { skill, x, y, theta }, post });
        }
        self.scene = next;
        Ok(Value::None)
    }
}

fn compare(op: BinOp, ord: Option<std::cmp::Ordering>) -> bool {
    use std::cmp::Ordering::*;
    match (op, ord) {
        (_, None) => false,
        (BinOp::Lt, Some(o)) => o == Less,
        (BinOp::Le, Some(o)) => o != Greater,
        (BinOp::Gt, Some(o)) => o == Greater,
        (BinOp::Ge, Some(o)) => o != Less,
        _ => false,
    }
}

fn op_symbol(op: BinOp) -> &'static str {
    match op {
        BinOp::Add => "+",
        BinOp::Sub => "-",
        BinOp::Mul => "*",
        BinOp::Div => "/",
        BinOp::Eq => "==",
        BinOp::Ne => "!=",
        BinOp::Lt => "<",
        BinOp::Le => "<=",
        BinOp::Gt => ">",
        BinOp::Ge => ">=",
        BinOp::And => "and",
        BinOp::Or => "or",
    }
}
