//! The robot programming language: a small indentation-based language that
//! generated programs are written in, plus a line-tracking interpreter.
//!
//! The grammar is documented in `docs/dsl.md`.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

mod interp;
mod lexer;
mod parser;

pub use interp::{
    execute, ApiSurface, ExecConfig, ExecFailure, ExecOutcome, ExecTrace, RobotAction, Skill, TraceStep, Value,
    ACTOR_BUILTINS, COMMON_BUILTINS, QUERY_BUILTINS,
};
pub use parser::{BinOp, Expr, Stmt, StmtKind, UnaryOp};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ErrorKind {
    Parse,
    UnknownIdent,
    Arity,
    Type,
    /// Carries the blockworld fault code, e.g. `GRASP_MISS`.
    RobotFault(String),
    DivZero,
    LoopLimit,
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ErrorKind::Parse => f.write_str("PARSE"),
            ErrorKind::UnknownIdent => f.write_str("UNKNOWN_IDENT"),
            ErrorKind::Arity => f.write_str("ARITY"),
            ErrorKind::Type => f.write_str("TYPE"),
            ErrorKind::RobotFault(code) => write!(f, "ROBOT_FAULT({code})"),
            ErrorKind::DivZero => f.write_str("DIV_ZERO"),
            ErrorKind::LoopLimit => f.write_str("LOOP_LIMIT"),
        }
    }
}

/// An error with the 1-based source line it was raised on.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{kind} at line {line}: {message}")]
pub struct RuntimeError {
    pub kind: ErrorKind,
    pub line: usize,
    pub message: String,
}

impl RuntimeError {
    pub fn new(kind: ErrorKind, line: usize, message: impl Into<String>) -> Self {
        Self { kind, line: line.max(1), message: message.into() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Program {
    pub statements: Vec<Stmt>,
    pub source: String,
    /// SHA-256 of the raw source, hex encoded.
    pub source_hash: String,
}

impl Program {
    pub fn len(&self) -> usize {
        self.statements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }
}

pub fn parse(source: &str) -> Result<Program, RuntimeError> {
    let tokens = lexer::tokenize(source)?;
    let statements = parser::Parser::new(tokens).program()?;
    Ok(Program {
        statements,
        source: source.to_string(),
        source_hash: hex::encode(Sha256::digest(source.as_bytes())),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("no code found in response")]
pub struct NoCodeFound;

/// Pulls the program text out of a chat reply.
///
/// The first fenced block wins; the language tag after the opening fence is
/// dropped. A reply without fences is accepted whole only if it parses.
pub fn extract_code(response: &str) -> Result<String, NoCodeFound> {
    if let Some(start) = response.find("```") {
        let after = &response[start + 3..];
        let body = match after.find('\n') {
            Some(nl) if is_fence_tag(&after[..nl]) => &after[nl + 1..],
            _ => after,
        };
        let code = match body.find("```") {
            Some(end) => &body[..end],
            None => body,
        };
        return Ok(code.trim_end_matches(['\n', '\r', ' ']).to_string());
    }
    if !response.trim().is_empty() && parse(response).is_ok() {
        return Ok(response.to_string());
    }
    Err(NoCodeFound)
}

fn is_fence_tag(line: &str) -> bool {
    line.trim().chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '+'))
}
