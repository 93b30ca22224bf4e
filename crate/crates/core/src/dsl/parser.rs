use super::lexer::{Tok, Token};
use super::{ErrorKind, RuntimeError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Str(String),
    Bool(bool),
    None,
    Var(String),
    List(Vec<Expr>),
    Call { name: String, args: Vec<Expr> },
    Field { base: Box<Expr>, field: String },
    Index { base: Box<Expr>, index: Box<Expr> },
    Unary { op: UnaryOp, expr: Box<Expr> },
    Binary { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stmt {
    pub line: usize,
    pub kind: StmtKind,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StmtKind {
    Assign { name: String, value: Expr },
    Expr(Expr),
    For { var: String, iter: Expr, body: Vec<Stmt> },
    If { cond: Expr, then: Vec<Stmt>, otherwise: Vec<Stmt> },
    Return(Option<Expr>),
    Pass,
}

const MAX_DEPTH: usize = 64;

pub(crate) struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    depth: usize,
}

type PResult<T> = Result<T, RuntimeError>;

impl Parser {
    pub(crate) fn new(tokens: Vec<Token>) -> Self {
        Self { tokens, pos: 0, depth: 0 }
    }

    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn line(&self) -> usize {
        self.tokens[self.pos].line
    }

    fn advance(&mut self) -> Tok {
        let tok = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn error(&self, message: impl Into<String>) -> RuntimeError {
        RuntimeError::new(ErrorKind::Parse, self.line(), message)
    }

    fn expect(&mut self, want: Tok, context: &str) -> PResult<()> {
        if *self.peek() == want {
            self.advance();
            Ok(())
        } else {
            Err(self.error(format!("expected {} {context}, found {}", want.describe(), self.peek().describe())))
        }
    }

    fn ident(&mut self, context: &str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.advance();
                Ok(name)
            }
            other => Err(self.error(format!("expected identifier {context}, found {}", other.describe()))),
        }
    }

    fn nest(&mut self) -> PResult<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.error("program nested too deeply"));
        }
        Ok(())
    }

    pub(crate) fn program(&mut self) -> PResult<Vec<Stmt>> {
        let mut stmts = Vec::new();
        loop {
            match self.peek() {
                Tok::Eof => return Ok(stmts),
                Tok::Newline => {
                    self.advance();
                }
                Tok::Indent => return Err(self.error("unexpected indent")),
                Tok::Dedent => return Err(self.error("unexpected dedent")),
                _ => stmts.push(self.statement()?),
            }
        }
    }

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        self.expect(Tok::Colon, "before block")?;
        self.expect(Tok::Newline, "after ':'")?;
        if *self.peek() != Tok::Indent {
            return Err(self.error("expected an indented block"));
        }
        self.advance();
        self.nest()?;
        let mut body = Vec::new();
        loop {
            match self.peek() {
                Tok::Dedent => {
                    self.advance();
                    break;
                }
                Tok::Eof => break,
                Tok::Newline => {
                    self.advance();
                }
                Tok::Indent => return Err(self.error("unexpected indent")),
                _ => body.push(self.statement()?),
            }
        }
        self.depth -= 1;
        Ok(body)
    }

    fn end_of_statement(&mut self) -> PResult<()> {
        match self.peek() {
            Tok::Newline => {
                self.advance();
                Ok(())
            }
            Tok::Eof | Tok::Dedent => Ok(()),
            other => Err(self.error(format!("unexpected {} after statement", other.describe()))),
        }
    }

    fn statement(&mut self) -> PResult<Stmt> {
        let line = self.line();
        let kind = match self.peek().clone() {
            Tok::For => {
                self.advance();
                let var = self.ident("after 'for'")?;
                self.expect(Tok::In, "in for loop")?;
                let iter = self.expr()?;
                let body = self.block()?;
                return Ok(Stmt { line, kind: StmtKind::For { var, iter, body } });
            }
            Tok::If => {
                self.advance();
                return self.if_rest(line);
            }
            Tok::Elif | Tok::Else => return Err(self.error(format!("{} without matching 'if'", self.peek().describe()))),
            Tok::Return => {
                self.advance();
                let value = match self.peek() {
                    Tok::Newline | Tok::Eof | Tok::Dedent => None,
                    _ => Some(self.expr()?),
                };
                StmtKind::Return(value)
            }
            Tok::Pass => {
                self.advance();
                StmtKind::Pass
            }
            Tok::Ident(name) if *self.peek_at(1) == Tok::Assign => {
                self.advance();
                self.advance();
                StmtKind::Assign { name, value: self.expr()? }
            }
            _ => {
                let e = self.expr()?;
                if *self.peek() == Tok::Assign {
                    return Err(self.error("can only assign to a plain variable name"));
                }
                StmtKind::Expr(e)
            }
        };
        self.end_of_statement()?;
        Ok(Stmt { line, kind })
    }

    fn if_rest(&mut self, line: usize) -> PResult<Stmt> {
        let cond = self.expr()?;
        let then = self.block()?;
        let otherwise = match self.peek() {
            Tok::Elif => {
                let elif_line = self.line();
                self.advance();
                self.nest()?;
                let nested = self.if_rest(elif_line)?;
                self.depth -= 1;
                vec![nested]
            }
            Tok::Else => {
                self.advance();
                self.block()?
            }
            _ => Vec::new(),
        };
        Ok(Stmt { line, kind: StmtKind::If { cond, then, otherwise } })
    }

    fn expr(&mut self) -> PResult<Expr> {
        self.nest()?;
        let e = self.or_expr();
        self.depth -= 1;
        e
    }

    fn or_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.and_expr()?;
        while *self.peek() == Tok::Or {
            self.advance();
            let rhs = self.and_expr()?;
            lhs = Expr::Binary { op: BinOp::Or, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.not_expr()?;
        while *self.peek() == Tok::And {
            self.advance();
            let rhs = self.not_expr()?;
            lhs = Expr::Binary { op: BinOp::And, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> PResult<Expr> {
        if *self.peek() == Tok::Not {
            self.advance();
            self.nest()?;
            let inner = self.not_expr()?;
            self.depth -= 1;
            return Ok(Expr::Unary { op: UnaryOp::Not, expr: Box::new(inner) });
        }
        self.comparison()
    }

    fn comparison(&mut self) -> PResult<Expr> {
        let lhs = self.additive()?;
        let op = match self.peek() {
            Tok::Eq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            _ => return Ok(lhs),
        };
        self.advance();
        let rhs = self.additive()?;
        if matches!(self.peek(), Tok::Eq | Tok::Ne | Tok::Lt | Tok::Le | Tok::Gt | Tok::Ge) {
            return Err(self.error("chained comparisons are not supported"));
        }
        Ok(Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) })
    }

    fn additive(&mut self) -> PResult<Expr> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.multiplicative()?;
            lhs = Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
    }

    fn multiplicative(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.unary()?;
            lhs = Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        match self.peek() {
            Tok::Minus => {
                self.advance();
                self.nest()?;
                let inner = self.unary()?;
                self.depth -= 1;
                Ok(Expr::Unary { op: UnaryOp::Neg, expr: Box::new(inner) })
            }
            Tok::Plus => {
                self.advance();
                self.unary()
            }
            _ => self.postfix(),
        }
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        loop {
            match self.peek() {
                Tok::Dot => {
                    self.advance();
                    let field = self.ident("after '.'")?;
                    e = Expr::Field { base: Box::new(e), field };
                }
                Tok::LBracket => {
                    self.advance();
                    let index = self.expr()?;
                    self.expect(Tok::RBracket, "after index")?;
                    e = Expr::Index { base: Box::new(e), index: Box::new(index) };
                }
                Tok::LParen => return Err(self.error("only named functions can be called")),
                _ => return Ok(e),
            }
        }
    }

    fn comma_list(&mut self, close: Tok) -> PResult<Vec<Expr>> {
        let mut items = Vec::new();
        if *self.peek() == close {
            self.advance();
            return Ok(items);
        }
        loop {
            items.push(self.expr()?);
            match self.peek() {
                Tok::Comma => {
                    self.advance();
                    if *self.peek() == close {
                        self.advance();
                        return Ok(items);
                    }
                }
                t if *t == close => {
                    self.advance();
                    return Ok(items);
                }
                other => {
                    return Err(self.error(format!("expected ',' or {}, found {}", close.describe(), other.describe())))
                }
            }
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        match self.advance() {
            Tok::Num(n) => Ok(Expr::Num(n)),
            Tok::Str(s) => Ok(Expr::Str(s)),
            Tok::True => Ok(Expr::Bool(true)),
            Tok::False => Ok(Expr::Bool(false)),
            Tok::None => Ok(Expr::None),
            Tok::Ident(name) => {
                if *self.peek() == Tok::LParen {
                    self.advance();
                    let args = self.comma_list(Tok::RParen)?;
                    Ok(Expr::Call { name, args })
                } else {
                    Ok(Expr::Var(name))
                }
            }
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "to close '('")?;
                Ok(e)
            }
            Tok::LBracket => Ok(Expr::List(self.comma_list(Tok::RBracket)?)),
            other => {
                // report at the offending token, not the one after it
                self.pos = self.pos.saturating_sub(usize::from(other != Tok::Eof));
                Err(self.error(format!("unexpected {}", other.describe())))
            }
        }
    }
}
