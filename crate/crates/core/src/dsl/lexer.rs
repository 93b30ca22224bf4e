use super::{ErrorKind, RuntimeError};

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Num(f64),
    Str(String),
    For,
    In,
    If,
    Elif,
    Else,
    Return,
    Pass,
    And,
    Or,
    Not,
    True,
    False,
    None,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Dot,
    Assign,
    Plus,
    Minus,
    Star,
    Slash,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Newline,
    Indent,
    Dedent,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier '{s}'"),
            Tok::Num(n) => format!("number {n}"),
            Tok::Str(_) => "string literal".into(),
            Tok::Newline => "end of line".into(),
            Tok::Indent => "indent".into(),
            Tok::Dedent => "dedent".into(),
            Tok::Eof => "end of input".into(),
            other => format!("'{}'", other.symbol()),
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Tok::For => "for",
            Tok::In => "in",
            Tok::If => "if",
            Tok::Elif => "elif",
            Tok::Else => "else",
            Tok::Return => "return",
            Tok::Pass => "pass",
            Tok::And => "and",
            Tok::Or => "or",
            Tok::Not => "not",
            Tok::True => "True",
            Tok::False => "False",
            Tok::None => "None",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::Comma => ",",
            Tok::Colon => ":",
            Tok::Dot => ".",
            Tok::Assign => "=",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Eq => "==",
            Tok::Ne => "!=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            _ => "?",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
}

fn parse_error(line: usize, message: impl Into<String>) -> RuntimeError {
    RuntimeError::new(ErrorKind::Parse, line, message)
}

fn keyword(word: &str) -> Option<Tok> {
    Some(match word {
        "for" => Tok::For,
        "in" => Tok::In,
        "if" => Tok::If,
        "elif" => Tok::Elif,
        "else" => Tok::Else,
        "return" => Tok::Return,
        "pass" => Tok::Pass,
        "and" => Tok::And,
        "or" => Tok::Or,
        "not" => Tok::Not,
        "True" => Tok::True,
        "False" => Tok::False,
        "None" => Tok::None,
        _ => return None,
    })
}

/// Splits source into tokens with Python-style INDENT/DEDENT handling.
/// Newlines inside brackets continue the logical line.
pub(crate) fn tokenize(source: &str) -> Result<Vec<Token>, RuntimeError> {
    let mut out = Vec::new();
    let mut indents = vec![0usize];
    let mut depth = 0usize;
    let mut last_line = 1;

    for (idx, raw) in source.split('\n').enumerate() {
        let line = idx + 1;
        last_line = line;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        let chars: Vec<char> = raw.chars().collect();
        let mut pos = 0;

        if depth == 0 {
            let mut width = 0;
            while pos < chars.len() && (chars[pos] == ' ' || chars[pos] == '\t') {
                if chars[pos] == '\t' {
                    let rest: String = chars[pos..].iter().collect();
                    if !rest.trim().is_empty() && !rest.trim_start().starts_with('#') {
                        return Err(parse_error(line, "tabs are not allowed in indentation; use spaces"));
                    }
                }
                width += 1;
                pos += 1;
            }
            if pos == chars.len() || chars[pos] == '#' {
                continue;
            }
            let top = *indents.last().expect("indent stack is never empty");
            if width > top {
                indents.push(width);
                out.push(Token { tok: Tok::Indent, line });
            } else if width < top {
                while *indents.last().expect("indent stack is never empty") > width {
                    indents.pop();
                    out.push(Token { tok: Tok::Dedent, line });
                }
                if *indents.last().expect("indent stack is never empty") != width {
                    return Err(parse_error(line, "unindent does not match any outer indentation level"));
                }
            }
        }

        while pos < chars.len() {
            let c = chars[pos];
            match c {
                ' ' | '\t' => pos += 1,
                '#' => break,
                '0'..='9' => {
                    let start = pos;
                    while pos < chars.len() && chars[pos].is_ascii_digit() {
                        pos += 1;
                    }
                    if pos < chars.len() && chars[pos] == '.' && pos + 1 < chars.len() && chars[pos + 1].is_ascii_digit()
                    {
                        pos += 1;
                        while pos < chars.len() && chars[pos].is_ascii_digit() {
                            pos += 1;
                        }
                    } else if pos < chars.len() && chars[pos] == '.' && !(pos + 1 < chars.len() && chars[pos + 1].is_alphabetic()) {
                        // trailing dot, as in `1.`
                        pos += 1;
                    }
                    if pos < chars.len() && (chars[pos] == 'e' || chars[pos] == 'E') {
                        let mut look = pos + 1;
                        if look < chars.len() && (chars[look] == '+' || chars[look] == '-') {
                            look += 1;
                        }
                        if look < chars.len() && chars[look].is_ascii_digit() {
                            pos = look;
                            while pos < chars.len() && chars[pos].is_ascii_digit() {
                                pos += 1;
                            }
                        }
                    }
                    let text: String = chars[start..pos].iter().collect();
                    let value = text
                        .parse::<f64>()
                        .map_err(|_| parse_error(line, format!("malformed number '{text}'")))?;
                    out.push(Token { tok: Tok::Num(value), line });
                }
                '.' if pos + 1 < chars.len() && chars[pos + 1].is_ascii_digit() => {
                    let start = pos;
                    pos += 1;
                    while pos < chars.len() && chars[pos].is_ascii_digit() {
                        pos += 1;
                    }
                    let text: String = chars[start..pos].iter().collect();
                    let value = format!("0{text}").parse::<f64>().map_err(|_| parse_error(line, "malformed number"))?;
                    out.push(Token { tok: Tok::Num(value), line });
                }
                c if c.is_alphabetic() || c == '_' => {
                    let start = pos;
                    while pos < chars.len() && (chars[pos].is_alphanumeric() || chars[pos] == '_') {
                        pos += 1;
                    }
                    let word: String = chars[start..pos].iter().collect();
                    let tok = keyword(&word).unwrap_or(Tok::Ident(word));
                    out.push(Token { tok, line });
                }
                '"' | '\'' => {
                    let quote = c;
                    pos += 1;
                    let mut s = String::new();
                    let mut closed = false;
                    while pos < chars.len() {
                        let ch = chars[pos];
                        pos += 1;
                        if ch == quote {
                            closed = true;
                            break;
                        }
                        if ch == '\\' {
                            let Some(&esc) = chars.get(pos) else { break };
                            pos += 1;
                            s.push(match esc {
                                'n' => '\n',
                                't' => '\t',
                                other => other,
                            });
                        } else {
                            s.push(ch);
                        }
                    }
                    if !closed {
                        return Err(parse_error(line, "unterminated string literal"));
                    }
                    out.push(Token { tok: Tok::Str(s), line });
                }
                _ => {
                    let next = chars.get(pos + 1).copied();
                    let (tok, width) = match (c, next) {
                        ('=', Some('=')) => (Tok::Eq, 2),
                        ('!', Some('=')) => (Tok::Ne, 2),
                        ('<', Some('=')) => (Tok::Le, 2),
                        ('>', Some('=')) => (Tok::Ge, 2),
                        ('=', _) => (Tok::Assign, 1),
                        ('<', _) => (Tok::Lt, 1),
                        ('>', _) => (Tok::Gt, 1),
                        ('+', _) => (Tok::Plus, 1),
                        ('-', _) => (Tok::Minus, 1),
                        ('*', _) => (Tok::Star, 1),
                        ('/', _) => (Tok::Slash, 1),
                        (',', _) => (Tok::Comma, 1),
                        (':', _) => (Tok::Colon, 1),
                        ('.', _) => (Tok::Dot, 1),
                        ('(', _) => (Tok::LParen, 1),
                        (')', _) => (Tok::RParen, 1),
                        ('[', _) => (Tok::LBracket, 1),
                        (']', _) => (Tok::RBracket, 1),
                        _ => return Err(parse_error(line, format!("unexpected character '{c}'"))),
                    };
                    match tok {
                        Tok::LParen | Tok::LBracket => depth += 1,
                        Tok::RParen | Tok::RBracket => {
                            if depth == 0 {
                                return Err(parse_error(line, format!("unmatched '{c}'")));
                            }
                            depth -= 1;
                        }
                        _ => {}
                    }
                    out.push(Token { tok, line });
                    pos += width;
                }
            }
        }

        if depth == 0 && out.last().is_some_and(|t| t.line == line && t.tok != Tok::Newline) {
            out.push(Token { tok: Tok::Newline, line });
        }
    }

    if depth > 0 {
        return Err(parse_error(last_line, "unclosed bracket at end of input"));
    }
    if out.last().is_some_and(|t| !matches!(t.tok, Tok::Newline | Tok::Dedent)) {
        out.push(Token { tok: Tok::Newline, line: last_line });
    }
    while indents.len() > 1 {
        indents.pop();
        out.push(Token { tok: Tok::Dedent, line: last_line });
    }
    out.push(Token { tok: Tok::Eof, line: last_line });
    Ok(out)
}
