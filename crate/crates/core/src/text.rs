//! Lexer shared by the program and feature text formats.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("parse error at {line}:{col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    Char(char),
    Sym(char),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(v) => write!(f, "`{v}`"),
            Tok::Str(s) => write!(f, "{}", quote(s)),
            Tok::Char(c) => write!(f, "'{c}'"),
            Tok::Sym(c) => write!(f, "`{c}`"),
        }
    }
}

pub fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

pub fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.'
}

pub fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if is_ident_start(c)) && chars.all(is_ident_char)
}

/// Double-quoted string literal with JSON escapes.
pub fn quote(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

pub fn quote_char(c: char) -> String {
    match c {
        '\'' => "'\\''".to_string(),
        '\\' => "'\\\\'".to_string(),
        c => format!("'{c}'"),
    }
}

pub struct Lexer {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
    end: (usize, usize),
}

impl Lexer {
    pub fn new(src: &str) -> Result<Self, ParseError> {
        let chars: Vec<char> = src.chars().collect();
        let mut toks = Vec::new();
        let (mut line, mut col) = (1usize, 1usize);
        let mut i = 0;
        let err = |line, col, msg: String| ParseError { line, col, msg };
        while i < chars.len() {
            let c = chars[i];
            let (tl, tc) = (line, col);
            let start = i;
            if c == '\n' {
                line += 1;
                col = 1;
                i += 1;
                continue;
            }
            if c.is_whitespace() {
                i += 1;
                col += 1;
                continue;
            }
            if c == '/' && chars.get(i + 1) == Some(&'/') {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
                continue;
            }
            let tok = if is_ident_start(c) {
                while i < chars.len() && is_ident_char(chars[i]) {
                    i += 1;
                }
                Tok::Ident(chars[start..i].iter().collect())
            } else if c.is_ascii_digit()
                || ((c == '-' || c == '+') && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()))
            {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                let v = text
                    .parse::<i64>()
                    .map_err(|e| err(tl, tc, format!("bad integer `{text}`: {e}")))?;
                Tok::Int(v)
            } else if c == '"' {
                i += 1;
                while i < chars.len() && chars[i] != '"' {
                    if chars[i] == '\\' {
                        i += 1;
                    }
                    i += 1;
                }
                if i >= chars.len() {
                    return Err(err(tl, tc, "unterminated string".into()));
                }
                i += 1;
                let text: String = chars[start..i].iter().collect();
                let s: String = serde_json::from_str(&text)
                    .map_err(|e| err(tl, tc, format!("bad string literal: {e}")))?;
                Tok::Str(s)
            } else if c == '\'' {
                let (ch, len) = match (chars.get(i + 1), chars.get(i + 2), chars.get(i + 3)) {
                    (Some('\\'), Some(e @ ('\'' | '\\')), Some('\'')) => (*e, 4),
                    (Some(ch), Some('\''), _) if *ch != '\\' => (*ch, 3),
                    _ => return Err(err(tl, tc, "bad character literal".into())),
                };
                i += len;
                Tok::Char(ch)
            } else if "()[]{},;=#@".contains(c) {
                i += 1;
                Tok::Sym(c)
            } else {
                return Err(err(tl, tc, format!("unexpected character `{c}`")));
            };
            col += i - start;
            toks.push((tok, tl, tc));
        }
        Ok(Lexer {
            toks,
            pos: 0,
            end: (line, col),
        })
    }

    pub fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    pub fn peek_at(&self, ahead: usize) -> Option<&Tok> {
        self.toks.get(self.pos + ahead).map(|t| &t.0)
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    pub fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.0.clone());
        self.pos += 1;
        t
    }

    pub fn error(&self, msg: impl Into<String>) -> ParseError {
        let (line, col) = self
            .toks
            .get(self.pos)
            .map(|t| (t.1, t.2))
            .unwrap_or(self.end);
        ParseError {
            line,
            col,
            msg: msg.into(),
        }
    }

    pub fn expect_sym(&mut self, c: char) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::Sym(s)) if *s == c => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(self.error(format!("expected `{c}`, found {t}"))),
            None => Err(self.error(format!("expected `{c}`, found end of input"))),
        }
    }

    pub fn eat_sym(&mut self, c: char) -> bool {
        if matches!(self.peek(), Some(Tok::Sym(s)) if *s == c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Ident(s)) => {
                self.pos += 1;
                Ok(s)
            }
            Some(t) => Err(self.error(format!("expected identifier, found {t}"))),
            None => Err(self.error("expected identifier, found end of input")),
        }
    }

    pub fn int(&mut self) -> Result<i64, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Int(v)) => {
                self.pos += 1;
                Ok(v)
            }
            Some(t) => Err(self.error(format!("expected integer, found {t}"))),
            None => Err(self.error("expected integer, found end of input")),
        }
    }

    pub fn expect_end(&self) -> Result<(), ParseError> {
        match self.peek() {
            None => Ok(()),
            Some(t) => Err(self.error(format!("unexpected trailing {t}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexes_mixed_input() {
        let mut lx = Lexer::new(
            r#"u = Filter(ti, isOdd(frame)); // note
 Yield("sh\"ift", -5, '\'', @f1)"#,
        )
        .unwrap();
        let mut toks = Vec::new();
        while let Some(t) = lx.next() {
            toks.push(t);
        }
        assert_eq!(toks[0], Tok::Ident("u".into()));
        assert!(toks.contains(&Tok::Str("sh\"ift".into())));
        assert!(toks.contains(&Tok::Int(-5)));
        assert!(toks.contains(&Tok::Char('\'')));
        assert!(toks.contains(&Tok::Sym('@')));
    }

    #[test]
    fn reports_position() {
        let e = Lexer::new("a\n  $").err().unwrap();
        assert_eq!((e.line, e.col), (2, 3));
    }
}
