//! Recursive-descent parser for the coefficient expression language.
//!
//! ```text
//! expr   := term (('+'|'-') term)* ;
//! term   := factor (('*'|'/') factor)* ;
//! factor := '-' factor | base ('^' uint)? ;
//! base   := number | 'x' uint | func '(' expr ')' | '(' expr ')' ;
//! func   := 'sin' | 'cos' | 'exp' ;
//! ```
//!
//! The parser builds nodes verbatim (no constant folding), so rendering with
//! [`ScalarExpr::to_text`] and parsing again reproduces the same tree.

use thiserror::Error;

use crate::expr::{Func, Node, ScalarExpr};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at byte {offset}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("unexpected character '{0}'")]
    UnexpectedChar(char),
    #[error("expected {0}")]
    Expected(&'static str),
    #[error("variable x{index} out of range [1, {dim}]")]
    VariableOutOfRange { index: usize, dim: usize },
    #[error("unknown function '{0}'")]
    UnknownFunction(String),
    #[error("invalid number literal")]
    BadNumber,
}

/// Parses `text` as an expression over an `m`-dimensional base.
pub fn parse(text: &str, m: usize) -> Result<ScalarExpr, ParseError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        dim: m,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.error_here());
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    dim: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn err(&self, offset: usize, kind: ParseErrorKind) -> ParseError {
        ParseError { offset, kind }
    }

    fn error_here(&self) -> ParseError {
        match self.src.get(self.pos) {
            None => self.err(self.pos, ParseErrorKind::UnexpectedEnd),
            Some(_) => {
                let ch = std::str::from_utf8(&self.src[self.pos..])
                    .ok()
                    .and_then(|s| s.chars().next())
                    .unwrap_or('?');
                self.err(self.pos, ParseErrorKind::UnexpectedChar(ch))
            }
        }
    }

    fn expect(&mut self, byte: u8, what: &'static str) -> Result<(), ParseError> {
        if self.peek() == Some(byte) {
            self.pos += 1;
            Ok(())
        } else if self.pos >= self.src.len() {
            Err(self.err(self.pos, ParseErrorKind::UnexpectedEnd))
        } else {
            Err(self.err(self.pos, ParseErrorKind::Expected(what)))
        }
    }

    fn expr(&mut self) -> Result<ScalarExpr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = ScalarExpr::from_node(Node::Add(lhs, rhs));
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = ScalarExpr::from_node(Node::Sub(lhs, rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<ScalarExpr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = ScalarExpr::from_node(Node::Mul(lhs, rhs));
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = ScalarExpr::from_node(Node::Div(lhs, rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<ScalarExpr, ParseError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            let inner = self.factor()?;
            return Ok(ScalarExpr::from_node(Node::Neg(inner)));
        }
        let base = self.base()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            let exp = self.uint().ok_or_else(|| {
                self.err(start, ParseErrorKind::Expected("unsigned integer exponent"))
            })?;
            let exp = u32::try_from(exp).map_err(|_| self.err(start, ParseErrorKind::BadNumber))?;
            return Ok(ScalarExpr::from_node(Node::Pow(base, exp)));
        }
        Ok(base)
    }

    fn uint(&mut self) -> Option<usize> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return None;
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .ok()?
            .parse()
            .ok()
    }

    fn base(&mut self) -> Result<ScalarExpr, ParseError> {
        let start = match self.peek() {
            None => return Err(self.err(self.pos, ParseErrorKind::UnexpectedEnd)),
            Some(_) => self.pos,
        };
        let c = self.src[start];
        if c == b'(' {
            self.pos += 1;
            let e = self.expr()?;
            self.expect(b')', "')'")?;
            return Ok(e);
        }
        if c.is_ascii_digit() || c == b'.' {
            return self.number();
        }
        if c.is_ascii_alphabetic() {
            let mut end = start;
            while end < self.src.len() && self.src[end].is_ascii_alphabetic() {
                end += 1;
            }
            let word = std::str::from_utf8(&self.src[start..end]).unwrap_or("");
            if word == "x" {
                self.pos = end;
                let index = self.uint().ok_or_else(|| {
                    self.err(end, ParseErrorKind::Expected("variable index after 'x'"))
                })?;
                if index == 0 || index > self.dim {
                    return Err(self.err(
                        start,
                        ParseErrorKind::VariableOutOfRange {
                            index,
                            dim: self.dim,
                        },
                    ));
                }
                return Ok(ScalarExpr::var(index - 1));
            }
            let func = match word {
                "sin" => Func::Sin,
                "cos" => Func::Cos,
                "exp" => Func::Exp,
                _ => return Err(self.err(start, ParseErrorKind::UnknownFunction(word.to_string()))),
            };
            self.pos = end;
            self.expect(b'(', "'(' after function name")?;
            let arg = self.expr()?;
            self.expect(b')', "')'")?;
            return Ok(ScalarExpr::from_node(Node::Call(func, arg)));
        }
        Err(self.error_here())
    }

    fn number(&mut self) -> Result<ScalarExpr, ParseError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut count = digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            count += digits(self);
        }
        if count == 0 {
            return Err(self.err(start, ParseErrorKind::BadNumber));
        }
        if matches!(self.src.get(self.pos), Some(b'e') | Some(b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                // not an exponent; leave it for the caller to reject
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        let value: f64 = text
            .parse()
            .map_err(|_| self.err(start, ParseErrorKind::BadNumber))?;
        Ok(ScalarExpr::constant(value))
    }
}
