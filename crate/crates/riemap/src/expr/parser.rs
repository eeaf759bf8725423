//! Recursive-descent parser for the scalar expression language.
//!
//! Grammar:
//! ```text
//! expr   := term (("+" | "-") term)*
//! term   := factor (("*" | "/") factor)*
//! factor := ("-")? power
//! power  := atom ("^" factor)?
//! atom   := number | ident | ident "(" expr ")" | "(" expr ")"
//! ```
//! `^` is right-associative and binds tighter than unary minus, so
//! `-x1^2` parses as `-(x1^2)`. Identifiers are coordinates `x1..xn`,
//! named parameters, the constant `pi`, or a function name.

use super::{ExprError, Node, UnaryFn};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(Tok, usize)>, ExprError> {
        let mut lx = Lexer {
            src: src.as_bytes(),
            pos: 0,
        };
        let mut out = Vec::new();
        loop {
            lx.skip_ws();
            if lx.pos >= lx.src.len() {
                break;
            }
            let start = lx.pos;
            let c = lx.src[lx.pos];
            let tok = match c {
                b'+' => {
                    lx.pos += 1;
                    Tok::Plus
                }
                b'-' => {
                    lx.pos += 1;
                    Tok::Minus
                }
                b'*' => {
                    lx.pos += 1;
                    Tok::Star
                }
                b'/' => {
                    lx.pos += 1;
                    Tok::Slash
                }
                b'^' => {
                    lx.pos += 1;
                    Tok::Caret
                }
                b'(' => {
                    lx.pos += 1;
                    Tok::LParen
                }
                b')' => {
                    lx.pos += 1;
                    Tok::RParen
                }
                b'0'..=b'9' | b'.' => lx.number(start)?,
                c if c.is_ascii_alphabetic() || c == b'_' => lx.ident(start),
                // U+2212 (minus sign) is accepted as a plain minus
                0xE2 if lx.src[lx.pos..].starts_with("\u{2212}".as_bytes()) => {
                    lx.pos += 3;
                    Tok::Minus
                }
                other => {
                    return Err(ExprError::Syntax {
                        offset: start,
                        message: format!("unexpected character '{}'", other as char),
                    })
                }
            };
            out.push((tok, start));
        }
        Ok(out)
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn number(&mut self, start: usize) -> Result<Tok, ExprError> {
        let mut end = self.pos;
        while end < self.src.len() && (self.src[end].is_ascii_digit() || self.src[end] == b'.') {
            end += 1;
        }
        // optional exponent
        if end < self.src.len() && (self.src[end] == b'e' || self.src[end] == b'E') {
            let mut e = end + 1;
            if e < self.src.len() && (self.src[e] == b'+' || self.src[e] == b'-') {
                e += 1;
            }
            if e < self.src.len() && self.src[e].is_ascii_digit() {
                while e < self.src.len() && self.src[e].is_ascii_digit() {
                    e += 1;
                }
                end = e;
            }
        }
        let text = std::str::from_utf8(&self.src[start..end]).expect("ascii");
        let value: f64 = text.parse().map_err(|_| ExprError::Syntax {
            offset: start,
            message: format!("malformed number '{text}'"),
        })?;
        self.pos = end;
        Ok(Tok::Num(value))
    }

    fn ident(&mut self, start: usize) -> Tok {
        let mut end = self.pos;
        while end < self.src.len()
            && (self.src[end].is_ascii_alphanumeric() || self.src[end] == b'_')
        {
            end += 1;
        }
        self.pos = end;
        Tok::Ident(
            std::str::from_utf8(&self.src[start..end])
                .expect("ascii")
                .to_owned(),
        )
    }
}

pub(super) struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    idx: usize,
    dim: usize,
    params: &'a BTreeMap<String, f64>,
    src_len: usize,
}

impl<'a> Parser<'a> {
    pub(super) fn parse(
        src: &str,
        dim: usize,
        params: &'a BTreeMap<String, f64>,
    ) -> Result<Node, ExprError> {
        if src.trim().is_empty() {
            return Err(ExprError::Empty);
        }
        let toks = Lexer::tokens(src)?;
        let mut p = Parser {
            toks,
            idx: 0,
            dim,
            params,
            src_len: src.len(),
        };
        let node = p.expr()?;
        if p.idx < p.toks.len() {
            let (tok, off) = &p.toks[p.idx];
            return Err(ExprError::Syntax {
                offset: *off,
                message: format!("unexpected token {tok:?} after expression"),
            });
        }
        Ok(node)
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.idx).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.toks
            .get(self.idx)
            .map(|(_, o)| *o)
            .unwrap_or(self.src_len)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.idx).map(|(t, _)| t.clone());
        self.idx += 1;
        t
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Node::add(lhs, rhs);
                }
                Some(Tok::Minus) => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Node::sub(lhs, rhs);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.bump();
                    let rhs = self.factor()?;
                    lhs = Node::mul(lhs, rhs);
                }
                Some(Tok::Slash) => {
                    self.bump();
                    let rhs = self.factor()?;
                    lhs = Node::div(lhs, rhs);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Node, ExprError> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.bump();
            let inner = self.power()?;
            return Ok(Node::Unary(UnaryFn::Neg, Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.atom()?;
        if matches!(self.peek(), Some(Tok::Caret)) {
            self.bump();
            let exp = self.factor()?;
            return Ok(Node::pow(base, exp));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        let off = self.offset();
        match self.bump() {
            Some(Tok::Num(v)) => Ok(Node::Const(v)),
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Some(Tok::Ident(name)) => {
                if matches!(self.peek(), Some(Tok::LParen)) {
                    self.bump();
                    let func = UnaryFn::from_name(&name).ok_or(ExprError::UnknownIdent {
                        offset: off,
                        name: name.clone(),
                    })?;
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    Ok(Node::Unary(func, Box::new(arg)))
                } else {
                    self.name_atom(&name, off)
                }
            }
            other => Err(ExprError::Syntax {
                offset: off,
                message: match other {
                    Some(t) => format!("expected a value, found {t:?}"),
                    None => "unexpected end of input".to_owned(),
                },
            }),
        }
    }

    fn name_atom(&self, name: &str, off: usize) -> Result<Node, ExprError> {
        if let Some(rest) = name.strip_prefix('x') {
            if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
                let k: usize = rest.parse().map_err(|_| ExprError::Syntax {
                    offset: off,
                    message: format!("bad coordinate index in '{name}'"),
                })?;
                if k == 0 || k > self.dim {
                    return Err(ExprError::CoordOutOfRange {
                        offset: off,
                        index: k,
                        dim: self.dim,
                    });
                }
                return Ok(Node::Coord(k - 1));
            }
        }
        if name == "pi" {
            return Ok(Node::Const(std::f64::consts::PI));
        }
        if self.params.contains_key(name) {
            return Ok(Node::Param(name.to_owned()));
        }
        Err(ExprError::UnknownIdent {
            offset: off,
            name: name.to_owned(),
        })
    }

    fn expect_rparen(&mut self) -> Result<(), ExprError> {
        let off = self.offset();
        match self.bump() {
            Some(Tok::RParen) => Ok(()),
            _ => Err(ExprError::Syntax {
                offset: off,
                message: "expected ')'".to_owned(),
            }),
        }
    }
}
