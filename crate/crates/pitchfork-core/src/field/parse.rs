//! Problem-file and expression parser.
//!
//! Problem files are UTF-8, line-oriented, `#` starts a comment:
//!
//! ```text
//! dim = 2
//! param = eps
//! vars = x y
//! eq 1 = y^2 - (eps+1)*y - x
//! eq 2 = x^2 - (eps+1)*x - y
//! point = 0 0
//! eps0 = 0
//! radius = 0.8
//! ```
//!
//! Expression grammar uses standard precedence (`^` > unary `-` > `*` `/` >
//! `+` `-`), parentheses, and calls `f(expr)` for `f` in
//! `{sin, cos, exp, sqrt}`. Exponents must be non-negative integer literals.

use super::ast::{ExprNode, VarRef};
use super::{FieldSpec, Problem};
use crate::{Error, Result};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

pub(super) fn parse_problem(text: &str) -> Result<Problem> {
    let mut dim: Option<usize> = None;
    let mut param: Option<String> = None;
    let mut vars: Option<Vec<String>> = None;
    let mut eqs: Vec<(usize, String, usize)> = Vec::new(); // (index, rhs, byte offset)
    let mut point: Option<Vec<f64>> = None;
    let mut eps0: f64 = 0.0;
    let mut radius: f64 = 0.5;

    let mut offset = 0usize;
    for raw_line in text.split('\n') {
        let line_offset = offset;
        offset += raw_line.len() + 1;
        let line = match raw_line.find('#') {
            Some(i) => &raw_line[..i],
            None => raw_line,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            pos: line_offset,
            msg: format!("expected `key = value`, got `{line}`"),
        })?;
        let key = key.trim();
        let value = value.trim();
        let bad_num = |what: &str| Error::Parse {
            pos: line_offset,
            msg: format!("invalid number in `{what}`"),
        };
        match key {
            "dim" => {
                dim = Some(value.parse::<usize>().map_err(|_| bad_num("dim"))?);
            }
            "param" => {
                check_ident(value, line_offset)?;
                param = Some(value.to_string());
            }
            "vars" => {
                let names: Vec<String> = value.split_whitespace().map(|s| s.to_string()).collect();
                for n in &names {
                    check_ident(n, line_offset)?;
                }
                vars = Some(names);
            }
            "point" => {
                let coords: Result<Vec<f64>> = value
                    .split_whitespace()
                    .map(|s| s.parse::<f64>().map_err(|_| bad_num("point")))
                    .collect();
                point = Some(coords?);
            }
            "eps0" => {
                eps0 = value.parse::<f64>().map_err(|_| bad_num("eps0"))?;
            }
            "radius" => {
                radius = value.parse::<f64>().map_err(|_| bad_num("radius"))?;
                if !(radius > 0.0) {
                    return Err(Error::Parse {
                        pos: line_offset,
                        msg: "radius must be positive".into(),
                    });
                }
            }
            _ if key.starts_with("eq") => {
                let idx_str = key[2..].trim();
                let idx: usize = idx_str.parse().map_err(|_| Error::Parse {
                    pos: line_offset,
                    msg: format!("bad equation index `{idx_str}`"),
                })?;
                eqs.push((idx, value.to_string(), line_offset));
            }
            _ => {
                return Err(Error::Parse {
                    pos: line_offset,
                    msg: format!("unknown key `{key}`"),
                })
            }
        }
    }

    let dim = dim.ok_or(Error::Parse { pos: 0, msg: "missing `dim` line".into() })?;
    if dim == 0 {
        return Err(Error::Parse { pos: 0, msg: "dim must be at least 1".into() });
    }
    let param = param.ok_or(Error::Parse { pos: 0, msg: "missing `param` line".into() })?;
    let vars = vars.ok_or(Error::Parse { pos: 0, msg: "missing `vars` line".into() })?;
    if vars.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: vars.len() });
    }
    if vars.iter().any(|v| *v == param) {
        return Err(Error::Parse { pos: 0, msg: "parameter name collides with a variable".into() });
    }
    if eqs.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: eqs.len() });
    }
    eqs.sort_by_key(|(i, _, _)| *i);
    for (want, (got, _, pos)) in eqs.iter().enumerate() {
        let (got, pos) = (*got, *pos);
        if got != want + 1 {
            return Err(Error::Parse {
                pos,
                msg: format!("equation indices must be 1..{dim}, found eq {got}"),
            });
        }
    }

    let mut exprs = Vec::with_capacity(dim);
    for (_, rhs, pos) in &eqs {
        let expr = ExprParser::new(rhs, *pos, &vars, &param).parse()?;
        exprs.push(expr);
    }

    let point = match point {
        Some(p) => {
            if p.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
            }
            p
        }
        None => alloc::vec![0.0; dim],
    };

    let field = FieldSpec::from_parts(param, vars, exprs, text.to_string())?;
    Ok(Problem { field, point, eps0, radius })
}

fn check_ident(s: &str, pos: usize) -> Result<()> {
    let ok = !s.is_empty()
        && s.chars().next().unwrap().is_ascii_alphabetic()
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    if ok && !matches!(s, "sin" | "cos" | "exp" | "sqrt") {
        Ok(())
    } else {
        Err(Error::Parse { pos, msg: format!("invalid identifier `{s}`") })
    }
}

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

struct ExprParser<'a> {
    text: &'a str,
    toks: Vec<(Tok, usize)>,
    pos: usize,
    base: usize,
    vars: &'a [String],
    param: &'a str,
}

impl<'a> ExprParser<'a> {
    fn new(text: &'a str, base: usize, vars: &'a [String], param: &'a str) -> Self {
        Self { text, toks: Vec::new(), pos: 0, base, vars, param }
    }

    fn parse(mut self) -> Result<ExprNode> {
        self.toks = tokenize(self.text, self.base)?;
        let e = self.expr()?;
        if self.pos != self.toks.len() {
            let (_, p) = self.toks[self.pos];
            return Err(Error::Parse { pos: p, msg: "trailing input after expression".into() });
        }
        Ok(e)
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.toks
            .get(self.pos)
            .map(|(_, p)| *p)
            .unwrap_or(self.base + self.text.len())
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        let p = self.here();
        match self.bump() {
            Some(t) if t == want => Ok(()),
            _ => Err(Error::Parse { pos: p, msg: format!("expected {what}") }),
        }
    }

    fn expr(&mut self) -> Result<ExprNode> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    acc = ExprNode::add(acc, self.term()?);
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    acc = ExprNode::sub(acc, self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<ExprNode> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    acc = ExprNode::mul(acc, self.unary()?);
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    acc = ExprNode::div(acc, self.unary()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<ExprNode> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.pos += 1;
            Ok(ExprNode::Neg(alloc::boxed::Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<ExprNode> {
        let mut acc = self.atom()?;
        while matches!(self.peek(), Some(Tok::Caret)) {
            self.pos += 1;
            let p = self.here();
            match self.bump() {
                Some(Tok::Num(v)) => {
                    if v < 0.0 || v != libm::floor(v) || v > u32::MAX as f64 {
                        return Err(Error::NonIntegerExponent { pos: p });
                    }
                    acc = ExprNode::pow(acc, v as u32);
                }
                _ => return Err(Error::NonIntegerExponent { pos: p }),
            }
        }
        Ok(acc)
    }

    fn atom(&mut self) -> Result<ExprNode> {
        let p = self.here();
        match self.bump() {
            Some(Tok::Num(v)) => Ok(ExprNode::Const(v)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => match name.as_str() {
                "sin" | "cos" | "exp" | "sqrt" => {
                    self.expect(Tok::LParen, "`(` after function name")?;
                    let arg = self.expr()?;
                    self.expect(Tok::RParen, "`)`")?;
                    let b = alloc::boxed::Box::new(arg);
                    Ok(match name.as_str() {
                        "sin" => ExprNode::Sin(b),
                        "cos" => ExprNode::Cos(b),
                        "exp" => ExprNode::Exp(b),
                        _ => ExprNode::Sqrt(b),
                    })
                }
                _ => {
                    if name == self.param {
                        Ok(ExprNode::Var(VarRef::Param))
                    } else if let Some(i) = self.vars.iter().position(|v| *v == name) {
                        Ok(ExprNode::Var(VarRef::State(i)))
                    } else {
                        Err(Error::UnknownIdentifier(name))
                    }
                }
            },
            _ => Err(Error::Parse { pos: p, msg: "expected expression".into() }),
        }
    }
}

fn tokenize(text: &str, base: usize) -> Result<Vec<(Tok, usize)>> {
    let mut toks = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0usize;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = base + i;
        match c {
            ' ' | '\t' => {
                i += 1;
            }
            '+' => {
                toks.push((Tok::Plus, start));
                i += 1;
            }
            '-' => {
                toks.push((Tok::Minus, start));
                i += 1;
            }
            '*' => {
                toks.push((Tok::Star, start));
                i += 1;
            }
            '/' => {
                toks.push((Tok::Slash, start));
                i += 1;
            }
            '^' => {
                toks.push((Tok::Caret, start));
                i += 1;
            }
            '(' => {
                toks.push((Tok::LParen, start));
                i += 1;
            }
            ')' => {
                toks.push((Tok::RParen, start));
                i += 1;
            }
            '0'..='9' | '.' => {
                let s = i;
                while i < bytes.len() && matches!(bytes[i] as char, '0'..='9' | '.') {
                    i += 1;
                }
                // optional exponent part
                if i < bytes.len() && matches!(bytes[i] as char, 'e' | 'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && matches!(bytes[j] as char, '+' | '-') {
                        j += 1;
                    }
                    if j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let lit = &text[s..i];
                let v: f64 = lit.parse().map_err(|_| Error::Parse {
                    pos: start,
                    msg: format!("invalid number literal `{lit}`"),
                })?;
                toks.push((Tok::Num(v), start));
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                let s = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] as char == '_')
                {
                    i += 1;
                }
                toks.push((Tok::Ident(text[s..i].to_string()), start));
            }
            _ => {
                return Err(Error::Parse { pos: start, msg: format!("unexpected character `{c}`") })
            }
        }
    }
    Ok(toks)
}
