//! Closed-form expressions in the spacetime coordinates and fiber variables.
//!
//! Grammar (whitespace ignored):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?
//! atom    := number | ident | func '(' expr ')' | '(' expr ')'
//! ident   := t | tau | x1 … xn | y1 … yn | pi | <named constant>
//! func    := sqrt | sin | cos | exp | log | ln
//! ```
//!
//! `×`, `÷` and `−` are accepted for `*`, `/` and `-`. `xi` are base
//! coordinates, `yi` fiber components, `t` and `tau` the time coordinate and
//! its velocity. Named constants are substituted at parse time.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use crate::ad::{AdError, Scalar};
use crate::error::{Error, Result};

#[derive(Debug, PartialEq)]
enum Node {
    Const(f64),
    T,
    X(usize),
    Tau,
    Y(usize),
    Neg(Expr),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Pow(Expr, Expr),
    Sqrt(Expr),
    Sin(Expr),
    Cos(Expr),
    Exp(Expr),
    Ln(Expr),
}

/// Immutable expression tree with cheap clones.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr(Arc<Node>);

impl Expr {
    fn node(n: Node) -> Self {
        Expr(Arc::new(n))
    }
    pub fn c(v: f64) -> Self {
        Self::node(Node::Const(v))
    }
    pub fn t() -> Self {
        Self::node(Node::T)
    }
    /// Base coordinate `x^(i+1)`.
    pub fn x(i: usize) -> Self {
        Self::node(Node::X(i))
    }
    pub fn tau() -> Self {
        Self::node(Node::Tau)
    }
    /// Fiber component `y^(i+1)`.
    pub fn y(i: usize) -> Self {
        Self::node(Node::Y(i))
    }

    pub fn as_const(&self) -> Option<f64> {
        match *self.0 {
            Node::Const(v) => Some(v),
            _ => None,
        }
    }

    pub fn sqrt(self) -> Self {
        match self.as_const() {
            Some(v) if v >= 0.0 => Expr::c(v.sqrt()),
            _ => Self::node(Node::Sqrt(self)),
        }
    }
    pub fn sin(self) -> Self {
        match self.as_const() {
            Some(v) => Expr::c(v.sin()),
            None => Self::node(Node::Sin(self)),
        }
    }
    pub fn cos(self) -> Self {
        match self.as_const() {
            Some(v) => Expr::c(v.cos()),
            None => Self::node(Node::Cos(self)),
        }
    }
    pub fn exp(self) -> Self {
        match self.as_const() {
            Some(v) => Expr::c(v.exp()),
            None => Self::node(Node::Exp(self)),
        }
    }
    pub fn ln(self) -> Self {
        match self.as_const() {
            Some(v) if v > 0.0 => Expr::c(v.ln()),
            _ => Self::node(Node::Ln(self)),
        }
    }
    pub fn pow(self, e: Expr) -> Self {
        match (self.as_const(), e.as_const()) {
            (_, Some(p)) if p == 1.0 => self,
            (_, Some(p)) if p == 0.0 => Expr::c(1.0),
            (Some(b), Some(p)) if b > 0.0 || p.fract() == 0.0 => Expr::c(b.powf(p)),
            _ => Self::node(Node::Pow(self, e)),
        }
    }
    pub fn powf(self, p: f64) -> Self {
        self.pow(Expr::c(p))
    }
    pub fn powi(self, n: i32) -> Self {
        self.pow(Expr::c(n as f64))
    }
    pub fn square(self) -> Self {
        self.powi(2)
    }

    /// Largest base-coordinate and fiber indices referenced, plus time usage.
    pub fn usage(&self) -> Usage {
        let mut u = Usage::default();
        self.collect_usage(&mut u);
        u
    }

    fn collect_usage(&self, u: &mut Usage) {
        match &*self.0 {
            Node::Const(_) => {}
            Node::T => u.t = true,
            Node::Tau => u.tau = true,
            Node::X(i) => u.max_x = u.max_x.max(Some(*i)),
            Node::Y(i) => u.max_y = u.max_y.max(Some(*i)),
            Node::Neg(a) | Node::Sqrt(a) | Node::Sin(a) | Node::Cos(a) | Node::Exp(a) | Node::Ln(a) => {
                a.collect_usage(u)
            }
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
                a.collect_usage(u);
                b.collect_usage(u);
            }
        }
    }

    /// The expression with every fiber variable `τ, yⁱ` replaced by its negative.
    pub fn reverse_fiber(&self) -> Expr {
        match &*self.0 {
            Node::Const(_) | Node::T | Node::X(_) => self.clone(),
            Node::Tau | Node::Y(_) => Expr::node(Node::Neg(self.clone())),
            Node::Neg(a) => Expr::node(Node::Neg(a.reverse_fiber())),
            Node::Sqrt(a) => Expr::node(Node::Sqrt(a.reverse_fiber())),
            Node::Sin(a) => Expr::node(Node::Sin(a.reverse_fiber())),
            Node::Cos(a) => Expr::node(Node::Cos(a.reverse_fiber())),
            Node::Exp(a) => Expr::node(Node::Exp(a.reverse_fiber())),
            Node::Ln(a) => Expr::node(Node::Ln(a.reverse_fiber())),
            Node::Add(a, b) => Expr::node(Node::Add(a.reverse_fiber(), b.reverse_fiber())),
            Node::Sub(a, b) => Expr::node(Node::Sub(a.reverse_fiber(), b.reverse_fiber())),
            Node::Mul(a, b) => Expr::node(Node::Mul(a.reverse_fiber(), b.reverse_fiber())),
            Node::Div(a, b) => Expr::node(Node::Div(a.reverse_fiber(), b.reverse_fiber())),
            Node::Pow(a, b) => Expr::node(Node::Pow(a.reverse_fiber(), b.reverse_fiber())),
        }
    }

    /// Evaluates with `z = (t, x¹, …)` and `w = (τ, y¹, …)`.
    pub fn eval<S: Scalar>(&self, z: &[S], w: &[S]) -> Result<S, AdError> {
        let var = |s: &[S], i: usize, name: &str| -> Result<S, AdError> {
            s.get(i).cloned().ok_or_else(|| AdError::UnboundVariable(name.to_string()))
        };
        Ok(match &*self.0 {
            Node::Const(c) => S::from_f64(*c),
            Node::T => var(z, 0, "t")?,
            Node::X(i) => var(z, i + 1, &format!("x{}", i + 1))?,
            Node::Tau => var(w, 0, "tau")?,
            Node::Y(i) => var(w, i + 1, &format!("y{}", i + 1))?,
            Node::Neg(a) => -a.eval(z, w)?,
            Node::Add(a, b) => a.eval(z, w)? + b.eval(z, w)?,
            Node::Sub(a, b) => a.eval(z, w)? - b.eval(z, w)?,
            Node::Mul(a, b) => a.eval(z, w)? * b.eval(z, w)?,
            Node::Div(a, b) => a.eval(z, w)?.checked_div(&b.eval(z, w)?)?,
            Node::Pow(a, b) => {
                let base = a.eval(z, w)?;
                match b.as_const() {
                    Some(p) if p.fract() == 0.0 && p.abs() <= 64.0 => base.powi(p as i32)?,
                    Some(p) => base.powf(p)?,
                    None => (b.eval(z, w)? * base.ln()?).exp(),
                }
            }
            Node::Sqrt(a) => a.eval(z, w)?.sqrt()?,
            Node::Sin(a) => a.eval(z, w)?.sin(),
            Node::Cos(a) => a.eval(z, w)?.cos(),
            Node::Exp(a) => a.eval(z, w)?.exp(),
            Node::Ln(a) => a.eval(z, w)?.ln()?,
        })
    }

    /// Plain `f64` evaluation.
    pub fn eval_f64(&self, z: &[f64], w: &[f64]) -> Result<f64, AdError> {
        self.eval(z, w)
    }

    pub fn parse(src: &str) -> Result<Expr> {
        Self::parse_with(src, &BTreeMap::new())
    }

    /// Parses with named constants substituted.
    pub fn parse_with(src: &str, constants: &BTreeMap<String, f64>) -> Result<Expr> {
        let tokens = lex(src)?;
        let mut p = Parser { tokens, pos: 0, constants };
        let e = p.expr()?;
        if let Some(tok) = p.tokens.get(p.pos) {
            return Err(Error::Parse { column: tok.col, message: format!("unexpected `{}`", tok.kind) });
        }
        Ok(e)
    }
}

/// Variables referenced by an expression.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Usage {
    pub t: bool,
    pub tau: bool,
    pub max_x: Option<usize>,
    pub max_y: Option<usize>,
}

impl From<f64> for Expr {
    fn from(v: f64) -> Self {
        Expr::c(v)
    }
}

impl Add for Expr {
    type Output = Expr;
    fn add(self, r: Expr) -> Expr {
        match (self.as_const(), r.as_const()) {
            (Some(a), Some(b)) => Expr::c(a + b),
            (Some(a), _) if a == 0.0 => r,
            (_, Some(b)) if b == 0.0 => self,
            _ => Expr::node(Node::Add(self, r)),
        }
    }
}
impl Sub for Expr {
    type Output = Expr;
    fn sub(self, r: Expr) -> Expr {
        match (self.as_const(), r.as_const()) {
            (Some(a), Some(b)) => Expr::c(a - b),
            (_, Some(b)) if b == 0.0 => self,
            (Some(a), _) if a == 0.0 => -r,
            _ => Expr::node(Node::Sub(self, r)),
        }
    }
}
impl Mul for Expr {
    type Output = Expr;
    fn mul(self, r: Expr) -> Expr {
        match (self.as_const(), r.as_const()) {
            (Some(a), Some(b)) => Expr::c(a * b),
            (Some(a), _) | (_, Some(a)) if a == 0.0 => Expr::c(0.0),
            (Some(a), _) if a == 1.0 => r,
            (_, Some(b)) if b == 1.0 => self,
            _ => Expr::node(Node::Mul(self, r)),
        }
    }
}
impl Div for Expr {
    type Output = Expr;
    fn div(self, r: Expr) -> Expr {
        match (self.as_const(), r.as_const()) {
            (Some(a), Some(b)) if b != 0.0 => Expr::c(a / b),
            (_, Some(b)) if b == 1.0 => self,
            (Some(a), _) if a == 0.0 => Expr::c(0.0),
            _ => Expr::node(Node::Div(self, r)),
        }
    }
}
impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        match self.as_const() {
            Some(a) => Expr::c(-a),
            None => Expr::node(Node::Neg(self)),
        }
    }
}
impl Add<f64> for Expr {
    type Output = Expr;
    fn add(self, r: f64) -> Expr {
        self + Expr::c(r)
    }
}
impl Sub<f64> for Expr {
    type Output = Expr;
    fn sub(self, r: f64) -> Expr {
        self - Expr::c(r)
    }
}
impl Mul<f64> for Expr {
    type Output = Expr;
    fn mul(self, r: f64) -> Expr {
        self * Expr::c(r)
    }
}
impl Div<f64> for Expr {
    type Output = Expr;
    fn div(self, r: f64) -> Expr {
        self / Expr::c(r)
    }
}
impl Mul<Expr> for f64 {
    type Output = Expr;
    fn mul(self, r: Expr) -> Expr {
        Expr::c(self) * r
    }
}
impl Div<Expr> for f64 {
    type Output = Expr;
    fn div(self, r: Expr) -> Expr {
        Expr::c(self) / r
    }
}
impl Add<Expr> for f64 {
    type Output = Expr;
    fn add(self, r: Expr) -> Expr {
        Expr::c(self) + r
    }
}
impl Sub<Expr> for f64 {
    type Output = Expr;
    fn sub(self, r: Expr) -> Expr {
        Expr::c(self) - r
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.0 {
            Node::Const(c) => {
                if *c < 0.0 {
                    write!(f, "({c:?})")
                } else {
                    write!(f, "{c:?}")
                }
            }
            Node::T => write!(f, "t"),
            Node::X(i) => write!(f, "x{}", i + 1),
            Node::Tau => write!(f, "tau"),
            Node::Y(i) => write!(f, "y{}", i + 1),
            Node::Neg(a) => write!(f, "(-{a})"),
            Node::Add(a, b) => write!(f, "({a} + {b})"),
            Node::Sub(a, b) => write!(f, "({a} - {b})"),
            Node::Mul(a, b) => write!(f, "({a} * {b})"),
            Node::Div(a, b) => write!(f, "({a} / {b})"),
            Node::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Node::Sqrt(a) => write!(f, "sqrt({a})"),
            Node::Sin(a) => write!(f, "sin({a})"),
            Node::Cos(a) => write!(f, "cos({a})"),
            Node::Exp(a) => write!(f, "exp({a})"),
            Node::Ln(a) => write!(f, "log({a})"),
        }
    }
}

// ---------------------------------------------------------------------------
// Lexer and parser

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kind::Num(v) => write!(f, "{v}"),
            Kind::Ident(s) => write!(f, "{s}"),
            Kind::Op(c) => write!(f, "{c}"),
            Kind::LParen => write!(f, "("),
            Kind::RParen => write!(f, ")"),
        }
    }
}

#[derive(Clone, Debug)]
struct Token {
    kind: Kind,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = s.parse::<f64>().map_err(|_| Error::Parse { column: col, message: format!("bad number `{s}`") })?;
            out.push(Token { kind: Kind::Num(v), col });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token { kind: Kind::Ident(chars[start..i].iter().collect()), col });
            continue;
        }
        let kind = match c {
            '+' => Kind::Op('+'),
            '-' | '−' => Kind::Op('-'),
            '*' | '×' => Kind::Op('*'),
            '/' | '÷' => Kind::Op('/'),
            '^' => Kind::Op('^'),
            '(' => Kind::LParen,
            ')' => Kind::RParen,
            _ => return Err(Error::Parse { column: col, message: format!("unexpected character `{c}`") }),
        };
        out.push(Token { kind, col });
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    constants: &'a BTreeMap<String, f64>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Kind> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn column(&self) -> usize {
        self.tokens.get(self.pos).map_or_else(|| self.tokens.last().map_or(1, |t| t.col + 1), |t| t.col)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse { column: self.column(), message: message.into() })
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(Kind::Op(op @ ('+' | '-'))) = self.peek() {
            let op = *op;
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' { lhs + rhs } else { lhs - rhs };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(Kind::Op(op @ ('*' | '/'))) = self.peek() {
            let op = *op;
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' { lhs * rhs } else { lhs / rhs };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if let Some(Kind::Op('-')) = self.peek() {
            self.pos += 1;
            return Ok(-self.unary()?);
        }
        if let Some(Kind::Op('+')) = self.peek() {
            self.pos += 1;
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if let Some(Kind::Op('^')) = self.peek() {
            self.pos += 1;
            let e = self.unary()?;
            return Ok(base.pow(e));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let Some(tok) = self.tokens.get(self.pos).cloned() else {
            return self.err("unexpected end of expression");
        };
        self.pos += 1;
        match tok.kind {
            Kind::Num(v) => Ok(Expr::c(v)),
            Kind::LParen => {
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Kind::Ident(name) => {
                if let Some(Kind::LParen) = self.peek() {
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return match name.as_str() {
                        "sqrt" => Ok(arg.sqrt()),
                        "sin" => Ok(arg.sin()),
                        "cos" => Ok(arg.cos()),
                        "exp" => Ok(arg.exp()),
                        "log" | "ln" => Ok(arg.ln()),
                        _ => Err(Error::Parse { column: tok.col, message: format!("unknown function `{name}`") }),
                    };
                }
                self.ident(&name, tok.col)
            }
            other => Err(Error::Parse { column: tok.col, message: format!("unexpected `{other}`") }),
        }
    }

    fn ident(&self, name: &str, col: usize) -> Result<Expr> {
        match name {
            "t" => return Ok(Expr::t()),
            "tau" => return Ok(Expr::tau()),
            "pi" => return Ok(Expr::c(std::f64::consts::PI)),
            _ => {}
        }
        if let Some(&v) = self.constants.get(name) {
            return Ok(Expr::c(v));
        }
        let indexed = |prefix: &str| -> Option<usize> {
            let rest = name.strip_prefix(prefix)?;
            let k: usize = rest.parse().ok()?;
            (k >= 1 && !rest.starts_with('0')).then(|| k - 1)
        };
        if let Some(i) = indexed("x") {
            return Ok(Expr::x(i));
        }
        if let Some(i) = indexed("y") {
            return Ok(Expr::y(i));
        }
        Err(Error::Parse { column: col, message: format!("unknown identifier `{name}`") })
    }

    fn expect_rparen(&mut self) -> Result<()> {
        match self.peek() {
            Some(Kind::RParen) => {
                self.pos += 1;
                Ok(())
            }
            _ => self.err("expected `)`"),
        }
    }
}
