//! Coefficient expressions: `+ - * / ^`, `pow(a, b)`, `exp`, `sin`, `cos`,
//! `tanh`, numeric constants, `pi`, and the variables `t`, `x1..xd` and (for
//! the nonlinearity) `u`.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T,
    /// Zero-based coordinate index; written `x1`, `x2`, ...
    X(usize),
    U,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Sin,
    Cos,
    Tanh,
    /// Only produced by differentiation.
    Ln,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tanh => "tanh",
            Func::Ln => "ln",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Exp => v.exp(),
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Tanh => v.tanh(),
            Func::Ln => v.ln(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// Which variables an expression may mention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scope {
    pub dim: usize,
    pub t: bool,
    pub u: bool,
}

impl Scope {
    /// `t, x1..xd`.
    pub fn field(dim: usize) -> Self {
        Self { dim, t: true, u: false }
    }

    /// `x1..xd`.
    pub fn space(dim: usize) -> Self {
        Self { dim, t: false, u: false }
    }

    /// `t` only.
    pub fn time() -> Self {
        Self { dim: 0, t: true, u: false }
    }

    /// `t, u`.
    pub fn nonlinearity() -> Self {
        Self { dim: 0, t: true, u: true }
    }
}

/// A parsed expression together with its source text.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    src: String,
    node: Node,
}

impl Expr {
    pub fn parse(src: &str, scope: Scope) -> Result<Self> {
        let tokens = lex(src)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            scope,
            len: src.chars().count(),
        };
        let node = p.expr()?;
        if let Some(tok) = p.peek() {
            return Err(parse_error(tok.col, format!("unexpected {}", tok.kind)));
        }
        Ok(Self { src: src.to_string(), node })
    }

    pub fn source(&self) -> &str {
        &self.src
    }

    pub fn node(&self) -> &Node {
        &self.node
    }

    pub fn eval(&self, t: f64, x: &[f64], u: f64) -> f64 {
        self.node.eval(t, x, u)
    }

    /// Symbolic partial derivative.
    pub fn diff(&self, v: Var) -> Node {
        self.node.diff(v)
    }
}

impl Node {
    pub fn eval(&self, t: f64, x: &[f64], u: f64) -> f64 {
        match self {
            Node::Num(c) => *c,
            Node::Var(Var::T) => t,
            Node::Var(Var::U) => u,
            Node::Var(Var::X(i)) => x[*i],
            Node::Neg(a) => -a.eval(t, x, u),
            Node::Add(a, b) => a.eval(t, x, u) + b.eval(t, x, u),
            Node::Sub(a, b) => a.eval(t, x, u) - b.eval(t, x, u),
            Node::Mul(a, b) => a.eval(t, x, u) * b.eval(t, x, u),
            Node::Div(a, b) => a.eval(t, x, u) / b.eval(t, x, u),
            Node::Pow(a, b) => pow(a.eval(t, x, u), b.as_ref(), t, x, u),
            Node::Call(f, a) => f.apply(a.eval(t, x, u)),
        }
    }

    pub fn is_const(&self) -> bool {
        self.as_const().is_some()
    }

    fn as_const(&self) -> Option<f64> {
        match self {
            Node::Num(c) => Some(*c),
            _ => None,
        }
    }

    /// True when the expression mentions `v`.
    pub fn depends_on(&self, v: Var) -> bool {
        match self {
            Node::Num(_) => false,
            Node::Var(w) => *w == v,
            Node::Neg(a) | Node::Call(_, a) => a.depends_on(v),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
                a.depends_on(v) || b.depends_on(v)
            }
        }
    }

    pub fn diff(&self, v: Var) -> Node {
        use Node::*;
        match self {
            Num(_) => Num(0.0),
            Var(w) => Num(if *w == v { 1.0 } else { 0.0 }),
            Neg(a) => neg(a.diff(v)),
            Add(a, b) => add(a.diff(v), b.diff(v)),
            Sub(a, b) => sub(a.diff(v), b.diff(v)),
            Mul(a, b) => add(mul(a.diff(v), (**b).clone()), mul((**a).clone(), b.diff(v))),
            Div(a, b) => div(
                sub(mul(a.diff(v), (**b).clone()), mul((**a).clone(), b.diff(v))),
                powc((**b).clone(), 2.0),
            ),
            Pow(a, b) => {
                if !b.depends_on(v) {
                    // d(a^b) = b a^(b-1) a'
                    let b_minus_1 = sub((**b).clone(), Num(1.0));
                    mul(mul((**b).clone(), pown((**a).clone(), b_minus_1)), a.diff(v))
                } else {
                    // d(a^b) = a^b (b' ln a + b a'/a)
                    let inner = add(
                        mul(b.diff(v), call(Func::Ln, (**a).clone())),
                        div(mul((**b).clone(), a.diff(v)), (**a).clone()),
                    );
                    mul(self.clone(), inner)
                }
            }
            Call(f, a) => {
                let outer = match f {
                    Func::Exp => self.clone(),
                    Func::Sin => call(Func::Cos, (**a).clone()),
                    Func::Cos => neg(call(Func::Sin, (**a).clone())),
                    Func::Tanh => sub(Num(1.0), powc(self.clone(), 2.0)),
                    Func::Ln => div(Num(1.0), (**a).clone()),
                };
                mul(outer, a.diff(v))
            }
        }
    }
}

fn pow(base: f64, exponent: &Node, t: f64, x: &[f64], u: f64) -> f64 {
    if let Node::Num(c) = exponent {
        if c.fract() == 0.0 && c.abs() <= 64.0 {
            return base.powi(*c as i32);
        }
    }
    base.powf(exponent.eval(t, x, u))
}

fn neg(a: Node) -> Node {
    match a {
        Node::Num(c) => Node::Num(-c),
        Node::Neg(inner) => *inner,
        other => Node::Neg(Box::new(other)),
    }
}

fn add(a: Node, b: Node) -> Node {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Node::Num(x + y),
        (Some(0.0), _) => b,
        (_, Some(0.0)) => a,
        _ => Node::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Node, b: Node) -> Node {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Node::Num(x - y),
        (Some(0.0), _) => neg(b),
        (_, Some(0.0)) => a,
        _ => Node::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Node, b: Node) -> Node {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Node::Num(x * y),
        (Some(0.0), _) | (_, Some(0.0)) => Node::Num(0.0),
        (Some(1.0), _) => b,
        (_, Some(1.0)) => a,
        _ => Node::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Node, b: Node) -> Node {
    match (a.as_const(), b.as_const()) {
        (Some(0.0), _) => Node::Num(0.0),
        (_, Some(1.0)) => a,
        _ => Node::Div(Box::new(a), Box::new(b)),
    }
}

fn pown(a: Node, b: Node) -> Node {
    match b.as_const() {
        Some(0.0) => Node::Num(1.0),
        Some(1.0) => a,
        _ => Node::Pow(Box::new(a), Box::new(b)),
    }
}

fn powc(a: Node, c: f64) -> Node {
    pown(a, Node::Num(c))
}

fn call(f: Func, a: Node) -> Node {
    Node::Call(f, Box::new(a))
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Num(c) => write!(f, "{c}"),
            Node::Var(Var::T) => write!(f, "t"),
            Node::Var(Var::U) => write!(f, "u"),
            Node::Var(Var::X(i)) => write!(f, "x{}", i + 1),
            Node::Neg(a) => write!(f, "(-{a})"),
            Node::Add(a, b) => write!(f, "({a} + {b})"),
            Node::Sub(a, b) => write!(f, "({a} - {b})"),
            Node::Mul(a, b) => write!(f, "({a} * {b})"),
            Node::Div(a, b) => write!(f, "({a} / {b})"),
            Node::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Node::Call(g, a) => write!(f, "{}({a})", g.name()),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.src)
    }
}

fn parse_error(col: usize, message: String) -> Error {
    Error::Parse {
        line: 1,
        column: col,
        message,
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kind::Num(c) => write!(f, "number {c}"),
            Kind::Ident(s) => write!(f, "identifier `{s}`"),
            Kind::Op(c) => write!(f, "operator `{c}`"),
            Kind::LParen => write!(f, "`(`"),
            Kind::RParen => write!(f, "`)`"),
            Kind::Comma => write!(f, "`,`"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: Kind,
    /// One-based column of the first character.
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
        } else if c.is_ascii_digit() || c == '.' {
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
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v: f64 = text
                .parse()
                .map_err(|_| parse_error(col, format!("malformed number `{text}`")))?;
            out.push(Token { kind: Kind::Num(v), col });
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token {
                kind: Kind::Ident(chars[start..i].iter().collect()),
                col,
            });
        } else {
            let kind = match c {
                '+' | '-' | '*' | '/' | '^' => Kind::Op(c),
                '(' => Kind::LParen,
                ')' => Kind::RParen,
                ',' => Kind::Comma,
                _ => return Err(parse_error(col, format!("unexpected character `{c}`"))),
            };
            out.push(Token { kind, col });
            i += 1;
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    scope: Scope,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn end_col(&self) -> usize {
        self.len + 1
    }

    fn eat_op(&mut self, ops: &[char]) -> Option<char> {
        match self.peek() {
            Some(Token { kind: Kind::Op(c), .. }) if ops.contains(c) => {
                let c = *c;
                self.pos += 1;
                Some(c)
            }
            _ => None,
        }
    }

    fn expect(&mut self, want: Kind) -> Result<()> {
        match self.next() {
            Some(tok) if tok.kind == want => Ok(()),
            Some(tok) => Err(parse_error(tok.col, format!("expected {want}, found {}", tok.kind))),
            None => Err(parse_error(self.end_col(), format!("expected {want}, found end of input"))),
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(op) = self.eat_op(&['+', '-']) {
            let rhs = self.term()?;
            lhs = if op == '+' {
                Node::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.eat_op(&['*', '/']) {
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Node::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        match self.eat_op(&['-', '+']) {
            Some('-') => Ok(Node::Neg(Box::new(self.unary()?))),
            Some(_) => self.unary(),
            None => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat_op(&['^']).is_some() {
            let exponent = self.unary()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let end = self.end_col();
        let tok = self
            .next()
            .ok_or_else(|| parse_error(end, "unexpected end of input, expected an operand".into()))?;
        match tok.kind {
            Kind::Num(c) => Ok(Node::Num(c)),
            Kind::LParen => {
                let e = self.expr()?;
                self.expect(Kind::RParen)?;
                Ok(e)
            }
            Kind::Ident(name) => self.ident(&name, tok.col),
            other => Err(parse_error(tok.col, format!("expected an operand, found {other}"))),
        }
    }

    fn ident(&mut self, name: &str, col: usize) -> Result<Node> {
        let func = match name {
            "exp" => Some(Func::Exp),
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "tanh" => Some(Func::Tanh),
            _ => None,
        };
        if let Some(f) = func {
            self.expect(Kind::LParen)?;
            let a = self.expr()?;
            self.expect(Kind::RParen)?;
            return Ok(Node::Call(f, Box::new(a)));
        }
        if name == "pow" {
            self.expect(Kind::LParen)?;
            let a = self.expr()?;
            self.expect(Kind::Comma)?;
            let b = self.expr()?;
            self.expect(Kind::RParen)?;
            return Ok(Node::Pow(Box::new(a), Box::new(b)));
        }
        match name {
            "pi" => return Ok(Node::Num(std::f64::consts::PI)),
            "t" if self.scope.t => return Ok(Node::Var(Var::T)),
            "u" if self.scope.u => return Ok(Node::Var(Var::U)),
            _ => {}
        }
        if let Some(k) = name.strip_prefix('x').and_then(|r| r.parse::<usize>().ok()) {
            if k >= 1 && k <= self.scope.dim {
                return Ok(Node::Var(Var::X(k - 1)));
            }
            return Err(parse_error(
                col,
                format!("variable `{name}` is out of range for dimension {}", self.scope.dim),
            ));
        }
        Err(parse_error(col, format!("unknown identifier `{name}`")))
    }
}
