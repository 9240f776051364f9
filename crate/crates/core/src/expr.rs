//! Arithmetic mini-grammar for user-supplied source terms.
//!
//! Supports `+ - * / ^`, unary minus, parentheses, numeric literals and the
//! functions `abs, sign, exp, log, sin, cos, tanh`.  Variables are resolved
//! against a fixed slot list chosen by the caller: `u` for source terms
//! f(u), and `x, t, v, z` for gradient terms g(|x|, t, ∂ᵣu, ∂ₜu).  `^` is
//! right-associative and binds tighter than unary minus, so `-u^2` is
//! `-(u^2)`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Num(f64),
    Var(usize),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Neg(Box<Node>),
    Fun(Fun, Box<Node>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
enum Fun {
    Abs,
    Sign,
    Exp,
    Log,
    Sin,
    Cos,
    Tanh,
}

impl Fun {
    fn eval(self, x: f64) -> f64 {
        match self {
            Fun::Abs => x.abs(),
            Fun::Sign => {
                // sign(0) = 0, unlike f64::signum
                if x == 0.0 {
                    0.0
                } else {
                    x.signum()
                }
            }
            Fun::Exp => x.exp(),
            Fun::Log => x.ln(),
            Fun::Sin => x.sin(),
            Fun::Cos => x.cos(),
            Fun::Tanh => x.tanh(),
        }
    }
}

/// A parsed expression together with its source text and variable slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expr {
    src: String,
    vars: Vec<String>,
    root: Node,
}

impl Expr {
    /// Parse `src` with the given variable names (slot order = argument
    /// order at evaluation time).
    pub fn parse(src: &str, vars: &[&str]) -> Result<Expr> {
        let mut p = Parser { src, bytes: src.as_bytes(), pos: 0, vars };
        p.skip_ws();
        let root = p.expr()?;
        p.skip_ws();
        if p.pos != p.bytes.len() {
            return Err(p.err("trailing input"));
        }
        Ok(Expr {
            src: src.to_string(),
            vars: vars.iter().map(|s| s.to_string()).collect(),
            root,
        })
    }

    /// Evaluate with arguments in slot order. `args.len()` must match the
    /// slot list the expression was parsed with.
    pub fn eval(&self, args: &[f64]) -> f64 {
        debug_assert_eq!(args.len(), self.vars.len());
        eval_node(&self.root, args)
    }

    /// Original source text.
    pub fn src(&self) -> &str {
        &self.src
    }
}

fn eval_node(n: &Node, args: &[f64]) -> f64 {
    match n {
        Node::Num(v) => *v,
        Node::Var(i) => args[*i],
        Node::Add(a, b) => eval_node(a, args) + eval_node(b, args),
        Node::Sub(a, b) => eval_node(a, args) - eval_node(b, args),
        Node::Mul(a, b) => eval_node(a, args) * eval_node(b, args),
        Node::Div(a, b) => eval_node(a, args) / eval_node(b, args),
        Node::Pow(a, b) => eval_node(a, args).powf(eval_node(b, args)),
        Node::Neg(a) => -eval_node(a, args),
        Node::Fun(f, a) => f.eval(eval_node(a, args)),
    }
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    vars: &'a [&'a str],
}

impl<'a> Parser<'a> {
    fn err(&self, reason: &str) -> Error {
        Error::ExprParse { src: self.src.to_string(), at: self.pos, reason: reason.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            self.skip_ws();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat(b'-') {
            Ok(Node::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat(b'^') {
            // right-associative; exponent may carry its own unary minus
            let exp = self.unary()?;
            Ok(Node::Pow(Box::new(base), Box::new(exp)))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek() {
            Some(b'(') => {
                self.eat(b'(');
                let inner = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected `)`"));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            _ => Err(self.err("expected number, variable, function or `(`")),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || c == b'.' {
                self.pos += 1;
            } else if (c == b'e' || c == b'E') && self.pos > start {
                // exponent part: e[+-]?digits
                let save = self.pos;
                self.pos += 1;
                if matches!(self.peek(), Some(b'+') | Some(b'-')) {
                    self.pos += 1;
                }
                if matches!(self.peek(), Some(d) if d.is_ascii_digit()) {
                    while matches!(self.peek(), Some(d) if d.is_ascii_digit()) {
                        self.pos += 1;
                    }
                } else {
                    self.pos = save;
                    break;
                }
            } else {
                break;
            }
        }
        let text = &self.src[start..self.pos];
        self.skip_ws();
        text.parse::<f64>().map(Node::Num).map_err(|_| self.err("malformed number"))
    }

    fn ident(&mut self) -> Result<Node> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
            self.pos += 1;
        }
        let name = &self.src[start..self.pos];
        self.skip_ws();
        let fun = match name {
            "abs" => Some(Fun::Abs),
            "sign" => Some(Fun::Sign),
            "exp" => Some(Fun::Exp),
            "log" => Some(Fun::Log),
            "sin" => Some(Fun::Sin),
            "cos" => Some(Fun::Cos),
            "tanh" => Some(Fun::Tanh),
            _ => None,
        };
        if let Some(f) = fun {
            if !self.eat(b'(') {
                return Err(self.err("expected `(` after function name"));
            }
            let arg = self.expr()?;
            if !self.eat(b')') {
                return Err(self.err("expected `)`"));
            }
            return Ok(Node::Fun(f, Box::new(arg)));
        }
        if let Some(i) = self.vars.iter().position(|v| *v == name) {
            return Ok(Node::Var(i));
        }
        let allowed: &'static str = if self.vars.contains(&"u") { "u" } else { "x, t, v, z" };
        Err(Error::ExprVariable { src: self.src.to_string(), name: name.to_string(), allowed })
    }
}
