//! Scalar functions of time written as small arithmetic expressions, e.g.
//! `0.6*cos(t*pi/6)` or `max(15 - 2.5*t, 0)`.
//!
//! Grammar: numbers, the variable `t`, the constant `pi`, the binary
//! operators `+ - * /`, unary minus, parentheses and the functions `sin`,
//! `cos`, `exp`, `sqrt`, `abs`, `min`, `max` and `step` (0 for negative
//! arguments, 1 otherwise).

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Time,
    Neg(Box<Node>),
    Bin(Op, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
    Min,
    Max,
    Step,
}

impl Func {
    fn lookup(name: &str) -> Option<(Self, usize)> {
        Some(match name {
            "sin" => (Self::Sin, 1),
            "cos" => (Self::Cos, 1),
            "exp" => (Self::Exp, 1),
            "sqrt" => (Self::Sqrt, 1),
            "abs" => (Self::Abs, 1),
            "min" => (Self::Min, 2),
            "max" => (Self::Max, 2),
            "step" => (Self::Step, 1),
            _ => return None,
        })
    }
}

/// A parsed expression in the time variable `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    node: Node,
}

impl Expr {
    pub fn parse(source: &str) -> Result<Self> {
        let mut p = Parser {
            src: source.as_bytes(),
            pos: 0,
        };
        let node = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(Self {
            source: source.to_string(),
            node,
        })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            source: format!("{value}"),
            node: Node::Num(value),
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, t: f64) -> f64 {
        eval(&self.node, t)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl core::str::FromStr for Expr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

fn eval(node: &Node, t: f64) -> f64 {
    match node {
        Node::Num(v) => *v,
        Node::Time => t,
        Node::Neg(a) => -eval(a, t),
        Node::Bin(op, a, b) => {
            let (x, y) = (eval(a, t), eval(b, t));
            match op {
                Op::Add => x + y,
                Op::Sub => x - y,
                Op::Mul => x * y,
                Op::Div => x / y,
            }
        }
        Node::Call(func, args) => {
            let x = eval(&args[0], t);
            match func {
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Exp => x.exp(),
                Func::Sqrt => x.sqrt(),
                Func::Abs => x.abs(),
                Func::Min => x.min(eval(&args[1], t)),
                Func::Max => x.max(eval(&args[1], t)),
                Func::Step => {
                    if x < 0.0 {
                        0.0
                    } else {
                        1.0
                    }
                }
            }
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::Expression {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            let op = if c == b'+' { Op::Add } else { Op::Sub };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if c == b'*' { Op::Mul } else { Op::Div };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Node> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(b')')?;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.identifier(),
            Some(_) => Err(self.error("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            let mut end = self.pos + 1;
            if end < self.src.len() && matches!(self.src[end], b'+' | b'-') {
                end += 1;
            }
            if end < self.src.len() && self.src[end].is_ascii_digit() {
                self.pos = end;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
        }
        let text = core::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        text.parse::<f64>().map(Node::Num).map_err(|_| Error::Expression {
            pos: start,
            msg: format!("invalid number `{text}`"),
        })
    }

    fn identifier(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
            self.pos += 1;
        }
        let name = core::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        match name {
            "t" => return Ok(Node::Time),
            "pi" => return Ok(Node::Num(core::f64::consts::PI)),
            _ => {}
        }
        let Some((func, arity)) = Func::lookup(name) else {
            return Err(Error::Expression {
                pos: start,
                msg: format!("unknown identifier `{name}`"),
            });
        };
        self.expect(b'(')?;
        let mut args = Vec::with_capacity(arity);
        loop {
            args.push(self.expr()?);
            if self.peek() == Some(b',') {
                self.pos += 1;
            } else {
                break;
            }
        }
        self.expect(b')')?;
        if args.len() != arity {
            return Err(Error::Expression {
                pos: start,
                msg: format!("`{name}` takes {arity} argument(s), got {}", args.len()),
            });
        }
        Ok(Node::Call(func, args))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;
    use proptest::prelude::*;

    fn ev(s: &str, t: f64) -> f64 {
        Expr::parse(s).unwrap().eval(t)
    }

    #[test]
    fn precedence_and_unary() {
        assert_eq!(ev("1 + 2 * 3", 0.0), 7.0);
        assert_eq!(ev("(1 + 2) * 3", 0.0), 9.0);
        assert_eq!(ev("-2 * -3", 0.0), 6.0);
        assert_eq!(ev("8 / 4 / 2", 0.0), 1.0);
        assert_eq!(ev("10 - 4 - 3", 0.0), 3.0);
        assert_eq!(ev("1.5e1 - 2.5*t", 2.0), 10.0);
    }

    #[test]
    fn functions_and_time() {
        assert!((ev("0.6*cos(t*pi/6)", 2.0) - 0.6 * (PI / 3.0).cos()).abs() < 1e-15);
        assert_eq!(ev("max(15 - 2.5*t, 0)", 8.0), 0.0);
        assert_eq!(ev("min(2.5*t, 15)", 8.0), 15.0);
        assert_eq!(ev("step(t - 3)", 3.0), 1.0);
        assert_eq!(ev("step(t - 3)", 2.999), 0.0);
        assert_eq!(ev("abs(-2) + sqrt(4)", 0.0), 4.0);
    }

    #[test]
    fn errors_carry_positions() {
        assert!(matches!(Expr::parse("1 +"), Err(Error::Expression { pos: 3, .. })));
        assert!(matches!(Expr::parse("foo(1)"), Err(Error::Expression { pos: 0, .. })));
        assert!(Expr::parse("min(1)").is_err());
        assert!(Expr::parse("(1").is_err());
        assert!(Expr::parse("1 2").is_err());
        assert!(Expr::parse("").is_err());
    }

    proptest! {
        #[test]
        fn linear_expressions_match(a in -100.0f64..100.0, b in -100.0f64..100.0, t in 0.0f64..10.0) {
            let e = Expr::parse(&format!("{a} + ({b})*t")).unwrap();
            prop_assert!((e.eval(t) - (a + b * t)).abs() <= 1e-9 * (1.0 + a.abs() + (b * t).abs()));
            let round = Expr::parse(e.source()).unwrap();
            prop_assert_eq!(round.eval(t), e.eval(t));
        }
    }
}
