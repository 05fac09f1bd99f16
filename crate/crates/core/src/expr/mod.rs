//! Bivariate real expressions: parsing, symbolic differentiation, constant
//! folding and point evaluation.
//!
//! Expressions are immutable trees over the two phase-plane coordinates `x`
//! and `y`. Every operation returns a new tree, so an [`Expr`] can be shared
//! freely between threads.

mod diff;
mod parse;

use std::fmt;

pub use diff::{differentiate, fold};
pub use parse::{parse, parse_with};

use crate::error::{Error, Result};
use crate::fields::Point;

/// Phase-plane coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Tanh,
    Abs,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "ln" | "log" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "tanh" => Func::Tanh,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Tanh => "tanh",
            Func::Abs => "abs",
        }
    }
}

/// Expression tree.
///
/// `Undefined` only appears after folding a constant subtree that has no real
/// value (for instance `1/0`); evaluating it is a domain error.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
    Undefined(String),
}

impl Expr {
    pub fn x() -> Expr {
        Expr::Var(Var::X)
    }

    pub fn y() -> Expr {
        Expr::Var(Var::Y)
    }

    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn binary(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn call(f: Func, a: Expr) -> Expr {
        Expr::Call(f, Box::new(a))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(a: Expr) -> Expr {
        Expr::Neg(Box::new(a))
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinOp::Add, a, b)
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinOp::Sub, a, b)
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinOp::Mul, a, b)
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinOp::Div, a, b)
    }

    pub fn pow(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinOp::Pow, a, b)
    }

    pub fn is_const(&self) -> bool {
        matches!(self, Expr::Const(_))
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    /// True when no variable occurs anywhere in the tree.
    pub fn is_closed(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::Undefined(_) => true,
            Expr::Var(_) => false,
            Expr::Neg(a) | Expr::Call(_, a) => a.is_closed(),
            Expr::Binary(_, a, b) => a.is_closed() && b.is_closed(),
        }
    }

    pub fn contains_var(&self, v: Var) -> bool {
        match self {
            Expr::Const(_) | Expr::Undefined(_) => false,
            Expr::Var(w) => *w == v,
            Expr::Neg(a) | Expr::Call(_, a) => a.contains_var(v),
            Expr::Binary(_, a, b) => a.contains_var(v) || b.contains_var(v),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) | Expr::Undefined(_) => 1,
            Expr::Neg(a) | Expr::Call(_, a) => 1 + a.node_count(),
            Expr::Binary(_, a, b) => 1 + a.node_count() + b.node_count(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) | Expr::Undefined(_) => 1,
            Expr::Neg(a) | Expr::Call(_, a) => 1 + a.depth(),
            Expr::Binary(_, a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    /// Replace every occurrence of `v` by `with`.
    pub fn substitute(&self, v: Var, with: &Expr) -> Expr {
        match self {
            Expr::Var(w) if *w == v => with.clone(),
            Expr::Const(_) | Expr::Var(_) | Expr::Undefined(_) => self.clone(),
            Expr::Neg(a) => Expr::neg(a.substitute(v, with)),
            Expr::Call(f, a) => Expr::call(*f, a.substitute(v, with)),
            Expr::Binary(op, a, b) => Expr::binary(*op, a.substitute(v, with), b.substitute(v, with)),
        }
    }

    pub fn evaluate(&self, p: Point) -> Result<f64> {
        self.eval_xy(p.x, p.y)
    }

    pub fn eval_xy(&self, x: f64, y: f64) -> Result<f64> {
        match self {
            Expr::Const(c) => Ok(*c),
            Expr::Var(Var::X) => Ok(x),
            Expr::Var(Var::Y) => Ok(y),
            Expr::Neg(a) => Ok(-a.eval_xy(x, y)?),
            Expr::Binary(op, a, b) => {
                let u = a.eval_xy(x, y)?;
                let w = b.eval_xy(x, y)?;
                apply_binary(*op, u, w).map_err(|reason| self.domain(reason))
            }
            Expr::Call(f, a) => {
                let u = a.eval_xy(x, y)?;
                apply_call(*f, u).map_err(|reason| self.domain(reason))
            }
            Expr::Undefined(reason) => Err(self.domain(reason)),
        }
    }

    fn domain(&self, reason: impl Into<String>) -> Error {
        Error::Domain {
            subtree: self.to_string(),
            reason: reason.into(),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Const(c) if c.is_sign_negative() => 3,
            Expr::Binary(BinOp::Pow, ..) => 4,
            _ => 5,
        }
    }
}

pub(crate) fn apply_binary(op: BinOp, u: f64, w: f64) -> std::result::Result<f64, &'static str> {
    match op {
        BinOp::Add => Ok(u + w),
        BinOp::Sub => Ok(u - w),
        BinOp::Mul => Ok(u * w),
        BinOp::Div => {
            if w == 0.0 {
                Err("division by zero")
            } else {
                Ok(u / w)
            }
        }
        BinOp::Pow => power(u, w),
    }
}

fn power(base: f64, exponent: f64) -> std::result::Result<f64, &'static str> {
    if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
        if base == 0.0 && exponent < 0.0 {
            return Err("zero raised to a negative power");
        }
        return Ok(base.powi(exponent as i32));
    }
    if base > 0.0 {
        Ok(base.powf(exponent))
    } else if base == 0.0 && exponent > 0.0 {
        Ok(0.0)
    } else {
        Err("non-integer power of a non-positive base")
    }
}

pub(crate) fn apply_call(f: Func, u: f64) -> std::result::Result<f64, &'static str> {
    match f {
        Func::Sin => Ok(u.sin()),
        Func::Cos => Ok(u.cos()),
        Func::Tan => Ok(u.tan()),
        Func::Exp => Ok(u.exp()),
        Func::Ln => {
            if u > 0.0 {
                Ok(u.ln())
            } else {
                Err("logarithm of a non-positive number")
            }
        }
        Func::Sqrt => {
            if u >= 0.0 {
                Ok(u.sqrt())
            } else {
                Err("square root of a negative number")
            }
        }
        Func::Tanh => Ok(u.tanh()),
        Func::Abs => Ok(u.abs()),
    }
}

fn write_const(f: &mut fmt::Formatter<'_>, c: f64) -> fmt::Result {
    if c.fract() == 0.0 && c.abs() < 1e15 {
        write!(f, "{}", c)
    } else {
        write!(f, "{:?}", c)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write_const(f, *c),
            Expr::Var(Var::X) => f.write_str("x"),
            Expr::Var(Var::Y) => f.write_str("y"),
            Expr::Undefined(_) => f.write_str("undefined"),
            Expr::Neg(a) => {
                if a.precedence() < 3 {
                    write!(f, "-({})", a)
                } else {
                    write!(f, "-{}", a)
                }
            }
            Expr::Call(func, a) => write!(f, "{}({})", func.name(), a),
            Expr::Binary(op, a, b) => {
                let prec = self.precedence();
                let (sym, left_paren, right_paren) = match op {
                    BinOp::Pow => ("^", a.precedence() <= prec, b.precedence() < prec),
                    BinOp::Add => ("+", a.precedence() < prec, b.precedence() <= prec),
                    BinOp::Sub => ("-", a.precedence() < prec, b.precedence() <= prec),
                    BinOp::Mul => ("*", a.precedence() < prec, b.precedence() <= prec),
                    BinOp::Div => ("/", a.precedence() < prec, b.precedence() <= prec),
                };
                if left_paren {
                    write!(f, "({})", a)?;
                } else {
                    write!(f, "{}", a)?;
                }
                f.write_str(sym)?;
                if right_paren {
                    write!(f, "({})", b)
                } else {
                    write!(f, "{}", b)
                }
            }
        }
    }
}
