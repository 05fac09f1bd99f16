//! Recursive-descent parser.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := atom ('^' unary)?
//! atom    := number | ident | ident '(' sum ')' | '(' sum ')'
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-x^2`
//! reads as `-(x^2)` while `2^-x` is still accepted.

use super::{BinOp, Expr, Func, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {}", v),
            Tok::Ident(s) => format!("identifier `{}`", s),
            Tok::Op(c) => format!("`{}`", c),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(Tok, usize)>> {
        let mut lx = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        loop {
            let (tok, at) = lx.next()?;
            let done = tok == Tok::End;
            out.push((tok, at));
            if done {
                return Ok(out);
            }
        }
    }

    fn peek_byte(&self, ahead: usize) -> Option<u8> {
        self.src.as_bytes().get(self.pos + ahead).copied()
    }

    fn next(&mut self) -> Result<(Tok, usize)> {
        while let Some(b) = self.peek_byte(0) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
        let start = self.pos;
        let Some(b) = self.peek_byte(0) else {
            return Ok((Tok::End, start));
        };
        let tok = match b {
            b'0'..=b'9' | b'.' => return self.number(),
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                while let Some(c) = self.peek_byte(0) {
                    if c.is_ascii_alphanumeric() || c == b'_' {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                return Ok((Tok::Ident(self.src[start..self.pos].to_string()), start));
            }
            b'+' | b'-' | b'*' | b'/' | b'^' => Tok::Op(b as char),
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            _ => {
                let found = self.src[start..].chars().next().unwrap_or('?');
                return Err(Error::Syntax {
                    offset: start,
                    expected: vec!["number".into(), "identifier".into(), "operator".into(), "parenthesis".into()],
                    found: format!("`{}`", found),
                });
            }
        };
        self.pos += 1;
        Ok((tok, start))
    }

    fn number(&mut self) -> Result<(Tok, usize)> {
        let start = self.pos;
        let digits = |lx: &mut Self| {
            let from = lx.pos;
            while matches!(lx.peek_byte(0), Some(b'0'..=b'9')) {
                lx.pos += 1;
            }
            lx.pos - from
        };
        let mut mantissa = digits(self);
        if self.peek_byte(0) == Some(b'.') {
            self.pos += 1;
            mantissa += digits(self);
        }
        if mantissa == 0 {
            return Err(Error::Syntax {
                offset: start,
                expected: vec!["digit".into()],
                found: "`.`".into(),
            });
        }
        if matches!(self.peek_byte(0), Some(b'e' | b'E')) {
            let sign = usize::from(matches!(self.peek_byte(1), Some(b'+' | b'-')));
            if matches!(self.peek_byte(1 + sign), Some(b'0'..=b'9')) {
                self.pos += 1 + sign;
                digits(self);
            }
        }
        let text = &self.src[start..self.pos];
        let value: f64 = text.parse().map_err(|_| Error::Syntax {
            offset: start,
            expected: vec!["number".into()],
            found: format!("`{}`", text),
        })?;
        Ok((Tok::Num(value), start))
    }
}

struct Parser<'b> {
    toks: Vec<(Tok, usize)>,
    at: usize,
    bindings: &'b [(&'b str, Expr)],
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn offset(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn fail<T>(&self, expected: &[&str]) -> Result<T> {
        Err(Error::Syntax {
            offset: self.offset(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().describe(),
        })
    }

    fn sum(&mut self) -> Result<Expr> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::binary(op, lhs, self.product()?);
        }
    }

    fn product(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::binary(op, lhs, self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Tok::Op('-') => {
                self.bump();
                Ok(Expr::neg(self.unary()?))
            }
            Tok::Op('+') => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() == &Tok::Op('^') {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Expr::pow(base, exponent));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let offset = self.offset();
        if !matches!(self.peek(), Tok::Num(_) | Tok::LParen | Tok::Ident(_)) {
            return self.fail(&["number", "identifier", "`(`", "`-`"]);
        }
        match self.bump() {
            Tok::Num(v) => Ok(Expr::Const(v)),
            Tok::LParen => {
                let inner = self.sum()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Tok::Ident(name) => self.identifier(name, offset),
            _ => unreachable!(),
        }
    }

    fn identifier(&mut self, name: String, offset: usize) -> Result<Expr> {
        if let Some(f) = Func::from_name(&name) {
            if self.peek() != &Tok::LParen {
                return self.fail(&["`(`"]);
            }
            self.bump();
            let arg = self.sum()?;
            self.expect_rparen()?;
            return Ok(Expr::call(f, arg));
        }
        if let Some((_, e)) = self.bindings.iter().find(|(n, _)| *n == name) {
            return Ok(e.clone());
        }
        match name.as_str() {
            "x" => Ok(Expr::Var(Var::X)),
            "y" => Ok(Expr::Var(Var::Y)),
            "pi" => Ok(Expr::Const(std::f64::consts::PI)),
            "e" => Ok(Expr::Const(std::f64::consts::E)),
            _ => Err(Error::UnknownIdentifier { name, offset }),
        }
    }

    fn expect_rparen(&mut self) -> Result<()> {
        if self.peek() == &Tok::RParen {
            self.bump();
            Ok(())
        } else {
            self.fail(&["`)`", "operator"])
        }
    }
}

/// Parse an expression in `x` and `y`. The constants `pi` and `e` are
/// predefined.
pub fn parse(text: &str) -> Result<Expr> {
    parse_with(text, &[])
}

/// Parse with extra named sub-expressions. Each binding is substituted as a
/// whole subtree wherever its name appears, so `("u", x^2+y^2)` lets the
/// caller write `2+sin(u)`. Bindings shadow `x`, `y`, `pi` and `e`.
pub fn parse_with(text: &str, bindings: &[(&str, Expr)]) -> Result<Expr> {
    let toks = Lexer::tokens(text)?;
    if toks.len() == 1 {
        return Err(Error::Syntax {
            offset: 0,
            expected: vec!["expression".into()],
            found: "end of input".into(),
        });
    }
    let mut p = Parser { toks, at: 0, bindings };
    let e = p.sum()?;
    if p.peek() != &Tok::End {
        return p.fail(&["operator", "end of input"]);
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Point;

    #[test]
    fn precedence_of_sum_of_powers() {
        let e = parse("x^2+y^2").unwrap();
        let want = Expr::add(
            Expr::pow(Expr::x(), Expr::Const(2.0)),
            Expr::pow(Expr::y(), Expr::Const(2.0)),
        );
        assert_eq!(e, want);
    }

    #[test]
    fn unary_minus_is_looser_than_pow() {
        let e = parse("-x^2").unwrap();
        assert_eq!(e, Expr::neg(Expr::pow(Expr::x(), Expr::Const(2.0))));
        assert_eq!(e.evaluate(Point::new(2.0, 0.0)).unwrap(), -4.0);
    }

    #[test]
    fn scientific_literal_and_call() {
        let e = parse("sin(x*y) + 1e-3").unwrap();
        let want = Expr::add(Expr::call(Func::Sin, Expr::mul(Expr::x(), Expr::y())), Expr::Const(0.001));
        assert_eq!(e, want);
    }

    #[test]
    fn pow_is_right_associative() {
        let e = parse("2^3^2").unwrap();
        assert_eq!(e.evaluate(Point::new(0.0, 0.0)).unwrap(), 512.0);
        let e = parse("2^-1").unwrap();
        assert_eq!(e.evaluate(Point::new(0.0, 0.0)).unwrap(), 0.5);
    }

    #[test]
    fn whitespace_is_ignored() {
        assert_eq!(parse(" x *  ( y+1 ) ").unwrap(), parse("x*(y+1)").unwrap());
    }

    #[test]
    fn syntax_error_reports_offset_and_expectations() {
        match parse("x + * y") {
            Err(Error::Syntax { offset, expected, .. }) => {
                assert_eq!(offset, 4);
                assert!(expected.iter().any(|e| e == "number"));
            }
            other => panic!("{:?}", other),
        }
        match parse("(x + y") {
            Err(Error::Syntax { offset, expected, .. }) => {
                assert_eq!(offset, 6);
                assert!(expected.iter().any(|e| e == "`)`"));
            }
            other => panic!("{:?}", other),
        }
        assert!(matches!(parse("sin x"), Err(Error::Syntax { offset: 4, .. })));
        assert!(matches!(parse("x y"), Err(Error::Syntax { offset: 2, .. })));
        assert!(matches!(parse("   "), Err(Error::Syntax { .. })));
        assert!(matches!(parse("x # 2"), Err(Error::Syntax { offset: 2, .. })));
    }

    #[test]
    fn unknown_identifier() {
        match parse("x + z") {
            Err(Error::UnknownIdentifier { name, offset }) => {
                assert_eq!(name, "z");
                assert_eq!(offset, 4);
            }
            other => panic!("{:?}", other),
        }
    }

    #[test]
    fn bindings_substitute_subtrees() {
        let u = parse("x^2+y^2").unwrap();
        let e = parse_with("2+sin(u)", &[("u", u)]).unwrap();
        let v = e.evaluate(Point::new(1.0, 1.0)).unwrap();
        assert!((v - (2.0 + 2f64.sin())).abs() < 1e-15);
    }

    #[test]
    fn exponent_needs_digits() {
        // `2e` is a number followed by the identifier `e`, which is not a valid continuation.
        assert!(matches!(parse("2e"), Err(Error::Syntax { offset: 1, .. })));
        assert_eq!(parse("2.5E+2").unwrap(), Expr::Const(250.0));
        assert_eq!(parse(".5").unwrap(), Expr::Const(0.5));
    }
}
