use super::{apply_binary, apply_call, BinOp, Expr, Func, Var};
use crate::error::{Error, Result};

/// Exact symbolic derivative with respect to `v`, constant-folded.
///
/// `abs` is rejected: the fields analysed here are required to be C².
pub fn differentiate(e: &Expr, v: Var) -> Result<Expr> {
    Ok(fold(&derive(e, v)?))
}

fn derive(e: &Expr, v: Var) -> Result<Expr> {
    let d = match e {
        Expr::Const(_) => Expr::Const(0.0),
        Expr::Var(w) => Expr::Const(if *w == v { 1.0 } else { 0.0 }),
        Expr::Undefined(_) => e.clone(),
        Expr::Neg(a) => Expr::neg(derive(a, v)?),
        Expr::Binary(op, a, b) => {
            let (a, b) = (a.as_ref(), b.as_ref());
            match op {
                BinOp::Add => Expr::add(derive(a, v)?, derive(b, v)?),
                BinOp::Sub => Expr::sub(derive(a, v)?, derive(b, v)?),
                BinOp::Mul => Expr::add(
                    Expr::mul(derive(a, v)?, b.clone()),
                    Expr::mul(a.clone(), derive(b, v)?),
                ),
                BinOp::Div => Expr::div(
                    Expr::sub(
                        Expr::mul(derive(a, v)?, b.clone()),
                        Expr::mul(a.clone(), derive(b, v)?),
                    ),
                    Expr::pow(b.clone(), Expr::Const(2.0)),
                ),
                BinOp::Pow => derive_pow(a, b, v)?,
            }
        }
        Expr::Call(f, a) => {
            let inner = derive(a, v)?;
            let a = a.as_ref().clone();
            let outer = match f {
                Func::Sin => Expr::call(Func::Cos, a),
                Func::Cos => Expr::neg(Expr::call(Func::Sin, a)),
                Func::Tan => Expr::div(
                    Expr::Const(1.0),
                    Expr::pow(Expr::call(Func::Cos, a), Expr::Const(2.0)),
                ),
                Func::Exp => Expr::call(Func::Exp, a),
                Func::Ln => Expr::div(Expr::Const(1.0), a),
                Func::Sqrt => Expr::div(
                    Expr::Const(1.0),
                    Expr::mul(Expr::Const(2.0), Expr::call(Func::Sqrt, a)),
                ),
                Func::Tanh => Expr::sub(
                    Expr::Const(1.0),
                    Expr::pow(Expr::call(Func::Tanh, a), Expr::Const(2.0)),
                ),
                Func::Abs => {
                    return Err(Error::NonDifferentiable {
                        subtree: e.to_string(),
                    })
                }
            };
            Expr::mul(outer, inner)
        }
    };
    Ok(d)
}

fn derive_pow(base: &Expr, exponent: &Expr, v: Var) -> Result<Expr> {
    let pow = Expr::pow(base.clone(), exponent.clone());
    if exponent.is_closed() {
        // c * u^(c-1) * u'
        let reduced = Expr::pow(base.clone(), Expr::sub(exponent.clone(), Expr::Const(1.0)));
        return Ok(Expr::mul(Expr::mul(exponent.clone(), reduced), derive(base, v)?));
    }
    let ln_base = Expr::call(Func::Ln, base.clone());
    if base.is_closed() {
        return Ok(Expr::mul(Expr::mul(pow, ln_base), derive(exponent, v)?));
    }
    // u^w * (w' ln u + w u'/u)
    let log_derivative = Expr::add(
        Expr::mul(derive(exponent, v)?, ln_base),
        Expr::div(Expr::mul(exponent.clone(), derive(base, v)?), base.clone()),
    );
    Ok(Expr::mul(pow, log_derivative))
}

fn undefined(op_desc: String, reason: &str) -> Expr {
    Expr::Undefined(format!("{}: {}", op_desc, reason))
}

/// Collapse constant subtrees and apply the 0/1 identities
/// `e+0`, `e-0`, `0-e`, `e*1`, `e*0`, `e/1`, `e^1`, `e^0`.
///
/// A constant subtree without a real value (`1/0`, `ln(-1)`) becomes
/// [`Expr::Undefined`], which fails at evaluation time.
pub fn fold(e: &Expr) -> Expr {
    match e {
        Expr::Const(_) | Expr::Var(_) | Expr::Undefined(_) => e.clone(),
        Expr::Neg(a) => match fold(a) {
            Expr::Const(c) => Expr::Const(-c),
            Expr::Neg(inner) => *inner,
            u @ Expr::Undefined(_) => u,
            other => Expr::neg(other),
        },
        Expr::Call(f, a) => match fold(a) {
            Expr::Const(c) => match apply_call(*f, c) {
                Ok(v) if v.is_finite() => Expr::Const(v),
                Ok(_) => undefined(format!("{}({})", f.name(), c), "non-finite result"),
                Err(reason) => undefined(format!("{}({})", f.name(), c), reason),
            },
            u @ Expr::Undefined(_) => u,
            other => Expr::call(*f, other),
        },
        Expr::Binary(op, a, b) => fold_binary(*op, fold(a), fold(b)),
    }
}

fn fold_binary(op: BinOp, a: Expr, b: Expr) -> Expr {
    if let Expr::Undefined(_) = a {
        return a;
    }
    if let Expr::Undefined(_) = b {
        return b;
    }
    if let (Some(u), Some(w)) = (a.as_const(), b.as_const()) {
        let desc = Expr::binary(op, a.clone(), b.clone()).to_string();
        return match apply_binary(op, u, w) {
            Ok(v) if v.is_finite() => Expr::Const(v),
            Ok(_) => undefined(desc, "non-finite result"),
            Err(reason) => undefined(desc, reason),
        };
    }
    let ca = a.as_const();
    let cb = b.as_const();
    match op {
        BinOp::Add if ca == Some(0.0) => b,
        BinOp::Add if cb == Some(0.0) => a,
        BinOp::Sub if cb == Some(0.0) => a,
        BinOp::Sub if ca == Some(0.0) => fold(&Expr::neg(b)),
        BinOp::Mul if ca == Some(0.0) || cb == Some(0.0) => Expr::Const(0.0),
        BinOp::Mul if ca == Some(1.0) => b,
        BinOp::Mul if cb == Some(1.0) => a,
        BinOp::Div if cb == Some(1.0) => a,
        BinOp::Pow if cb == Some(1.0) => a,
        BinOp::Pow if cb == Some(0.0) => Expr::Const(1.0),
        _ => Expr::binary(op, a, b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::fields::Point;

    #[test]
    fn power_rule() {
        let d = differentiate(&parse("x^2").unwrap(), Var::X).unwrap();
        assert_eq!(d.to_string(), "2*x");
    }

    #[test]
    fn independent_variable_gives_zero() {
        let d = differentiate(&parse("y").unwrap(), Var::X).unwrap();
        assert_eq!(d, Expr::Const(0.0));
    }

    #[test]
    fn chain_rule_matches_central_difference() {
        let e = parse("sin(x*y)").unwrap();
        let d = differentiate(&e, Var::X).unwrap();
        let got = d.evaluate(Point::new(1.0, 2.0)).unwrap();
        let h = 1e-6;
        let fd = (e.eval_xy(1.0 + h, 2.0).unwrap() - e.eval_xy(1.0 - h, 2.0).unwrap()) / (2.0 * h);
        assert!((got - fd).abs() < 1e-8);
        assert!((got - (-0.8323)).abs() < 1e-4);
    }

    #[test]
    fn abs_is_rejected() {
        let e = parse("1 + abs(x)").unwrap();
        assert!(matches!(differentiate(&e, Var::X), Err(Error::NonDifferentiable { .. })));
        // still evaluable
        assert_eq!(e.eval_xy(-3.0, 0.0).unwrap(), 4.0);
    }

    #[test]
    fn fold_identities() {
        assert_eq!(fold(&parse("x*1 + 0*y").unwrap()).to_string(), "x");
        assert_eq!(fold(&parse("2*3 + x").unwrap()).to_string(), "6+x");
        assert_eq!(fold(&parse("x^1 - 0").unwrap()), Expr::x());
        assert_eq!(fold(&parse("(x+y)^0").unwrap()), Expr::Const(1.0));
        assert_eq!(fold(&parse("0 - x").unwrap()), Expr::neg(Expr::x()));
    }

    #[test]
    fn folded_gradient_of_circle_is_small() {
        let d = differentiate(&parse("x^2+y^2").unwrap(), Var::X).unwrap();
        assert_eq!(d.to_string(), "2*x");
        assert!(d.node_count() <= 3);
    }

    #[test]
    fn constant_division_by_zero_folds_to_marker() {
        let e = fold(&parse("x + 1/0").unwrap());
        assert!(matches!(e, Expr::Undefined(_)));
        assert!(matches!(e.eval_xy(0.0, 0.0), Err(Error::Domain { .. })));
        let e = fold(&parse("x * ln(0-1)").unwrap());
        assert!(e.eval_xy(1.0, 0.0).is_err());
    }

    #[test]
    fn variable_exponent() {
        let e = parse("x^y").unwrap();
        let dx = differentiate(&e, Var::X).unwrap();
        let dy = differentiate(&e, Var::Y).unwrap();
        let (x, y) = (1.7_f64, 0.6_f64);
        assert!((dx.eval_xy(x, y).unwrap() - y * x.powf(y - 1.0)).abs() < 1e-14);
        assert!((dy.eval_xy(x, y).unwrap() - x.powf(y) * x.ln()).abs() < 1e-14);
        let e = parse("2^x").unwrap();
        let dx = differentiate(&e, Var::X).unwrap();
        assert!((dx.eval_xy(3.0, 0.0).unwrap() - 8.0 * 2f64.ln()).abs() < 1e-14);
    }

    fn has_const_pair(e: &Expr) -> bool {
        match e {
            Expr::Binary(_, a, b) => (a.is_const() && b.is_const()) || has_const_pair(a) || has_const_pair(b),
            Expr::Neg(a) | Expr::Call(_, a) => has_const_pair(a),
            _ => false,
        }
    }

    #[test]
    fn folded_tree_has_no_constant_pairs() {
        for s in ["2*3*x + (4-1)^2*y", "sin(1)*cos(2) + x", "(1+2)/(3+4) - y*(2*2)"] {
            let f = fold(&parse(s).unwrap());
            assert!(!has_const_pair(&f), "{} -> {}", s, f);
        }
    }
}
