//! Scalar and vector field evaluators.
//!
//! A [`ScalarField`] gives value, gradient and Hessian at a point; a
//! [`VectorField`] gives its two components and their Jacobian. Both carry a
//! [`Provenance`] so that downstream checks can widen tolerances for fields
//! whose derivatives come from finite differences.

mod system;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use system::{builtin_system, list_builtins, BuiltinInfo, Separable, SystemDef};

use crate::error::{Error, Result};
use crate::expr::{differentiate, fold, Expr, Var};

/// Phase-plane point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Point {
        Point { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn offset(self, d: Vec2, s: f64) -> Point {
        Point::new(self.x + s * d[0], self.y + s * d[1])
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl From<[f64; 2]> for Point {
    fn from(v: [f64; 2]) -> Point {
        Point::new(v[0], v[1])
    }
}

pub type Vec2 = [f64; 2];

pub fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub fn norm2(a: Vec2) -> f64 {
    dot(a, a)
}

/// Symmetric Hessian `(H_xx, H_xy, H_yy)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Hessian {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Hessian {
    pub fn apply(&self, v: Vec2) -> Vec2 {
        [self.xx * v[0] + self.xy * v[1], self.xy * v[0] + self.yy * v[1]]
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }
}

/// Jacobian of a planar field `(P, Q)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jacobian {
    pub px: f64,
    pub py: f64,
    pub qx: f64,
    pub qy: f64,
}

impl Jacobian {
    /// `J v`, the directional derivative of the field along `v`.
    pub fn apply(&self, v: Vec2) -> Vec2 {
        [self.px * v[0] + self.py * v[1], self.qx * v[0] + self.qy * v[1]]
    }

    pub fn trace(&self) -> f64 {
        self.px + self.qy
    }

    pub fn scale(&self, s: f64) -> Jacobian {
        Jacobian {
            px: s * self.px,
            py: s * self.py,
            qx: s * self.qx,
            qy: s * self.qy,
        }
    }

    pub fn plus(&self, o: &Jacobian) -> Jacobian {
        Jacobian {
            px: self.px + o.px,
            py: self.py + o.py,
            qx: self.qx + o.qx,
            qy: self.qy + o.qy,
        }
    }

    /// Outer product `a ⊗ b`, the Jacobian of `s(z) a` when `b = ∇s` and `a` is fixed.
    pub fn outer(a: Vec2, b: Vec2) -> Jacobian {
        Jacobian {
            px: a[0] * b[0],
            py: a[0] * b[1],
            qx: a[1] * b[0],
            qy: a[1] * b[1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Symbolic,
    FiniteDifference,
}

impl Provenance {
    pub fn join(self, other: Provenance) -> Provenance {
        if self == Provenance::Symbolic && other == Provenance::Symbolic {
            Provenance::Symbolic
        } else {
            Provenance::FiniteDifference
        }
    }
}

type Eval<T> = Arc<dyn Fn(Point) -> Result<T> + Send + Sync>;

/// Scalar field with first and second derivatives.
#[derive(Clone)]
pub struct ScalarField {
    value: Eval<f64>,
    gradient: Eval<Vec2>,
    hessian: Eval<Hessian>,
    provenance: Provenance,
    expr: Option<Expr>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("provenance", &self.provenance)
            .field("expr", &self.expr.as_ref().map(|e| e.to_string()))
            .finish()
    }
}

impl ScalarField {
    /// Gradient and Hessian by symbolic differentiation.
    pub fn from_expr(e: &Expr) -> Result<ScalarField> {
        let f = fold(e);
        let fx = differentiate(&f, Var::X)?;
        let fy = differentiate(&f, Var::Y)?;
        let fxx = differentiate(&fx, Var::X)?;
        let fxy = differentiate(&fx, Var::Y)?;
        let fyy = differentiate(&fy, Var::Y)?;
        let value = f.clone();
        Ok(ScalarField {
            value: Arc::new(move |p| value.evaluate(p)),
            gradient: Arc::new(move |p| Ok([fx.evaluate(p)?, fy.evaluate(p)?])),
            hessian: Arc::new(move |p| {
                Ok(Hessian {
                    xx: fxx.evaluate(p)?,
                    xy: fxy.evaluate(p)?,
                    yy: fyy.evaluate(p)?,
                })
            }),
            provenance: Provenance::Symbolic,
            expr: Some(f),
        })
    }

    pub fn parse(text: &str) -> Result<ScalarField> {
        ScalarField::from_expr(&crate::expr::parse(text)?)
    }

    pub fn constant(c: f64) -> ScalarField {
        ScalarField {
            value: Arc::new(move |_| Ok(c)),
            gradient: Arc::new(|_| Ok([0.0, 0.0])),
            hessian: Arc::new(|_| Ok(Hessian::default())),
            provenance: Provenance::Symbolic,
            expr: Some(Expr::Const(c)),
        }
    }

    /// Lift a plain function by central differences: gradient with step
    /// `1e-6·max(1,|coord|)`, Hessian with step `1e-4·max(1,|coord|)`.
    pub fn finite_difference<F>(f: F) -> ScalarField
    where
        F: Fn(Point) -> Result<f64> + Send + Sync + 'static,
    {
        let f: Eval<f64> = Arc::new(f);
        let (fg, fh) = (f.clone(), f.clone());
        ScalarField {
            value: f,
            gradient: Arc::new(move |p| {
                let hx = 1e-6 * p.x.abs().max(1.0);
                let hy = 1e-6 * p.y.abs().max(1.0);
                let gx = (fg(Point::new(p.x + hx, p.y))? - fg(Point::new(p.x - hx, p.y))?) / (2.0 * hx);
                let gy = (fg(Point::new(p.x, p.y + hy))? - fg(Point::new(p.x, p.y - hy))?) / (2.0 * hy);
                Ok([gx, gy])
            }),
            hessian: Arc::new(move |p| {
                let hx = 1e-4 * p.x.abs().max(1.0);
                let hy = 1e-4 * p.y.abs().max(1.0);
                let f0 = fh(p)?;
                let at = |dx: f64, dy: f64| fh(Point::new(p.x + dx, p.y + dy));
                let xx = (at(hx, 0.0)? - 2.0 * f0 + at(-hx, 0.0)?) / (hx * hx);
                let yy = (at(0.0, hy)? - 2.0 * f0 + at(0.0, -hy)?) / (hy * hy);
                let xy = (at(hx, hy)? - at(hx, -hy)? - at(-hx, hy)? + at(-hx, -hy)?) / (4.0 * hx * hy);
                Ok(Hessian { xx, xy, yy })
            }),
            provenance: Provenance::FiniteDifference,
            expr: None,
        }
    }

    pub fn value(&self, p: Point) -> Result<f64> {
        (self.value)(p)
    }

    pub fn gradient(&self, p: Point) -> Result<Vec2> {
        (self.gradient)(p)
    }

    pub fn hessian(&self, p: Point) -> Result<Hessian> {
        (self.hessian)(p)
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn expr(&self) -> Option<&Expr> {
        self.expr.as_ref()
    }

    /// `∂_v f = ∇f · v`.
    pub fn derivative_along(&self, p: Point, v: Vec2) -> Result<f64> {
        Ok(dot(self.gradient(p)?, v))
    }
}

/// Planar vector field `(P, Q)` with Jacobian.
#[derive(Clone)]
pub struct VectorField {
    value: Eval<Vec2>,
    jacobian: Eval<Jacobian>,
    provenance: Provenance,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField").field("provenance", &self.provenance).finish()
    }
}

impl VectorField {
    pub fn new<V, J>(provenance: Provenance, value: V, jacobian: J) -> VectorField
    where
        V: Fn(Point) -> Result<Vec2> + Send + Sync + 'static,
        J: Fn(Point) -> Result<Jacobian> + Send + Sync + 'static,
    {
        VectorField {
            value: Arc::new(value),
            jacobian: Arc::new(jacobian),
            provenance,
        }
    }

    pub fn from_exprs(p: &Expr, q: &Expr) -> Result<VectorField> {
        let (p, q) = (fold(p), fold(q));
        let px = differentiate(&p, Var::X)?;
        let py = differentiate(&p, Var::Y)?;
        let qx = differentiate(&q, Var::X)?;
        let qy = differentiate(&q, Var::Y)?;
        Ok(VectorField::new(
            Provenance::Symbolic,
            move |z| Ok([p.evaluate(z)?, q.evaluate(z)?]),
            move |z| {
                Ok(Jacobian {
                    px: px.evaluate(z)?,
                    py: py.evaluate(z)?,
                    qx: qx.evaluate(z)?,
                    qy: qy.evaluate(z)?,
                })
            },
        ))
    }

    pub fn parse(p: &str, q: &str) -> Result<VectorField> {
        VectorField::from_exprs(&crate::expr::parse(p)?, &crate::expr::parse(q)?)
    }

    /// Jacobian by central differences with step `1e-6·max(1,|coord|)`.
    pub fn finite_difference<V>(value: V) -> VectorField
    where
        V: Fn(Point) -> Result<Vec2> + Send + Sync + 'static,
    {
        let value: Eval<Vec2> = Arc::new(value);
        let inner = value.clone();
        VectorField {
            value,
            jacobian: Arc::new(move |p| {
                let hx = 1e-6 * p.x.abs().max(1.0);
                let hy = 1e-6 * p.y.abs().max(1.0);
                let xp = inner(Point::new(p.x + hx, p.y))?;
                let xm = inner(Point::new(p.x - hx, p.y))?;
                let yp = inner(Point::new(p.x, p.y + hy))?;
                let ym = inner(Point::new(p.x, p.y - hy))?;
                Ok(Jacobian {
                    px: (xp[0] - xm[0]) / (2.0 * hx),
                    py: (yp[0] - ym[0]) / (2.0 * hy),
                    qx: (xp[1] - xm[1]) / (2.0 * hx),
                    qy: (yp[1] - ym[1]) / (2.0 * hy),
                })
            }),
            provenance: Provenance::FiniteDifference,
        }
    }

    pub fn value(&self, p: Point) -> Result<Vec2> {
        (self.value)(p)
    }

    pub fn jacobian(&self, p: Point) -> Result<Jacobian> {
        (self.jacobian)(p)
    }

    pub fn divergence(&self, p: Point) -> Result<f64> {
        Ok(self.jacobian(p)?.trace())
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// The rotated field `V⊥ = (-Q, P)`.
    pub fn perpendicular(&self) -> VectorField {
        let (v, j) = (self.clone(), self.clone());
        VectorField::new(
            self.provenance,
            move |p| {
                let [a, b] = v.value(p)?;
                Ok([-b, a])
            },
            move |p| {
                let m = j.jacobian(p)?;
                Ok(Jacobian {
                    px: -m.qx,
                    py: -m.qy,
                    qx: m.px,
                    qy: m.py,
                })
            },
        )
    }
}

/// `x' = H_y, y' = -H_x`.
pub fn hamiltonian_field(h: &ScalarField) -> VectorField {
    let (hv, hj) = (h.clone(), h.clone());
    VectorField::new(
        h.provenance(),
        move |p| {
            let [hx, hy] = hv.gradient(p)?;
            Ok([hy, -hx])
        },
        move |p| {
            let m = hj.hessian(p)?;
            Ok(Jacobian {
                px: m.xy,
                py: m.yy,
                qx: -m.xx,
                qy: -m.xy,
            })
        },
    )
}

fn positive_kappa(kappa: &ScalarField, p: Point) -> Result<f64> {
    let k = kappa.value(p)?;
    if k > 0.0 {
        Ok(k)
    } else {
        Err(Error::NonPositiveKappa { value: k, point: p })
    }
}

/// `x' = κ H_y, y' = -κ H_x`; `κ` is then a reciprocal integrating factor.
pub fn reparametrized_field(h: &ScalarField, kappa: &ScalarField) -> VectorField {
    let (hv, kv) = (h.clone(), kappa.clone());
    let (hj, kj) = (h.clone(), kappa.clone());
    VectorField::new(
        h.provenance().join(kappa.provenance()),
        move |p| {
            let k = positive_kappa(&kv, p)?;
            let [hx, hy] = hv.gradient(p)?;
            Ok([k * hy, -k * hx])
        },
        move |p| {
            let k = positive_kappa(&kj, p)?;
            let [kx, ky] = kj.gradient(p)?;
            let [hx, hy] = hj.gradient(p)?;
            let m = hj.hessian(p)?;
            Ok(Jacobian {
                px: kx * hy + k * m.xy,
                py: ky * hy + k * m.yy,
                qx: -kx * hx - k * m.xx,
                qy: -ky * hx - k * m.xy,
            })
        },
    )
}
