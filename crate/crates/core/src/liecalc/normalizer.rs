use std::fmt;
use std::sync::Arc;

use super::{
    mu_fgg, mu_hamiltonian, mu_kappa, nonzero_field, nonzero_gradient, reparametrize_mu,
    separable_derivatives, DEGENERACY_TOL,
};
use crate::error::{Construction, Error, Result};
use crate::expr::{differentiate, fold, parse_with, Expr, Var};
use crate::fields::{dot, norm2, Jacobian, Point, ScalarField, Separable, Vec2, VectorField};

/// Real function of one variable, written in terms of `h`.
#[derive(Clone, Debug)]
pub struct Univariate {
    f: Expr,
    df: Expr,
    text: String,
}

impl Univariate {
    pub fn parse(text: &str) -> Result<Univariate> {
        let f = parse_with(text, &[("h", Expr::x())])?;
        if f.contains_var(Var::Y) {
            return Err(Error::Invalid(format!("`{}` must depend on h only", text)));
        }
        let mut u = Univariate::from_expr(f)?;
        u.text = text.trim().to_string();
        Ok(u)
    }

    /// `e` is read as a function of `x`.
    pub fn from_expr(e: Expr) -> Result<Univariate> {
        let f = fold(&e);
        let df = differentiate(&f, Var::X)?;
        let text = format!("({})[h/x]", f);
        Ok(Univariate { f, df, text })
    }

    pub fn constant(c: f64) -> Univariate {
        Univariate {
            f: Expr::Const(c),
            df: Expr::Const(0.0),
            text: Expr::Const(c).to_string(),
        }
    }

    pub fn identity() -> Univariate {
        Univariate {
            f: Expr::x(),
            df: Expr::Const(1.0),
            text: "h".into(),
        }
    }

    pub fn eval(&self, h: f64) -> Result<f64> {
        self.f.eval_xy(h, 0.0)
    }

    pub fn derivative(&self, h: f64) -> Result<f64> {
        self.df.eval_xy(h, 0.0)
    }
}

impl fmt::Display for Univariate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

type PointFn<T> = Arc<dyn Fn(Point) -> Result<T> + Send + Sync>;
type Guard = Arc<dyn Fn(Point) -> bool + Send + Sync>;
type Rate = Arc<dyn Fn(f64) -> Result<f64> + Send + Sync>;

/// A transversal field `W` with `[V,W] = μV`, its `μ`, and the set where the
/// construction is defined.
#[derive(Clone)]
pub struct NormalizerField {
    pub w: VectorField,
    mu: PointFn<f64>,
    construction: Construction,
    guard: Guard,
    level_rate: Option<Rate>,
}

impl fmt::Debug for NormalizerField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NormalizerField")
            .field("construction", &self.construction)
            .field("w", &self.w)
            .finish()
    }
}

impl NormalizerField {
    pub fn construction(&self) -> Construction {
        self.construction
    }

    pub fn guard(&self, p: Point) -> bool {
        (self.guard)(p)
    }

    fn check(&self, p: Point) -> Result<()> {
        if self.guard(p) {
            Ok(())
        } else {
            Err(Error::Guard {
                construction: self.construction,
                point: p,
            })
        }
    }

    /// Normalizing function; fails outside the guard.
    pub fn mu(&self, p: Point) -> Result<f64> {
        self.check(p)?;
        (self.mu)(p)
    }

    pub fn w_at(&self, p: Point) -> Result<Vec2> {
        self.check(p)?;
        self.w.value(p)
    }

    /// `ξ(h)` such that `∂_W H = ξ(H)`, when the construction fixes it.
    pub fn level_rate(&self, h: f64) -> Option<Result<f64>> {
        self.level_rate.as_ref().map(|r| r(h))
    }

    /// The same `W` viewed as a normalizer of `κV`:
    /// `μ̄ = μ − ∂_W ln κ`.
    pub fn reparametrized(&self, kappa: &ScalarField) -> NormalizerField {
        let base = self.clone();
        let (w, k) = (self.w.clone(), kappa.clone());
        let guard_base = self.clone();
        let k_guard = kappa.clone();
        NormalizerField {
            w: self.w.clone(),
            mu: Arc::new(move |p| reparametrize_mu(base.mu(p)?, &w, &k, p)),
            construction: Construction::Reparametrized,
            guard: Arc::new(move |p| guard_base.guard(p) && k_guard.value(p).map_or(false, |v| v > 0.0)),
            level_rate: self.level_rate.clone(),
        }
    }
}

fn gradient_guard(h: &ScalarField) -> Guard {
    let h = h.clone();
    Arc::new(move |p| match h.gradient(p) {
        Ok(g) => nonzero_gradient(g, p).is_ok() && g[0].is_finite() && g[1].is_finite(),
        Err(_) => false,
    })
}

/// `W_H = ∇H/|∇H|²` and its Jacobian.
fn unit_rate_gradient(h: &ScalarField) -> VectorField {
    let (hv, hj) = (h.clone(), h.clone());
    VectorField::new(
        h.provenance(),
        move |p| {
            let g = nonzero_gradient(hv.gradient(p)?, p)?;
            let s = norm2(g);
            Ok([g[0] / s, g[1] / s])
        },
        move |p| {
            let g = nonzero_gradient(hj.gradient(p)?, p)?;
            let m = hj.hessian(p)?;
            let s = norm2(g);
            // ∂_j (g_i / s) = H_ij / s − 2 g_i (H g)_j / s²
            let hg = m.apply(g);
            Ok(Jacobian {
                px: m.xx / s - 2.0 * g[0] * hg[0] / (s * s),
                py: m.xy / s - 2.0 * g[0] * hg[1] / (s * s),
                qx: m.xy / s - 2.0 * g[1] * hg[0] / (s * s),
                qy: m.yy / s - 2.0 * g[1] * hg[1] / (s * s),
            })
        },
    )
}

/// Gradient normalizer `W_H = ∇H/|∇H|²` of the Hamiltonian field of `H`;
/// `∂_W H ≡ 1`.
pub fn normalizer_gradient(h: &ScalarField) -> NormalizerField {
    let hm = h.clone();
    NormalizerField {
        w: unit_rate_gradient(h),
        mu: Arc::new(move |p| mu_hamiltonian(&hm, p)),
        construction: Construction::Gradient,
        guard: gradient_guard(h),
        level_rate: Some(Arc::new(|_| Ok(1.0))),
    }
}

/// `W = ζ(H) ∇H/|∇H|²`, normalizer of the Hamiltonian field with
/// `∂_W H = ζ(H)` and `μ = ζ(H) μ_H`.
pub fn normalizer_zeta(h: &ScalarField, zeta: &Univariate) -> NormalizerField {
    let base = unit_rate_gradient(h);
    let (hv, hj, hm, hg) = (h.clone(), h.clone(), h.clone(), h.clone());
    let (zv, zj, zm, zg, zr) = (zeta.clone(), zeta.clone(), zeta.clone(), zeta.clone(), zeta.clone());
    let (bv, bj) = (base.clone(), base);
    let w = VectorField::new(
        h.provenance(),
        move |p| {
            let z = nonzero_zeta(&zv, hv.value(p)?, p)?;
            let b = bv.value(p)?;
            Ok([z * b[0], z * b[1]])
        },
        move |p| {
            let hval = hj.value(p)?;
            let z = nonzero_zeta(&zj, hval, p)?;
            let dz = zj.derivative(hval)?;
            let g = hj.gradient(p)?;
            let b = bj.value(p)?;
            Ok(bj
                .jacobian(p)?
                .scale(z)
                .plus(&Jacobian::outer(b, [dz * g[0], dz * g[1]])))
        },
    );
    let base_guard = gradient_guard(h);
    NormalizerField {
        w,
        mu: Arc::new(move |p| {
            let z = nonzero_zeta(&zm, hm.value(p)?, p)?;
            Ok(z * mu_hamiltonian(&hm, p)?)
        }),
        construction: Construction::Zeta,
        guard: Arc::new(move |p| {
            base_guard(p)
                && hg
                    .value(p)
                    .and_then(|hv| nonzero_zeta(&zg, hv, p))
                    .is_ok()
        }),
        level_rate: Some(Arc::new(move |lvl| zr.eval(lvl))),
    }
}

fn nonzero_zeta(zeta: &Univariate, h: f64, p: Point) -> Result<f64> {
    let z = zeta.eval(h)?;
    if z.abs() <= DEGENERACY_TOL {
        Err(Error::Degenerate {
            what: format!("zeta(H) at H = {}", h),
            point: p,
        })
    } else {
        Ok(z)
    }
}

/// RIF normalizer `W = κ(−Q, P)/(P² + Q²)` with `μ` from the closed form.
pub fn normalizer_kappa(v: &VectorField, kappa: &ScalarField) -> NormalizerField {
    let (vv, kv) = (v.clone(), kappa.clone());
    let (vj, kj) = (v.clone(), kappa.clone());
    let w = VectorField::new(
        v.provenance().join(kappa.provenance()),
        move |p| {
            let [a, b] = nonzero_field(vv.value(p)?, p)?;
            let k = kv.value(p)?;
            let s = a * a + b * b;
            Ok([-k * b / s, k * a / s])
        },
        move |p| {
            let [a, b] = nonzero_field(vj.value(p)?, p)?;
            let j = vj.jacobian(p)?;
            let k = kj.value(p)?;
            let [kx, ky] = kj.gradient(p)?;
            let s = a * a + b * b;
            let sx = 2.0 * (a * j.px + b * j.qx);
            let sy = 2.0 * (a * j.py + b * j.qy);
            // W = c (−Q, P) with c = κ/s
            let (c, cx, cy) = (k / s, kx / s - k * sx / (s * s), ky / s - k * sy / (s * s));
            Ok(Jacobian {
                px: cx * (-b) + c * (-j.qx),
                py: cy * (-b) + c * (-j.qy),
                qx: cx * a + c * j.px,
                qy: cy * a + c * j.py,
            })
        },
    );
    let (vm, km) = (v.clone(), kappa.clone());
    let (vg, kg) = (v.clone(), kappa.clone());
    NormalizerField {
        w,
        mu: Arc::new(move |p| mu_kappa(&vm, &km, p)),
        construction: Construction::Kappa,
        guard: Arc::new(move |p| {
            vg.value(p).map_or(false, |z| nonzero_field(z, p).is_ok())
                && kg.value(p).map_or(false, |k| k > 0.0)
        }),
        level_rate: Some(Arc::new(|_| Ok(1.0))),
    }
}

/// Separable normalizer `W = (G/G′, F/F′)` for `H = F(y) + G(x)`, defined
/// where `F′(y) G′(x) ≠ 0`; `∂_W H = H`.
pub fn normalizer_separable(sep: &Separable) -> NormalizerField {
    let provenance = sep.f.provenance().join(sep.g.provenance());
    let (sv, sj, sm, sg) = (sep.clone(), sep.clone(), sep.clone(), sep.clone());
    let w = VectorField::new(
        provenance,
        move |p| {
            let (f1, _, g1, _) = separable_derivatives(&sv, p)?;
            Ok([sv.g.value(p)? / g1, sv.f.value(p)? / f1])
        },
        move |p| {
            let (f1, f2, g1, g2) = separable_derivatives(&sj, p)?;
            let (f, g) = (sj.f.value(p)?, sj.g.value(p)?);
            Ok(Jacobian {
                px: 1.0 - g * g2 / (g1 * g1),
                py: 0.0,
                qx: 0.0,
                qy: 1.0 - f * f2 / (f1 * f1),
            })
        },
    );
    NormalizerField {
        w,
        mu: Arc::new(move |p| mu_fgg(&sm, p)),
        construction: Construction::Separable,
        guard: Arc::new(move |p| match separable_derivatives(&sg, p) {
            Ok((f1, _, g1, _)) => f1.abs() > DEGENERACY_TOL && g1.abs() > DEGENERACY_TOL,
            Err(_) => false,
        }),
        level_rate: Some(Arc::new(Ok)),
    }
}

/// `N* = ψ(H) N + g V` with `μ* = ψ(H) μ + ∂_V g`.
pub fn combine_normalizer(
    n: &NormalizerField,
    psi: &Univariate,
    g: &ScalarField,
    v: &VectorField,
    h: &ScalarField,
) -> NormalizerField {
    let provenance = n
        .w
        .provenance()
        .join(v.provenance())
        .join(g.provenance())
        .join(h.provenance());
    let parts = Arc::new((n.clone(), psi.clone(), g.clone(), v.clone(), h.clone()));
    let pv = parts.clone();
    let pj = parts.clone();
    let pm = parts.clone();
    let pg = parts.clone();
    let w = VectorField::new(
        provenance,
        move |p| {
            let (n, psi, g, v, h) = &*pv;
            let s = psi.eval(h.value(p)?)?;
            let (wv, vv, gv) = (n.w.value(p)?, v.value(p)?, g.value(p)?);
            Ok([s * wv[0] + gv * vv[0], s * wv[1] + gv * vv[1]])
        },
        move |p| {
            let (n, psi, g, v, h) = &*pj;
            let hv = h.value(p)?;
            let (s, ds) = (psi.eval(hv)?, psi.derivative(hv)?);
            let dh = h.gradient(p)?;
            let (wv, vv, gv) = (n.w.value(p)?, v.value(p)?, g.value(p)?);
            Ok(n.w
                .jacobian(p)?
                .scale(s)
                .plus(&Jacobian::outer(wv, [ds * dh[0], ds * dh[1]]))
                .plus(&v.jacobian(p)?.scale(gv))
                .plus(&Jacobian::outer(vv, g.gradient(p)?)))
        },
    );
    let rate_base = n.clone();
    let rate_psi = psi.clone();
    NormalizerField {
        w,
        mu: Arc::new(move |p| {
            let (n, psi, g, v, h) = &*pm;
            let s = psi.eval(h.value(p)?)?;
            Ok(s * n.mu(p)? + dot(g.gradient(p)?, v.value(p)?))
        }),
        construction: Construction::Combined,
        guard: Arc::new(move |p| {
            let (n, psi, _, _, h) = &*pg;
            n.guard(p)
                && h.value(p)
                    .and_then(|hv| psi.eval(hv))
                    .map_or(false, |s| s.abs() > DEGENERACY_TOL)
        }),
        level_rate: n.level_rate.as_ref().map(|_| {
            Arc::new(move |lvl: f64| {
                let base = rate_base.level_rate(lvl).expect("rate present")?;
                Ok(rate_psi.eval(lvl)? * base)
            }) as Rate
        }),
    }
}
