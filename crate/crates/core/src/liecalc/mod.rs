//! Pointwise Lie-bracket calculus for planar fields.
//!
//! Wedge convention: `a ∧ b = a₁b₂ − a₂b₁`. The bracket is
//! `[V,W] = ∂_V W − ∂_W V = J_W V − J_V W`.

mod normalizer;

pub use normalizer::{
    combine_normalizer, normalizer_gradient, normalizer_kappa, normalizer_separable, normalizer_zeta,
    NormalizerField, Univariate,
};

use crate::error::{Error, Result};
use crate::fields::{dot, norm2, Point, ScalarField, Separable, Vec2, VectorField};

/// Relative threshold below which `|V|`, `|∇H|` or `sin∠(V,W)` count as zero.
pub const DEGENERACY_TOL: f64 = 1e-12;

pub fn wedge(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

pub(crate) fn nonzero_field(v: Vec2, p: Point) -> Result<Vec2> {
    if norm2(v).sqrt() <= DEGENERACY_TOL * (1.0 + p.norm()) {
        Err(Error::Equilibrium(p))
    } else {
        Ok(v)
    }
}

pub(crate) fn nonzero_gradient(g: Vec2, p: Point) -> Result<Vec2> {
    if norm2(g).sqrt() <= DEGENERACY_TOL * (1.0 + p.norm()) {
        Err(Error::SingularGradient(p))
    } else {
        Ok(g)
    }
}

fn transversal_wedge(v: Vec2, w: Vec2, p: Point) -> Result<f64> {
    let vw = wedge(v, w);
    let scale = norm2(v).sqrt() * norm2(w).sqrt();
    if scale == 0.0 || vw.abs() <= DEGENERACY_TOL * scale {
        Err(Error::Tangency(p))
    } else {
        Ok(vw)
    }
}

pub fn lie_bracket(v: &VectorField, w: &VectorField, p: Point) -> Result<Vec2> {
    let (vv, wv) = (v.value(p)?, w.value(p)?);
    let (jv, jw) = (v.jacobian(p)?, w.jacobian(p)?);
    let a = jw.apply(vv);
    let b = jv.apply(wv);
    Ok([a[0] - b[0], a[1] - b[1]])
}

/// `μ = ([V,W]·V)/|V|²`.
pub fn mu_from_bracket(v: &VectorField, w: &VectorField, p: Point) -> Result<f64> {
    let vv = nonzero_field(v.value(p)?, p)?;
    let br = lie_bracket(v, w, p)?;
    Ok(dot(br, vv) / norm2(vv))
}

/// Numerator of the Hamiltonian normalizing function:
/// `(H_yy − H_xx)H_x² − 4H_xy H_x H_y + (H_xx − H_yy)H_y²`.
pub fn lambda_h(h: &ScalarField, p: Point) -> Result<f64> {
    let [hx, hy] = h.gradient(p)?;
    let m = h.hessian(p)?;
    Ok((m.yy - m.xx) * hx * hx - 4.0 * m.xy * hx * hy + (m.xx - m.yy) * hy * hy)
}

/// Normalizing function of `W_H = ∇H/|∇H|²` for `V_H = (H_y, −H_x)`;
/// equals `div W_H`.
pub fn mu_hamiltonian(h: &ScalarField, p: Point) -> Result<f64> {
    let g = nonzero_gradient(h.gradient(p)?, p)?;
    let s = norm2(g);
    Ok(lambda_h(h, p)? / (s * s))
}

/// Normalizing function of `W = κ(−Q, P)/|V|²` for `V = (P, Q)` with RIF `κ`.
pub fn mu_kappa(v: &VectorField, kappa: &ScalarField, p: Point) -> Result<f64> {
    let [pp, qq] = nonzero_field(v.value(p)?, p)?;
    let k = kappa.value(p)?;
    if k <= 0.0 {
        return Err(Error::NonPositiveKappa { value: k, point: p });
    }
    let j = v.jacobian(p)?;
    let s = pp * pp + qq * qq;
    let num = -pp * pp * (j.qx + j.py) + 2.0 * pp * qq * (j.px - j.qy) + qq * qq * (j.qx + j.py);
    Ok(k * num / (s * s))
}

/// The gradient normalizer's `μ` specialised to `H = F(y) + G(x)`:
/// `(F″ − G″)(G′² − F′²)/(F′² + G′²)²`.
pub fn mu_separable(sep: &Separable, p: Point) -> Result<f64> {
    let (f1, f2, g1, g2) = separable_derivatives(sep, p)?;
    let s = f1 * f1 + g1 * g1;
    if s.sqrt() <= DEGENERACY_TOL * (1.0 + p.norm()) {
        return Err(Error::SingularGradient(p));
    }
    Ok((f2 - g2) * (g1 * g1 - f1 * f1) / (s * s))
}

/// Normalizing function of `W = (G/G′, F/F′)`:
/// `1 − G G″/G′² − F F″/F′²`, defined where `F′(y) G′(x) ≠ 0`.
pub fn mu_fgg(sep: &Separable, p: Point) -> Result<f64> {
    let (f1, f2, g1, g2) = separable_derivatives(sep, p)?;
    if f1.abs() <= DEGENERACY_TOL || g1.abs() <= DEGENERACY_TOL {
        return Err(Error::Guard {
            construction: crate::Construction::Separable,
            point: p,
        });
    }
    let f = sep.f.value(p)?;
    let g = sep.g.value(p)?;
    Ok(1.0 - g * g2 / (g1 * g1) - f * f2 / (f1 * f1))
}

/// `(F′, F″, G′, G″)` at `p`.
pub(crate) fn separable_derivatives(sep: &Separable, p: Point) -> Result<(f64, f64, f64, f64)> {
    let f1 = sep.f.gradient(p)?[1];
    let f2 = sep.f.hessian(p)?.yy;
    let g1 = sep.g.gradient(p)?[0];
    let g2 = sep.g.hessian(p)?.xx;
    Ok((f1, f2, g1, g2))
}

/// `η = ([V,W] ∧ W)/(V ∧ W)`.
pub fn eta(v: &VectorField, w: &VectorField, p: Point) -> Result<f64> {
    let (vv, wv) = (v.value(p)?, w.value(p)?);
    let vw = transversal_wedge(vv, wv, p)?;
    Ok(wedge(lie_bracket(v, w, p)?, wv) / vw)
}

/// `ν = ([V,W] ∧ V)/(W ∧ V)`.
pub fn nu(v: &VectorField, w: &VectorField, p: Point) -> Result<f64> {
    let (vv, wv) = (v.value(p)?, w.value(p)?);
    let vw = transversal_wedge(vv, wv, p)?;
    Ok(wedge(lie_bracket(v, w, p)?, vv) / (-vw))
}

/// Coefficients `(a, b)` with
/// `[V,W] = (−∂_W ln(V∧W) + div W) V + (∂_V ln(V∧W) − div V) W`.
pub fn wazewski_decompose(v: &VectorField, w: &VectorField, p: Point) -> Result<(f64, f64)> {
    let (vv, wv) = (v.value(p)?, w.value(p)?);
    let vw = transversal_wedge(vv, wv, p)?;
    let (jv, jw) = (v.jacobian(p)?, w.jacobian(p)?);
    let grad_wedge = [
        jv.px * wv[1] + vv[0] * jw.qx - jv.qx * wv[0] - vv[1] * jw.px,
        jv.py * wv[1] + vv[0] * jw.qy - jv.qy * wv[0] - vv[1] * jw.py,
    ];
    let a = -dot(grad_wedge, wv) / vw + jw.trace();
    let b = dot(grad_wedge, vv) / vw - jv.trace();
    Ok((a, b))
}

/// Normalizing function after reparametrizing `V` by `κ`:
/// `μ̄ = μ − ∂_W ln κ`.
pub fn reparametrize_mu(mu: f64, w: &VectorField, kappa: &ScalarField, p: Point) -> Result<f64> {
    let k = kappa.value(p)?;
    if k <= 0.0 {
        return Err(Error::NonPositiveKappa { value: k, point: p });
    }
    Ok(mu - kappa.derivative_along(p, w.value(p)?)? / k)
}

#[cfg(test)]
mod tests;
