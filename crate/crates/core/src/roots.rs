//! Bracketed scalar root refinement.

use crate::error::{Error, Result};

/// Illinois-modified regula falsi on a sign-changing bracket `[a, b]`.
///
/// Stops when `|f| <= ftol` or the bracket is narrower than `xtol`. Falls
/// back to a bisection step whenever the secant point stalls at one end.
pub(crate) fn refine<F>(mut f: F, mut a: f64, mut b: f64, ftol: f64, xtol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::RootNotFound(format!(
            "no sign change on [{}, {}] (f = {}, {})",
            a, b, fa, fb
        )));
    }
    let mut side = 0i8;
    for _ in 0..200 {
        let mut c = (a * fb - b * fa) / (fb - fa);
        let width = (b - a).abs();
        if !c.is_finite() || (c - a).abs() < 0.01 * width || (b - c).abs() < 0.01 * width {
            c = 0.5 * (a + b);
        }
        let fc = f(c)?;
        if fc.abs() <= ftol || width <= xtol {
            return Ok(c);
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    Ok(0.5 * (a + b))
}

/// Plain bisection until the bracket width is at most `xtol`. Returns the
/// midpoint and half the final width.
pub(crate) fn bisect<F>(mut f: F, mut a: f64, mut b: f64, xtol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let fa = f(a)?;
    let fb = f(b)?;
    if fa == 0.0 {
        return Ok((a, 0.0));
    }
    if fb == 0.0 {
        return Ok((b, 0.0));
    }
    if fa.signum() == fb.signum() {
        return Err(Error::RootNotFound(format!("no sign change on [{}, {}]", a, b)));
    }
    let sa = fa.signum();
    while (b - a).abs() > xtol {
        let m = 0.5 * (a + b);
        let fm = f(m)?;
        if fm == 0.0 {
            return Ok((m, 0.0));
        }
        if fm.signum() == sa {
            a = m;
        } else {
            b = m;
        }
    }
    Ok((0.5 * (a + b), 0.5 * (b - a).abs()))
}

/// Walk outward from `s0` with geometrically growing steps until `f` changes
/// sign, then refine. Returns the first root found along `s > s0`.
pub(crate) fn first_root_along<F>(mut f: F, s0: f64, first_step: f64, s_max: f64, ftol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut s = s0;
    let mut fs = f(s)?;
    let mut step = first_step;
    while s < s_max {
        let next = (s + step).min(s_max);
        let fnext = f(next)?;
        if fs == 0.0 {
            return Ok(s);
        }
        if fnext.signum() != fs.signum() {
            return refine(&mut f, s, next, ftol, 1e-15 * next.abs().max(1.0));
        }
        s = next;
        fs = fnext;
        step *= 1.25;
    }
    Err(Error::RootNotFound(format!("no sign change on [{}, {}]", s0, s_max)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refines_cubic_root() {
        let r = refine(|x| Ok(x * x * x - 2.0), 0.0, 2.0, 1e-14, 1e-15).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-13);
    }

    #[test]
    fn bisection_width() {
        let (r, err) = bisect(|x| Ok(x.cos()), 0.0, 3.0, 1e-9).unwrap();
        assert!((r - std::f64::consts::FRAC_PI_2).abs() <= err + 1e-15);
        assert!(err <= 0.5e-9);
    }

    #[test]
    fn first_root_walks_outward() {
        // (s^2 - 1)^2 - 0.25 has roots near 0.707, 1.225; the walk must stop at the first
        let r = first_root_along(|s| Ok((s * s - 1.0f64).powi(2) - 0.25), 0.0, 1e-3, 10.0, 1e-14).unwrap();
        assert!((r - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(first_root_along(|s| Ok(1.0 + s), 0.0, 1e-3, 5.0, 1e-14).is_err());
    }

    #[test]
    fn no_sign_change_is_an_error() {
        assert!(refine(|x| Ok(x * x + 1.0), -1.0, 1.0, 1e-12, 1e-12).is_err());
    }
}
