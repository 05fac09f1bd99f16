use serde::Serialize;

use super::{hamiltonian_field, reparametrized_field, Point, ScalarField, VectorField};
use crate::error::{Error, Result};
use crate::expr::{parse, parse_with, Expr};

/// Separable first integral `H = F(y) + G(x)`.
#[derive(Clone, Debug)]
pub struct Separable {
    /// `F`, depending on `y` only.
    pub f: ScalarField,
    /// `G`, depending on `x` only.
    pub g: ScalarField,
}

impl Separable {
    pub fn parse(f: &str, g: &str) -> Result<Separable> {
        let fe = parse(f)?;
        let ge = parse(g)?;
        if fe.contains_var(crate::expr::Var::X) || ge.contains_var(crate::expr::Var::Y) {
            return Err(Error::Invalid(format!(
                "separable parts must be F(y) and G(x), got F = {} and G = {}",
                fe, ge
            )));
        }
        Ok(Separable {
            f: ScalarField::from_expr(&fe)?,
            g: ScalarField::from_expr(&ge)?,
        })
    }
}

/// A planar system `z' = V(z)` with whatever structure is known about it.
#[derive(Clone, Debug)]
pub struct SystemDef {
    pub name: String,
    pub description: String,
    pub v: VectorField,
    /// First integral.
    pub h: Option<ScalarField>,
    /// Reciprocal integrating factor with `V = κ (H_y, -H_x)`.
    pub kappa: Option<ScalarField>,
    /// Point inside the period annulus from which level-set anchors are searched.
    pub center_hint: Option<Point>,
    /// Range of `H` covered by the annulus.
    pub annulus_hint: Option<(f64, f64)>,
    pub separable: Option<Separable>,
    /// True when `V` is exactly the Hamiltonian field of `h`.
    pub hamiltonian: bool,
}

impl SystemDef {
    /// Hamiltonian system `x' = H_y, y' = -H_x`.
    pub fn from_hamiltonian(name: &str, h: &Expr) -> Result<SystemDef> {
        let hf = ScalarField::from_expr(h)?;
        Ok(SystemDef {
            name: name.to_string(),
            description: format!("Hamiltonian system with H = {}", h),
            v: hamiltonian_field(&hf),
            h: Some(hf),
            kappa: None,
            center_hint: None,
            annulus_hint: None,
            separable: None,
            hamiltonian: true,
        })
    }

    /// Reparametrized Hamiltonian system `x' = κ H_y, y' = -κ H_x`.
    pub fn from_reparametrized(name: &str, h: &Expr, kappa: &Expr) -> Result<SystemDef> {
        let hf = ScalarField::from_expr(h)?;
        let kf = ScalarField::from_expr(kappa)?;
        Ok(SystemDef {
            name: name.to_string(),
            description: format!("reparametrized Hamiltonian system with H = {}, kappa = {}", h, kappa),
            v: reparametrized_field(&hf, &kf),
            h: Some(hf),
            kappa: Some(kf),
            center_hint: None,
            annulus_hint: None,
            separable: None,
            hamiltonian: false,
        })
    }

    /// General system from components. With a first integral but no `κ`,
    /// the factor is recovered as `κ = (P H_y - Q H_x) / |∇H|²`, which equals
    /// `|V|/|∇H|` whenever `V = κ (H_y, -H_x)` with `κ > 0`.
    pub fn from_components(
        name: &str,
        p: &Expr,
        q: &Expr,
        h: Option<&Expr>,
        kappa: Option<&Expr>,
    ) -> Result<SystemDef> {
        let v = VectorField::from_exprs(p, q)?;
        let hf = h.map(ScalarField::from_expr).transpose()?;
        let kappa = match (kappa, h) {
            (Some(k), _) => Some(ScalarField::from_expr(k)?),
            (None, Some(h)) => {
                let hx = crate::expr::differentiate(h, crate::expr::Var::X)?;
                let hy = crate::expr::differentiate(h, crate::expr::Var::Y)?;
                let num = Expr::sub(Expr::mul(p.clone(), hy.clone()), Expr::mul(q.clone(), hx.clone()));
                let den = Expr::add(
                    Expr::pow(hx, Expr::Const(2.0)),
                    Expr::pow(hy, Expr::Const(2.0)),
                );
                Some(ScalarField::from_expr(&Expr::div(num, den))?)
            }
            (None, None) => None,
        };
        Ok(SystemDef {
            name: name.to_string(),
            description: format!("x' = {}, y' = {}", p, q),
            v,
            h: hf,
            kappa,
            center_hint: None,
            annulus_hint: None,
            separable: None,
            hamiltonian: false,
        })
    }

    pub fn require_h(&self) -> Result<&ScalarField> {
        self.h.as_ref().ok_or_else(|| Error::Missing {
            system: self.name.clone(),
            what: "a first integral",
        })
    }

    pub fn with_center(mut self, c: Point, annulus: (f64, f64)) -> SystemDef {
        self.center_hint = Some(c);
        self.annulus_hint = Some(annulus);
        self
    }

    pub fn described(mut self, d: &str) -> SystemDef {
        self.description = d.to_string();
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BuiltinInfo {
    pub name: &'static str,
    pub description: &'static str,
    pub origin: &'static str,
}

const BUILTINS: &[BuiltinInfo] = &[
    BuiltinInfo {
        name: "eikonal",
        description: "H = sqrt(x^2+y^2), |grad H| = 1; T(H) = 2 pi H",
        origin: "eikonal limit case: period derivative driven by orbit curvature",
    },
    BuiltinInfo {
        name: "harmonic",
        description: "H = (x^2+y^2)/2, isochronous linear center",
        origin: "baseline isochronous center",
    },
    BuiltinInfo {
        name: "harmonic-rif:<kappa>",
        description: "x' = kappa y, y' = -kappa x with kappa > 0 a reciprocal integrating factor",
        origin: "reparametrized Hamiltonian system, RIF normalizer",
    },
    BuiltinInfo {
        name: "quartic",
        description: "H = y^2/2 + x^4/4, T(H) proportional to H^(-1/4)",
        origin: "separable Hamiltonian F(y) + G(x)",
    },
    BuiltinInfo {
        name: "rotational:<rho>",
        description: "x' = y rho, y' = -x rho with rho written in x, y or u = x^2+y^2",
        origin: "constant-curvature limit case: period derivative driven by |grad H|",
    },
    BuiltinInfo {
        name: "twowell",
        description: "x' = 2y, y' = -4x(x^2-1), H = y^2 + (x^2-1)^2; outer annulus H > 1",
        origin: "two centers enclosed by homoclinic loops; separable normalizer fails on the outer annulus",
    },
];

/// Registry listing, sorted by name.
pub fn list_builtins() -> Vec<BuiltinInfo> {
    let mut v = BUILTINS.to_vec();
    v.sort_by_key(|b| b.name);
    v
}

fn radius_squared() -> Expr {
    parse("x^2+y^2").expect("static expression")
}

/// Assemble a built-in system by name. Parameterized entries take an
/// expression after a colon, e.g. `rotational:2+sin(u)`.
pub fn builtin_system(name: &str) -> Result<SystemDef> {
    let origin = Point::new(0.0, 0.0);
    let (head, arg) = match name.split_once(':') {
        Some((h, a)) => (h.trim(), Some(a.trim())),
        None => (name.trim(), None),
    };
    let sys = match (head, arg) {
        ("harmonic", None) => {
            let mut s = SystemDef::from_hamiltonian(name, &parse("(x^2+y^2)/2")?)?;
            s.separable = Some(Separable::parse("y^2/2", "x^2/2")?);
            s.with_center(origin, (0.0, f64::INFINITY))
                .described("harmonic oscillator, H = (x^2+y^2)/2")
        }
        ("quartic", None) => {
            let mut s = SystemDef::from_hamiltonian(name, &parse("y^2/2 + x^4/4")?)?;
            s.separable = Some(Separable::parse("y^2/2", "x^4/4")?);
            s.with_center(origin, (0.0, f64::INFINITY))
                .described("pure quartic oscillator, H = y^2/2 + x^4/4")
        }
        ("twowell", None) => {
            let mut s = SystemDef::from_hamiltonian(name, &parse("y^2 + (x^2-1)^2")?)?;
            s.separable = Some(Separable::parse("y^2", "(x^2-1)^2")?);
            s.with_center(origin, (1.0, f64::INFINITY))
                .described("two-well oscillator x' = 2y, y' = -4x(x^2-1), H = y^2 + (x^2-1)^2")
        }
        ("eikonal", None) => SystemDef::from_hamiltonian(name, &parse("sqrt(x^2+y^2)")?)?
            .with_center(origin, (0.0, f64::INFINITY))
            .described("eikonal Hamiltonian H = sqrt(x^2+y^2)"),
        ("rotational", Some(rho)) => {
            let rho = parse_with(rho, &[("u", radius_squared())])?;
            let h = parse("(x^2+y^2)/2")?;
            let mut s = SystemDef::from_reparametrized(name, &h, &rho)?;
            s.description = format!("rotational system x' = y rho, y' = -x rho with rho = {}", rho);
            s.with_center(origin, (0.0, f64::INFINITY))
        }
        ("harmonic-rif", Some(kappa)) => {
            let kappa = parse(kappa)?;
            let h = parse("(x^2+y^2)/2")?;
            SystemDef::from_reparametrized(name, &h, &kappa)?.with_center(origin, (0.0, f64::INFINITY))
        }
        _ => return Err(Error::UnknownSystem(name.to_string())),
    };
    Ok(sys)
}
