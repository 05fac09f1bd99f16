use std::fmt;

use thiserror::Error;

use crate::fields::Point;

/// Errors raised anywhere in the analysis pipeline.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("syntax error at byte {offset}: expected {}, found {found}", expected.join(" or "))]
    Syntax {
        offset: usize,
        expected: Vec<String>,
        found: String,
    },

    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("domain error in `{subtree}`: {reason}")]
    Domain { subtree: String, reason: String },

    #[error("`{subtree}` is not differentiable")]
    NonDifferentiable { subtree: String },

    #[error("equilibrium at {0}: vector field vanishes")]
    Equilibrium(Point),

    #[error("singular gradient at {0}: |grad H| vanishes")]
    SingularGradient(Point),

    #[error("fields are tangent at {0}")]
    Tangency(Point),

    #[error("{construction} normalizer is undefined at {point}")]
    Guard {
        construction: Construction,
        point: Point,
    },

    #[error("degenerate normalizer at {point}: {what} vanishes")]
    Degenerate { what: String, point: Point },

    #[error("reciprocal integrating factor must be positive, got {value} at {point}")]
    NonPositiveKappa { value: f64, point: Point },

    #[error("unknown system `{0}`")]
    UnknownSystem(String),

    #[error("step size underflow at t = {t} (h = {h})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("no return to the section through {anchor} within t = {t_max}")]
    NotPeriodic { anchor: Point, t_max: f64 },

    #[error("ambiguous return to the section through {anchor}: {} distant crossings", candidates.len())]
    AmbiguousReturn {
        anchor: Point,
        candidates: Vec<(f64, Point)>,
    },

    #[error("root search failed: {0}")]
    RootNotFound(String),

    #[error("system `{system}` lacks {what}")]
    Missing { system: String, what: &'static str },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("scan undetermined: {succeeded} of {requested} levels succeeded")]
    Undetermined { succeeded: usize, requested: usize },

    #[error("verification sampled no admissible points for `{0}`")]
    EmptySample(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Tag recording which family a normalizer was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Construction {
    Gradient,
    Zeta,
    Kappa,
    Separable,
    Combined,
    Reparametrized,
}

impl fmt::Display for Construction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Construction::Gradient => "gradient",
            Construction::Zeta => "zeta",
            Construction::Kappa => "kappa",
            Construction::Separable => "separable",
            Construction::Combined => "combined",
            Construction::Reparametrized => "reparametrized",
        };
        f.write_str(s)
    }
}
