//! Period functions of planar centers through explicit normalizers.
//!
//! Given a planar system `z' = V(z)` with a first integral `H`, this crate
//! builds transversal fields `W` whose Lie bracket with `V` is parallel to
//! `V` (`[V,W] = μV`), evaluates the normalizing function `μ`, and integrates
//! it around cycles to obtain the derivative of the period function `T(H)`.
//! Two further routes (a transversal-field formula and finite differences of
//! measured periods) cross-check every value.
//!
//! Layout:
//! - [`expr`]: expression parser, symbolic differentiation, folding.
//! - [`fields`]: scalar/vector field evaluators and the built-in systems.
//! - [`liecalc`]: wedge, bracket, `μ` formulas and normalizer constructions.
//! - [`flow`]: adaptive integration, cycle detection and cycle quadrature.
//! - [`period`]: `T` and `T'(H)` by three routes, annulus scans, critical cycles.
//! - [`verify`]: sampled residual checks of the algebraic identities.

pub mod error;
pub mod expr;
pub mod fields;
pub mod flow;
pub mod liecalc;
pub mod period;
pub(crate) mod roots;
pub mod verify;

pub use error::{Construction, Error, Result};
pub use fields::{Point, ScalarField, SystemDef, VectorField};
