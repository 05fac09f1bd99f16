//! Period function `T(H)` and its derivative by three independent routes:
//!
//! * **A** (`mu`): `∮ μ dt` for a normalizer with `∂_W H = ξ(H)`, divided by `ξ`.
//! * **B** (`etabeta`): the transversal-field formula `∂_W T = (1/β)∮ ηβ`
//!   for an arbitrary transversal `W`, divided by `∂_W H` at the anchor.
//! * **C** (`fd`): central difference of `T` across neighbouring levels.
//!
//! Annulus scans run levels in parallel, classify monotonicity and refine
//! critical levels by bisection.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Construction, Error, Result};
use crate::fields::{dot, Point, ScalarField, SystemDef, Vec2, VectorField};
use crate::flow::{find_cycle, integrate_system, quadrature_along, Cycle, CycleOptions, Tolerances};
use crate::liecalc::{
    combine_normalizer, eta, normalizer_gradient, normalizer_kappa, normalizer_separable, normalizer_zeta, nu,
    NormalizerField, Univariate, DEGENERACY_TOL,
};
use crate::roots::{bisect, first_root_along};

/// Anchors with a smaller gradient are rejected as too close to the center.
pub const MIN_ANCHOR_GRADIENT: f64 = 1e-6;

/// Which routes to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Routes {
    pub mu: bool,
    pub etabeta: bool,
    pub fd: bool,
}

impl Default for Routes {
    fn default() -> Self {
        Routes {
            mu: true,
            etabeta: true,
            fd: true,
        }
    }
}

impl FromStr for Routes {
    type Err = Error;

    /// Comma-separated list of `a|mu`, `b|etabeta`, `c|fd`, or `all`.
    fn from_str(s: &str) -> Result<Routes> {
        let mut r = Routes {
            mu: false,
            etabeta: false,
            fd: false,
        };
        for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            match tok.to_ascii_lowercase().as_str() {
                "a" | "mu" => r.mu = true,
                "b" | "etabeta" | "eta-beta" => r.etabeta = true,
                "c" | "fd" => r.fd = true,
                "all" => r = Routes::default(),
                other => return Err(Error::Invalid(format!("unknown route `{}`", other))),
            }
        }
        if !(r.mu || r.etabeta || r.fd) {
            return Err(Error::Invalid("no routes selected".into()));
        }
        Ok(r)
    }
}

/// Normalizer families selectable for route A.
#[derive(Debug, Clone)]
pub enum NormalizerKind {
    Gradient,
    Kappa,
    Zeta(Univariate),
    Separable,
    /// `ψ(H) N + g V` on top of the system's default normalizer.
    Combined { psi: Univariate, g: ScalarField },
}

/// Route-A normalizer of `sys`: the gradient normalizer for Hamiltonian
/// systems, the RIF normalizer when a `κ` is known.
pub fn default_normalizer(sys: &SystemDef) -> Result<NormalizerField> {
    if sys.hamiltonian {
        return Ok(normalizer_gradient(sys.require_h()?));
    }
    match &sys.kappa {
        Some(k) => Ok(normalizer_kappa(&sys.v, k)),
        None => Err(Error::Missing {
            system: sys.name.clone(),
            what: "a reciprocal integrating factor",
        }),
    }
}

/// Build a normalizer of `sys.v` from one of the families. Families defined
/// for the Hamiltonian field of `H` are carried over to `κ V_H` through the
/// reparametrization `μ̄ = μ − ∂_W ln κ`.
pub fn build_normalizer(sys: &SystemDef, kind: &NormalizerKind) -> Result<NormalizerField> {
    let lift = |n: NormalizerField| -> Result<NormalizerField> {
        if sys.hamiltonian {
            Ok(n)
        } else {
            let k = sys.kappa.as_ref().ok_or_else(|| Error::Missing {
                system: sys.name.clone(),
                what: "a reciprocal integrating factor",
            })?;
            Ok(n.reparametrized(k))
        }
    };
    match kind {
        NormalizerKind::Gradient => lift(normalizer_gradient(sys.require_h()?)),
        NormalizerKind::Kappa => match &sys.kappa {
            Some(k) => Ok(normalizer_kappa(&sys.v, k)),
            None if sys.hamiltonian => Ok(normalizer_kappa(&sys.v, &ScalarField::constant(1.0))),
            None => Err(Error::Missing {
                system: sys.name.clone(),
                what: "a reciprocal integrating factor",
            }),
        },
        NormalizerKind::Zeta(z) => lift(normalizer_zeta(sys.require_h()?, z)),
        NormalizerKind::Separable => {
            let sep = sys.separable.as_ref().ok_or_else(|| Error::Missing {
                system: sys.name.clone(),
                what: "a separable splitting H = F(y) + G(x)",
            })?;
            lift(normalizer_separable(sep))
        }
        NormalizerKind::Combined { psi, g } => Ok(combine_normalizer(
            &default_normalizer(sys)?,
            psi,
            g,
            &sys.v,
            sys.require_h()?,
        )),
    }
}

/// Settings for a single-level analysis.
#[derive(Clone)]
pub struct AnalysisOptions {
    pub cycle: CycleOptions,
    pub routes: Routes,
    /// Route-A normalizer; `None` selects [`default_normalizer`].
    pub normalizer: Option<NormalizerField>,
    /// Route-B transversal; `None` selects `V⊥ = (−Q, P)`.
    pub transversal: Option<VectorField>,
    /// Level offset for route C; `None` selects `max(1e-4·(1+|H|), 1e-6)`.
    pub fd_delta: Option<f64>,
    /// Tolerances for the two route-C cycles. Tighter than the default so the
    /// difference quotient keeps its digits.
    pub fd_tol: Tolerances,
    pub consistency_rtol: f64,
    pub consistency_atol: f64,
    /// Direction of the anchor ray from the center hint; `None` uses `+x`
    /// with `+y` as fallback.
    pub ray: Option<Vec2>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            cycle: CycleOptions::default(),
            routes: Routes::default(),
            normalizer: None,
            transversal: None,
            fd_delta: None,
            fd_tol: Tolerances { rtol: 1e-12, atol: 1e-14 },
            consistency_rtol: 1e-3,
            consistency_atol: 1e-5,
            ray: None,
        }
    }
}

impl fmt::Debug for AnalysisOptions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalysisOptions")
            .field("cycle", &self.cycle)
            .field("routes", &self.routes)
            .field("normalizer", &self.normalizer.as_ref().map(|n| n.construction()))
            .field("fd_delta", &self.fd_delta)
            .finish_non_exhaustive()
    }
}

/// Intersection of the level set `H = level` with a ray from the center hint.
pub fn locate_anchor(sys: &SystemDef, level: f64, ray: Option<Vec2>) -> Result<Point> {
    let h = sys.require_h()?;
    let center = sys.center_hint.ok_or_else(|| Error::Missing {
        system: sys.name.clone(),
        what: "a center hint",
    })?;
    let rays: Vec<Vec2> = match ray {
        Some(d) => vec![d],
        None => vec![[1.0, 0.0], [0.0, 1.0]],
    };
    let mut last = None;
    for d in rays {
        let len = d[0].hypot(d[1]);
        if !(len > 0.0) {
            return Err(Error::Invalid("anchor ray direction is zero".into()));
        }
        let d = [d[0] / len, d[1] / len];
        let scale = 1.0 + center.norm();
        let found = first_root_along(
            |s| Ok(h.value(center.offset(d, s))? - level),
            0.0,
            1e-3 * scale,
            1e3 * scale,
            1e-14 * (1.0 + level.abs()),
        )
        .map(|s| center.offset(d, s));
        match found {
            Ok(z) => {
                let g = h.gradient(z)?;
                if g[0].hypot(g[1]) >= MIN_ANCHOR_GRADIENT {
                    return Ok(z);
                }
                last = Some(Error::SingularGradient(z));
            }
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::RootNotFound(format!("level {}", level))))
}

fn level_of(sys: &SystemDef, cycle: &Cycle) -> Result<f64> {
    match cycle.level {
        Some(l) => Ok(l),
        None => sys.require_h()?.value(cycle.anchor),
    }
}

/// Route A: `T′(H) = ∮ μ dt / ξ(H)`.
pub fn tprime_mu_route(sys: &SystemDef, cycle: &Cycle, n: &NormalizerField) -> Result<f64> {
    let level = level_of(sys, cycle)?;
    let rate = n
        .level_rate(level)
        .ok_or_else(|| Error::Invalid(format!("{} normalizer has no level rate", n.construction())))??;
    if rate.abs() <= DEGENERACY_TOL {
        return Err(Error::Degenerate {
            what: format!("level rate at H = {}", level),
            point: cycle.anchor,
        });
    }
    Ok(quadrature_along(cycle, |z| n.mu(z))? / rate)
}

/// Outcome of route B.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EtaBetaOutcome {
    pub tprime: f64,
    /// `∂_W T` at the anchor.
    pub dw_t: f64,
    /// `∂_W H` at the anchor.
    pub dw_h: f64,
    /// `β(T)/β(0)`.
    pub holonomy: f64,
}

/// Route B: `∂_W T = ∮ η β dτ` with `β(anchor) = 1`, then `T′ = ∂_W T / ∂_W H`
/// evaluated at the anchor.
pub fn tprime_etabeta_route(sys: &SystemDef, cycle: &Cycle, w: &VectorField) -> Result<EtaBetaOutcome> {
    let h = sys.require_h()?;
    let v = cycle.field();
    // state: (x, y, ln β, ∫ηβ)
    let traj = integrate_system(
        |s: &[f64; 4]| {
            let z = Point::new(s[0], s[1]);
            let [a, b] = v.value(z)?;
            let beta = s[2].exp();
            Ok([a, b, -nu(v, w, z)?, eta(v, w, z)? * beta])
        },
        [cycle.anchor.x, cycle.anchor.y, 0.0, 0.0],
        cycle.period,
        cycle.tol,
    )?;
    let end = traj.end_state();
    let dw_t = end[3];
    let dw_h = dot(h.gradient(cycle.anchor)?, w.value(cycle.anchor)?);
    if dw_h.abs() <= DEGENERACY_TOL {
        return Err(Error::Degenerate {
            what: "dH along the transversal".into(),
            point: cycle.anchor,
        });
    }
    Ok(EtaBetaOutcome {
        tprime: dw_t / dw_h,
        dw_t,
        dw_h,
        holonomy: end[2].exp(),
    })
}

pub fn default_fd_delta(level: f64) -> f64 {
    (1e-4 * (1.0 + level.abs())).max(1e-6)
}

/// Route C: `(T(z₊) − T(z₋)) / (H(z₊) − H(z₋))` for points on the gradient
/// ray through `anchor` at levels `level ± delta`.
pub fn tprime_fd_route(sys: &SystemDef, level: f64, anchor: Point, delta: f64, opts: &CycleOptions) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::Invalid(format!("finite-difference delta must be positive, got {}", delta)));
    }
    let h = sys.require_h()?;
    let g = h.gradient(anchor)?;
    let gn = g[0].hypot(g[1]);
    if gn < MIN_ANCHOR_GRADIENT {
        return Err(Error::SingularGradient(anchor));
    }
    let d = [g[0] / gn, g[1] / gn];
    let s_max = 10.0 * (1.0 + anchor.norm());
    let ftol = 1e-12 * (1.0 + level.abs());
    let mut ends = [(0.0, 0.0); 2];
    for (slot, sign) in ends.iter_mut().zip([1.0, -1.0]) {
        let target = level + sign * delta;
        let s = first_root_along(
            |s| Ok(sign * (h.value(anchor.offset(d, sign * s))? - target)),
            0.0,
            0.25 * delta / gn,
            s_max,
            ftol,
        )?;
        let z = anchor.offset(d, sign * s);
        let c = find_cycle(&sys.v, z, opts)?;
        *slot = (c.period, h.value(z)?);
    }
    let [(tp, hp), (tm, hm)] = ends;
    Ok((tp - tm) / (hp - hm))
}

/// Pairwise absolute differences between the routes that ran.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct Deviations {
    pub mu_fd: Option<f64>,
    pub etabeta_mu: Option<f64>,
    pub etabeta_fd: Option<f64>,
}

impl Deviations {
    pub fn max(&self) -> Option<f64> {
        [self.mu_fd, self.etabeta_mu, self.etabeta_fd]
            .into_iter()
            .flatten()
            .reduce(f64::max)
    }
}

/// T and T′ at one level by every requested route.
#[derive(Debug, Clone, Serialize)]
pub struct PeriodDerivativeReport {
    pub level: f64,
    #[serde(rename = "T")]
    pub period: f64,
    pub anchor: Point,
    pub tprime_mu: Option<f64>,
    pub tprime_etabeta: Option<f64>,
    pub tprime_fd: Option<f64>,
    pub deviations: Deviations,
    pub max_deviation: Option<f64>,
    /// False when some pair of routes disagrees beyond tolerance.
    pub consistent: bool,
    pub normalizer: Option<Construction>,
    pub holonomy: Option<f64>,
    pub closure_error: f64,
    pub level_drift: Option<f64>,
    pub diagnostics: Vec<String>,
}

impl PeriodDerivativeReport {
    /// Route A, falling back to C and then B.
    pub fn preferred_tprime(&self) -> Option<f64> {
        self.tprime_mu.or(self.tprime_fd).or(self.tprime_etabeta)
    }

    /// Short machine-readable flags, `;`-joinable for CSV.
    pub fn flags(&self) -> Vec<&'static str> {
        let mut f = Vec::new();
        if !self.consistent {
            f.push("inconsistent");
        }
        for d in &self.diagnostics {
            if d.starts_with("mu:") {
                f.push("mu-failed");
            } else if d.starts_with("etabeta:") {
                f.push("etabeta-failed");
            } else if d.starts_with("fd:") {
                f.push("fd-failed");
            } else if d.starts_with("closure") {
                f.push("closure");
            } else if d.starts_with("drift") {
                f.push("drift");
            }
        }
        f
    }
}

fn agree(a: f64, reference: f64, opts: &AnalysisOptions) -> bool {
    (a - reference).abs() <= opts.consistency_atol.max(opts.consistency_rtol * reference.abs())
}

/// Analyze the cycle through `z`.
pub fn analyze_point(sys: &SystemDef, z: Point, opts: &AnalysisOptions) -> Result<PeriodDerivativeReport> {
    let h = sys.require_h()?;
    let cycle = find_cycle(&sys.v, z, &opts.cycle)?.with_level(h)?;
    let level = cycle.level.unwrap_or(f64::NAN);
    let mut diagnostics = Vec::new();
    if !cycle.closure_ok() {
        diagnostics.push(format!("closure error {:.3e}", cycle.closure_error));
    }
    if !cycle.conservation_ok() {
        diagnostics.push(format!("drift of H {:.3e}", cycle.level_drift.unwrap_or(f64::NAN)));
    }

    let mut construction = None;
    let tprime_mu = if opts.routes.mu {
        let n = match &opts.normalizer {
            Some(n) => Ok(n.clone()),
            None => default_normalizer(sys),
        };
        match n.and_then(|n| {
            construction = Some(n.construction());
            tprime_mu_route(sys, &cycle, &n)
        }) {
            Ok(v) => Some(v),
            Err(e) => {
                diagnostics.push(format!("mu: {}", e));
                None
            }
        }
    } else {
        None
    };

    let mut holonomy = None;
    let tprime_etabeta = if opts.routes.etabeta {
        let w = opts.transversal.clone().unwrap_or_else(|| sys.v.perpendicular());
        match tprime_etabeta_route(sys, &cycle, &w) {
            Ok(o) => {
                holonomy = Some(o.holonomy);
                Some(o.tprime)
            }
            Err(e) => {
                diagnostics.push(format!("etabeta: {}", e));
                None
            }
        }
    } else {
        None
    };

    let tprime_fd = if opts.routes.fd {
        let delta = opts.fd_delta.unwrap_or_else(|| default_fd_delta(level));
        let copts = CycleOptions {
            tol: opts.fd_tol,
            ..opts.cycle
        };
        match tprime_fd_route(sys, level, z, delta, &copts) {
            Ok(v) => Some(v),
            Err(e) => {
                diagnostics.push(format!("fd: {}", e));
                None
            }
        }
    } else {
        None
    };

    let pair = |a: Option<f64>, b: Option<f64>| a.zip(b).map(|(a, b)| (a - b).abs());
    let deviations = Deviations {
        mu_fd: pair(tprime_mu, tprime_fd),
        etabeta_mu: pair(tprime_etabeta, tprime_mu),
        etabeta_fd: pair(tprime_etabeta, tprime_fd),
    };
    let mut consistent = true;
    for (a, r, name) in [
        (tprime_mu, tprime_fd, "mu/fd"),
        (tprime_etabeta, tprime_mu, "etabeta/mu"),
        (tprime_etabeta, tprime_fd, "etabeta/fd"),
    ] {
        if let (Some(a), Some(r)) = (a, r) {
            if !agree(a, r, opts) {
                consistent = false;
                diagnostics.push(format!("routes {} disagree: {:e} vs {:e}", name, a, r));
            }
        }
    }

    Ok(PeriodDerivativeReport {
        level,
        period: cycle.period,
        anchor: z,
        tprime_mu,
        tprime_etabeta,
        tprime_fd,
        max_deviation: deviations.max(),
        deviations,
        consistent,
        normalizer: construction,
        holonomy,
        closure_error: cycle.closure_error,
        level_drift: cycle.level_drift,
        diagnostics,
    })
}

/// Analyze the cycle at `H = level`, anchored on the configured ray.
pub fn analyze_level(sys: &SystemDef, level: f64, opts: &AnalysisOptions) -> Result<PeriodDerivativeReport> {
    let z = locate_anchor(sys, level, opts.ray)?;
    analyze_point(sys, z, opts)
}

/// T′ by the first enabled route in preference order A, C, B.
fn preferred_tprime_at(sys: &SystemDef, level: f64, opts: &AnalysisOptions) -> Result<f64> {
    let z = locate_anchor(sys, level, opts.ray)?;
    let cycle = find_cycle(&sys.v, z, &opts.cycle)?.with_level(sys.require_h()?)?;
    if opts.routes.mu {
        let n = match &opts.normalizer {
            Some(n) => n.clone(),
            None => default_normalizer(sys)?,
        };
        tprime_mu_route(sys, &cycle, &n)
    } else if opts.routes.fd {
        let copts = CycleOptions {
            tol: opts.fd_tol,
            ..opts.cycle
        };
        let delta = opts.fd_delta.unwrap_or_else(|| default_fd_delta(level));
        tprime_fd_route(sys, level, z, delta, &copts)
    } else {
        let w = opts.transversal.clone().unwrap_or_else(|| sys.v.perpendicular());
        Ok(tprime_etabeta_route(sys, &cycle, &w)?.tprime)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Linear,
    Geometric,
}

impl FromStr for Spacing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Spacing> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" | "lin" => Ok(Spacing::Linear),
            "geometric" | "geom" | "log" => Ok(Spacing::Geometric),
            other => Err(Error::Invalid(format!("unknown spacing `{}`", other))),
        }
    }
}

/// `n` levels from `lo` to `hi` inclusive.
pub fn scan_levels(range: (f64, f64), n: usize, spacing: Spacing) -> Result<Vec<f64>> {
    let (lo, hi) = range;
    if n < 2 {
        return Err(Error::Invalid(format!("a scan needs at least 2 levels, got {}", n)));
    }
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Invalid(format!("level range [{}, {}] is empty", lo, hi)));
    }
    let last = (n - 1) as f64;
    let mut levels: Vec<f64> = match spacing {
        Spacing::Linear => (0..n).map(|i| lo + (hi - lo) * i as f64 / last).collect(),
        Spacing::Geometric => {
            if lo <= 0.0 {
                return Err(Error::Invalid("geometric spacing needs a positive lower level".into()));
            }
            let r = (hi / lo).ln();
            (0..n).map(|i| lo * (r * i as f64 / last).exp()).collect()
        }
    };
    levels[n - 1] = hi;
    Ok(levels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    Increasing,
    Decreasing,
    NonMonotone,
    Isochronous,
    Undetermined,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Increasing => "increasing",
            Classification::Decreasing => "decreasing",
            Classification::NonMonotone => "non-monotone",
            Classification::Isochronous => "isochronous",
            Classification::Undetermined => "undetermined",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelFailure {
    pub level: f64,
    pub error: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalLevel {
    pub level: f64,
    /// Half-width of the final bisection bracket.
    pub error: f64,
}

#[derive(Debug, Clone)]
pub struct ScanOptions {
    pub analysis: AnalysisOptions,
    pub spacing: Spacing,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    pub iso_tol: f64,
    /// Refine sign changes of T′ into critical levels.
    pub refine_critical: bool,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            analysis: AnalysisOptions::default(),
            spacing: Spacing::Linear,
            workers: None,
            iso_tol: 1e-7,
            refine_critical: true,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AnnulusScan {
    pub system: String,
    pub range: (f64, f64),
    pub spacing: Spacing,
    pub iso_tol: f64,
    /// Successful levels, increasing.
    pub reports: Vec<PeriodDerivativeReport>,
    pub failures: Vec<LevelFailure>,
    pub classification: Classification,
    pub critical_levels: Vec<CriticalLevel>,
}

impl AnnulusScan {
    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty()
    }
}

/// Classify by the sign pattern of the preferred T′. Values within `iso_tol`
/// of zero count as zero.
pub fn classify(reports: &[PeriodDerivativeReport], iso_tol: f64) -> Classification {
    let tp: Vec<f64> = reports.iter().filter_map(|r| r.preferred_tprime()).collect();
    if tp.len() < 2 {
        return Classification::Undetermined;
    }
    let tmax = reports.iter().map(|r| r.period).fold(f64::MIN, f64::max);
    let tmin = reports.iter().map(|r| r.period).fold(f64::MAX, f64::min);
    if tp.iter().all(|t| t.abs() <= iso_tol) && tmax - tmin <= iso_tol * tmax {
        return Classification::Isochronous;
    }
    let pos = tp.iter().filter(|&&t| t > iso_tol).count();
    let neg = tp.iter().filter(|&&t| t < -iso_tol).count();
    match (pos, neg) {
        (p, 0) if p == tp.len() => Classification::Increasing,
        (0, n) if n == tp.len() => Classification::Decreasing,
        (p, n) if p > 0 && n > 0 => Classification::NonMonotone,
        _ => Classification::Undetermined,
    }
}

fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Invalid(format!("worker pool: {}", e)))?;
            Ok(pool.install(f))
        }
    }
}

/// Analyze `n` levels across `range`. Per-level failures are recorded, not
/// fatal; fewer than two successes is an error.
pub fn scan_annulus(sys: &SystemDef, range: (f64, f64), n: usize, opts: &ScanOptions) -> Result<AnnulusScan> {
    sys.require_h()?;
    let levels = scan_levels(range, n, opts.spacing)?;
    let results: Vec<(f64, Result<PeriodDerivativeReport>)> = with_pool(opts.workers, || {
        levels
            .par_iter()
            .map(|&l| (l, analyze_level(sys, l, &opts.analysis)))
            .collect()
    })?;
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for (level, r) in results {
        match r {
            Ok(rep) => reports.push(rep),
            Err(e) => failures.push(LevelFailure {
                level,
                error: e.to_string(),
            }),
        }
    }
    if reports.len() < 2 {
        return Err(Error::Undetermined {
            succeeded: reports.len(),
            requested: n,
        });
    }
    let classification = classify(&reports, opts.iso_tol);
    let mut scan = AnnulusScan {
        system: sys.name.clone(),
        range,
        spacing: opts.spacing,
        iso_tol: opts.iso_tol,
        reports,
        failures,
        classification,
        critical_levels: Vec::new(),
    };
    if opts.refine_critical && classification != Classification::Isochronous {
        scan.critical_levels = with_pool(opts.workers, || critical_cycles(sys, &scan, opts))??;
    }
    Ok(scan)
}

/// Refine every sign change of the preferred T′ between adjacent scanned
/// levels by bisection to a bracket of width `1e-6·(1+|H*|)`.
pub fn critical_cycles(sys: &SystemDef, scan: &AnnulusScan, opts: &ScanOptions) -> Result<Vec<CriticalLevel>> {
    if scan.classification == Classification::Isochronous {
        return Ok(Vec::new());
    }
    let signed: Vec<(f64, f64)> = scan
        .reports
        .iter()
        .filter_map(|r| r.preferred_tprime().map(|t| (r.level, t)))
        .filter(|(_, t)| t.abs() > opts.iso_tol)
        .collect();
    let brackets: Vec<((f64, f64), (f64, f64))> = signed
        .windows(2)
        .filter(|w| w[0].1.signum() != w[1].1.signum())
        .map(|w| (w[0], w[1]))
        .collect();
    let refined: Vec<Option<CriticalLevel>> = brackets
        .par_iter()
        .map(|&((a, ta), (b, tb))| {
            let xtol = 1e-6 * (1.0 + a.abs().min(b.abs()));
            let (level, error) = bisect(|l| preferred_tprime_at(sys, l, &opts.analysis), a, b, xtol)?;
            // a sign change through a pole (e.g. across a separatrix, where
            // T → ∞) is not a critical cycle: there |T′| grows instead of vanishing
            let keep = match preferred_tprime_at(sys, level, &opts.analysis) {
                Ok(t) => t.abs() < ta.abs().min(tb.abs()),
                Err(_) => false,
            };
            Ok(keep.then_some(CriticalLevel { level, error }))
        })
        .collect::<Result<_>>()?;
    Ok(refined.into_iter().flatten().collect())
}
