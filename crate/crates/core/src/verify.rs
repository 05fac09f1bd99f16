//! Numerical oracles for the bracket identities, sampled on low-discrepancy
//! point sets, with machine-readable residual reports.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{dot, norm2, Point, Provenance, ScalarField, SystemDef, VectorField};
use crate::flow::{find_cycle, Cycle, CycleOptions};
use crate::liecalc::{eta, lie_bracket, mu_kappa, wazewski_decompose, wedge};
use crate::period::{default_normalizer, locate_anchor};
use crate::roots::first_root_along;

/// At most this many failing samples are listed in a report.
pub const MAX_LISTED_FAILURES: usize = 16;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SampleFailure {
    pub point: Point,
    pub residual: f64,
}

/// `ξ(H)` recovered from one cycle in the level-rate check.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct XiEntry {
    pub level: f64,
    pub xi: f64,
    pub spread: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub name: String,
    pub system: Option<String>,
    pub samples: usize,
    /// Samples rejected by a guard, tangency or domain error.
    pub skipped: usize,
    pub max_residual: f64,
    pub mean_residual: f64,
    /// How residuals are normalized.
    pub scale: String,
    pub tolerance: f64,
    pub pass: bool,
    pub seed: u64,
    pub failures: Vec<SampleFailure>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi_table: Option<Vec<XiEntry>>,
}

impl VerificationReport {
    fn from_residuals(
        name: &str,
        scale: &str,
        tolerance: f64,
        seed: u64,
        skipped: usize,
        residuals: &[(Point, f64)],
    ) -> Result<VerificationReport> {
        if residuals.is_empty() {
            return Err(Error::EmptySample(name.to_string()));
        }
        let max = residuals.iter().map(|r| r.1).fold(0.0, f64::max);
        let mean = residuals.iter().map(|r| r.1).sum::<f64>() / residuals.len() as f64;
        // NaN residuals count as failures
        let failing = |r: f64| !(r <= tolerance);
        let failures = residuals
            .iter()
            .filter(|r| failing(r.1))
            .take(MAX_LISTED_FAILURES)
            .map(|&(point, residual)| SampleFailure { point, residual })
            .collect();
        Ok(VerificationReport {
            name: name.to_string(),
            system: None,
            samples: residuals.len(),
            skipped,
            max_residual: max,
            mean_residual: mean,
            scale: scale.to_string(),
            tolerance,
            pass: !residuals.iter().any(|r| failing(r.1)),
            seed,
            failures,
            xi_table: None,
        })
    }

    pub fn for_system(mut self, name: &str) -> Self {
        self.system = Some(name.to_string());
        self
    }
}

/// Where checks draw their sample points.
#[derive(Debug, Clone)]
pub enum Region {
    /// Points on level sets `H = h`, `h` in `levels`, hit by rays from
    /// `center` at quasi-random angles.
    Annulus {
        h: ScalarField,
        center: Point,
        levels: (f64, f64),
    },
    Rectangle { x: (f64, f64), y: (f64, f64) },
}

/// Radical inverse of `i` in base `b`.
fn radical_inverse(mut i: u64, b: u64) -> f64 {
    let (mut f, mut r) = (1.0, 0.0);
    while i > 0 {
        f /= b as f64;
        r += f * (i % b) as f64;
        i /= b;
    }
    r
}

/// 2-D Halton points in the unit square; `seed` offsets the sequence.
pub fn halton(n: usize, seed: u64) -> Vec<(f64, f64)> {
    (0..n as u64)
        .map(|i| {
            let k = seed + i + 1;
            (radical_inverse(k, 2), radical_inverse(k, 3))
        })
        .collect()
}

impl Region {
    /// Up to `n` points; rays that miss their level set are dropped.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<Point> {
        let unit = halton(n, seed);
        match self {
            Region::Rectangle { x, y } => unit
                .into_iter()
                .map(|(u, v)| Point::new(x.0 + u * (x.1 - x.0), y.0 + v * (y.1 - y.0)))
                .collect(),
            Region::Annulus { h, center, levels } => unit
                .into_iter()
                .filter_map(|(u, v)| {
                    let level = levels.0 + u * (levels.1 - levels.0);
                    let th = std::f64::consts::TAU * v;
                    let d = [th.cos(), th.sin()];
                    let scale = 1.0 + center.norm();
                    first_root_along(
                        |s| Ok(h.value(center.offset(d, s))? - level),
                        0.0,
                        1e-3 * scale,
                        1e3 * scale,
                        1e-14 * (1.0 + level.abs()),
                    )
                    .ok()
                    .map(|s| center.offset(d, s))
                })
                .collect(),
        }
    }
}

fn symbolic(fields: &[Provenance]) -> bool {
    fields.iter().all(|p| *p == Provenance::Symbolic)
}

fn run_pointwise<F>(
    name: &str,
    scale: &str,
    tolerance: f64,
    region: &Region,
    n: usize,
    seed: u64,
    residual: F,
) -> Result<VerificationReport>
where
    F: Fn(Point) -> Result<f64>,
{
    let pts = region.sample(n, seed);
    let mut skipped = n - pts.len();
    let mut residuals = Vec::with_capacity(pts.len());
    for p in pts {
        match residual(p) {
            Ok(r) => residuals.push((p, r)),
            Err(_) => skipped += 1,
        }
    }
    VerificationReport::from_residuals(name, scale, tolerance, seed, skipped, &residuals)
}

/// `[V,W] ∧ V = 0`.
pub fn check_normalizer(v: &VectorField, w: &VectorField, region: &Region, n: usize, seed: u64) -> Result<VerificationReport> {
    let tol = if symbolic(&[v.provenance(), w.provenance()]) { 1e-8 } else { 1e-4 };
    run_pointwise(
        "normalizer",
        "|[V,W]^V| / (1 + |V|^2 (1 + |W|))",
        tol,
        region,
        n,
        seed,
        |p| {
            let (vv, wv) = (v.value(p)?, w.value(p)?);
            let br = lie_bracket(v, w, p)?;
            Ok(wedge(br, vv).abs() / (1.0 + norm2(vv) * (1.0 + norm2(wv).sqrt())))
        },
    )
}

/// `∂_W H` is constant on each cycle. Reports the per-cycle spread relative
/// to `1 + |mean|` and the recovered `ξ(H)` table.
pub fn check_level_rate(w: &VectorField, h: &ScalarField, cycles: &[Cycle], per_cycle: usize) -> Result<VerificationReport> {
    let name = "level_rate";
    if per_cycle < 8 {
        return Err(Error::Invalid(format!("{}: need at least 8 samples per cycle", name)));
    }
    let mut levels: Vec<f64> = Vec::new();
    for c in cycles {
        levels.push(h.value(c.anchor)?);
    }
    let mut distinct = levels.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
    if distinct.len() < 2 {
        return Err(Error::Invalid(format!("{}: need cycles at 2 or more distinct levels", name)));
    }
    let mut residuals = Vec::new();
    let mut table = Vec::new();
    for (c, level) in cycles.iter().zip(levels) {
        let mut vals = Vec::with_capacity(per_cycle);
        for p in c.sample_points(per_cycle) {
            vals.push(dot(h.gradient(p)?, w.value(p)?));
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let spread = vals.iter().fold(f64::MIN, |m, &v| m.max(v)) - vals.iter().fold(f64::MAX, |m, &v| m.min(v));
        table.push(XiEntry { level, xi: mean, spread });
        residuals.push((c.anchor, spread / (1.0 + mean.abs())));
    }
    let mut r = VerificationReport::from_residuals(
        name,
        "per-cycle spread of grad H . W / (1 + |mean|)",
        1e-8,
        0,
        0,
        &residuals,
    )?;
    r.xi_table = Some(table);
    Ok(r)
}

/// `∂_V κ = κ div V`.
pub fn check_rif(v: &VectorField, kappa: &ScalarField, region: &Region, n: usize, seed: u64) -> Result<VerificationReport> {
    let tol = if symbolic(&[v.provenance(), kappa.provenance()]) { 1e-9 } else { 1e-4 };
    run_pointwise(
        "rif",
        "|d_V kappa - kappa div V| / (1 + |kappa| |V|)",
        tol,
        region,
        n,
        seed,
        |p| {
            let vv = v.value(p)?;
            let k = kappa.value(p)?;
            let lhs = dot(kappa.gradient(p)?, vv);
            let rhs = k * v.divergence(p)?;
            Ok((lhs - rhs).abs() / (1.0 + k.abs() * norm2(vv).sqrt()))
        },
    )
}

/// `[V,W] = aV + bW` with the coefficients of [`wazewski_decompose`].
pub fn check_wazewski(v: &VectorField, w: &VectorField, region: &Region, n: usize, seed: u64) -> Result<VerificationReport> {
    let tol = if symbolic(&[v.provenance(), w.provenance()]) { 1e-8 } else { 1e-4 };
    run_pointwise(
        "wazewski",
        "|[V,W] - (aV + bW)| / (1 + |[V,W]| + |a||V| + |b||W|)",
        tol,
        region,
        n,
        seed,
        |p| {
            let (vv, wv) = (v.value(p)?, w.value(p)?);
            let br = lie_bracket(v, w, p)?;
            let (a, b) = wazewski_decompose(v, w, p)?;
            let rec = [a * vv[0] + b * wv[0], a * vv[1] + b * wv[1]];
            let err = norm2([br[0] - rec[0], br[1] - rec[1]]).sqrt();
            let scale = 1.0 + norm2(br).sqrt() + (a * a * norm2(vv)).sqrt() + (b * b * norm2(wv)).sqrt();
            Ok(err / scale)
        },
    )
}

/// `μ_κ = η(V, V⊥) κ / |V|²`.
pub fn check_eta_perp(v: &VectorField, kappa: &ScalarField, region: &Region, n: usize, seed: u64) -> Result<VerificationReport> {
    let tol = if symbolic(&[v.provenance(), kappa.provenance()]) { 1e-8 } else { 1e-4 };
    let perp = v.perpendicular();
    run_pointwise(
        "eta_perp",
        "|mu_kappa - eta(V, V_perp) kappa / |V|^2| / (1 + |mu_kappa|)",
        tol,
        region,
        n,
        seed,
        |p| {
            let mu = mu_kappa(v, kappa, p)?;
            let e = eta(v, &perp, p)?;
            let other = e * kappa.value(p)? / norm2(v.value(p)?);
            Ok((mu - other).abs() / (1.0 + mu.abs()))
        },
    )
}

/// Settings for [`verify_system`].
#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub samples: usize,
    pub seed: u64,
    /// Level band for annulus sampling; `None` derives one from the
    /// system's annulus hint.
    pub levels: Option<(f64, f64)>,
    /// Number of cycles for the level-rate check.
    pub cycles: usize,
    pub per_cycle: usize,
    /// Additional field to test as a normalizer.
    pub extra_normalizer: Option<VectorField>,
    pub cycle: CycleOptions,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            samples: 64,
            seed: 0,
            levels: None,
            cycles: 3,
            per_cycle: 16,
            extra_normalizer: None,
            cycle: CycleOptions::default(),
        }
    }
}

/// Level band used when none is given: a window of width 2 just inside the
/// annulus hint.
pub fn default_levels(sys: &SystemDef) -> (f64, f64) {
    let (lo, hi) = sys.annulus_hint.unwrap_or((0.0, f64::INFINITY));
    let a = lo + 0.2;
    let b = if hi.is_finite() { (lo + 2.2).min(hi - 0.05 * (hi - lo)) } else { lo + 2.2 };
    (a, b.max(a + 1e-3))
}

fn region_for(sys: &SystemDef, opts: &VerifyOptions) -> Region {
    match (&sys.h, sys.center_hint) {
        (Some(h), Some(center)) => Region::Annulus {
            h: h.clone(),
            center,
            levels: opts.levels.unwrap_or_else(|| default_levels(sys)),
        },
        _ => Region::Rectangle {
            x: (-2.0, 2.0),
            y: (-2.0, 2.0),
        },
    }
}

/// Every check applicable to `sys`. Errors of individual checks become
/// failing reports so one bad check does not hide the others.
pub fn verify_system(sys: &SystemDef, opts: &VerifyOptions) -> Vec<VerificationReport> {
    let region = region_for(sys, opts);
    let (n, seed) = (opts.samples, opts.seed);
    let unit = ScalarField::constant(1.0);
    let kappa = sys.kappa.clone().or_else(|| sys.hamiltonian.then(|| unit.clone()));
    let normalizer = default_normalizer(sys);

    type Job<'a> = (String, Box<dyn Fn() -> Result<VerificationReport> + Send + Sync + 'a>);
    let mut jobs: Vec<Job> = Vec::new();
    if let Ok(nf) = &normalizer {
        let tag = nf.construction().to_string();
        let w = nf.w.clone();
        let r = region.clone();
        jobs.push((
            format!("normalizer({})", tag),
            Box::new(move || check_normalizer(&sys.v, &w, &r, n, seed)),
        ));
        let w = nf.w.clone();
        let r = region.clone();
        jobs.push((
            format!("wazewski({})", tag),
            Box::new(move || check_wazewski(&sys.v, &w, &r, n, seed)),
        ));
        let w = nf.w.clone();
        jobs.push((
            format!("level_rate({})", tag),
            Box::new(move || {
                let h = sys.require_h()?;
                let (lo, hi) = match &region_for(sys, opts) {
                    Region::Annulus { levels, .. } => *levels,
                    Region::Rectangle { .. } => default_levels(sys),
                };
                let k = opts.cycles.max(2);
                let mut cycles = Vec::with_capacity(k);
                for i in 0..k {
                    let level = lo + (hi - lo) * i as f64 / (k - 1) as f64;
                    let z = locate_anchor(sys, level, None)?;
                    cycles.push(find_cycle(&sys.v, z, &opts.cycle)?);
                }
                check_level_rate(&w, h, &cycles, opts.per_cycle)
            }),
        ));
    }
    if let (Some(sep), true) = (&sys.separable, sys.hamiltonian) {
        let w = crate::liecalc::normalizer_separable(sep).w;
        let r = region.clone();
        jobs.push((
            "normalizer(separable)".into(),
            Box::new(move || check_normalizer(&sys.v, &w, &r, n, seed)),
        ));
    }
    {
        let r = region.clone();
        jobs.push((
            "wazewski(perpendicular)".into(),
            Box::new(move || check_wazewski(&sys.v, &sys.v.perpendicular(), &r, n, seed)),
        ));
    }
    if let Some(k) = kappa {
        let (k1, r1) = (k.clone(), region.clone());
        jobs.push(("rif".into(), Box::new(move || check_rif(&sys.v, &k1, &r1, n, seed))));
        let r2 = region.clone();
        jobs.push(("eta_perp".into(), Box::new(move || check_eta_perp(&sys.v, &k, &r2, n, seed))));
    }
    if let Some(w) = opts.extra_normalizer.clone() {
        let r = region.clone();
        jobs.push((
            "normalizer(custom)".into(),
            Box::new(move || check_normalizer(&sys.v, &w, &r, n, seed)),
        ));
    }

    jobs.par_iter()
        .map(|(name, job)| {
            let mut rep = job().unwrap_or_else(|e| failed_report(name, &e, seed));
            rep.name = name.clone();
            rep.for_system(&sys.name)
        })
        .collect()
}

fn failed_report(name: &str, e: &Error, seed: u64) -> VerificationReport {
    VerificationReport {
        name: name.to_string(),
        system: None,
        samples: 0,
        skipped: 0,
        max_residual: f64::NAN,
        mean_residual: f64::NAN,
        scale: format!("error: {}", e),
        tolerance: 0.0,
        pass: false,
        seed,
        failures: Vec::new(),
        xi_table: None,
    }
}

/// Built-in systems exercised by the full verification run.
pub const BATCH_SYSTEMS: &[&str] = &[
    "eikonal",
    "harmonic",
    "harmonic-rif:exp(x)",
    "quartic",
    "rotational:2+(x^2+y^2)",
    "rotational:2+sin(x^2+y^2)",
    "twowell",
];

/// [`verify_system`] over [`BATCH_SYSTEMS`] in parallel, in list order.
pub fn verify_builtins(opts: &VerifyOptions) -> Result<Vec<VerificationReport>> {
    let systems = BATCH_SYSTEMS
        .iter()
        .map(|n| crate::fields::builtin_system(n))
        .collect::<Result<Vec<_>>>()?;
    Ok(systems
        .par_iter()
        .map(|s| verify_system(s, opts))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect())
}
