//! Adaptive integration of planar fields, return-map period detection and
//! quadrature along cycles.

mod dopri;

pub use dopri::{Step, Tolerances};

use dopri::Stepper;

use crate::error::{Error, Result};
use crate::fields::{dot, Point, ScalarField, VectorField};
use crate::roots::refine;

/// Accepted steps of one integration, with dense output between nodes.
#[derive(Debug, Clone)]
pub struct Trajectory<const N: usize = 2> {
    pub steps: Vec<Step<N>>,
    pub t0: f64,
    pub y0: [f64; N],
    /// Right-hand-side evaluations, rejected steps included.
    pub nfev: usize,
}

impl<const N: usize> Trajectory<N> {
    pub fn t_end(&self) -> f64 {
        self.steps.last().map_or(self.t0, |s| s.t0 + s.h)
    }

    pub fn end_state(&self) -> [f64; N] {
        self.steps.last().map_or(self.y0, |s| s.y1)
    }

    /// Node times, starting with `t0`.
    pub fn times(&self) -> Vec<f64> {
        std::iter::once(self.t0).chain(self.steps.iter().map(|s| s.t0 + s.h)).collect()
    }

    /// Node states, starting with the initial state.
    pub fn states(&self) -> Vec<[f64; N]> {
        std::iter::once(self.y0).chain(self.steps.iter().map(|s| s.y1)).collect()
    }

    /// Dense output; `t` is clamped to the integrated interval.
    pub fn interpolate(&self, t: f64) -> [f64; N] {
        if self.steps.is_empty() || t <= self.t0 {
            return self.y0;
        }
        let i = self.steps.partition_point(|s| s.t0 + s.h < t);
        match self.steps.get(i) {
            Some(s) => s.interpolate(t),
            None => self.end_state(),
        }
    }

    pub fn max_step_error(&self) -> f64 {
        self.steps.iter().map(|s| s.err).fold(0.0, f64::max)
    }
}

impl Trajectory<2> {
    pub fn point_at(&self, t: f64) -> Point {
        Point::from(self.interpolate(t))
    }

    pub fn points(&self) -> Vec<Point> {
        self.states().into_iter().map(Point::from).collect()
    }
}

/// Integrate a general autonomous system `y' = f(y)` from `y0` over `[0, t_end]`.
pub fn integrate_system<const N: usize, F>(mut f: F, y0: [f64; N], t_end: f64, tol: Tolerances) -> Result<Trajectory<N>>
where
    F: FnMut(&[f64; N]) -> Result<[f64; N]>,
{
    if !(t_end > 0.0) {
        return Err(Error::Invalid(format!("integration end time must be positive, got {}", t_end)));
    }
    let mut stepper = Stepper::new(move |_, y: &[f64; N]| f(y), 0.0, y0, t_end, tol)?;
    let mut steps = Vec::new();
    while stepper.t < t_end {
        steps.push(stepper.step(t_end)?);
    }
    Ok(Trajectory {
        steps,
        t0: 0.0,
        y0,
        nfev: stepper.nfev,
    })
}

/// Flow of `V` from `z0` over `[0, t_end]`.
pub fn integrate(v: &VectorField, z0: Point, t_end: f64, tol: Tolerances) -> Result<Trajectory> {
    integrate_system(|y: &[f64; 2]| v.value(Point::new(y[0], y[1])), [z0.x, z0.y], t_end, tol)
}

/// Options for [`find_cycle`].
#[derive(Debug, Clone, Copy)]
pub struct CycleOptions {
    pub tol: Tolerances,
    /// Accepted distance of a section crossing from the anchor; defaults to
    /// `1e-5·(1+|z0|)`.
    pub ret_radius: Option<f64>,
    pub t_max: f64,
}

impl Default for CycleOptions {
    fn default() -> Self {
        CycleOptions {
            tol: Tolerances::default(),
            ret_radius: None,
            t_max: 1e4,
        }
    }
}

/// A closed orbit through `anchor`.
#[derive(Debug, Clone)]
pub struct Cycle {
    pub anchor: Point,
    /// Minimal period.
    pub period: f64,
    /// Value of the first integral on the cycle, when known.
    pub level: Option<f64>,
    /// Largest deviation of the first integral from `level` over the nodes.
    pub level_drift: Option<f64>,
    /// One full revolution, `[0, period]`.
    pub samples: Trajectory,
    /// `|φ(T, z0) − z0|`.
    pub closure_error: f64,
    pub tol: Tolerances,
    v: VectorField,
}

impl Cycle {
    pub fn field(&self) -> &VectorField {
        &self.v
    }

    /// Record `H(anchor)` as the level and the worst drift along the samples.
    pub fn with_level(mut self, h: &ScalarField) -> Result<Cycle> {
        let level = h.value(self.anchor)?;
        let mut drift = 0.0f64;
        for z in self.samples.points() {
            drift = drift.max((h.value(z)? - level).abs());
        }
        self.level = Some(level);
        self.level_drift = Some(drift);
        Ok(self)
    }

    pub fn closure_ok(&self) -> bool {
        self.closure_error <= 1e-8 * (1.0 + self.anchor.norm())
    }

    pub fn conservation_ok(&self) -> bool {
        match (self.level, self.level_drift) {
            (Some(l), Some(d)) => d <= 1e-8 * (1.0 + l.abs()),
            _ => true,
        }
    }

    /// `n` points at equally spaced flow times over one period.
    pub fn sample_points(&self, n: usize) -> Vec<Point> {
        (0..n)
            .map(|i| self.samples.point_at(self.period * i as f64 / n as f64))
            .collect()
    }
}

/// Locate the periodic orbit through `z0` by first return to the section
/// through `z0` orthogonal to `V(z0)`.
///
/// A return is the first crossing of `g(z) = (z − z0)·V(z0)` from negative to
/// positive that lands within the return radius. Distant crossings are kept
/// as candidates for the ambiguity diagnostic.
pub fn find_cycle(v: &VectorField, z0: Point, opts: &CycleOptions) -> Result<Cycle> {
    let normal = v.value(z0)?;
    let speed = normal[0].hypot(normal[1]);
    if !(speed > crate::liecalc::DEGENERACY_TOL * (1.0 + z0.norm())) {
        return Err(Error::Equilibrium(z0));
    }
    let radius = opts.ret_radius.unwrap_or(1e-5 * (1.0 + z0.norm()));
    let section = |y: &[f64; 2]| (y[0] - z0.x) * normal[0] + (y[1] - z0.y) * normal[1];
    let gtol = 1e-12 * speed * (1.0 + z0.norm());

    let mut stepper = Stepper::new(
        |_, y: &[f64; 2]| v.value(Point::new(y[0], y[1])),
        0.0,
        [z0.x, z0.y],
        opts.t_max,
        opts.tol,
    )?;
    let mut candidates = Vec::new();
    let mut g0 = 0.0;
    let period = loop {
        if stepper.t >= opts.t_max {
            return Err(if candidates.is_empty() {
                Error::NotPeriodic {
                    anchor: z0,
                    t_max: opts.t_max,
                }
            } else {
                Error::AmbiguousReturn { anchor: z0, candidates }
            });
        }
        let step = stepper.step(opts.t_max)?;
        let g1 = section(&step.y1);
        if g0 < 0.0 && g1 >= 0.0 {
            let t_hit = refine(
                |t| Ok(section(&step.interpolate(t))),
                step.t0,
                step.t1(),
                gtol,
                1e-15 * step.t1(),
            )?;
            let hit = Point::from(step.interpolate(t_hit));
            if hit.dist(z0) <= radius {
                break t_hit;
            }
            candidates.push((t_hit, hit));
        }
        g0 = g1;
    };

    let samples = integrate(v, z0, period, opts.tol)?;
    let end = Point::from(samples.end_state());
    Ok(Cycle {
        anchor: z0,
        period,
        level: None,
        level_drift: None,
        closure_error: end.dist(z0),
        samples,
        tol: opts.tol,
        v: v.clone(),
    })
}

/// `∫₀ᵀ f(γ(t)) dt` by integrating the augmented state `(z, m)` with
/// `m' = f(z)` over one period under the cycle's tolerances.
pub fn quadrature_along<F>(cycle: &Cycle, f: F) -> Result<f64>
where
    F: Fn(Point) -> Result<f64>,
{
    let v = &cycle.v;
    let traj = integrate_system(
        |y: &[f64; 3]| {
            let z = Point::new(y[0], y[1]);
            let [a, b] = v.value(z)?;
            Ok([a, b, f(z)?])
        },
        [cycle.anchor.x, cycle.anchor.y, 0.0],
        cycle.period,
        cycle.tol,
    )?;
    Ok(traj.end_state()[2])
}

/// Values of `β(γ(t)) = β₀ exp(−∫₀ᵗ ν)` along one period.
#[derive(Debug, Clone)]
pub struct BetaProfile {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// `β(T)/β(0)`.
    pub holonomy: f64,
}

pub fn beta_along<F>(cycle: &Cycle, nu: F, beta0: f64) -> Result<BetaProfile>
where
    F: Fn(Point) -> Result<f64>,
{
    if !(beta0 > 0.0) {
        return Err(Error::Invalid(format!("beta0 must be positive, got {}", beta0)));
    }
    let v = &cycle.v;
    let traj = integrate_system(
        |y: &[f64; 3]| {
            let z = Point::new(y[0], y[1]);
            let [a, b] = v.value(z)?;
            Ok([a, b, -nu(z)?])
        },
        [cycle.anchor.x, cycle.anchor.y, 0.0],
        cycle.period,
        cycle.tol,
    )?;
    let values: Vec<f64> = traj.states().iter().map(|s| beta0 * s[2].exp()).collect();
    Ok(BetaProfile {
        times: traj.times(),
        holonomy: traj.end_state()[2].exp(),
        values,
    })
}

/// `∂_V g = ∇g · V`, a convenience for integrands that are exact derivatives.
pub fn derivative_along_flow(g: &ScalarField, v: &VectorField, p: Point) -> Result<f64> {
    Ok(dot(g.gradient(p)?, v.value(p)?))
}
