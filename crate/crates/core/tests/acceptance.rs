//! Acceptance suite. Runs without the libtest harness so each criterion
//! prints exactly one PASS/FAIL line; the process fails if any criterion does.

use std::f64::consts::{FRAC_PI_4, PI, TAU};
use std::process::ExitCode;
use std::time::Instant;

use planar_period::expr::{differentiate, fold, parse, Var};
use planar_period::fields::builtin_system;
use planar_period::flow::{find_cycle, CycleOptions};
use planar_period::liecalc::{
    mu_fgg, mu_from_bracket, mu_hamiltonian, normalizer_gradient, normalizer_kappa, reparametrize_mu, Univariate,
};
use planar_period::period::{
    analyze_level, build_normalizer, critical_cycles, default_normalizer, locate_anchor, scan_annulus,
    tprime_fd_route, tprime_mu_route, AnalysisOptions, Classification, NormalizerKind, ScanOptions,
};
use planar_period::verify::{check_eta_perp, check_normalizer, check_rif, verify_builtins, Region, VerifyOptions};
use planar_period::{Error, Point, ScalarField, SystemDef};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn sys(name: &str) -> Result<SystemDef, String> {
    builtin_system(name).map_err(|e| e.to_string())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn pairwise_rel(values: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, a) in values.iter().enumerate() {
        for b in &values[i + 1..] {
            worst = worst.max((a - b).abs() / a.abs().max(b.abs()));
        }
    }
    worst
}

fn harmonic_isochrony() -> Outcome {
    let s = sys("harmonic")?;
    let scan = scan_annulus(&s, (0.1, 2.0), 8, &ScanOptions::default()).map_err(|e| e.to_string())?;
    ensure!(scan.reports.len() == 8, "{} of 8 levels succeeded", scan.reports.len());
    let (mut dt, mut dtp) = (0.0_f64, 0.0_f64);
    for r in &scan.reports {
        dt = dt.max((r.period - TAU).abs());
        for v in [r.tprime_mu, r.tprime_etabeta, r.tprime_fd] {
            let v = v.ok_or_else(|| format!("route missing at H = {}", r.level))?;
            dtp = dtp.max(v.abs());
        }
    }
    ensure!(dt <= 1e-8, "max |T - 2pi| = {:.2e}", dt);
    ensure!(dtp <= 1e-7, "max |T'| = {:.2e}", dtp);
    ensure!(
        scan.classification == Classification::Isochronous,
        "classified {}",
        scan.classification
    );
    Ok(format!("max |T - 2pi| {:.1e}, max |T'| {:.1e}, isochronous", dt, dtp))
}

fn rotational_closed_form() -> Outcome {
    let s = sys("rotational:2+(x^2+y^2)")?;
    let (mut et, mut ea, mut ep) = (0.0_f64, 0.0_f64, 0.0_f64);
    for h in [0.25, 0.5, 1.0] {
        let r = analyze_level(&s, h, &AnalysisOptions::default()).map_err(|e| e.to_string())?;
        let t = TAU / (2.0 + 2.0 * h);
        // derivative of the closed form 2pi/(2+2H)
        let tp = -4.0 * PI / (2.0 + 2.0 * h).powi(2);
        let routes: Vec<f64> = [r.tprime_mu, r.tprime_etabeta, r.tprime_fd]
            .into_iter()
            .collect::<Option<_>>()
            .ok_or_else(|| format!("route missing at H = {}: {:?}", h, r.diagnostics))?;
        et = et.max(rel(r.period, t));
        ea = ea.max(rel(routes[0], tp));
        ep = ep.max(pairwise_rel(&routes));
    }
    ensure!(et <= 1e-7, "T relative error {:.2e}", et);
    ensure!(ea <= 1e-5, "route A relative error {:.2e}", ea);
    ensure!(ep <= 1e-4, "routes disagree by {:.2e}", ep);
    Ok(format!("T {:.1e}, route A {:.1e}, pairwise {:.1e}", et, ea, ep))
}

fn critical_cycle() -> Outcome {
    let s = sys("rotational:2+sin(x^2+y^2)")?;
    let opts = ScanOptions {
        refine_critical: false,
        ..ScanOptions::default()
    };
    let scan = scan_annulus(&s, (0.2, 1.4), 8, &opts).map_err(|e| e.to_string())?;
    let crit = critical_cycles(&s, &scan, &opts).map_err(|e| e.to_string())?;
    ensure!(crit.len() == 1, "{} critical levels: {:?}", crit.len(), crit);
    let err = (crit[0].level - FRAC_PI_4).abs();
    ensure!(err <= 1e-4, "H* = {} off by {:.2e}", crit[0].level, err);
    Ok(format!("H* = {:.9}, |H* - pi/4| {:.1e}", crit[0].level, err))
}

fn quartic_scaling() -> Outcome {
    let s = sys("quartic")?;
    let mut worst = 0.0_f64;
    for h in [0.5, 1.0, 2.0] {
        let r = analyze_level(&s, h, &AnalysisOptions::default()).map_err(|e| e.to_string())?;
        for v in [r.tprime_mu, r.tprime_etabeta, r.tprime_fd] {
            let v = v.ok_or_else(|| format!("route missing at H = {}", h))?;
            worst = worst.max((v * 4.0 * h / r.period + 1.0).abs());
        }
    }
    ensure!(worst <= 1e-3, "|T' 4H/T + 1| = {:.2e}", worst);
    Ok(format!("max |T' 4H/T + 1| {:.1e}", worst))
}

fn twowell_outer_annulus() -> Outcome {
    let s = sys("twowell")?;
    let sep = s.separable.clone().ok_or("no separable splitting")?;
    let gradient = build_normalizer(&s, &NormalizerKind::Gradient).map_err(|e| e.to_string())?;
    let separable = build_normalizer(&s, &NormalizerKind::Separable).map_err(|e| e.to_string())?;
    let opts = AnalysisOptions::default();
    let mut worst = 0.0_f64;
    for h in [2.0, 3.0, 5.0] {
        let z = locate_anchor(&s, h, None).map_err(|e| e.to_string())?;
        let cycle = find_cycle(&s.v, z, &opts.cycle).map_err(|e| e.to_string())?;
        let a = tprime_mu_route(&s, &cycle, &gradient).map_err(|e| format!("gradient route at H = {}: {}", h, e))?;
        let guard_hit = cycle
            .sample_points(64)
            .into_iter()
            .chain([z])
            .any(|p| matches!(mu_fgg(&sep, p), Err(Error::Guard { .. })));
        ensure!(guard_hit, "no guard violation of the separable formula at H = {}", h);
        match tprime_mu_route(&s, &cycle, &separable) {
            Err(Error::Guard { .. }) => {}
            other => return Err(format!("separable route at H = {} gave {:?}", h, other)),
        }
        let c = tprime_fd_route(&s, h, z, 1e-4 * (1.0 + h), &CycleOptions {
            tol: opts.fd_tol,
            ..opts.cycle
        })
        .map_err(|e| e.to_string())?;
        worst = worst.max(rel(a, c));
    }
    ensure!(worst <= 1e-4, "route A vs C {:.2e}", worst);
    Ok(format!("guard violations on all cycles, A vs C {:.1e}", worst))
}

fn kappa_end_to_end() -> Outcome {
    let s = sys("harmonic-rif:exp(x)")?;
    let kappa = s.kappa.clone().ok_or("no kappa")?;
    let region = Region::Annulus {
        h: s.require_h().map_err(|e| e.to_string())?.clone(),
        center: Point::new(0.0, 0.0),
        levels: (0.1, 2.0),
    };
    let rif = check_rif(&s.v, &kappa, &region, 64, 0).map_err(|e| e.to_string())?;
    ensure!(rif.pass, "RIF check max residual {:.2e}", rif.max_residual);
    let n = normalizer_kappa(&s.v, &kappa);
    let norm = check_normalizer(&s.v, &n.w, &region, 64, 0).map_err(|e| e.to_string())?;
    ensure!(
        norm.pass && norm.max_residual <= 1e-8,
        "normalizer residual {:.2e}",
        norm.max_residual
    );
    let opts = AnalysisOptions {
        normalizer: Some(n),
        ..AnalysisOptions::default()
    };
    let mut worst = 0.0_f64;
    for h in [0.25, 0.5, 1.0] {
        let r = analyze_level(&s, h, &opts).map_err(|e| e.to_string())?;
        let (a, c) = r.tprime_mu.zip(r.tprime_fd).ok_or_else(|| format!("route missing at H = {}", h))?;
        worst = worst.max(rel(a, c));
    }
    ensure!(worst <= 1e-4, "route A vs C {:.2e}", worst);
    let perp = check_eta_perp(&s.v, &kappa, &region, 64, 0).map_err(|e| e.to_string())?;
    ensure!(perp.pass, "eta-perp residual {:.2e}", perp.max_residual);
    Ok(format!(
        "rif {:.1e}, normalizer {:.1e}, A vs C {:.1e}, eta-perp {:.1e}",
        rif.max_residual, norm.max_residual, worst, perp.max_residual
    ))
}

fn identity_suite() -> Outcome {
    let reports = verify_builtins(&VerifyOptions::default()).map_err(|e| e.to_string())?;
    let failed: Vec<String> = reports
        .iter()
        .filter(|r| !r.pass)
        .map(|r| format!("{}/{}", r.system.as_deref().unwrap_or("?"), r.name))
        .collect();
    ensure!(failed.is_empty(), "failing checks: {}", failed.join(", "));
    for kind in ["normalizer", "level_rate", "wazewski"] {
        ensure!(
            reports.iter().any(|r| r.name.starts_with(kind)),
            "no {} checks ran",
            kind
        );
    }
    let mut worst = 0.0_f64;
    for (name, level) in [("quartic", 0.5), ("rotational:2+(x^2+y^2)", 0.5), ("twowell", 3.0), ("harmonic-rif:exp(x)", 0.5)] {
        let s = sys(name)?;
        let z = locate_anchor(&s, level, None).map_err(|e| e.to_string())?;
        let cycle = find_cycle(&s.v, z, &CycleOptions::default()).map_err(|e| e.to_string())?;
        let base = tprime_mu_route(&s, &cycle, &default_normalizer(&s).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let mut kinds: Vec<NormalizerKind> = ["1", "2", "h"]
            .iter()
            .map(|z| Univariate::parse(z).map(NormalizerKind::Zeta))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        kinds.push(NormalizerKind::Combined {
            psi: Univariate::constant(1.0),
            g: ScalarField::parse("x").map_err(|e| e.to_string())?,
        });
        for kind in &kinds {
            let n = build_normalizer(&s, kind).map_err(|e| e.to_string())?;
            let t = tprime_mu_route(&s, &cycle, &n).map_err(|e| format!("{} {:?}: {}", name, kind, e))?;
            worst = worst.max((t - base).abs());
        }
    }
    ensure!(worst <= 1e-7, "family spread {:.2e}", worst);
    Ok(format!("{} checks pass, family spread {:.1e}", reports.len(), worst))
}

fn reparametrization_coherence() -> Outcome {
    let harmonic = sys("harmonic")?;
    let rif = sys("harmonic-rif:exp(x)")?;
    let h = harmonic.require_h().map_err(|e| e.to_string())?;
    let kappa = rif.kappa.clone().ok_or("no kappa")?;
    let wh = normalizer_gradient(h).w;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0_f64;
    for _ in 0..50 {
        let (r, a) = (rng.gen_range(0.2..2.0), rng.gen_range(0.0..TAU));
        let p = Point::new(r * a.cos(), r * a.sin());
        let mu = mu_hamiltonian(h, p).map_err(|e| e.to_string())?;
        let lifted = reparametrize_mu(mu, &wh, &kappa, p).map_err(|e| e.to_string())?;
        let direct = mu_from_bracket(&rif.v, &wh, p).map_err(|e| e.to_string())?;
        worst = worst.max((lifted - direct).abs());
    }
    ensure!(worst <= 1e-10, "max difference {:.2e}", worst);
    Ok(format!("50 points, max difference {:.1e}", worst))
}

/// Random expression text whose value and derivatives are finite everywhere.
fn random_expr(rng: &mut ChaCha8Rng, depth: u32) -> String {
    if depth == 0 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..5) {
            0 | 1 => "x".into(),
            2 | 3 => "y".into(),
            _ => format!("{:.3}", rng.gen_range(-2.0..2.0)),
        };
    }
    let mut sub = || random_expr(rng, depth - 1);
    let (a, b) = (sub(), sub());
    match rng.gen_range(0..13) {
        0 => format!("({}+{})", a, b),
        1 => format!("({}-{})", a, b),
        2 | 3 => format!("({}*{})", a, b),
        4 => format!("{}/(1.5+({})^2)", a, b),
        5 => format!("({})^{}", a, rng.gen_range(2..4)),
        6 => format!("sin({})", a),
        7 => format!("cos({})", a),
        8 => format!("tanh({})", a),
        9 => format!("exp(sin({}))", a),
        10 => format!("sqrt(1+({})^2)", a),
        11 => format!("ln(2+cos({}))", a),
        // constant subtrees and identities for the folder
        _ => format!("(2*3-5)*{} + 0*{} + {}^1", a, b, a),
    }
}

/// Richardson-extrapolated central difference.
fn fd(f: impl Fn(f64) -> f64, t: f64) -> f64 {
    let d = |h: f64| (f(t + h) - f(t - h)) / (2.0 * h);
    let h = 1e-3 * (1.0 + t.abs());
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

fn parser_and_derivatives() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0_f64;
    for i in 0..100 {
        let text = random_expr(&mut rng, 4);
        let e = parse(&text).map_err(|err| format!("parse `{}`: {}", text, err))?;
        let p = Point::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
        let raw = e.evaluate(p).map_err(|err| format!("`{}`: {}", text, err))?;
        let folded = fold(&e).evaluate(p).map_err(|err| format!("folded `{}`: {}", text, err))?;
        ensure!(raw == folded, "pair {}: fold changed `{}` from {} to {}", i, text, raw, folded);
        let ev = |x: f64, y: f64| e.eval_xy(x, y).expect("finite by construction");
        for (var, num) in [
            (Var::X, fd(|t| ev(t, p.y), p.x)),
            (Var::Y, fd(|t| ev(p.x, t), p.y)),
        ] {
            let d = differentiate(&e, var).map_err(|err| err.to_string())?;
            let sym = d.evaluate(p).map_err(|err| err.to_string())?;
            // relative agreement, with a floor for derivatives that vanish
            let r = (sym - num).abs() / sym.abs().max(1e-6);
            ensure!(r <= 1e-5, "pair {}: d/d{:?} `{}` at {}: {} vs {}", i, var, text, p, sym, num);
            worst = worst.max(r);
        }
    }
    Ok(format!("100 pairs, max relative {:.1e}, fold exact", worst))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("harmonic isochrony", harmonic_isochrony),
        ("rotational closed form", rotational_closed_form),
        ("critical cycle", critical_cycle),
        ("quartic scaling law", quartic_scaling),
        ("two-well outer annulus", twowell_outer_annulus),
        ("kappa normalizer end to end", kappa_end_to_end),
        ("identity suite", identity_suite),
        ("reparametrization coherence", reparametrization_coherence),
        ("parser and derivatives", parser_and_derivatives),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {}. {:<28} {} ({:.2}s)", i + 1, name, detail, secs),
            Err(detail) => {
                failures += 1;
                println!("FAIL  {}. {:<28} {} ({:.2}s)", i + 1, name, detail, secs);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
