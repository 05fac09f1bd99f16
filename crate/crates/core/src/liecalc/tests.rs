use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::fields::{builtin_system, hamiltonian_field, Point};

fn p(x: f64, y: f64) -> Point {
    Point::new(x, y)
}

fn scalar(s: &str) -> ScalarField {
    ScalarField::parse(s).unwrap()
}

fn random_points(n: usize, seed: u64, r: (f64, f64)) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let rad = rng.gen_range(r.0..r.1);
            let th = rng.gen_range(0.0..std::f64::consts::TAU);
            p(rad * th.cos(), rad * th.sin())
        })
        .collect()
}

/// Divergence of `W_H` by central differences of `W_H` itself.
fn fd_divergence_of_unit_gradient(h: &ScalarField, z: Point) -> f64 {
    let w = |q: Point| {
        let g = h.gradient(q).unwrap();
        let s = g[0] * g[0] + g[1] * g[1];
        [g[0] / s, g[1] / s]
    };
    let e = 1e-5;
    (w(p(z.x + e, z.y))[0] - w(p(z.x - e, z.y))[0]) / (2.0 * e)
        + (w(p(z.x, z.y + e))[1] - w(p(z.x, z.y - e))[1]) / (2.0 * e)
}

#[test]
fn wedge_basics() {
    assert_eq!(wedge([1.0, 0.0], [0.0, 1.0]), 1.0);
    assert_eq!(wedge([2.5, -1.0], [2.5, -1.0]), 0.0);
}

#[test]
fn hamiltonian_field_wedge_gradient_normalizer_is_one() {
    let h = scalar("y^2 + (x^2-1)^2");
    let v = hamiltonian_field(&h);
    let n = normalizer_gradient(&h);
    for z in random_points(50, 1, (1.6, 2.0)) {
        let vw = wedge(v.value(z).unwrap(), n.w.value(z).unwrap());
        assert!((vw - 1.0).abs() < 1e-13, "{}", vw);
    }
}

#[test]
fn bracket_antisymmetry_and_commuting_fields() {
    let v = VectorField::parse("y", "-x").unwrap();
    let d = VectorField::parse("x", "y").unwrap();
    assert_eq!(lie_bracket(&v, &v, p(0.3, 0.4)).unwrap(), [0.0, 0.0]);
    assert_eq!(lie_bracket(&v, &d, p(0.3, -1.4)).unwrap(), [0.0, 0.0]);

    let a = VectorField::parse("y^2 + sin(x)", "x*y").unwrap();
    let b = VectorField::parse("exp(y)", "x - y^3").unwrap();
    for z in random_points(30, 2, (0.1, 2.0)) {
        let ab = lie_bracket(&a, &b, z).unwrap();
        let ba = lie_bracket(&b, &a, z).unwrap();
        assert!((ab[0] + ba[0]).abs() < 1e-12 && (ab[1] + ba[1]).abs() < 1e-12);
    }
}

#[test]
fn quartic_bracket_is_mu_times_v() {
    let h = scalar("y^2/2 + x^4/4");
    let v = hamiltonian_field(&h);
    let n = normalizer_gradient(&h);
    let br = lie_bracket(&v, &n.w, p(1.0, 0.0)).unwrap();
    assert!((br[0] - 0.0).abs() < 1e-14 && (br[1] - 2.0).abs() < 1e-14, "{:?}", br);
    assert!((mu_hamiltonian(&h, p(1.0, 0.0)).unwrap() + 2.0).abs() < 1e-14);
    assert!((mu_from_bracket(&v, &n.w, p(1.0, 0.0)).unwrap() + 2.0).abs() < 1e-14);
    assert!((lambda_h(&h, p(1.0, 0.0)).unwrap() + 2.0).abs() < 1e-14);
}

#[test]
fn harmonic_mu_vanishes() {
    let h = scalar("(x^2+y^2)/2");
    let v = hamiltonian_field(&h);
    let n = normalizer_gradient(&h);
    for z in random_points(20, 3, (0.1, 3.0)) {
        assert_eq!(mu_hamiltonian(&h, z).unwrap(), 0.0);
        assert_eq!(lambda_h(&h, z).unwrap(), 0.0);
        assert!(mu_from_bracket(&v, &n.w, z).unwrap().abs() < 1e-14);
        assert_eq!(mu_from_bracket(&v, &v, z).unwrap(), 0.0);
    }
}

#[test]
fn equilibrium_and_singular_gradient_errors() {
    let h = scalar("(x^2+y^2)/2");
    let v = hamiltonian_field(&h);
    assert!(matches!(mu_from_bracket(&v, &v, p(0.0, 0.0)), Err(Error::Equilibrium(_))));
    assert!(matches!(mu_hamiltonian(&h, p(0.0, 0.0)), Err(Error::SingularGradient(_))));
    let n = normalizer_gradient(&h);
    assert!(!n.guard(p(0.0, 0.0)));
    assert!(matches!(n.mu(p(0.0, 0.0)), Err(Error::Guard { .. })));
}

#[test]
fn eikonal_mu_is_curvature() {
    let h = scalar("sqrt(x^2+y^2)");
    let mu = mu_hamiltonian(&h, p(2.0, 0.0)).unwrap();
    assert!((mu - 0.5).abs() < 1e-14);
    let fd = fd_divergence_of_unit_gradient(&h, p(2.0, 0.0));
    assert!((fd - 0.5).abs() < 1e-5);
}

#[test]
fn mu_routes_agree_on_generic_hamiltonian() {
    let h = scalar("y^2/2 + x^4/4 + x*y/3 + 0.1*x^3");
    let v = hamiltonian_field(&h);
    let n = normalizer_gradient(&h);
    for z in random_points(50, 4, (0.5, 1.5)) {
        let a = mu_hamiltonian(&h, z).unwrap();
        let b = mu_from_bracket(&v, &n.w, z).unwrap();
        let c = n.w.divergence(z).unwrap();
        let d = fd_divergence_of_unit_gradient(&h, z);
        assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "{} vs {}", a, b);
        assert!((a - c).abs() <= 1e-9 * (1.0 + a.abs()));
        assert!((a - d).abs() <= 1e-5 * (1.0 + a.abs()), "{} vs {}", a, d);
    }
}

#[test]
fn mu_kappa_with_unit_factor_is_mu_hamiltonian() {
    let h = scalar("y^2/2 + x^4/4");
    let v = hamiltonian_field(&h);
    let one = ScalarField::constant(1.0);
    for z in random_points(50, 5, (0.3, 2.0)) {
        let a = mu_kappa(&v, &one, z).unwrap();
        let b = mu_hamiltonian(&h, z).unwrap();
        assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()), "{} vs {}", a, b);
    }
}

#[test]
fn mu_kappa_matches_bracket_on_harmonic_rif() {
    let s = builtin_system("harmonic-rif:exp(x)").unwrap();
    let k = s.kappa.clone().unwrap();
    let n = normalizer_kappa(&s.v, &k);
    for z in std::iter::once(p(0.0, 1.0)).chain(random_points(50, 6, (0.5, 2.0))) {
        let a = mu_kappa(&s.v, &k, z).unwrap();
        let b = mu_from_bracket(&s.v, &n.w, z).unwrap();
        assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()), "{} vs {}", a, b);
    }
}

#[test]
fn mu_kappa_finite_when_q_vanishes() {
    let v = VectorField::parse("1 + x^2", "0").unwrap();
    let k = ScalarField::constant(1.0);
    assert!(mu_kappa(&v, &k, p(0.5, 0.0)).unwrap().is_finite());
}

#[test]
fn separable_mu_is_gradient_mu_specialised() {
    let sep = Separable::parse("y^2/2", "x^4/4").unwrap();
    let h = scalar("y^2/2 + x^4/4");
    assert!((mu_separable(&sep, p(1.0, 0.0)).unwrap() + 2.0).abs() < 1e-14);
    for z in random_points(30, 7, (0.3, 2.0)) {
        let a = mu_separable(&sep, z).unwrap();
        let b = mu_hamiltonian(&h, z).unwrap();
        assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
    }
    let harmonic = Separable::parse("y^2/2", "x^2/2").unwrap();
    assert_eq!(mu_separable(&harmonic, p(0.7, -0.2)).unwrap(), 0.0);
    let sym = Separable::parse("y^4/4 + y^2", "x^4/4 + x^2").unwrap();
    assert_eq!(mu_separable(&sym, p(0.8, 0.8)).unwrap(), 0.0);
}

#[test]
fn fgg_mu_values_and_guard() {
    let harmonic = Separable::parse("y^2/2", "x^2/2").unwrap();
    assert_eq!(mu_fgg(&harmonic, p(0.5, 0.5)).unwrap(), 0.0);
    let quartic = Separable::parse("y^2/2", "x^4/4").unwrap();
    assert!((mu_fgg(&quartic, p(1.0, 1.0)).unwrap() + 0.25).abs() < 1e-15);
    let twowell = Separable::parse("y^2", "(x^2-1)^2").unwrap();
    assert!(matches!(mu_fgg(&twowell, p(0.0, 2.0)), Err(Error::Guard { .. })));
}

#[test]
fn fgg_normalizer_bracket_matches_closed_form() {
    let sep = Separable::parse("y^2/2", "x^4/4").unwrap();
    let v = hamiltonian_field(&scalar("y^2/2 + x^4/4"));
    let n = normalizer_separable(&sep);
    for z in random_points(40, 8, (0.3, 2.0)) {
        if !n.guard(z) {
            continue;
        }
        let a = n.mu(z).unwrap();
        let b = mu_from_bracket(&v, &n.w, z).unwrap();
        assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "{} vs {}", a, b);
        let w = n.w.value(z).unwrap();
        let g = [z.x.powi(3), z.y];
        let hval = z.y * z.y / 2.0 + z.x.powi(4) / 4.0;
        assert!((g[0] * w[0] + g[1] * w[1] - hval).abs() < 1e-13);
    }
    let w = normalizer_separable(&Separable::parse("y^2/2", "x^2/2").unwrap()).w;
    let wv = w.value(p(0.6, -0.4)).unwrap();
    assert!((wv[0] - 0.3).abs() < 1e-15 && (wv[1] + 0.2).abs() < 1e-15);
    let tw = normalizer_separable(&Separable::parse("y^2", "(x^2-1)^2").unwrap());
    assert!(!tw.guard(p(0.0, 2.0)));
}

#[test]
fn eta_nu_for_normalizer_and_rotation() {
    let h = scalar("y^2/2 + x^4/4");
    let v = hamiltonian_field(&h);
    let n = normalizer_gradient(&h);
    for z in random_points(20, 9, (0.4, 1.5)) {
        assert!(nu(&v, &n.w, z).unwrap().abs() < 1e-12);
        let e = eta(&v, &n.w, z).unwrap();
        assert!((e - n.mu(z).unwrap()).abs() < 1e-10 * (1.0 + e.abs()));
    }
    let harmonic = VectorField::parse("y", "-x").unwrap();
    let perp = harmonic.perpendicular();
    for z in random_points(20, 10, (0.2, 2.0)) {
        assert_eq!(eta(&harmonic, &perp, z).unwrap(), 0.0);
    }
    assert!(matches!(eta(&harmonic, &harmonic, p(1.0, 0.0)), Err(Error::Tangency(_))));
}

#[test]
fn eta_perp_relation_on_harmonic_rif() {
    let s = builtin_system("harmonic-rif:exp(x)").unwrap();
    let k = s.kappa.clone().unwrap();
    let perp = s.v.perpendicular();
    for z in random_points(50, 11, (0.3, 2.0)) {
        let vv = s.v.value(z).unwrap();
        let e = eta(&s.v, &perp, z).unwrap();
        let lhs = e * k.value(z).unwrap() / norm2(vv);
        let rhs = mu_kappa(&s.v, &k, z).unwrap();
        assert!((lhs - rhs).abs() <= 1e-8 * (1.0 + rhs.abs()));
    }
}

#[test]
fn wazewski_reconstructs_bracket() {
    let h = scalar("y^2/2 + x^4/4");
    let v = hamiltonian_field(&h);
    let n = normalizer_gradient(&h);
    for z in random_points(20, 12, (0.4, 1.5)) {
        let (a, b) = wazewski_decompose(&v, &n.w, z).unwrap();
        assert!(b.abs() < 1e-10);
        assert!((a - n.w.divergence(z).unwrap()).abs() < 1e-10 * (1.0 + a.abs()));
    }

    let pairs = [
        (VectorField::parse("y + x^2", "-x + sin(y)").unwrap(), VectorField::parse("x", "exp(y/3)").unwrap()),
        (VectorField::parse("y*(1+x^2)", "-x").unwrap(), VectorField::parse("x + y", "y^3 - x").unwrap()),
    ];
    for (v, w) in &pairs {
        // shear W by a multiple of V: the decomposition must still reconstruct
        let (vs, ws) = (v.clone(), w.clone());
        let sheared = VectorField::new(
            crate::fields::Provenance::Symbolic,
            {
                let (vs, ws) = (vs.clone(), ws.clone());
                move |z| {
                    let (a, b) = (vs.value(z)?, ws.value(z)?);
                    Ok([b[0] + 0.7 * a[0], b[1] + 0.7 * a[1]])
                }
            },
            move |z| Ok(ws.jacobian(z)?.plus(&vs.jacobian(z)?.scale(0.7))),
        );
        for w in [w, &sheared] {
            for z in random_points(30, 13, (0.2, 1.8)) {
                let Ok((a, b)) = wazewski_decompose(v, w, z) else { continue };
                let br = lie_bracket(v, w, z).unwrap();
                let (vv, wv) = (v.value(z).unwrap(), w.value(z).unwrap());
                let rec = [a * vv[0] + b * wv[0], a * vv[1] + b * wv[1]];
                let scale = 1.0 + norm2(br).sqrt() + a.abs() * norm2(vv).sqrt() + b.abs() * norm2(wv).sqrt();
                assert!(((rec[0] - br[0]).hypot(rec[1] - br[1])) / scale < 1e-12);
            }
        }
    }
}

#[test]
fn reparametrized_mu_matches_bracket() {
    let h = scalar("(x^2+y^2)/2");
    let k = scalar("exp(x)");
    let vh = hamiltonian_field(&h);
    let kv = crate::fields::reparametrized_field(&h, &k);
    let n = normalizer_gradient(&h);
    let bar = reparametrize_mu(0.0, &n.w, &k, p(1.0, 0.0)).unwrap();
    assert!((bar + 1.0).abs() < 1e-15);
    assert!((mu_from_bracket(&kv, &n.w, p(1.0, 0.0)).unwrap() + 1.0).abs() < 1e-14);
    assert_eq!(reparametrize_mu(0.25, &n.w, &ScalarField::constant(1.0), p(1.0, 2.0)).unwrap(), 0.25);
    for z in random_points(50, 14, (0.3, 2.0)) {
        let mu = mu_from_bracket(&vh, &n.w, z).unwrap();
        let a = reparametrize_mu(mu, &n.w, &k, z).unwrap();
        let b = mu_from_bracket(&kv, &n.w, z).unwrap();
        assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
        let r = n.reparametrized(&k);
        assert!((r.mu(z).unwrap() - b).abs() <= 1e-10 * (1.0 + b.abs()));
    }
}

#[test]
fn zeta_family() {
    let h = scalar("y^2/2 + x^4/4");
    let v = hamiltonian_field(&h);
    let g = normalizer_gradient(&h);
    let one = normalizer_zeta(&h, &Univariate::constant(1.0));
    let lin = normalizer_zeta(&h, &Univariate::parse("h").unwrap());
    let sq = normalizer_zeta(&h, &Univariate::parse("1 + h^2").unwrap());
    for z in random_points(30, 15, (0.4, 1.6)) {
        assert_eq!(one.w.value(z).unwrap(), g.w.value(z).unwrap());
        let hv = h.value(z).unwrap();
        let grad = h.gradient(z).unwrap();
        let dwh = dot(grad, lin.w.value(z).unwrap());
        assert!((dwh - hv).abs() < 1e-13);
        for n in [&lin, &sq] {
            let a = n.mu(z).unwrap();
            let b = mu_from_bracket(&v, &n.w, z).unwrap();
            assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "{} vs {}", a, b);
        }
    }
    assert_eq!(lin.level_rate(0.3).unwrap().unwrap(), 0.3);
}

#[test]
fn zeta_on_harmonic_has_identity_rate() {
    let h = scalar("(x^2+y^2)/2");
    let n = normalizer_zeta(&h, &Univariate::parse("h").unwrap());
    let z = p(0.6, 0.8);
    let dwh = dot(h.gradient(z).unwrap(), n.w.value(z).unwrap());
    assert!((dwh - h.value(z).unwrap()).abs() < 1e-15);
    let zero = normalizer_zeta(&h, &Univariate::parse("h - 0.5").unwrap());
    assert!(!zero.guard(p(1.0, 0.0)));
    assert!(matches!(zero.w.value(p(1.0, 0.0)), Err(Error::Degenerate { .. })));
}

#[test]
fn kappa_normalizer_properties() {
    let h = scalar("y^2/2 + x^4/4");
    let v = hamiltonian_field(&h);
    let n = normalizer_kappa(&v, &ScalarField::constant(1.0));
    let g = normalizer_gradient(&h);
    for z in random_points(20, 16, (0.3, 1.5)) {
        let (a, b) = (n.w.value(z).unwrap(), g.w.value(z).unwrap());
        assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
    }
    let s = builtin_system("harmonic-rif:exp(x)").unwrap();
    let hk = s.h.clone().unwrap();
    let n = normalizer_kappa(&s.v, s.kappa.as_ref().unwrap());
    for z in random_points(50, 17, (0.5, 2.0)) {
        let w = n.w.value(z).unwrap();
        assert!((dot(hk.gradient(z).unwrap(), w) - 1.0).abs() < 1e-12);
        let br = lie_bracket(&s.v, &n.w, z).unwrap();
        let vv = s.v.value(z).unwrap();
        let res = wedge(br, vv).abs() / (1.0 + norm2(vv) * (1.0 + norm2(w).sqrt()));
        assert!(res <= 1e-8);
    }
}

#[test]
fn combined_normalizer() {
    let h = scalar("(x^2+y^2)/2");
    let v = hamiltonian_field(&h);
    let g = normalizer_gradient(&h);
    let same = combine_normalizer(&g, &Univariate::constant(1.0), &ScalarField::constant(0.0), &v, &h);
    let twice = combine_normalizer(&g, &Univariate::constant(2.0), &ScalarField::constant(0.0), &v, &h);
    let sheared = combine_normalizer(&g, &Univariate::constant(1.0), &scalar("x"), &v, &h);

    let q = scalar("y^2/2 + x^4/4");
    let vq = hamiltonian_field(&q);
    let gq = normalizer_gradient(&q);
    let general = combine_normalizer(&gq, &Univariate::parse("1+h").unwrap(), &scalar("x*y + sin(x)"), &vq, &q);
    for z in random_points(30, 18, (0.3, 2.0)) {
        assert_eq!(same.w.value(z).unwrap(), g.w.value(z).unwrap());
        assert_eq!(same.mu(z).unwrap(), g.mu(z).unwrap());
        assert_eq!(twice.mu(z).unwrap(), 2.0 * g.mu(z).unwrap());
        // ∂_V x = y for the harmonic field
        assert!((sheared.mu(z).unwrap() - z.y).abs() < 1e-15);
        let a = general.mu(z).unwrap();
        let b = mu_from_bracket(&vq, &general.w, z).unwrap();
        assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "{} vs {}", a, b);
    }
    let hval = 0.7;
    assert!((general.level_rate(hval).unwrap().unwrap() - 1.7).abs() < 1e-15);
}
