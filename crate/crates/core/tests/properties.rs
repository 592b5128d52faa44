use std::f64::consts::PI;

use bloch_core::instances::{generic_instance, lp_instance, random_function};
use bloch_core::molecules::{
    cs_upper, equivalent, pairing, projective_upper, random_molecule, sandwich, Representation,
};
use bloch_core::norms::{extremal, make_family, sampled_seminorm};
use bloch_core::summing::{numerator, pietsch_lp, lp_duality_check};
use bloch_core::{
    bloch_seminorm_bracket, sample_disc, DiscPoint, Exponent, FamilySpec, HoloExpr, MobiusMap, Molecule, Norm,
    SampleEntry, SampleScheme, WeightedSample,
};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const E: Norm = Norm::Euclidean;

fn point(cap: f64) -> impl Strategy<Value = DiscPoint> {
    (0.0..1.0f64, 0.0..(2.0 * PI)).prop_map(move |(r, t)| DiscPoint::new(Complex64::from_polar(cap * r.sqrt(), t)).unwrap())
}

fn unimodular() -> impl Strategy<Value = Complex64> {
    (0.0..(2.0 * PI)).prop_map(|t| Complex64::from_polar(1.0, t))
}

fn mobius(cap: f64) -> impl Strategy<Value = MobiusMap> {
    (unimodular(), point(cap)).prop_map(|(l, a)| MobiusMap::new(l, a).unwrap())
}

fn complex() -> impl Strategy<Value = Complex64> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(a, b)| Complex64::new(a, b))
}

fn function(d: usize) -> impl Strategy<Value = HoloExpr> {
    any::<u64>().prop_map(move |s| random_function(&mut ChaCha8Rng::seed_from_u64(s), d))
}

fn molecule(max_atoms: usize) -> impl Strategy<Value = Molecule> {
    (any::<u64>(), 1..=max_atoms, 1usize..=3).prop_map(|(s, n, d)| random_molecule(&mut ChaCha8Rng::seed_from_u64(s), n, d, 0.9))
}

fn vnorm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn group_law(f in mobius(0.9), g in mobius(0.9), z in point(0.9)) {
        let composed = f.compose(&g).apply_raw(z.value());
        prop_assert!((composed - f.apply_raw(g.apply_raw(z.value()))).norm() < 1e-12);
    }

    #[test]
    fn involution(a in point(0.95), z in point(0.95)) {
        let phi = MobiusMap::involution(a);
        prop_assert!((phi.apply_raw(phi.apply_raw(z.value())) - z.value()).norm() < 1e-12);
    }

    #[test]
    fn inverse_roundtrip(f in mobius(0.9), z in point(0.9)) {
        let back = f.inverse().apply_raw(f.apply_raw(z.value()));
        prop_assert!((back - z.value()).norm() < 1e-12);
        prop_assert!(f.compose(&f.inverse()).is_identity(1e-12));
    }

    #[test]
    fn mobius_maps_disc_to_disc(f in mobius(0.95), z in point(0.999)) {
        prop_assert!(f.apply_raw(z.value()).norm() < 1.0 + 1e-12);
        // |φ'(z)| (1 - |z|^2) = 1 - |φ(z)|^2
        let lhs = f.derivative_raw(z.value()).norm() * (1.0 - z.value().norm_sqr());
        let rhs = 1.0 - f.apply_raw(z.value()).norm_sqr();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()) + 1e-13);
    }

    #[test]
    fn derivative_matches_finite_difference(f in function(2), z in point(0.85)) {
        let h = 1e-5;
        let z0 = z.value();
        let up = f.eval_raw(z0 + h).unwrap();
        let down = f.eval_raw(z0 - h).unwrap();
        let fd: Vec<Complex64> = up.0.iter().zip(&down.0).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let d = f.deriv_raw(z0).unwrap();
        prop_assert!(diff(&fd, &d.0) <= 1e-6 * vnorm(&d.0).max(1.0));
    }

    #[test]
    fn chain_rule(f in function(1), phi in mobius(0.6), z in point(0.8)) {
        // taylor nodes are trusted on |w| <= 0.95; pull z back so φ(z) stays there
        let w = phi.inverse().apply_raw(z.value());
        let g = HoloExpr::precompose(phi, f.clone());
        let lhs = g.deriv_scalar(w).unwrap();
        let rhs = f.deriv_scalar(phi.apply_raw(w)).unwrap() * phi.derivative_raw(w);
        prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
    }

    #[test]
    fn extremal_is_optimal(a in point(0.95), z in point(0.999)) {
        let f = extremal(a);
        let at_a = (1.0 - a.value().norm_sqr()) * f.deriv_scalar(a.value()).unwrap();
        prop_assert!((at_a - 1.0).norm() < 1e-12);
        let elsewhere = (1.0 - z.value().norm_sqr()) * f.deriv_scalar(z.value()).unwrap().norm();
        prop_assert!(elsewhere <= 1.0 + 1e-12);
    }

    #[test]
    fn weighted_derivative_is_mobius_invariant(f in function(2), phi in mobius(0.5), z in point(0.8)) {
        let w = phi.inverse().apply_raw(z.value());
        let g = HoloExpr::precompose(phi, f.clone());
        let lhs = (1.0 - w.norm_sqr()) * g.deriv_raw(w).unwrap().norm(E);
        let img = phi.apply_raw(w);
        let rhs = (1.0 - img.norm_sqr()) * f.deriv_raw(img).unwrap().norm(E);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs));
    }

    #[test]
    fn numerator_homogeneous(f in function(2), lam in complex(), seed in any::<u64>()) {
        let pts = sample_disc(SampleScheme::PseudoHyperbolic, 6, seed, 0.9);
        let s = WeightedSample::unit(&pts).unwrap();
        for p in [Exponent::ONE, Exponent::TWO, Exponent::INFINITY] {
            let a = numerator(&HoloExpr::scale(lam, f.clone()), &s, p, E).unwrap();
            let b = lam.norm() * numerator(&f, &s, p, E).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b));
        }
    }

    #[test]
    fn sample_weights_scale_numerator(f in function(1), lam in complex(), z in point(0.9)) {
        let one = WeightedSample::unit(&[z]).unwrap();
        let scaled = WeightedSample::new(vec![SampleEntry { lambda: lam, z }]).unwrap();
        let a = numerator(&f, &scaled, Exponent::TWO, E).unwrap();
        let b = lam.norm() * numerator(&f, &one, Exponent::TWO, E).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn family_certificates_hold(seed in any::<u64>(), combos in 1usize..6, terms in 1usize..4) {
        let centers = sample_disc(SampleScheme::PseudoHyperbolic, 6, seed, 0.9);
        let fam = make_family(&FamilySpec::Union { parts: vec![
            FamilySpec::ExtremalGrid { points: centers.clone() },
            FamilySpec::PhaseConvex { centers, combinations: combos, terms, seed },
            FamilySpec::NormalizedPolynomials { degree: 4, count: 2, seed },
        ]}).unwrap();
        prop_assert!(fam.validate().is_empty());
        let probe = sample_disc(SampleScheme::PseudoHyperbolic, 200, seed ^ 1, 0.99);
        for (g, &cert) in fam.members.iter().zip(&fam.certificates) {
            prop_assert!(cert <= 1.0);
            prop_assert!(g.eval_raw(Complex64::new(0.0, 0.0)).unwrap().norm(E) < 1e-14);
            prop_assert!(sampled_seminorm(g, &probe, E).unwrap() <= cert + 1e-12);
        }
    }

    #[test]
    fn bracket_contains_monomial_seminorm(k in 1u32..9) {
        // max of k r^{k-1} (1 - r^2) at r^2 = (k-1)/(k+1)
        let kf = k as f64;
        let exact = kf * (2.0 / (kf + 1.0)) * ((kf - 1.0) / (kf + 1.0)).powf((kf - 1.0) / 2.0);
        let b = bloch_seminorm_bracket(&HoloExpr::monomial(k), 64, E).unwrap();
        prop_assert!(b.lower <= exact && exact <= b.upper, "{:?} vs {}", b, exact);
    }

    #[test]
    fn bracket_ordered_and_above_samples(f in function(2), seed in any::<u64>()) {
        let b = bloch_seminorm_bracket(&f, 32, E).unwrap();
        prop_assert!(b.lower <= b.upper);
        let pts = sample_disc(SampleScheme::PseudoHyperbolic, 50, seed, 0.99);
        // taylor parts make the upper side infinite, so this is a real check only without them
        prop_assert!(sampled_seminorm(&f, &pts, E).map_or(true, |s| s <= b.upper * (1.0 + 1e-12)));
    }

    #[test]
    fn lp_duality_and_monotonicity(seed in any::<u64>(), generic in any::<bool>()) {
        let inst = if generic { generic_instance(seed) } else { lp_instance(seed) };
        let mut prev = f64::INFINITY;
        for p in [1.0, 1.5, 2.0, 3.0, 4.0] {
            let r = lp_duality_check(&inst.f, &inst.points, &inst.family, Exponent::new(p).unwrap(), E).unwrap();
            prop_assert!(r.relative_gap <= 1e-7 && r.ratio_gap <= 1e-7, "seed {} p {}: {:?}", seed, p, r);
            prop_assert!(r.constant <= prev + 1e-9);
            prev = r.constant;
        }
    }

    #[test]
    fn lp_constant_homogeneous_and_subadditive(seed in any::<u64>(), lam in complex()) {
        let a = lp_instance(seed);
        let b = generic_instance(seed);
        let p = Exponent::TWO;
        let ca = pietsch_lp(&a.f, &a.points, &a.family, p, E).unwrap().constant;
        let cb = pietsch_lp(&b.f, &a.points, &a.family, p, E).map(|m| m.constant);
        let scaled = pietsch_lp(&HoloExpr::scale(lam, a.f.clone()), &a.points, &a.family, p, E).unwrap().constant;
        prop_assert!((scaled - lam.norm() * ca).abs() <= 1e-9 * (1.0 + scaled));
        if let (Ok(cb), Ok(d1), Ok(d2)) = (cb, a.f.dim(), b.f.dim()) {
            if d1 == d2 {
                let sum = HoloExpr::sum(vec![a.f.clone(), b.f.clone()]);
                let cs = pietsch_lp(&sum, &a.points, &a.family, p, E).unwrap().constant;
                prop_assert!(cs <= ca + cb + 1e-9 * (1.0 + ca + cb));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pairing_is_bilinear(m1 in molecule(4), seed in any::<u64>(), a in complex(), b in complex()) {
        let d = m1.dim().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m2 = random_molecule(&mut rng, 3, d, 0.9);
        let f = random_function(&mut rng, d);
        let g = random_function(&mut rng, d);
        let lhs = pairing(&m1.scaled(a).plus(&m2.scaled(b)).unwrap(), &f).unwrap();
        let rhs = a * pairing(&m1, &f).unwrap() + b * pairing(&m2, &f).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-10 * (1.0 + rhs.norm()));
        let fg = HoloExpr::sum(vec![HoloExpr::scale(a, f.clone()), HoloExpr::scale(b, g.clone())]);
        let lhs = pairing(&m1, &fg).unwrap();
        let rhs = a * pairing(&m1, &f).unwrap() + b * pairing(&m1, &g).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-10 * (1.0 + rhs.norm()));
    }

    #[test]
    fn representation_moves_preserve_molecule(m in molecule(5), dup in any::<bool>(), seed in any::<u64>()) {
        let m = if dup { m.plus(&m.scaled(Complex64::new(0.0, -0.5))).unwrap() } else { m };
        let rep = Representation::of(&m);
        for p in [Exponent::ONE, Exponent::new(1.5).unwrap(), Exponent::TWO, Exponent::INFINITY] {
            let merged = rep.merge_same_point();
            let moved = merged.rebalance(p, E);
            prop_assert!(equivalent(&m, &merged.molecule(), 8, seed, 1e-10).unwrap());
            prop_assert!(equivalent(&m, &moved.molecule(), 8, seed, 1e-10).unwrap());
            prop_assert!(merged.projective_value(E) <= rep.projective_value(E) + 1e-12);
            prop_assert_eq!(moved.moves.last().map(String::as_str), Some("rebalance"));
        }
    }

    #[test]
    fn sandwich_ordered_and_dominated(m in molecule(4), seed in any::<u64>()) {
        let u1 = cs_upper(&m, Exponent::ONE, E).value;
        prop_assert!((u1 - projective_upper(&m, E).value).abs() <= 1e-12 * (1.0 + u1));
        for p in [Exponent::ONE, Exponent::new(1.5).unwrap(), Exponent::TWO, Exponent::new(4.0).unwrap(), Exponent::INFINITY] {
            let s = sandwich(&m, p, E, seed).unwrap();
            prop_assert!(s.lower <= s.upper + 1e-9);
            prop_assert!(s.upper <= u1 + 1e-9);
        }
    }

    #[test]
    fn cs_upper_homogeneous_and_subadditive(m1 in molecule(3), seed in any::<u64>(), lam in complex()) {
        let d = m1.dim().unwrap();
        let m2 = random_molecule(&mut ChaCha8Rng::seed_from_u64(seed), 3, d, 0.9);
        for p in [Exponent::ONE, Exponent::TWO, Exponent::new(3.0).unwrap(), Exponent::INFINITY] {
            let u = cs_upper(&m1, p, E).value;
            prop_assert!((cs_upper(&m1.scaled(lam), p, E).value - lam.norm() * u).abs() <= 1e-12 * (1.0 + lam.norm() * u));
            let sum = cs_upper(&m1.plus(&m2).unwrap(), p, E).value;
            prop_assert!(sum <= u + cs_upper(&m2, p, E).value + 1e-12);
        }
    }

    #[test]
    fn single_atom_norm_is_exact(lam in complex(), z in point(0.95), x in prop::collection::vec(complex(), 1..4), seed in any::<u64>()) {
        prop_assume!(lam.norm() > 1e-3 && vnorm(&x) > 1e-3);
        let m = Molecule::atom(lam, z, x.clone());
        let truth = lam.norm() * vnorm(&x) / (1.0 - z.value().norm_sqr());
        for p in [Exponent::ONE, Exponent::TWO, Exponent::INFINITY] {
            let s = sandwich(&m, p, E, seed).unwrap();
            prop_assert!((s.upper - truth).abs() <= 1e-9 * truth.max(1.0));
            prop_assert!((s.lower - truth).abs() <= 1e-9 * truth.max(1.0));
        }
    }
}
