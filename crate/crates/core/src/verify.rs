//! The invariant suite behind `bloch verify`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::disc::{sample_disc, DiscPoint, MobiusMap, SampleScheme, DEFAULT_RADIUS_CAP};
use crate::error::Result;
use crate::expr::HoloExpr;
use crate::instances::{
    generic_instance, lp_instance, random_complex, random_function, random_mobius, random_point, random_vector,
    LpInstance,
};
use crate::molecules::{
    balanced_concatenation, cs_lower_dual, cs_upper, crossnorm_check, default_probes, pairing, pairing_deviation,
    pairing_tensor, random_molecule, Atom, Representation,
};
use crate::norms::{
    bloch_seminorm_bracket, default_family, extremal, family_precomposed, make_family, sampled_seminorm, FamilySpec,
    TestFamily, DEFAULT_RESOLUTION,
};
use crate::report::{Check, Report, Tolerances};
use crate::summing::{
    denominator, domination_check, factorize, lp_duality_check, maurey_extrapolate, maurey_theta, numerator,
    pietsch_lp, summing_estimate, SampleEntry, WeightedSample,
};
use crate::vector::{Exponent, Norm};

/// Instances per randomized LP check.
pub const LP_INSTANCES: usize = 50;
/// Exponents of the LP checks.
pub const LP_EXPONENTS: [f64; 4] = [1.0, 1.5, 2.0, 4.0];

#[derive(Debug, Clone, Default)]
pub struct VerifyConfig {
    pub seed: u64,
    pub norm: Norm,
    pub tolerances: Tolerances,
    /// An extra family whose certificates are checked.
    pub family: Option<TestFamily>,
}

impl VerifyConfig {
    fn tol(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name, default)
    }

    /// Seed of the `i`-th instance of a randomized check.
    fn sub_seed(&self, i: u64) -> u64 {
        self.seed.wrapping_mul(1_000_003).wrapping_add(i)
    }

    fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed ^ salt.wrapping_mul(0x2545_f491_4f6c_dd1d))
    }
}

fn guarded(name: &str, f: impl FnOnce() -> Result<Check>) -> Check {
    f().unwrap_or_else(|e| Check::error(name, e))
}

fn guarded_many(name: &str, f: impl FnOnce() -> Result<Vec<Check>>) -> Vec<Check> {
    f().unwrap_or_else(|e| vec![Check::error(name, e)])
}

type Group = fn(&VerifyConfig) -> Vec<Check>;

const GROUPS: [Group; 22] = [
    disc_group_law,
    disc_derivatives,
    disc_sampling,
    norms_extremal,
    norms_brackets,
    norms_family,
    summing_duality,
    summing_duality_generic,
    summing_factorization,
    summing_factorization_generic,
    summing_infinity,
    summing_mobius,
    summing_tensor,
    summing_algebra,
    summing_domination,
    summing_sup_gap,
    summing_maurey,
    molecules_single_atom,
    molecules_sandwich,
    molecules_crossnorm,
    molecules_algebra,
    molecules_moves,
];

/// Runs every invariant check; the report is sorted by check name and
/// independent of thread scheduling.
pub fn verify_all(cfg: &VerifyConfig, version: &str) -> Report {
    let mut checks: Vec<Check> = GROUPS.par_iter().flat_map_iter(|g| g(cfg)).collect();
    if let Some(fam) = &cfg.family {
        checks.push(family_certificates("norms.user_family", fam, cfg));
    }
    let echo = json!({
        "command": "verify",
        "seed": cfg.seed,
        "norm": cfg.norm,
        "tolerances": cfg.tolerances,
        "user_family": cfg.family.as_ref().map(|f| f.len()),
    });
    Report::new(version, cfg.seed, echo, checks)
}

// ---- disc ---------------------------------------------------------------

fn disc_group_law(cfg: &VerifyConfig) -> Vec<Check> {
    let mut rng = cfg.rng(1);
    let (mut group, mut invol, mut round) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let (phi, psi) = (random_mobius(&mut rng, 0.9), random_mobius(&mut rng, 0.9));
        let z = random_point(&mut rng, 0.95);
        let composed = phi.compose(&psi);
        group = group.max((phi.apply(psi.apply(z)).value() - composed.apply(z).value()).norm());
        let inv = MobiusMap::involution(phi.center());
        invol = invol.max((inv.apply(inv.apply(z)).value() - z.value()).norm());
        round = round.max((phi.inverse().apply(phi.apply(z)).value() - z.value()).norm());
    }
    vec![
        Check::bound("disc.group_law", cfg.tol("disc.group_law", 1e-12), group),
        Check::bound("disc.involution", cfg.tol("disc.involution", 1e-12), invol),
        Check::bound("disc.inverse_roundtrip", cfg.tol("disc.inverse_roundtrip", 1e-12), round),
    ]
}

/// One expression per node kind.
fn node_kinds(rng: &mut impl Rng) -> Vec<(&'static str, HoloExpr)> {
    let a = random_point(rng, 0.8);
    let phi = random_mobius(rng, 0.6);
    let coeffs: Vec<Complex64> = (0..6).map(|_| random_complex(rng)).collect();
    vec![
        ("monomial", HoloExpr::monomial(rng.random_range(0..=5))),
        ("extremal", HoloExpr::extremal(a)),
        ("sum", HoloExpr::sum(vec![HoloExpr::monomial(2), HoloExpr::extremal(a)])),
        ("scale", HoloExpr::scale(random_complex(rng), HoloExpr::extremal(a))),
        ("precompose_mobius", HoloExpr::precompose(phi, HoloExpr::extremal(a))),
        ("tensor", HoloExpr::tensor(HoloExpr::monomial(3), random_vector(rng, 3))),
        ("taylor", HoloExpr::taylor(coeffs, 0.95)),
    ]
}

fn disc_derivatives(cfg: &VerifyConfig) -> Vec<Check> {
    guarded_many("disc.derivative_fd", || {
        let mut rng = cfg.rng(2);
        let h = 1e-5;
        let mut fd_worst = 0.0f64;
        let mut fd_kind = "";
        let mut chain_worst = 0.0f64;
        for _ in 0..20 {
            for (kind, f) in node_kinds(&mut rng) {
                let z = random_point(&mut rng, 0.9).value();
                let d = f.deriv_raw(z)?;
                let plus = f.eval_raw(z + h)?;
                let minus = f.eval_raw(z - h)?;
                let fd: Vec<Complex64> =
                    plus.components().iter().zip(minus.components()).map(|(a, b)| (a - b) / (2.0 * h)).collect();
                let err: f64 =
                    fd.iter().zip(d.components()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
                let scale = d.norm(Norm::Euclidean).max(1.0);
                if err / scale > fd_worst {
                    fd_worst = err / scale;
                    fd_kind = kind;
                }
            }
            // Chain rule against an inline derivative of the map.
            let phi = random_mobius(&mut rng, 0.9);
            let g = random_function(&mut rng, 2);
            // Pull back a point so that its image stays inside every taylor radius.
            let z = phi.inverse().apply(random_point(&mut rng, 0.9));
            let lhs = HoloExpr::precompose(phi, g.clone()).deriv(z)?;
            let (lam, a, zv) = (phi.rotation(), phi.center().value(), z.value());
            let dphi = lam * (a.norm_sqr() - 1.0) / (Complex64::new(1.0, 0.0) - a.conj() * zv).powi(2);
            let rhs = g.deriv(phi.apply(z))? * dphi;
            let err = (lhs.clone() + rhs * Complex64::new(-1.0, 0.0)).norm(Norm::Euclidean);
            chain_worst = chain_worst.max(err / lhs.norm(Norm::Euclidean).max(1.0));
        }
        Ok(vec![
            Check::bound("disc.derivative_fd", cfg.tol("disc.derivative_fd", 1e-6), fd_worst)
                .with_witnesses(json!({ "worst_kind": fd_kind, "step": h, "relative": true })),
            Check::bound("disc.chain_rule", cfg.tol("disc.chain_rule", 1e-12), chain_worst)
                .with_witnesses(json!({ "relative": true })),
        ])
    })
}

fn disc_sampling(cfg: &VerifyConfig) -> Vec<Check> {
    let a = sample_disc(SampleScheme::PseudoHyperbolic, 64, cfg.seed, DEFAULT_RADIUS_CAP);
    let b = sample_disc(SampleScheme::PseudoHyperbolic, 64, cfg.seed, DEFAULT_RADIUS_CAP);
    let c = sample_disc(SampleScheme::PolarGrid, 64, cfg.seed, DEFAULT_RADIUS_CAP);
    let over = a.iter().chain(&c).map(|z| z.modulus() - DEFAULT_RADIUS_CAP).fold(f64::NEG_INFINITY, f64::max);
    let distinct = [&a, &c].iter().all(|v| v.iter().enumerate().all(|(i, z)| v[..i].iter().all(|w| w != z)));
    let mut check = Check::bound("disc.sampling", 0.0, if a == b && distinct { over.max(0.0) } else { f64::INFINITY });
    check.witnesses = json!({ "deterministic": a == b, "distinct": distinct, "max_modulus_excess": over });
    vec![check]
}

// ---- norms --------------------------------------------------------------

fn norms_extremal(cfg: &VerifyConfig) -> Vec<Check> {
    guarded_many("norms.extremal", || {
        let points = sample_disc(SampleScheme::PolarGrid, 20, cfg.seed, DEFAULT_RADIUS_CAP);
        let (mut ident, mut width, mut contain) = (0.0f64, 0.0f64, 0.0f64);
        for a in &points {
            let f = extremal(*a);
            ident = ident.max((a.weight() * f.deriv_scalar(a.value())? - 1.0).norm());
            let b = bloch_seminorm_bracket(&f, DEFAULT_RESOLUTION, cfg.norm)?;
            width = width.max(b.width());
            contain = contain.max((b.lower - 1.0).max(1.0 - b.upper));
        }
        Ok(vec![
            Check::bound("norms.extremal_identity", cfg.tol("norms.extremal_identity", 1e-12), ident),
            Check::bound("norms.extremal_bracket_width", cfg.tol("norms.extremal_bracket_width", 1e-3), width),
            Check::bound("norms.extremal_bracket_contains", cfg.tol("norms.extremal_bracket_contains", 1e-12), contain),
        ])
    })
}

fn norms_brackets(cfg: &VerifyConfig) -> Vec<Check> {
    vec![guarded("norms.bracket_examples", || {
        let half = DiscPoint::from_re_im(0.5, 0.0)?;
        let cases = [
            (HoloExpr::monomial(1), 1.0),
            (HoloExpr::monomial(2), 4.0 * 3f64.sqrt() / 9.0),
            (
                HoloExpr::sum(vec![HoloExpr::monomial(1), HoloExpr::scale(Complex64::new(-1.0, 0.0), HoloExpr::monomial(3))]),
                4.0 / 3.0,
            ),
            (extremal(half), 1.0),
        ];
        let mut worst = 0.0f64;
        let mut widths = Vec::new();
        for (f, truth) in &cases {
            let b = bloch_seminorm_bracket(f, DEFAULT_RESOLUTION, Norm::Euclidean)?;
            worst = worst.max((b.lower - truth).max(truth - b.upper));
            widths.push(b.width());
        }
        Ok(Check::bound("norms.bracket_examples", cfg.tol("norms.bracket_examples", 1e-12), worst)
            .with_witnesses(json!({ "widths": widths })))
    })]
}

/// Structural validity plus sampled seminorms not above certificates.
fn family_certificates(name: &str, fam: &TestFamily, cfg: &VerifyConfig) -> Check {
    guarded(name, || {
        let issues = fam.validate();
        let points = sample_disc(SampleScheme::PseudoHyperbolic, 200, cfg.seed, DEFAULT_RADIUS_CAP);
        let excess: Vec<f64> = fam
            .members
            .par_iter()
            .zip(&fam.certificates)
            .map(|(g, &c)| sampled_seminorm(g, &points, Norm::Euclidean).map(|s| s - c))
            .collect::<Result<_>>()?;
        let (worst_member, worst) =
            excess.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, &e)| if e > acc.1 { (i, e) } else { acc });
        let mut check = Check::bound(name, cfg.tol(name, 1e-12), worst)
            .with_witnesses(json!({ "members": fam.len(), "points": 200, "worst_member": worst_member }));
        if !issues.is_empty() {
            check = Check::error(name, "certification failure").with_detail(issues.join("; "));
        }
        Ok(check)
    })
}

fn norms_family(cfg: &VerifyConfig) -> Vec<Check> {
    let points = sample_disc(SampleScheme::PseudoHyperbolic, 16, cfg.seed, 0.9);
    let mut out = vec![family_certificates("norms.default_family", &default_family(&points, cfg.seed), cfg)];
    out.push(guarded("norms.polynomial_family", || {
        let fam = make_family(&FamilySpec::NormalizedPolynomials { degree: 6, count: 16, seed: cfg.seed })?;
        Ok(family_certificates("norms.polynomial_family", &fam, cfg))
    }));
    out
}

// ---- summing ------------------------------------------------------------

struct LpStats {
    duality: f64,
    duality_at: (u64, f64),
    monotone: f64,
    monotone_at: u64,
}

/// Seed and `(p, gap, constant)` per exponent.
type LpRow = (u64, Vec<(f64, f64, f64)>);

fn lp_stats(instances: &[LpInstance], norm: Norm) -> Result<LpStats> {
    let rows: Vec<LpRow> = instances
        .par_iter()
        .map(|inst| {
            let mut per = Vec::new();
            for &p in &LP_EXPONENTS {
                let r = lp_duality_check(&inst.f, &inst.points, &inst.family, Exponent::new(p)?, norm)?;
                per.push((p, r.relative_gap.max(r.ratio_gap), r.constant));
            }
            Ok((inst.seed, per))
        })
        .collect::<Result<_>>()?;
    let mut s = LpStats { duality: 0.0, duality_at: (0, 0.0), monotone: f64::NEG_INFINITY, monotone_at: 0 };
    for (seed, per) in &rows {
        for &(p, gap, _) in per {
            if gap > s.duality {
                s.duality = gap;
                s.duality_at = (*seed, p);
            }
        }
        for w in per.windows(2) {
            let rise = w[1].2 - w[0].2;
            if rise > s.monotone {
                s.monotone = rise;
                s.monotone_at = *seed;
            }
        }
    }
    Ok(s)
}

fn lp_checks(cfg: &VerifyConfig, suffix: &str, instances: &[LpInstance]) -> Vec<Check> {
    let dual_name = format!("summing.lp_duality{suffix}");
    let mono_name = format!("summing.monotonicity{suffix}");
    match lp_stats(instances, cfg.norm) {
        Ok(s) => vec![
            Check::bound(&dual_name, cfg.tol("summing.lp_duality", 1e-7), s.duality).with_witnesses(json!({
                "instances": instances.len(), "exponents": LP_EXPONENTS, "relative": true,
                "worst_seed": s.duality_at.0, "worst_p": s.duality_at.1,
            })),
            Check::bound(&mono_name, cfg.tol("summing.monotonicity", 1e-9), s.monotone)
                .with_witnesses(json!({ "instances": instances.len(), "worst_seed": s.monotone_at })),
        ],
        Err(e) => vec![Check::error(&dual_name, &e), Check::error(&mono_name, e)],
    }
}

fn anchored(cfg: &VerifyConfig) -> Vec<LpInstance> {
    (0..LP_INSTANCES as u64).map(|i| lp_instance(cfg.sub_seed(i))).collect()
}

fn generic(cfg: &VerifyConfig) -> Vec<LpInstance> {
    (0..LP_INSTANCES as u64).map(|i| generic_instance(cfg.sub_seed(i))).collect()
}

fn summing_duality(cfg: &VerifyConfig) -> Vec<Check> {
    lp_checks(cfg, "", &anchored(cfg))
}

fn summing_duality_generic(cfg: &VerifyConfig) -> Vec<Check> {
    lp_checks(cfg, "_generic", &generic(cfg))
}

fn summing_factorization(cfg: &VerifyConfig) -> Vec<Check> {
    guarded_many("summing.factorization", || {
        let rows: Vec<(u64, f64, f64)> = anchored(cfg)
            .par_iter()
            .map(|inst| {
                let m = pietsch_lp(&inst.f, &inst.points, &inst.family, Exponent::TWO, cfg.norm)?;
                let c = factorize(&inst.f, &inst.points, &inst.family, &m, cfg.norm, inst.seed)?;
                Ok((inst.seed, c.residual, c.operator_norm_estimate / m.constant - 1.0))
            })
            .collect::<Result<_>>()?;
        let res = rows.iter().map(|r| r.1).fold(0.0, f64::max);
        let (seed, ratio) = rows.iter().fold((0, f64::NEG_INFINITY), |a, r| if r.2 > a.1 { (r.0, r.2) } else { a });
        Ok(vec![
            Check::bound("summing.factorization_residual", cfg.tol("summing.factorization_residual", 1e-8), res),
            Check::bound("summing.factorization_norm", cfg.tol("summing.factorization_norm", 1e-4), ratio)
                .heuristic()
                .with_witnesses(json!({ "relative": true, "worst_seed": seed, "instances": rows.len() })),
        ])
    })
}

fn summing_factorization_generic(cfg: &VerifyConfig) -> Vec<Check> {
    let rows: Vec<(String, Option<f64>)> = generic(cfg)
        .par_iter()
        .map(|inst| {
            let ratio = pietsch_lp(&inst.f, &inst.points, &inst.family, Exponent::TWO, cfg.norm)
                .and_then(|m| {
                    factorize(&inst.f, &inst.points, &inst.family, &m, cfg.norm, inst.seed)
                        .map(|c| c.operator_norm_estimate / m.constant)
                })
                .ok();
            (inst.kind.clone(), ratio)
        })
        .collect();
    let rank_deficient = rows.iter().filter(|r| r.1.is_none()).count();
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.1).collect();
    let within = ratios.iter().filter(|&&r| r <= 1.0 + 1e-4).count();
    let worst = ratios.iter().cloned().fold(0.0, f64::max);
    vec![Check::info(
        "summing.factorization_gap",
        json!({
            "instances": rows.len(), "rank_deficient": rank_deficient,
            "norm_within_constant": within, "worst_norm_ratio": worst,
        }),
    )]
}

fn summing_infinity(cfg: &VerifyConfig) -> Vec<Check> {
    vec![guarded("summing.infinity_coincidence", || {
        let mut worst = 0.0f64;
        for i in 0..20u64 {
            let seed = cfg.sub_seed(i);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = rng.random_range(1..=3);
            let f = random_function(&mut rng, d);
            let points = sample_disc(SampleScheme::PseudoHyperbolic, 16, seed, 0.9);
            let family = make_family(&FamilySpec::ExtremalGrid { points: points.clone() })?;
            let sample = WeightedSample::new(
                points.iter().map(|&z| SampleEntry { lambda: Complex64::new(z.weight(), 0.0), z }).collect(),
            )?;
            let est = summing_estimate(&f, &sample, &family, Exponent::INFINITY, cfg.norm)?;
            let sampled = sampled_seminorm(&f, &points, cfg.norm)?;
            worst = worst.max((est.heuristic_ratio - sampled).abs());
        }
        Ok(Check::bound("summing.infinity_coincidence", cfg.tol("summing.infinity_coincidence", 1e-10), worst)
            .with_witnesses(json!({ "functions": 20, "sample_weights": "1-|z|^2" })))
    })]
}

fn summing_mobius(cfg: &VerifyConfig) -> Vec<Check> {
    vec![guarded("summing.mobius_equivariance", || {
        let mut rng = cfg.rng(5);
        let f = random_function(&mut rng, 2);
        let points = sample_disc(SampleScheme::PseudoHyperbolic, 8, cfg.seed, 0.8);
        let sample =
            WeightedSample::new(points.iter().map(|&z| SampleEntry { lambda: random_complex(&mut rng), z }).collect())?;
        let family = default_family(&points, cfg.seed);
        let mut worst = 0.0f64;
        for _ in 0..10 {
            let phi = random_mobius(&mut rng, 0.5);
            let psi = phi.inverse();
            let f2 = HoloExpr::precompose(psi, f.clone()).normalize_origin()?;
            let fam2 = family_precomposed(&family, &psi)?;
            let sample2 = WeightedSample::new(
                sample
                    .entries
                    .iter()
                    .map(|e| SampleEntry { lambda: e.lambda * phi.derivative(e.z).norm(), z: phi.apply(e.z) })
                    .collect(),
            )?;
            for p in [Exponent::ONE, Exponent::TWO, Exponent::INFINITY] {
                let (n1, n2) = (numerator(&f, &sample, p, cfg.norm)?, numerator(&f2, &sample2, p, cfg.norm)?);
                let (d1, d2) = (denominator(&sample, &family, p)?, denominator(&sample2, &fam2, p)?);
                worst = worst.max((n1 - n2).abs() / n1).max((d1.family_value - d2.family_value).abs() / d1.family_value);
            }
        }
        Ok(Check::bound("summing.mobius_equivariance", cfg.tol("summing.mobius_equivariance", 1e-12), worst)
            .with_witnesses(json!({ "automorphisms": 10, "relative": true })))
    })]
}

fn summing_tensor(cfg: &VerifyConfig) -> Vec<Check> {
    guarded_many("summing.tensor_exactness", || {
        let mut rng = cfg.rng(6);
        let (mut exact, mut upper) = (0.0f64, f64::NEG_INFINITY);
        for _ in 0..20 {
            let a = random_point(&mut rng, 0.95);
            let d = rng.random_range(1..=3);
            let x = random_vector(&mut rng, d);
            let xn = cfg.norm.of(&x);
            let f = HoloExpr::tensor(extremal(a), x);
            let family = make_family(&FamilySpec::ExtremalGrid { points: vec![a] })?;
            let at_a = WeightedSample::new(vec![SampleEntry { lambda: Complex64::new(1.0, 0.0), z: a }])?;
            let others = WeightedSample::new(
                (0..6).map(|_| SampleEntry { lambda: random_complex(&mut rng), z: random_point(&mut rng, 0.95) }).collect(),
            )?;
            for p in [Exponent::ONE, Exponent::TWO, Exponent::INFINITY] {
                let e = summing_estimate(&f, &at_a, &family, p, cfg.norm)?;
                exact = exact.max((e.certified_lower - xn).abs());
                let e = summing_estimate(&f, &others, &family, p, cfg.norm)?;
                upper = upper.max(e.certified_lower - xn);
            }
        }
        Ok(vec![
            Check::bound("summing.tensor_exactness", cfg.tol("summing.tensor_exactness", 1e-10), exact),
            Check::bound("summing.tensor_upper", cfg.tol("summing.tensor_upper", 1e-12), upper),
        ])
    })
}

fn summing_algebra(cfg: &VerifyConfig) -> Vec<Check> {
    guarded_many("summing.algebra", || {
        let mut rng = cfg.rng(7);
        let points = sample_disc(SampleScheme::PseudoHyperbolic, 12, cfg.seed, 0.9);
        let family = default_family(&points, cfg.seed);
        let (mut homog, mut lp_homog, mut sub, mut order) = (0.0f64, 0.0f64, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for i in 0..10u64 {
            let f1 = random_function(&mut rng, 2);
            let f2 = random_function(&mut rng, 2);
            let lam = random_complex(&mut rng) * 3.0;
            let sample = WeightedSample::new(
                points.iter().map(|&z| SampleEntry { lambda: random_complex(&mut rng), z }).collect(),
            )?;
            for p in [Exponent::ONE, Exponent::new(1.5)?, Exponent::TWO, Exponent::INFINITY] {
                let n1 = numerator(&f1, &sample, p, cfg.norm)?;
                let n2 = numerator(&f2, &sample, p, cfg.norm)?;
                let nl = numerator(&HoloExpr::scale(lam, f1.clone()), &sample, p, cfg.norm)?;
                homog = homog.max((nl - lam.norm() * n1).abs() / (lam.norm() * n1));
                let ns = numerator(&HoloExpr::sum(vec![f1.clone(), f2.clone()]), &sample, p, cfg.norm)?;
                sub = sub.max(ns - n1 - n2);
                let e = summing_estimate(&f1, &sample, &family, p, cfg.norm)?;
                order = order
                    .max(e.denominator_family - e.denominator_closed_form)
                    .max(e.certified_lower - e.heuristic_ratio);
            }
            if i < 3 {
                let few = &points[..6];
                let small = make_family(&FamilySpec::ExtremalGrid { points: few.to_vec() })?;
                let c1 = pietsch_lp(&f1, few, &small, Exponent::TWO, cfg.norm)?.constant;
                let cl = pietsch_lp(&HoloExpr::scale(lam, f1.clone()), few, &small, Exponent::TWO, cfg.norm)?.constant;
                lp_homog = lp_homog.max((cl - lam.norm() * c1).abs() / (lam.norm() * c1));
            }
        }
        Ok(vec![
            Check::bound("summing.homogeneity", cfg.tol("summing.homogeneity", 1e-12), homog)
                .with_witnesses(json!({ "relative": true })),
            Check::bound("summing.lp_homogeneity", cfg.tol("summing.lp_homogeneity", 1e-12), lp_homog)
                .with_witnesses(json!({ "relative": true })),
            Check::bound("summing.subadditivity", cfg.tol("summing.subadditivity", 1e-12), sub),
            Check::bound("summing.denominator_order", cfg.tol("summing.denominator_order", 1e-12), order),
        ])
    })
}

fn summing_domination(cfg: &VerifyConfig) -> Vec<Check> {
    guarded_many("summing.domination", || {
        let fresh = sample_disc(SampleScheme::PseudoHyperbolic, 64, cfg.seed.wrapping_add(77), 0.9);
        let mut solved = f64::NEG_INFINITY;
        let (mut violations, mut worst_new) = (0usize, f64::INFINITY);
        for inst in anchored(cfg).iter().chain(&generic(cfg)).step_by(5) {
            let m = pietsch_lp(&inst.f, &inst.points, &inst.family, Exponent::TWO, cfg.norm)?;
            let on = domination_check(&inst.f, &inst.points, &inst.family, &m, cfg.norm)?;
            solved = solved.max(-on.worst_margin);
            let off = domination_check(&inst.f, &fresh, &inst.family, &m, cfg.norm)?;
            violations += off.violations;
            worst_new = worst_new.min(off.worst_margin);
        }
        Ok(vec![
            Check::bound("summing.domination_solved", cfg.tol("summing.domination_solved", 1e-9), solved),
            Check::info(
                "summing.discretization_gap",
                json!({ "fresh_points": fresh.len(), "violations": violations, "worst_margin": worst_new }),
            ),
        ])
    })
}

/// Family supremum of `|Σ α_i g'(z_i)|` against `Σ |α_i| / (1 - |z_i|^2)`.
fn summing_sup_gap(cfg: &VerifyConfig) -> Vec<Check> {
    guarded_many("summing.sup_gap", || {
        let mut rng = cfg.rng(8);
        let points = sample_disc(SampleScheme::PseudoHyperbolic, 8, cfg.seed, 0.9);
        let family = default_family(&points, cfg.seed);
        let derivs = family.derivative_matrix(&points)?;
        let (mut excess, mut min_ratio, mut max_ratio) = (f64::NEG_INFINITY, f64::INFINITY, 0.0f64);
        for _ in 0..50 {
            let alpha: Vec<Complex64> = points.iter().map(|_| random_complex(&mut rng)).collect();
            let closed: f64 = alpha.iter().zip(&points).map(|(a, z)| a.norm() / z.weight()).sum();
            let sup = (0..family.len())
                .map(|k| alpha.iter().zip(&derivs).map(|(a, row)| a * row[k]).sum::<Complex64>().norm())
                .fold(0.0, f64::max);
            excess = excess.max(sup - closed);
            min_ratio = min_ratio.min(sup / closed);
            max_ratio = max_ratio.max(sup / closed);
        }
        Ok(vec![
            Check::bound("summing.sup_gap_bound", cfg.tol("summing.sup_gap_bound", 1e-12), excess),
            Check::info("summing.sup_gap", json!({ "samples": 50, "min_ratio": min_ratio, "max_ratio": max_ratio })),
        ])
    })
}

fn summing_maurey(cfg: &VerifyConfig) -> Vec<Check> {
    guarded_many("summing.maurey", || {
        let mut theta_err = 0.0f64;
        for (p, q) in [(2.0, 4.0), (1.5, 3.0), (1.2, 8.0), (3.0, 3.5)] {
            let t = maurey_theta(p, q);
            theta_err = theta_err.max((t + (1.0 - t) * q - p).abs());
        }
        let instances: Vec<LpInstance> =
            (0..10u64).flat_map(|i| [lp_instance(cfg.sub_seed(i)), generic_instance(cfg.sub_seed(i))]).collect();
        let reports = instances
            .par_iter()
            .map(|inst| maurey_extrapolate(&inst.f, &inst.points, &inst.family, 2.0, 4.0, 6, cfg.norm))
            .collect::<Result<Vec<_>>>()?;
        let interp = reports
            .iter()
            .flat_map(|r| r.stages.iter().map(|s| s.interpolation_margin))
            .fold(f64::INFINITY, f64::min);
        let fin = reports.iter().map(|r| r.final_margin).fold(f64::INFINITY, f64::min);
        let power = reports.iter().map(|r| r.final_margin_power_form).fold(f64::INFINITY, f64::min);
        let c_max = reports.iter().map(|r| r.c_max).fold(0.0, f64::max);
        Ok(vec![
            Check::bound("summing.maurey_theta", cfg.tol("summing.maurey_theta", 1e-12), theta_err),
            Check::bound("summing.maurey_interpolation", cfg.tol("summing.maurey_interpolation", 1e-12), -interp)
                .with_witnesses(json!({ "relative": true, "instances": reports.len(), "depth": 6 })),
            Check::bound("summing.maurey_final", cfg.tol("summing.maurey_final", 0.0), -fin).with_witnesses(json!({
                "relative": true, "p": 2.0, "q": 4.0, "depth": 6, "largest_c_max": c_max,
                "worst_margin_power_form": power, "truncation_mass": reports[0].truncation_mass,
            })),
        ])
    })
}

// ---- molecules ----------------------------------------------------------

fn molecule_rng(cfg: &VerifyConfig, i: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.sub_seed(i) ^ salt)
}

fn molecules_single_atom(cfg: &VerifyConfig) -> Vec<Check> {
    vec![guarded("molecules.single_atom", || {
        let mut worst = 0.0f64;
        for i in 0..20u64 {
            let mut rng = molecule_rng(cfg, i, 11);
            let d = rng.random_range(1..=3);
            let m = random_molecule(&mut rng, 1, d, 0.9);
            let a = &m.atoms[0];
            let truth = a.lambda.norm() * cfg.norm.of(&a.x) / a.z.weight();
            let family = make_family(&FamilySpec::ExtremalGrid { points: m.points() })?;
            let probes = default_probes(&m, &family, cfg.norm, cfg.sub_seed(i));
            let lower = cs_lower_dual(&m, &probes, cfg.norm)?.value;
            for p in [Exponent::ONE, Exponent::TWO, Exponent::INFINITY] {
                let upper = cs_upper(&m, p, cfg.norm).value;
                worst = worst.max((upper - truth).abs()).max((lower - truth).abs());
            }
        }
        Ok(Check::bound("molecules.single_atom", cfg.tol("molecules.single_atom", 1e-9), worst))
    })]
}

fn molecules_sandwich(cfg: &VerifyConfig) -> Vec<Check> {
    guarded_many("molecules.sandwich", || {
        let rows: Vec<(f64, f64, f64)> = (0..100u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = molecule_rng(cfg, i, 12);
                let (n, d) = (rng.random_range(2..=5), rng.random_range(1..=3));
                let m = random_molecule(&mut rng, n, d, 0.9);
                let family = default_family(&m.points(), cfg.sub_seed(i));
                let probes = default_probes(&m, &family, cfg.norm, cfg.sub_seed(i));
                let lower = cs_lower_dual(&m, &probes, cfg.norm)?.value;
                let u1 = cs_upper(&m, Exponent::ONE, cfg.norm).value;
                let mut order = f64::NEG_INFINITY;
                let mut dom = f64::NEG_INFINITY;
                let mut gap = 0.0f64;
                for p in [Exponent::ONE, Exponent::new(1.5)?, Exponent::TWO, Exponent::new(4.0)?, Exponent::INFINITY] {
                    let u = cs_upper(&m, p, cfg.norm).value;
                    order = order.max(lower - u);
                    dom = dom.max(u - u1);
                    gap = gap.max(if u > 0.0 { 1.0 - lower / u } else { 0.0 });
                }
                Ok((order, dom, gap))
            })
            .collect::<Result<_>>()?;
        let order = rows.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
        let dom = rows.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
        let gaps: Vec<f64> = rows.iter().map(|r| r.2).collect();
        let mean_gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
        Ok(vec![
            Check::bound("molecules.sandwich", cfg.tol("molecules.sandwich", 1e-9), order)
                .with_witnesses(json!({ "molecules": 100 })),
            Check::bound("molecules.d1_dominance", cfg.tol("molecules.d1_dominance", 1e-9), dom),
            Check::info(
                "molecules.sandwich_gap",
                json!({ "mean_relative_gap": mean_gap, "max_relative_gap": gaps.iter().cloned().fold(0.0, f64::max) }),
            ),
        ])
    })
}

fn molecules_crossnorm(cfg: &VerifyConfig) -> Vec<Check> {
    guarded_many("molecules.crossnorm", || {
        let (mut atom, mut dual, mut duality) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..100u64 {
            let mut rng = molecule_rng(cfg, i, 13);
            let (n, d) = (rng.random_range(1..=4), rng.random_range(1..=3));
            let m = random_molecule(&mut rng, n, d, 0.9);
            let g = extremal(random_point(&mut rng, 0.9));
            let xstar = random_vector(&mut rng, d);
            let p = [Exponent::ONE, Exponent::TWO, Exponent::INFINITY][(i % 3) as usize];
            let r = crossnorm_check(std::slice::from_ref(&m), &g, 1.0, &xstar, p, cfg.norm)?;
            atom = atom.min(r.atom_margin);
            dual = dual.min(r.dual_margin);
            // Duality inequality with the dual exponent on the molecule side.
            let lhs = pairing_tensor(&m, &g, &xstar)?.norm();
            let rhs = cfg.norm.dual().of(&xstar) * cs_upper(&m, p.conjugate(), cfg.norm).value;
            duality = duality.max(lhs - rhs);
        }
        Ok(vec![
            Check::bound("molecules.crossnorm_atom", cfg.tol("molecules.crossnorm_atom", 1e-12), -atom),
            Check::bound("molecules.crossnorm_dual", cfg.tol("molecules.crossnorm_dual", 1e-9), -dual),
            Check::bound("molecules.duality_inequality", cfg.tol("molecules.duality_inequality", 1e-9), duality),
        ])
    })
}

fn molecules_algebra(cfg: &VerifyConfig) -> Vec<Check> {
    guarded_many("molecules.algebra", || {
        let (mut bil, mut homog) = (0.0f64, 0.0f64);
        for i in 0..50u64 {
            let mut rng = molecule_rng(cfg, i, 14);
            let d = rng.random_range(1..=3);
            let (g1, g2) = (random_molecule(&mut rng, 3, d, 0.9), random_molecule(&mut rng, 2, d, 0.9));
            let (f1, f2) = (random_function(&mut rng, d), random_function(&mut rng, d));
            let s = pairing(&g1.plus(&g2)?, &f1)?;
            let t = pairing(&g1, &f1)? + pairing(&g2, &f1)?;
            bil = bil.max((s - t).norm() / (1.0 + s.norm()));
            let s = pairing(&g1, &HoloExpr::sum(vec![f1.clone(), f2.clone()]))?;
            let t = pairing(&g1, &f1)? + pairing(&g1, &f2)?;
            bil = bil.max((s - t).norm() / (1.0 + s.norm()));
            let lam = random_complex(&mut rng);
            for p in [Exponent::ONE, Exponent::TWO, Exponent::INFINITY] {
                let (a, b) = (cs_upper(&g1.scaled(lam), p, cfg.norm).value, cs_upper(&g1, p, cfg.norm).value);
                homog = homog.max((a - lam.norm() * b).abs() / (lam.norm() * b));
            }
        }
        Ok(vec![
            Check::bound("molecules.bilinearity", cfg.tol("molecules.bilinearity", 1e-12), bil)
                .with_witnesses(json!({ "relative": true })),
            Check::bound("molecules.homogeneity", cfg.tol("molecules.homogeneity", 1e-12), homog)
                .with_witnesses(json!({ "relative": true })),
        ])
    })
}

fn molecules_moves(cfg: &VerifyConfig) -> Vec<Check> {
    guarded_many("molecules.representation_moves", || {
        let (mut worst, mut concat) = (0.0f64, f64::NEG_INFINITY);
        for i in 0..50u64 {
            let mut rng = molecule_rng(cfg, i, 15);
            let d = rng.random_range(1..=3);
            let mut m = random_molecule(&mut rng, 4, d, 0.9);
            // Repeated points and an exact cancellation exercise the merge.
            m.atoms.push(Atom { lambda: random_complex(&mut rng), ..m.atoms[0].clone() });
            m.atoms.push(Atom { lambda: -m.atoms[1].lambda, ..m.atoms[1].clone() });
            let probe_seed = cfg.sub_seed(i);
            let merged = Representation::of(&m).merge_same_point();
            worst = worst.max(pairing_deviation(&m, &merged.molecule(), 20, probe_seed)?);
            for p in [Exponent::ONE, Exponent::TWO, Exponent::INFINITY] {
                let r = merged.rebalance(p, cfg.norm);
                worst = worst.max(pairing_deviation(&m, &r.molecule(), 20, probe_seed)?);
            }
            let other = random_molecule(&mut rng, 2, d, 0.9);
            let p = Exponent::TWO;
            let (u1, u2) = (cs_upper(&m, p, cfg.norm), cs_upper(&other, p, cfg.norm));
            let cat = balanced_concatenation(&u1.representation, &u2.representation, p, cfg.norm);
            worst = worst.max(pairing_deviation(&m.plus(&other)?, &cat.molecule(), 20, probe_seed)?);
            concat = concat
                .max(cat.closed_form(p, cfg.norm) - u1.value - u2.value)
                .max(cs_upper(&m.plus(&other)?, p, cfg.norm).value - u1.value - u2.value);
        }
        Ok(vec![
            Check::bound("molecules.representation_moves", cfg.tol("molecules.representation_moves", 1e-9), worst)
                .with_witnesses(json!({ "probes": 20, "relative": true })),
            Check::bound("molecules.subadditivity", cfg.tol("molecules.subadditivity", 1e-12), concat),
        ])
    })
}
