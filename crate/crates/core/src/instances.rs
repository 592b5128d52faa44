//! Seeded random instances shared by the invariant suite and the tests.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::disc::{sample_disc, DiscPoint, MobiusMap, SampleScheme};
use crate::expr::HoloExpr;
use crate::norms::{extremal, make_family, FamilySpec, TestFamily};

/// Largest point count of an LP instance.
pub const MAX_POINTS: usize = 8;
/// Largest family size of an LP instance.
pub const MAX_MEMBERS: usize = 12;
/// Radius cap of instance points.
pub const INSTANCE_CAP: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpInstance {
    pub seed: u64,
    pub kind: String,
    pub f: HoloExpr,
    pub points: Vec<DiscPoint>,
    pub family: TestFamily,
}

pub fn random_complex(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0)
}

pub fn random_vector(rng: &mut impl Rng, d: usize) -> Vec<Complex64> {
    (0..d).map(|_| random_complex(rng)).collect()
}

/// Uniform point in the disc of radius `cap`.
pub fn random_point(rng: &mut impl Rng, cap: f64) -> DiscPoint {
    DiscPoint::new(Complex64::from_polar(cap * rng.random::<f64>().sqrt(), 2.0 * PI * rng.random::<f64>()))
        .expect("cap < 1")
}

pub fn random_unimodular(rng: &mut impl Rng) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * rng.random::<f64>())
}

pub fn random_mobius(rng: &mut impl Rng, cap: f64) -> MobiusMap {
    MobiusMap::new(random_unimodular(rng), random_point(rng, cap)).expect("unimodular")
}

/// Points and family: 2 to 8 pseudo-hyperbolic points, the extremals at
/// those points, and phase-convex padding up to at most 12 members.
fn base(rng: &mut ChaCha8Rng, seed: u64) -> (Vec<DiscPoint>, TestFamily, Vec<DiscPoint>) {
    let n = rng.random_range(2..=MAX_POINTS);
    let points = sample_disc(SampleScheme::PseudoHyperbolic, n, seed, INSTANCE_CAP);
    let mut family = make_family(&FamilySpec::ExtremalGrid { points: points.clone() }).expect("extremal grid");
    let extra = rng.random_range(0..=(MAX_MEMBERS - n));
    let others = sample_disc(SampleScheme::PseudoHyperbolic, 2 * extra + 1, seed.wrapping_add(1000), INSTANCE_CAP);
    if extra > 0 {
        let pad = make_family(&FamilySpec::PhaseConvex { centers: others.clone(), combinations: extra, terms: 2, seed })
            .expect("phase convex");
        family.extend(pad);
    }
    (points, family, others)
}

/// `f = f_{z*} · x` with `z*` one of the points: on these instances the
/// discrete Pietsch constant equals the true summing norm `‖x‖`.
pub fn lp_instance(seed: u64) -> LpInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (points, family, _) = base(&mut rng, seed);
    let d = rng.random_range(1..=3);
    let x = random_vector(&mut rng, d);
    let anchor = points[rng.random_range(0..points.len())];
    LpInstance { seed, kind: "tensor_extremal".into(), f: HoloExpr::tensor(extremal(anchor), x), points, family }
}

pub const GENERIC_KINDS: [&str; 4] = ["member", "sum2", "poly", "extremal_off"];

/// Same points and families as [`lp_instance`] with less structured `f`.
pub fn generic_instance(seed: u64) -> LpInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let (points, family, others) = base(&mut rng, seed);
    let d = rng.random_range(1..=3);
    let x = random_vector(&mut rng, d);
    let kind = GENERIC_KINDS[(seed % GENERIC_KINDS.len() as u64) as usize];
    let f = match kind {
        "member" => HoloExpr::tensor(family.members[rng.random_range(0..family.len())].clone(), x),
        "sum2" => {
            let y: Vec<Complex64> = x.iter().map(|c| c * Complex64::new(0.0, 1.0)).collect();
            HoloExpr::sum(vec![
                HoloExpr::tensor(family.members[0].clone(), x),
                HoloExpr::tensor(family.members[family.len() - 1].clone(), y),
            ])
        }
        "poly" => HoloExpr::tensor(
            HoloExpr::sum(vec![HoloExpr::monomial(1), HoloExpr::scale(random_complex(&mut rng) * 0.5, HoloExpr::monomial(2))]),
            x,
        ),
        _ => HoloExpr::tensor(extremal(others[0]), x),
    };
    LpInstance { seed, kind: kind.into(), f, points, family }
}

/// A normalized scalar or vector function mixing every node kind.
pub fn random_function(rng: &mut impl Rng, d: usize) -> HoloExpr {
    let a = random_point(rng, 0.8);
    let phi = random_mobius(rng, 0.6);
    let coeffs: Vec<Complex64> = (0..5).map(|k| if k == 0 { Complex64::new(0.0, 0.0) } else { random_complex(rng) * 0.5 }).collect();
    let scalar = HoloExpr::sum(vec![
        HoloExpr::scale(random_complex(rng), HoloExpr::extremal(a)),
        HoloExpr::scale(random_complex(rng) * 0.5, HoloExpr::monomial(rng.random_range(1..=4))),
        HoloExpr::precompose(phi, HoloExpr::monomial(2)).normalize_origin().expect("no taylor nodes"),
        HoloExpr::taylor(coeffs, 0.95),
    ]);
    if d == 1 {
        scalar
    } else {
        HoloExpr::sum(vec![
            HoloExpr::tensor(scalar, random_vector(rng, d)),
            HoloExpr::tensor(HoloExpr::extremal(random_point(rng, 0.8)), random_vector(rng, d)),
        ])
    }
}
