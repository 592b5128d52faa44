//! Bloch seminorm brackets and certified test families for the unit ball of
//! the normalized Bloch space.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disc::{sample_disc, DiscPoint, MobiusMap, SampleScheme, DEFAULT_RADIUS_CAP};
use crate::error::{BlochError, Result};
use crate::expr::{monomial_seminorm, HoloExpr};
use crate::vector::Norm;

/// Default number of rings of the seminorm grid (`4N` angles per ring).
pub const DEFAULT_RESOLUTION: usize = 256;

/// Slack allowed on a family certificate.
pub const CERTIFICATE_TOL: f64 = 1e-12;

/// Tolerance under which two family members count as the same expression.
pub const MEMBER_EQ_TOL: f64 = 1e-12;

// Relative allowance for rounding in an exactly known seminorm value.
const STRUCTURAL_ROUNDING: f64 = 1e-14;
/// Relative deflation of the sampled lower bound for evaluation rounding.
const EVALUATION_ROUNDING: f64 = 1e-14;

/// `f_a(w) = (1 - |a|^2) w / (1 - ā w)`, of Bloch seminorm exactly 1.
pub fn extremal(a: DiscPoint) -> HoloExpr {
    HoloExpr::extremal(a)
}

/// `(1 - |z|^2) ‖f'(z)‖`.
pub fn weighted_derivative(f: &HoloExpr, z: Complex64, norm: Norm) -> Result<f64> {
    Ok((1.0 - z.norm_sqr()).max(0.0) * f.deriv_raw(z)?.norm(norm))
}

/// `max_j (1 - |z_j|^2) ‖f'(z_j)‖` over a finite point set.
pub fn sampled_seminorm(f: &HoloExpr, points: &[DiscPoint], norm: Norm) -> Result<f64> {
    points
        .iter()
        .map(|z| weighted_derivative(f, z.value(), norm))
        .try_fold(0.0, |m, v| v.map(|v| f64::max(m, v)))
}

/// Lower and upper bounds on the Bloch seminorm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertBracket {
    pub lower: f64,
    /// `"inf"` in JSON when no certified upper bound is available.
    #[serde(with = "crate::cserde::ext_real")]
    pub upper: f64,
    pub lower_method: String,
    pub upper_method: String,
    /// Point attaining `lower`.
    pub witness: DiscPoint,
    /// Grid index the refinement started from.
    pub witness_grid_index: usize,
    pub resolution: usize,
}

impl CertBracket {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, value: f64, tol: f64) -> bool {
        self.lower - tol <= value && value <= self.upper + tol
    }
}

fn grid_point(index: usize, n: usize, m: usize, cap: f64) -> Complex64 {
    if index == 0 {
        return Complex64::new(0.0, 0.0);
    }
    let i = (index - 1) / m + 1;
    let j = (index - 1) % m;
    Complex64::from_polar(cap * i as f64 / n as f64, 2.0 * PI * j as f64 / m as f64)
}

/// Brackets `p_B(f) = sup (1 - |z|^2) ‖f'(z)‖`.
///
/// The lower side is the maximum over a polar grid (`resolution` rings,
/// `4·resolution` angles, covering the closed disc), refined by a local
/// pattern search from the grid witness, then deflated by a relative 1e-14
/// for evaluation rounding; ties go to the smallest grid index.
/// The upper side is the smaller of a Lipschitz remainder bound (polynomial
/// derivatives only) and the structural seminorm calculus. With a taylor node
/// the grid stops at the smallest validity radius and the upper side is `+∞`.
pub fn bloch_seminorm_bracket(f: &HoloExpr, resolution: usize, norm: Norm) -> Result<CertBracket> {
    f.dim()?;
    let n = resolution.max(1);
    let m = 4 * n;
    let taylor_cap = f.min_taylor_radius();
    let cap = taylor_cap.unwrap_or(1.0);
    let count = 1 + n * m;
    let values: Vec<f64> = (0..count)
        .into_par_iter()
        .map(|idx| weighted_derivative(f, grid_point(idx, n, m, cap), norm))
        .collect::<Result<_>>()?;
    // Sequential scan: the first strict maximum wins, independent of thread count.
    let (best_idx, grid_max) = values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });

    let start = grid_point(best_idx, n, m, cap);
    let refine_cap = cap.min(1.0 - 1e-9);
    let (witness, sampled) = refine(f, start, grid_max, 1.0 / n as f64, refine_cap, norm)?;
    let lower = sampled * (1.0 - EVALUATION_ROUNDING);

    let mut upper = f64::INFINITY;
    let mut upper_method = "none".to_string();
    if taylor_cap.is_none() {
        if let Some(coeffs) = f.polynomial() {
            let mut a1 = 0.0;
            let mut a2 = 0.0;
            for (k, c) in coeffs.iter().enumerate() {
                let size = norm.of(c);
                a1 += k as f64 * size;
                a2 += (k * k.saturating_sub(1)) as f64 * size;
            }
            let lipschitz = 2.0 * a1 + a2;
            let delta = 1.0 / (2.0 * n as f64) + PI / m as f64;
            upper = grid_max + lipschitz * delta;
            upper_method = "lipschitz_grid".to_string();
        }
        if let Some(s) = f.seminorm_calculus_bound(norm) {
            let s = s * (1.0 + STRUCTURAL_ROUNDING);
            if s < upper {
                upper = s;
                upper_method = "seminorm_calculus".to_string();
            }
        }
        upper = upper.max(lower);
    }

    Ok(CertBracket {
        lower,
        upper,
        lower_method: if sampled > grid_max { "grid_max_refined" } else { "grid_max" }.to_string(),
        upper_method,
        witness: DiscPoint::new(witness).unwrap_or_else(|_| DiscPoint::origin()),
        witness_grid_index: best_idx,
        resolution: n,
    })
}

/// Compass search for a larger value of the weighted derivative near `start`.
fn refine(f: &HoloExpr, start: Complex64, value: f64, step: f64, cap: f64, norm: Norm) -> Result<(Complex64, f64)> {
    let mut best = if start.norm() > cap { start * (cap / start.norm()) } else { start };
    let mut best_v = if best == start { value } else { weighted_derivative(f, best, norm)? };
    if best_v < value {
        return Ok((start, value));
    }
    let dirs = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(-1.0, 0.0), Complex64::new(0.0, -1.0)];
    let mut h = step;
    for _ in 0..80 {
        let mut improved = false;
        for d in dirs {
            let z = best + d * h;
            if z.norm() > cap {
                continue;
            }
            let v = weighted_derivative(f, z, norm)?;
            if v > best_v {
                best = z;
                best_v = v;
                improved = true;
            }
        }
        if !improved {
            h *= 0.5;
            if h < 1e-13 {
                break;
            }
        }
    }
    Ok((best, best_v))
}

/// A finite set of scalar normalized Bloch functions with certified seminorm
/// bounds `<= 1`, standing in for the unit ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFamily {
    pub members: Vec<HoloExpr>,
    pub certificates: Vec<f64>,
    #[serde(default)]
    pub provenance: Vec<String>,
}

impl TestFamily {
    pub fn empty() -> Self {
        TestFamily { members: Vec::new(), certificates: Vec::new(), provenance: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Parses a family without checking certificates; see [`TestFamily::validate`].
    pub fn from_json(s: &str) -> Result<Self> {
        let mut fam: TestFamily = serde_json::from_str(s)?;
        if fam.members.len() != fam.certificates.len() {
            return Err(BlochError::Parse(format!(
                "family has {} members but {} certificates",
                fam.members.len(),
                fam.certificates.len()
            )));
        }
        if fam.provenance.is_empty() {
            fam.provenance = vec!["file".to_string(); fam.members.len()];
        }
        for (i, g) in fam.members.iter().enumerate() {
            g.dim().map_err(|e| BlochError::Parse(format!("family member {i}: {e}")))?;
        }
        Ok(fam)
    }

    /// Adds `g` unless an equal member (after canonicalization) is present.
    /// Returns whether it was added.
    pub fn push(&mut self, g: HoloExpr, certificate: f64, provenance: impl Into<String>) -> bool {
        let g = g.canonicalize();
        if self.members.iter().any(|h| h.approx_eq(&g, MEMBER_EQ_TOL)) {
            return false;
        }
        self.members.push(g);
        self.certificates.push(certificate);
        self.provenance.push(provenance.into());
        true
    }

    pub fn extend(&mut self, other: TestFamily) {
        for ((g, c), p) in other.members.into_iter().zip(other.certificates).zip(other.provenance) {
            self.push(g, c, p);
        }
    }

    /// Every violated family invariant, as human-readable messages.
    pub fn validate(&self) -> Vec<String> {
        let mut issues = Vec::new();
        if self.members.len() != self.certificates.len() {
            issues.push(format!("{} members but {} certificates", self.members.len(), self.certificates.len()));
        }
        for (i, (g, &c)) in self.members.iter().zip(&self.certificates).enumerate() {
            match g.dim() {
                Ok(1) => {}
                Ok(d) => issues.push(format!("member {i} has dimension {d}, expected scalar")),
                Err(e) => issues.push(format!("member {i}: {e}")),
            }
            match g.eval_raw(Complex64::new(0.0, 0.0)) {
                Ok(v) if v.0.iter().all(|c| c.norm() <= 1e-12) => {}
                Ok(v) => issues.push(format!("member {i} is not normalized: g(0) = {}", v.0[0])),
                Err(e) => issues.push(format!("member {i}: {e}")),
            }
            if !(c.is_finite() && (0.0..=1.0 + CERTIFICATE_TOL).contains(&c)) {
                issues.push(format!("member {i} certificate {c} exceeds 1"));
            }
        }
        let canon: Vec<HoloExpr> = self.members.iter().map(HoloExpr::canonicalize).collect();
        for i in 0..canon.len() {
            for j in 0..i {
                if canon[i].approx_eq(&canon[j], MEMBER_EQ_TOL) {
                    issues.push(format!("members {j} and {i} coincide"));
                }
            }
        }
        issues
    }

    /// `g_k'(z)` for every member.
    pub fn derivatives_at(&self, z: Complex64) -> Result<Vec<Complex64>> {
        self.members.iter().map(|g| g.deriv_scalar(z)).collect()
    }

    /// Row `j` holds `g_k'(z_j)` for every member `k`.
    pub fn derivative_matrix(&self, points: &[DiscPoint]) -> Result<Vec<Vec<Complex64>>> {
        points.par_iter().map(|z| self.derivatives_at(z.value())).collect()
    }
}

/// Recipes for building test families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilySpec {
    /// `f_a` for each listed center.
    ExtremalGrid { points: Vec<DiscPoint> },
    /// Random `Σ θ_k c_k f_{a_k}` with `c` in the simplex and `|θ_k| = 1`,
    /// each over `terms` distinct centers.
    PhaseConvex {
        centers: Vec<DiscPoint>,
        combinations: usize,
        #[serde(default = "default_terms")]
        terms: usize,
        #[serde(default)]
        seed: u64,
    },
    /// `w^degree` and random polynomials without constant term, each scaled
    /// by a certified seminorm upper bound.
    NormalizedPolynomials {
        degree: u32,
        count: usize,
        #[serde(default)]
        seed: u64,
    },
    /// The standard recipe: 64 pseudo-hyperbolic extremal centers, 64
    /// phase-convex combinations of them, and the extremals of `points`.
    Default {
        #[serde(default)]
        points: Vec<DiscPoint>,
        #[serde(default)]
        seed: u64,
    },
    Union { parts: Vec<FamilySpec> },
}

fn default_terms() -> usize {
    3
}

impl FamilySpec {
    pub fn default_recipe(points: &[DiscPoint], seed: u64) -> FamilySpec {
        let centers = sample_disc(SampleScheme::PseudoHyperbolic, 64, seed, DEFAULT_RADIUS_CAP);
        FamilySpec::Union {
            parts: vec![
                FamilySpec::ExtremalGrid { points: centers.clone() },
                FamilySpec::PhaseConvex { centers, combinations: 64, terms: default_terms(), seed },
                FamilySpec::ExtremalGrid { points: points.to_vec() },
            ],
        }
    }
}

/// `Σ θ_k c_k f_{a_k}` with its convexity certificate `Σ c_k`.
pub fn phase_convex_member(centers: &[DiscPoint], weights: &[f64], phases: &[Complex64]) -> Result<(HoloExpr, f64)> {
    if centers.is_empty() || centers.len() != weights.len() || centers.len() != phases.len() {
        return Err(BlochError::Invalid("phase-convex member needs matching nonempty centers, weights, phases".into()));
    }
    if weights.iter().any(|&c| !(c >= 0.0)) {
        return Err(BlochError::Invalid("phase-convex weights must be nonnegative".into()));
    }
    if phases.iter().any(|t| (t.norm() - 1.0).abs() > 1e-12) {
        return Err(BlochError::Invalid("phases must be unimodular".into()));
    }
    let terms = centers
        .iter()
        .zip(weights)
        .zip(phases)
        .map(|((a, c), t)| HoloExpr::scale(t * c, extremal(*a)))
        .collect();
    Ok((HoloExpr::sum(terms), weights.iter().sum()))
}

pub fn make_family(spec: &FamilySpec) -> Result<TestFamily> {
    let mut fam = TestFamily::empty();
    build_into(spec, &mut fam)?;
    if fam.is_empty() {
        return Err(BlochError::Invalid("family recipe produced no members".into()));
    }
    Ok(fam)
}

fn build_into(spec: &FamilySpec, fam: &mut TestFamily) -> Result<()> {
    match spec {
        FamilySpec::ExtremalGrid { points } => {
            for a in points {
                fam.push(extremal(*a), 1.0, "extremal");
            }
        }
        FamilySpec::PhaseConvex { centers, combinations, terms, seed } => {
            if centers.is_empty() {
                return Err(BlochError::Invalid("phase_convex needs at least one center".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let t = (*terms).clamp(1, centers.len());
            for _ in 0..*combinations {
                let chosen = rand::seq::index::sample(&mut rng, centers.len(), t);
                let picked: Vec<DiscPoint> = chosen.iter().map(|i| centers[i]).collect();
                let raw: Vec<f64> = (0..t).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
                let total: f64 = raw.iter().sum();
                let mut weights: Vec<f64> = raw.iter().map(|r| r / total).collect();
                // Rounding can leave Σ c one ulp above 1; take it off the largest weight.
                let top = (0..t).fold(0, |b, i| if weights[i] > weights[b] { i } else { b });
                while weights.iter().sum::<f64>() > 1.0 {
                    let excess = weights.iter().sum::<f64>() - 1.0;
                    weights[top] -= excess.max(f64::EPSILON * weights[top]);
                }
                let phases: Vec<Complex64> =
                    (0..t).map(|_| Complex64::from_polar(1.0, 2.0 * PI * rng.random::<f64>())).collect();
                let (g, cert) = phase_convex_member(&picked, &weights, &phases)?;
                fam.push(g, cert, "phase_convex");
            }
        }
        FamilySpec::NormalizedPolynomials { degree, count, seed } => {
            if *degree == 0 {
                return Err(BlochError::CertificationFailure("degree-0 polynomials vanish after normalization".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            for i in 0..*count {
                let p = if i == 0 {
                    HoloExpr::monomial(*degree)
                } else {
                    let mut coeffs = vec![Complex64::new(0.0, 0.0)];
                    for _ in 1..=*degree {
                        coeffs.push(Complex64::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0));
                    }
                    HoloExpr::sum(
                        coeffs
                            .iter()
                            .enumerate()
                            .skip(1)
                            .map(|(k, c)| HoloExpr::scale(*c, HoloExpr::monomial(k as u32)))
                            .collect(),
                    )
                };
                let bound = if i == 0 {
                    monomial_seminorm(*degree) * (1.0 + STRUCTURAL_ROUNDING)
                } else {
                    bloch_seminorm_bracket(&p, DEFAULT_RESOLUTION, Norm::Euclidean)?.upper
                };
                if !(bound.is_finite() && bound > 0.0) {
                    return Err(BlochError::CertificationFailure(format!(
                        "polynomial member {i} has no usable seminorm bound ({bound})"
                    )));
                }
                let g = HoloExpr::scale(Complex64::new(1.0 / bound, 0.0), p);
                fam.push(g, 1.0, "normalized_polynomial");
            }
        }
        FamilySpec::Default { points, seed } => build_into(&FamilySpec::default_recipe(points, *seed), fam)?,
        FamilySpec::Union { parts } => {
            for part in parts {
                build_into(part, fam)?;
            }
        }
    }
    Ok(())
}

/// The standard family for a point set.
pub fn default_family(points: &[DiscPoint], seed: u64) -> TestFamily {
    make_family(&FamilySpec::default_recipe(points, seed)).expect("the default recipe always has members")
}

/// The family enlarged by `normalize_origin(g ∘ φ)` for each member `g`,
/// each carrying the certificate of `g` (the seminorm is Möbius invariant).
pub fn family_mobius_closure(family: &TestFamily, phi: &MobiusMap) -> Result<TestFamily> {
    let mut out = family.clone();
    for ((g, &c), p) in family.members.iter().zip(&family.certificates).zip(&family.provenance) {
        let h = HoloExpr::precompose(*phi, g.clone()).normalize_origin()?;
        out.push(h, c, format!("mobius({p})"));
    }
    Ok(out)
}

/// `{normalize_origin(g ∘ φ)}` alone, in member order, with certificates kept.
pub fn family_precomposed(family: &TestFamily, phi: &MobiusMap) -> Result<TestFamily> {
    let mut members = Vec::with_capacity(family.len());
    for g in &family.members {
        members.push(HoloExpr::precompose(*phi, g.clone()).normalize_origin()?.canonicalize());
    }
    Ok(TestFamily {
        members,
        certificates: family.certificates.clone(),
        provenance: family.provenance.iter().map(|p| format!("mobius({p})")).collect(),
    })
}
