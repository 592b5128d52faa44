//! `ℂ^d`-valued Bloch molecules `Σ λ_i γ_{z_i} ⊗ x_i`, their pairing with
//! vector Bloch functions, and sandwich bounds on the Chevet–Saphar norms.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::disc::DiscPoint;
use crate::error::{BlochError, Result};
use crate::expr::HoloExpr;
use crate::norms::{default_family, TestFamily};
use crate::vector::{Exponent, Norm};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Number of random unit functionals per family member in the default probes.
pub const RANDOM_FUNCTIONALS: usize = 8;

/// One term `λ γ_z ⊗ x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    #[serde(with = "crate::cserde")]
    pub lambda: Complex64,
    pub z: DiscPoint,
    #[serde(with = "crate::cserde::vec")]
    pub x: Vec<Complex64>,
}

/// A finite molecule; serialized as the bare list of atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Molecule {
    pub atoms: Vec<Atom>,
}

impl Molecule {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        if let Some(first) = atoms.first() {
            let d = first.x.len();
            if d == 0 {
                return Err(BlochError::Invalid("atom vectors must be nonempty".into()));
            }
            for a in &atoms {
                if a.x.len() != d {
                    return Err(BlochError::DimensionMismatch { expected: d, found: a.x.len() });
                }
            }
        }
        Ok(Molecule { atoms })
    }

    pub fn zero() -> Self {
        Molecule { atoms: Vec::new() }
    }

    pub fn atom(lambda: Complex64, z: DiscPoint, x: Vec<Complex64>) -> Self {
        Molecule { atoms: vec![Atom { lambda, z, x }] }
    }

    /// Output dimension, `None` for the empty molecule.
    pub fn dim(&self) -> Option<usize> {
        self.atoms.first().map(|a| a.x.len())
    }

    /// Parses a JSON list of `{"lambda", "z", "x"}`; errors name the atom.
    pub fn from_json(s: &str) -> Result<Self> {
        let raw: Vec<serde_json::Value> = serde_json::from_str(s)?;
        let mut atoms = Vec::with_capacity(raw.len());
        for (i, v) in raw.into_iter().enumerate() {
            let a: Atom = serde_json::from_value(v).map_err(|e| BlochError::Parse(format!("molecule atom {i}: {e}")))?;
            atoms.push(a);
        }
        Molecule::new(atoms)
    }

    /// Formal sum (concatenation of atoms).
    pub fn plus(&self, other: &Molecule) -> Result<Molecule> {
        let mut atoms = self.atoms.clone();
        atoms.extend(other.atoms.iter().cloned());
        Molecule::new(atoms)
    }

    pub fn scaled(&self, c: Complex64) -> Molecule {
        Molecule { atoms: self.atoms.iter().map(|a| Atom { lambda: a.lambda * c, ..a.clone() }).collect() }
    }

    pub fn points(&self) -> Vec<DiscPoint> {
        self.atoms.iter().map(|a| a.z).collect()
    }
}

/// `⟨γ, f⟩ = Σ λ_i ⟨f'(z_i), x_i⟩` with the bilinear pairing `⟨u, x⟩ = Σ u_j x_j`.
pub fn pairing(gamma: &Molecule, f: &HoloExpr) -> Result<Complex64> {
    if gamma.atoms.is_empty() {
        return Ok(ZERO);
    }
    let d = f.dim()?;
    if Some(d) != gamma.dim() {
        return Err(BlochError::DimensionMismatch { expected: gamma.dim().unwrap_or(0), found: d });
    }
    let mut acc = ZERO;
    for a in &gamma.atoms {
        acc += a.lambda * f.deriv(a.z)?.bilinear(&a.x);
    }
    Ok(acc)
}

/// `⟨γ, g·x*⟩` for a scalar `g`, without building the tensor expression.
pub fn pairing_tensor(gamma: &Molecule, g: &HoloExpr, xstar: &[Complex64]) -> Result<Complex64> {
    let mut acc = ZERO;
    for a in &gamma.atoms {
        let s: Complex64 = xstar.iter().zip(&a.x).map(|(u, v)| u * v).sum();
        acc += a.lambda * g.deriv_scalar(a.z.value())? * s;
    }
    Ok(acc)
}

/// A rewriting of a molecule together with the moves that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Representation {
    pub atoms: Vec<Atom>,
    pub moves: Vec<String>,
}

impl Representation {
    pub fn of(gamma: &Molecule) -> Self {
        Representation { atoms: gamma.atoms.clone(), moves: Vec::new() }
    }

    pub fn molecule(&self) -> Molecule {
        Molecule { atoms: self.atoms.clone() }
    }

    /// `Σ |λ_i| ‖x_i‖ / (1 - |z_i|^2)`.
    pub fn projective_value(&self, norm: Norm) -> f64 {
        self.atoms.iter().map(|a| a.lambda.norm() * norm.of(&a.x) / a.z.weight()).sum()
    }

    /// `‖(|λ_i| / (1 - |z_i|^2))_i‖_{p*} · ‖(‖x_i‖)_i‖_p`.
    pub fn closed_form(&self, p: Exponent, norm: Norm) -> f64 {
        let (alpha, beta) = self.factors(p, norm);
        alpha * beta
    }

    fn factors(&self, p: Exponent, norm: Norm) -> (f64, f64) {
        let alpha = p.conjugate().norm_of(self.atoms.iter().map(|a| a.lambda.norm() / a.z.weight()));
        let beta = p.norm_of(self.atoms.iter().map(|a| norm.of(&a.x)));
        (alpha, beta)
    }

    /// Merges atoms at the same point into `γ_z ⊗ Σ λ_i x_i` and drops
    /// atoms that vanish (which includes exact cancellations).
    pub fn merge_same_point(&self) -> Representation {
        let mut groups: Vec<(DiscPoint, Vec<Complex64>)> = Vec::new();
        for a in &self.atoms {
            let scaled: Vec<Complex64> = a.x.iter().map(|v| v * a.lambda).collect();
            match groups.iter_mut().find(|(z, _)| *z == a.z) {
                Some((_, acc)) => acc.iter_mut().zip(&scaled).for_each(|(s, v)| *s += v),
                None => groups.push((a.z, scaled)),
            }
        }
        let atoms: Vec<Atom> = groups
            .into_iter()
            .filter(|(_, x)| x.iter().any(|v| *v != ZERO))
            .map(|(z, x)| Atom { lambda: Complex64::new(1.0, 0.0), z, x })
            .collect();
        let mut moves = self.moves.clone();
        if atoms.len() != self.atoms.len() {
            moves.push("merge_same_point".into());
        }
        Representation { atoms, moves }
    }

    /// Per-atom scalar transfer `λ γ_z ⊗ x = λ' γ_z ⊗ (λ/λ') x` choosing the
    /// moduli that minimize the closed form for exponent `p`: with
    /// `t_i = |λ_i| ‖x_i‖ / (1 - |z_i|^2)` the factors become `t_i^{1/p*}`
    /// and `t_i^{1/p}`, and the product collapses to `Σ t_i`.
    pub fn rebalance(&self, p: Exponent, norm: Norm) -> Representation {
        let pv = p.value();
        let atoms = self
            .atoms
            .iter()
            .filter_map(|a| {
                let w = a.z.weight();
                let t = a.lambda.norm() * norm.of(&a.x) / w;
                if t == 0.0 {
                    return None;
                }
                let scale_a = if p.is_infinite() {
                    t
                } else if pv == 1.0 {
                    1.0
                } else {
                    t.powf(1.0 - 1.0 / pv)
                };
                let phase = a.lambda / a.lambda.norm();
                let lambda = phase * (scale_a * w);
                let x = a.x.iter().map(|v| v * (a.lambda / lambda)).collect();
                Some(Atom { lambda, z: a.z, x })
            })
            .collect();
        let mut moves = self.moves.clone();
        moves.push("rebalance".into());
        Representation { atoms, moves }
    }

    /// Scales `λ` by `r` and `x` by `1/r` (`r > 0`).
    fn transfer(&self, r: f64) -> Representation {
        Representation {
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom { lambda: a.lambda * r, z: a.z, x: a.x.iter().map(|v| v / r).collect() })
                .collect(),
            moves: self.moves.clone(),
        }
    }
}

/// Concatenation of two representations after the Young rescaling that
/// makes the closed form of the union at most the sum of the two.
pub fn balanced_concatenation(r1: &Representation, r2: &Representation, p: Exponent, norm: Norm) -> Representation {
    let pv = p.value();
    let balance = |r: &Representation| -> Representation {
        let (alpha, beta) = r.factors(p, norm);
        let c = alpha * beta;
        if c == 0.0 {
            return Representation { atoms: Vec::new(), moves: r.moves.clone() };
        }
        // Target factors c^{1/p*} and c^{1/p}.
        let target_alpha = if p.is_infinite() { c } else if pv == 1.0 { 1.0 } else { c.powf(1.0 - 1.0 / pv) };
        r.transfer(target_alpha / alpha)
    };
    let mut atoms = balance(r1).atoms;
    atoms.extend(balance(r2).atoms);
    let mut moves = r1.moves.clone();
    moves.extend(r2.moves.iter().cloned());
    moves.push("balanced_concatenation".into());
    Representation { atoms, moves }
}

/// Best explored representation and its value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpperBound {
    pub value: f64,
    pub representation: Representation,
}

/// Upper bound on the projective norm over explored representations.
pub fn projective_upper(gamma: &Molecule, norm: Norm) -> UpperBound {
    let original = Representation::of(gamma);
    let merged = original.merge_same_point();
    let (a, b) = (original.projective_value(norm), merged.projective_value(norm));
    if b <= a {
        UpperBound { value: b, representation: merged }
    } else {
        UpperBound { value: a, representation: original }
    }
}

/// Upper bound on `d_p` by the closed form, minimized over the explored
/// representations (original, merged, merged and rebalanced).
pub fn cs_upper(gamma: &Molecule, p: Exponent, norm: Norm) -> UpperBound {
    let original = Representation::of(gamma);
    let merged = original.merge_same_point();
    let rebalanced = merged.rebalance(p, norm);
    let mut best: Option<UpperBound> = None;
    for rep in [original, merged, rebalanced] {
        let v = rep.closed_form(p, norm);
        if best.as_ref().is_none_or(|b| v < b.value) {
            best = Some(UpperBound { value: v, representation: rep });
        }
    }
    best.expect("three candidates")
}

/// A tensor test function `g · x*` with a certified seminorm bound on `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub g: HoloExpr,
    pub certificate: f64,
    #[serde(with = "crate::cserde::vec")]
    pub xstar: Vec<Complex64>,
}

/// Family members tensored with random unit functionals and the norming
/// functional of each atom vector.
pub fn default_probes(gamma: &Molecule, family: &TestFamily, norm: Norm, seed: u64) -> Vec<Probe> {
    let Some(d) = gamma.dim() else { return Vec::new() };
    let dual = norm.dual();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut functionals: Vec<Vec<Complex64>> = Vec::new();
    for _ in 0..RANDOM_FUNCTIONALS {
        let v: Vec<Complex64> = (0..d)
            .map(|_| Complex64::from_polar(rng.random::<f64>(), 2.0 * PI * rng.random::<f64>()))
            .collect();
        let n = dual.of(&v);
        if n > 0.0 {
            functionals.push(v.iter().map(|c| c / n).collect());
        }
    }
    let merged = Representation::of(gamma).merge_same_point();
    for a in gamma.atoms.iter().chain(&merged.atoms) {
        if let Some(f) = norm.norming_functional(&a.x) {
            functionals.push(f);
        }
    }
    let mut probes = Vec::with_capacity(family.len() * functionals.len());
    for (g, &c) in family.members.iter().zip(&family.certificates) {
        for f in &functionals {
            probes.push(Probe { g: g.clone(), certificate: c, xstar: f.clone() });
        }
    }
    probes
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBound {
    pub value: f64,
    /// Index of the best probe, if any probe pairs nontrivially.
    pub witness: Option<usize>,
}

/// `max |⟨γ, g·x*⟩| / (cert(g) ‖x*‖_*)` over probes. Valid for every
/// exponent, since `π_{p*}(g·x*) = p_B(g) ‖x*‖`.
pub fn cs_lower_dual(gamma: &Molecule, probes: &[Probe], norm: Norm) -> Result<LowerBound> {
    let dual = norm.dual();
    let mut best = LowerBound { value: 0.0, witness: None };
    if gamma.atoms.is_empty() {
        return Ok(best);
    }
    for (i, pr) in probes.iter().enumerate() {
        let scale = pr.certificate * dual.of(&pr.xstar);
        if !(scale > 0.0) {
            continue;
        }
        let v = pairing_tensor(gamma, &pr.g, &pr.xstar)?.norm() / scale;
        if v > best.value {
            best = LowerBound { value: v, witness: Some(i) };
        }
    }
    Ok(best)
}

/// Both sides of the Chevet–Saphar sandwich for one molecule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sandwich {
    pub p: Exponent,
    pub lower: f64,
    pub upper: f64,
    pub projective_upper: f64,
    pub upper_representation: Representation,
    pub lower_witness: Option<Probe>,
    pub probes: usize,
    pub seed: u64,
}

/// Sandwich with the default probes (default family on the atom points).
pub fn sandwich(gamma: &Molecule, p: Exponent, norm: Norm, seed: u64) -> Result<Sandwich> {
    let family = default_family(&gamma.points(), seed);
    let probes = default_probes(gamma, &family, norm, seed);
    let lower = cs_lower_dual(gamma, &probes, norm)?;
    let upper = cs_upper(gamma, p, norm);
    let proj = projective_upper(gamma, norm);
    Ok(Sandwich {
        p,
        lower: lower.value,
        upper: upper.value,
        projective_upper: proj.value,
        upper_representation: upper.representation,
        lower_witness: lower.witness.map(|i| probes[i].clone()),
        probes: probes.len(),
        seed,
    })
}

/// Worst margins of the reasonable-crossnorm inequalities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossnormReport {
    /// `min ‖x‖/(1-|z|^2) - cs_upper(γ_z ⊗ x)` over single atoms.
    pub atom_margin: f64,
    /// `min cert(g) ‖x*‖ π(γ) - |⟨γ, g·x*⟩|` over molecules.
    pub dual_margin: f64,
    pub checked: usize,
    pub passed: bool,
}

pub fn crossnorm_check(
    molecules: &[Molecule],
    g: &HoloExpr,
    certificate: f64,
    xstar: &[Complex64],
    p: Exponent,
    norm: Norm,
) -> Result<CrossnormReport> {
    let mut atom_margin = f64::INFINITY;
    let mut dual_margin = f64::INFINITY;
    let mut checked = 0;
    for gamma in molecules {
        for a in &gamma.atoms {
            let single = Molecule::atom(Complex64::new(1.0, 0.0), a.z, a.x.clone());
            let bound = norm.of(&a.x) / a.z.weight();
            atom_margin = atom_margin.min(bound - cs_upper(&single, p, norm).value);
        }
        let lhs = pairing_tensor(gamma, g, xstar)?.norm();
        let rhs = certificate * norm.dual().of(xstar) * projective_upper(gamma, norm).value;
        dual_margin = dual_margin.min(rhs - lhs);
        checked += 1;
    }
    Ok(CrossnormReport { atom_margin, dual_margin, checked, passed: atom_margin >= -1e-12 && dual_margin >= -1e-9 })
}

/// Largest `|⟨a, g·x*⟩ - ⟨b, g·x*⟩| / (1 + |⟨a, g·x*⟩|)` over `count` seeded
/// random tensor probes `f_c · x*`.
pub fn pairing_deviation(a: &Molecule, b: &Molecule, count: usize, seed: u64) -> Result<f64> {
    let d = match (a.dim(), b.dim()) {
        (Some(x), Some(y)) if x != y => return Err(BlochError::DimensionMismatch { expected: x, found: y }),
        (Some(x), _) | (_, Some(x)) => x,
        (None, None) => return Ok(0.0),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let c = Complex64::from_polar(0.9 * rng.random::<f64>().sqrt(), 2.0 * PI * rng.random::<f64>());
        let g = HoloExpr::extremal(DiscPoint::new(c)?);
        let xstar: Vec<Complex64> =
            (0..d).map(|_| Complex64::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0)).collect();
        let pa = pairing_tensor(a, &g, &xstar)?;
        let pb = pairing_tensor(b, &g, &xstar)?;
        worst = worst.max((pa - pb).norm() / (1.0 + pa.norm()));
    }
    Ok(worst)
}

/// Whether two molecules pair equally (within `tol`) against `count`
/// seeded random tensor probes.
pub fn equivalent(a: &Molecule, b: &Molecule, count: usize, seed: u64, tol: f64) -> Result<bool> {
    Ok(pairing_deviation(a, b, count, seed)? <= tol)
}

/// A random molecule with `atoms` atoms in `ℂ^d`, points inside `cap`.
pub fn random_molecule(rng: &mut impl Rng, atoms: usize, d: usize, cap: f64) -> Molecule {
    let list = (0..atoms)
        .map(|_| Atom {
            lambda: Complex64::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0),
            z: DiscPoint::new(Complex64::from_polar(cap * rng.random::<f64>().sqrt(), 2.0 * PI * rng.random::<f64>()))
                .expect("inside the cap"),
            x: (0..d).map(|_| Complex64::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0)).collect(),
        })
        .collect();
    Molecule { atoms: list }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pt(re: f64, im: f64) -> DiscPoint {
        DiscPoint::from_re_im(re, im).unwrap()
    }

    #[test]
    fn pairing_examples() {
        let g = Molecule::atom(c(1.0, 0.0), DiscPoint::origin(), vec![c(1.0, 0.0)]);
        assert_eq!(pairing(&g, &HoloExpr::monomial(1)).unwrap(), c(1.0, 0.0));

        let gamma = Molecule::new(vec![
            Atom { lambda: c(1.0, 0.0), z: DiscPoint::origin(), x: vec![c(1.0, 0.0), c(0.0, 0.0)] },
            Atom { lambda: c(0.0, 1.0), z: pt(0.5, 0.0), x: vec![c(0.0, 0.0), c(2.0, 0.0)] },
        ])
        .unwrap();
        // f(w) = (w, w^2)
        let f = HoloExpr::sum(vec![
            HoloExpr::tensor(HoloExpr::monomial(1), vec![c(1.0, 0.0), c(0.0, 0.0)]),
            HoloExpr::tensor(HoloExpr::monomial(2), vec![c(0.0, 0.0), c(1.0, 0.0)]),
        ]);
        assert!((pairing(&gamma, &f).unwrap() - c(1.0, 2.0)).norm() < 1e-15);
        assert_eq!(pairing(&Molecule::zero(), &f).unwrap(), ZERO);
        assert!(pairing(&gamma, &HoloExpr::monomial(1)).is_err());
    }

    #[test]
    fn projective_examples() {
        let x = vec![c(3.0, 0.0)];
        let one = Molecule::atom(c(2.0, 0.0), pt(0.5, 0.0), x.clone());
        assert!((projective_upper(&one, Norm::Euclidean).value - 8.0).abs() < 1e-14);

        let z = pt(0.2, 0.3);
        let twice = Molecule::atom(c(1.0, 0.0), z, x.clone()).plus(&Molecule::atom(c(1.0, 0.0), z, x.clone())).unwrap();
        let expect = 2.0 * 3.0 / z.weight();
        assert!((projective_upper(&twice, Norm::Euclidean).value - expect).abs() < 1e-12);

        let cancel = Molecule::atom(c(1.0, 0.0), z, x.clone()).plus(&Molecule::atom(c(-1.0, 0.0), z, x)).unwrap();
        let ub = projective_upper(&cancel, Norm::Euclidean);
        assert_eq!(ub.value, 0.0);
        assert!(ub.representation.atoms.is_empty());
    }

    #[test]
    fn single_atom_cs_upper_all_p() {
        let m = Molecule::atom(c(0.5, -1.0), pt(-0.4, 0.6), vec![c(1.0, 1.0), c(0.0, -2.0)]);
        let expect = c(0.5, -1.0).norm() * Norm::Euclidean.of(&m.atoms[0].x) / pt(-0.4, 0.6).weight();
        for p in [Exponent::ONE, Exponent::TWO, Exponent::new(3.0).unwrap(), Exponent::INFINITY] {
            assert!((cs_upper(&m, p, Norm::Euclidean).value - expect).abs() < 1e-12 * expect, "p={p}");
        }
    }

    #[test]
    fn single_atom_tightness() {
        let m = Molecule::atom(c(1.0, 0.5), pt(0.3, -0.7), vec![c(0.2, 0.0), c(0.0, 1.0), c(-1.0, 0.3)]);
        for norm in [Norm::Euclidean, Norm::Sup] {
            let s = sandwich(&m, Exponent::TWO, norm, 0).unwrap();
            assert!((s.upper - s.lower).abs() < 1e-9 * s.upper, "{norm:?}: {} vs {}", s.lower, s.upper);
        }
    }

    #[test]
    fn balanced_concatenation_is_subadditive() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for p in [Exponent::ONE, Exponent::new(1.5).unwrap(), Exponent::TWO, Exponent::INFINITY] {
            let g1 = random_molecule(&mut rng, 3, 2, 0.9);
            let g2 = random_molecule(&mut rng, 2, 2, 0.9);
            let u1 = cs_upper(&g1, p, Norm::Euclidean);
            let u2 = cs_upper(&g2, p, Norm::Euclidean);
            let cat = balanced_concatenation(&u1.representation, &u2.representation, p, Norm::Euclidean);
            assert!(cat.closed_form(p, Norm::Euclidean) <= u1.value + u2.value + 1e-12);
            assert!(equivalent(&cat.molecule(), &g1.plus(&g2).unwrap(), 20, 1, 1e-9).unwrap());
        }
    }

    #[test]
    fn moves_preserve_pairing() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut m = random_molecule(&mut rng, 4, 3, 0.8);
        m.atoms.push(Atom { lambda: c(0.0, 2.0), ..m.atoms[1].clone() });
        let rep = Representation::of(&m).merge_same_point().rebalance(Exponent::TWO, Norm::Euclidean);
        assert!(rep.moves.contains(&"merge_same_point".to_string()));
        assert!(equivalent(&m, &rep.molecule(), 20, 5, 1e-9).unwrap());
    }

    #[test]
    fn molecule_json_names_atom() {
        let err = Molecule::from_json(r#"[{"lambda":[1,0],"z":[0,0],"x":[[1,0]]},{"lambda":[1,0],"z":[0,1],"x":[[1,0]]}]"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("atom 1"), "{err}");
        assert!(Molecule::from_json(r#"[{"lambda":[1,0],"z":[0,0],"x":[[1,0]]},{"lambda":[1,0],"z":[0,0.5],"x":[[1,0],[0,0]]}]"#).is_err());
    }
}
