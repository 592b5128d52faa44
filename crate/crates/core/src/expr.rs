//! Structured holomorphic expressions on the disc with exact derivatives.
//!
//! Every node has a closed-form value and derivative, so downstream
//! certificates never rely on numerical differencing. Derivatives are
//! accumulated into a caller-provided buffer (`out += scale * f'(z)`), which
//! keeps grid sweeps over large families allocation-free.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::disc::{DiscPoint, MobiusMap};
use crate::error::{BlochError, Result};
use crate::vector::{Norm, VectorValue};

/// Default assured-validity radius of a truncated Taylor series.
pub const DEFAULT_TAYLOR_RADIUS: f64 = 0.95;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const CONSTANT_DROP_TOL: f64 = 1e-14;

fn default_taylor_radius() -> f64 {
    DEFAULT_TAYLOR_RADIUS
}

/// A vector-valued holomorphic function on the disc.
///
/// Serialized as JSON with a `kind` tag taking one of `monomial`,
/// `extremal`, `sum`, `scale`, `precompose_mobius`, `tensor`, `taylor`;
/// complex numbers are `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HoloExpr {
    /// `w ↦ w^k`.
    Monomial { k: u32 },
    /// `f_a(w) = (1 - |a|^2) w / (1 - ā w)`.
    Extremal { a: DiscPoint },
    Sum { terms: Vec<HoloExpr> },
    Scale {
        #[serde(with = "crate::cserde")]
        coeff: Complex64,
        child: Box<HoloExpr>,
    },
    /// `w ↦ child(φ(w))`.
    PrecomposeMobius { map: MobiusMap, child: Box<HoloExpr> },
    /// `w ↦ child(w) · x` for a scalar child.
    Tensor {
        child: Box<HoloExpr>,
        #[serde(with = "crate::cserde::vec")]
        vector: Vec<Complex64>,
    },
    /// `Σ c_k w^k`, trusted only on `|w| <= radius`.
    Taylor {
        #[serde(with = "crate::cserde::vec")]
        coeffs: Vec<Complex64>,
        #[serde(default = "default_taylor_radius")]
        radius: f64,
    },
}

impl HoloExpr {
    pub fn monomial(k: u32) -> Self {
        HoloExpr::Monomial { k }
    }

    pub fn extremal(a: DiscPoint) -> Self {
        HoloExpr::Extremal { a }
    }

    pub fn sum(terms: Vec<HoloExpr>) -> Self {
        HoloExpr::Sum { terms }
    }

    pub fn scale(coeff: Complex64, child: HoloExpr) -> Self {
        HoloExpr::Scale { coeff, child: Box::new(child) }
    }

    pub fn precompose(map: MobiusMap, child: HoloExpr) -> Self {
        HoloExpr::PrecomposeMobius { map, child: Box::new(child) }
    }

    pub fn tensor(child: HoloExpr, vector: Vec<Complex64>) -> Self {
        HoloExpr::Tensor { child: Box::new(child), vector }
    }

    pub fn taylor(coeffs: Vec<Complex64>, radius: f64) -> Self {
        HoloExpr::Taylor { coeffs, radius }
    }

    /// The constant function with value `v`.
    pub fn constant(v: &[Complex64]) -> Self {
        if v.len() == 1 {
            if v[0] == ONE {
                HoloExpr::monomial(0)
            } else {
                HoloExpr::scale(v[0], HoloExpr::monomial(0))
            }
        } else {
            HoloExpr::tensor(HoloExpr::monomial(0), v.to_vec())
        }
    }

    /// Parses and validates a JSON document.
    pub fn from_json(s: &str) -> Result<Self> {
        let e: HoloExpr = serde_json::from_str(s)?;
        e.dim()?;
        Ok(e)
    }

    /// Output dimension `d`; also validates the tree.
    pub fn dim(&self) -> Result<usize> {
        match self {
            HoloExpr::Monomial { .. } | HoloExpr::Extremal { .. } => Ok(1),
            HoloExpr::Taylor { coeffs, radius } => {
                if !(*radius > 0.0 && *radius < 1.0) {
                    return Err(BlochError::InvalidExpr(format!("taylor radius {radius} must lie in (0, 1)")));
                }
                if coeffs.is_empty() || !coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
                    return Err(BlochError::InvalidExpr("taylor coefficients must be finite and nonempty".into()));
                }
                Ok(1)
            }
            HoloExpr::Sum { terms } => {
                let mut dims = terms.iter().map(HoloExpr::dim);
                let Some(first) = dims.next() else { return Ok(1) };
                let d = first?;
                for other in dims {
                    let o = other?;
                    if o != d {
                        return Err(BlochError::DimensionMismatch { expected: d, found: o });
                    }
                }
                Ok(d)
            }
            HoloExpr::Scale { coeff, child } => {
                if !(coeff.re.is_finite() && coeff.im.is_finite()) {
                    return Err(BlochError::InvalidExpr("non-finite scale coefficient".into()));
                }
                child.dim()
            }
            HoloExpr::PrecomposeMobius { child, .. } => child.dim(),
            HoloExpr::Tensor { child, vector } => {
                let cd = child.dim()?;
                if cd != 1 {
                    return Err(BlochError::DimensionMismatch { expected: 1, found: cd });
                }
                if vector.is_empty() || !vector.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
                    return Err(BlochError::InvalidExpr("tensor vector must be finite and nonempty".into()));
                }
                Ok(vector.len())
            }
        }
    }

    pub fn eval(&self, z: DiscPoint) -> Result<VectorValue> {
        self.eval_raw(z.value())
    }

    pub fn deriv(&self, z: DiscPoint) -> Result<VectorValue> {
        self.deriv_raw(z.value())
    }

    /// Evaluation at any complex number in the closed disc (the Bloch grid
    /// touches the unit circle, where every non-taylor node is still defined).
    pub fn eval_raw(&self, z: Complex64) -> Result<VectorValue> {
        let mut out = vec![ZERO; self.dim()?];
        self.acc_eval(z, ONE, &mut out)?;
        Ok(VectorValue(out))
    }

    pub fn deriv_raw(&self, z: Complex64) -> Result<VectorValue> {
        let mut out = vec![ZERO; self.dim()?];
        self.acc_deriv(z, ONE, &mut out)?;
        Ok(VectorValue(out))
    }

    /// Derivative of a scalar expression; the caller guarantees `dim() == 1`.
    pub fn deriv_scalar(&self, z: Complex64) -> Result<Complex64> {
        let mut out = [ZERO];
        self.acc_deriv(z, ONE, &mut out)?;
        Ok(out[0])
    }

    /// `out += scale * f(z)`.
    pub fn acc_eval(&self, z: Complex64, scale: Complex64, out: &mut [Complex64]) -> Result<()> {
        match self {
            HoloExpr::Monomial { k } => out[0] += scale * z.powu(*k),
            HoloExpr::Extremal { a } => {
                let a = a.value();
                out[0] += scale * (1.0 - a.norm_sqr()) * z / (ONE - a.conj() * z);
            }
            HoloExpr::Sum { terms } => {
                for t in terms {
                    t.acc_eval(z, scale, out)?;
                }
            }
            HoloExpr::Scale { coeff, child } => child.acc_eval(z, scale * coeff, out)?,
            HoloExpr::PrecomposeMobius { map, child } => child.acc_eval(map.apply_raw(z), scale, out)?,
            HoloExpr::Tensor { child, vector } => {
                let mut s = [ZERO];
                child.acc_eval(z, scale, &mut s)?;
                for (o, x) in out.iter_mut().zip(vector) {
                    *o += s[0] * x;
                }
            }
            HoloExpr::Taylor { coeffs, radius } => {
                check_validity(z, *radius)?;
                let v = coeffs.iter().rev().fold(ZERO, |acc, c| acc * z + c);
                out[0] += scale * v;
            }
        }
        Ok(())
    }

    /// `out += scale * f'(z)`.
    pub fn acc_deriv(&self, z: Complex64, scale: Complex64, out: &mut [Complex64]) -> Result<()> {
        match self {
            HoloExpr::Monomial { k } => {
                if *k > 0 {
                    out[0] += scale * (*k as f64) * z.powu(k - 1);
                }
            }
            HoloExpr::Extremal { a } => {
                let a = a.value();
                let den = ONE - a.conj() * z;
                out[0] += scale * (1.0 - a.norm_sqr()) / (den * den);
            }
            HoloExpr::Sum { terms } => {
                for t in terms {
                    t.acc_deriv(z, scale, out)?;
                }
            }
            HoloExpr::Scale { coeff, child } => child.acc_deriv(z, scale * coeff, out)?,
            HoloExpr::PrecomposeMobius { map, child } => {
                child.acc_deriv(map.apply_raw(z), scale * map.derivative_raw(z), out)?
            }
            HoloExpr::Tensor { child, vector } => {
                let mut s = [ZERO];
                child.acc_deriv(z, scale, &mut s)?;
                for (o, x) in out.iter_mut().zip(vector) {
                    *o += s[0] * x;
                }
            }
            HoloExpr::Taylor { coeffs, radius } => {
                check_validity(z, *radius)?;
                let v = coeffs
                    .iter()
                    .enumerate()
                    .skip(1)
                    .rev()
                    .fold(ZERO, |acc, (k, c)| acc * z + c * k as f64);
                out[0] += scale * v;
            }
        }
        Ok(())
    }

    /// Smallest validity radius of any taylor node, if there is one.
    pub fn min_taylor_radius(&self) -> Option<f64> {
        match self {
            HoloExpr::Taylor { radius, .. } => Some(*radius),
            HoloExpr::Monomial { .. } | HoloExpr::Extremal { .. } => None,
            HoloExpr::Sum { terms } => terms.iter().filter_map(HoloExpr::min_taylor_radius).reduce(f64::min),
            HoloExpr::Scale { child, .. }
            | HoloExpr::PrecomposeMobius { child, .. }
            | HoloExpr::Tensor { child, .. } => child.min_taylor_radius(),
        }
    }

    /// Returns `g` with `g(0) = 0` and `g' = f'`.
    pub fn normalize_origin(&self) -> Result<HoloExpr> {
        let d = self.dim()?;
        let mut g = self.strip_constants();
        let v0 = g.eval_raw(ZERO)?;
        if v0.0.iter().any(|c| *c != ZERO) {
            let neg: Vec<Complex64> = v0.0.iter().map(|c| -c).collect();
            g = HoloExpr::sum(vec![g, HoloExpr::constant(&neg)]);
        }
        debug_assert_eq!(g.dim().ok(), Some(d));
        Ok(g)
    }

    /// Structurally removes constant parts where that is possible without
    /// changing the derivative.
    fn strip_constants(&self) -> HoloExpr {
        match self {
            HoloExpr::Monomial { k: 0 } => HoloExpr::scale(ZERO, HoloExpr::monomial(0)),
            HoloExpr::Taylor { coeffs, radius } => {
                let mut c = coeffs.clone();
                c[0] = ZERO;
                HoloExpr::taylor(c, *radius)
            }
            HoloExpr::Sum { terms } => {
                let kept: Vec<HoloExpr> = terms
                    .iter()
                    .map(HoloExpr::strip_constants)
                    .filter(|t| !t.is_zero_constant())
                    .collect();
                match kept.len() {
                    0 => self.zero_like(),
                    1 => kept.into_iter().next().unwrap(),
                    _ => HoloExpr::sum(kept),
                }
            }
            HoloExpr::Scale { coeff, child } => HoloExpr::scale(*coeff, child.strip_constants()),
            HoloExpr::Tensor { child, vector } => HoloExpr::tensor(child.strip_constants(), vector.clone()),
            other => other.clone(),
        }
    }

    fn zero_like(&self) -> HoloExpr {
        let d = self.dim().unwrap_or(1);
        HoloExpr::constant(&vec![ZERO; d])
    }

    /// The value of a constant node (`monomial(0)` possibly scaled or
    /// tensored), or `None` for anything else.
    pub fn as_constant(&self) -> Option<Vec<Complex64>> {
        match self {
            HoloExpr::Monomial { k: 0 } => Some(vec![ONE]),
            HoloExpr::Scale { coeff, child } => {
                child.as_constant().map(|v| v.into_iter().map(|c| c * coeff).collect())
            }
            HoloExpr::Tensor { child, vector } => child
                .as_constant()
                .map(|s| vector.iter().map(|x| x * s[0]).collect()),
            HoloExpr::Taylor { coeffs, .. } if coeffs.iter().skip(1).all(|c| *c == ZERO) => Some(vec![coeffs[0]]),
            _ => None,
        }
    }

    fn is_zero_constant(&self) -> bool {
        self.as_constant().is_some_and(|v| v.iter().all(|c| *c == ZERO))
    }

    /// Canonical form: flattened sums with merged constants, fused scales,
    /// fused compositions, precompositions pushed to the leaves, identity
    /// maps (within `1e-12`) and constant terms below `1e-14` removed.
    pub fn canonicalize(&self) -> HoloExpr {
        match self {
            HoloExpr::Monomial { .. } | HoloExpr::Extremal { .. } | HoloExpr::Taylor { .. } => self.clone(),
            HoloExpr::Scale { coeff, child } => {
                let child = child.canonicalize();
                if let Some(v) = child.as_constant() {
                    let v: Vec<Complex64> = v.into_iter().map(|c| c * coeff).collect();
                    return HoloExpr::constant(&v);
                }
                match child {
                    HoloExpr::Scale { coeff: inner, child } => HoloExpr::scale(coeff * inner, *child),
                    c if *coeff == ONE => c,
                    c => HoloExpr::scale(*coeff, c),
                }
            }
            HoloExpr::Tensor { child, vector } => {
                let child = child.canonicalize();
                if let Some(s) = child.as_constant() {
                    let v: Vec<Complex64> = vector.iter().map(|x| x * s[0]).collect();
                    return HoloExpr::constant(&v);
                }
                HoloExpr::tensor(child, vector.clone())
            }
            HoloExpr::PrecomposeMobius { map, child } => precompose_canonical(map, &child.canonicalize()),
            HoloExpr::Sum { terms } => {
                let d = self.dim().unwrap_or(1);
                let mut flat = Vec::new();
                let mut constant = vec![ZERO; d];
                let mut saw_constant = false;
                for t in terms {
                    collect_terms(t.canonicalize(), &mut flat, &mut constant, &mut saw_constant);
                }
                // Constants left over from normalizing twice cancel up to rounding.
                let const_is_zero = constant.iter().all(|c| c.norm() <= CONSTANT_DROP_TOL);
                if saw_constant && (!const_is_zero || flat.is_empty()) {
                    flat.push(HoloExpr::constant(&constant));
                }
                match flat.len() {
                    0 => HoloExpr::constant(&constant),
                    1 => flat.pop().unwrap(),
                    _ => HoloExpr::sum(flat),
                }
            }
        }
    }

    /// Structural equality with numeric leaves compared within `tol`.
    pub fn approx_eq(&self, other: &HoloExpr, tol: f64) -> bool {
        let close = |a: Complex64, b: Complex64| (a - b).norm() <= tol;
        let close_vec = |a: &[Complex64], b: &[Complex64]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| close(*x, *y));
        match (self, other) {
            (HoloExpr::Monomial { k: a }, HoloExpr::Monomial { k: b }) => a == b,
            (HoloExpr::Extremal { a }, HoloExpr::Extremal { a: b }) => close(a.value(), b.value()),
            (HoloExpr::Sum { terms: a }, HoloExpr::Sum { terms: b }) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.approx_eq(y, tol))
            }
            (HoloExpr::Scale { coeff: c1, child: a }, HoloExpr::Scale { coeff: c2, child: b }) => {
                close(*c1, *c2) && a.approx_eq(b, tol)
            }
            (HoloExpr::PrecomposeMobius { map: m1, child: a }, HoloExpr::PrecomposeMobius { map: m2, child: b }) => {
                close(m1.rotation(), m2.rotation()) && close(m1.center().value(), m2.center().value()) && a.approx_eq(b, tol)
            }
            (HoloExpr::Tensor { child: a, vector: x }, HoloExpr::Tensor { child: b, vector: y }) => {
                close_vec(x, y) && a.approx_eq(b, tol)
            }
            (HoloExpr::Taylor { coeffs: a, radius: r1 }, HoloExpr::Taylor { coeffs: b, radius: r2 }) => {
                (r1 - r2).abs() <= tol && close_vec(a, b)
            }
            _ => false,
        }
    }

    /// Polynomial coefficients `a_0, a_1, …` (each in `ℂ^d`) when the
    /// expression is a polynomial on the whole closed disc. Taylor nodes
    /// are excluded since they are only trusted up to their radius.
    pub fn polynomial(&self) -> Option<Vec<Vec<Complex64>>> {
        match self {
            HoloExpr::Monomial { k } => {
                let mut c = vec![vec![ZERO]; *k as usize + 1];
                c[*k as usize][0] = ONE;
                Some(c)
            }
            HoloExpr::Extremal { .. } | HoloExpr::Taylor { .. } => None,
            HoloExpr::PrecomposeMobius { child, .. } => {
                let c = child.polynomial()?;
                (c.len() <= 1).then_some(c)
            }
            HoloExpr::Sum { terms } => {
                let d = self.dim().ok()?;
                let mut acc: Vec<Vec<Complex64>> = vec![vec![ZERO; d]];
                for t in terms {
                    let c = t.polynomial()?;
                    if c.len() > acc.len() {
                        acc.resize(c.len(), vec![ZERO; d]);
                    }
                    for (a, b) in acc.iter_mut().zip(c) {
                        for (x, y) in a.iter_mut().zip(b) {
                            *x += y;
                        }
                    }
                }
                Some(acc)
            }
            HoloExpr::Scale { coeff, child } => Some(
                child
                    .polynomial()?
                    .into_iter()
                    .map(|v| v.into_iter().map(|c| c * coeff).collect())
                    .collect(),
            ),
            HoloExpr::Tensor { child, vector } => Some(
                child
                    .polynomial()?
                    .into_iter()
                    .map(|s| vector.iter().map(|x| x * s[0]).collect())
                    .collect(),
            ),
        }
    }

    /// Upper bound on the Bloch seminorm from exact structural facts:
    /// `p_B(f_a) = 1`, the closed-form seminorm of `w^k`, the triangle
    /// inequality, homogeneity, Möbius invariance, and
    /// `p_B(g·x) = p_B(g)‖x‖`. `None` when a taylor node is present.
    pub fn seminorm_calculus_bound(&self, norm: Norm) -> Option<f64> {
        match self {
            HoloExpr::Monomial { k } => Some(monomial_seminorm(*k)),
            HoloExpr::Extremal { .. } => Some(1.0),
            HoloExpr::Taylor { .. } => None,
            HoloExpr::Sum { terms } => terms.iter().map(|t| t.seminorm_calculus_bound(norm)).sum(),
            HoloExpr::Scale { coeff, child } => Some(coeff.norm() * child.seminorm_calculus_bound(norm)?),
            HoloExpr::PrecomposeMobius { child, .. } => child.seminorm_calculus_bound(norm),
            HoloExpr::Tensor { child, vector } => Some(child.seminorm_calculus_bound(norm)? * norm.of(vector)),
        }
    }

    /// Node count, used for reporting.
    pub fn size(&self) -> usize {
        match self {
            HoloExpr::Monomial { .. } | HoloExpr::Extremal { .. } | HoloExpr::Taylor { .. } => 1,
            HoloExpr::Sum { terms } => 1 + terms.iter().map(HoloExpr::size).sum::<usize>(),
            HoloExpr::Scale { child, .. }
            | HoloExpr::PrecomposeMobius { child, .. }
            | HoloExpr::Tensor { child, .. } => 1 + child.size(),
        }
    }
}

fn check_validity(z: Complex64, radius: f64) -> Result<()> {
    let modulus = z.norm();
    // Allow the last-bit error of points constructed exactly on the circle.
    if modulus > radius * (1.0 + 4.0 * f64::EPSILON) {
        return Err(BlochError::OutOfValidity { radius, modulus });
    }
    Ok(())
}

/// `max_{0<=r<1} k r^{k-1} (1 - r^2)`, the Bloch seminorm of `w^k`.
pub fn monomial_seminorm(k: u32) -> f64 {
    match k {
        0 => 0.0,
        1 => 1.0,
        _ => {
            let k = k as f64;
            let s2 = (k - 1.0) / (k + 1.0);
            k * s2.powf((k - 1.0) / 2.0) * 2.0 / (k + 1.0)
        }
    }
}

fn collect_terms(t: HoloExpr, flat: &mut Vec<HoloExpr>, constant: &mut [Complex64], saw: &mut bool) {
    if let Some(v) = t.as_constant() {
        *saw = true;
        for (c, x) in constant.iter_mut().zip(v) {
            *c += x;
        }
        return;
    }
    match t {
        HoloExpr::Sum { terms } => {
            for s in terms {
                collect_terms(s, flat, constant, saw);
            }
        }
        other => flat.push(other),
    }
}

fn precompose_canonical(map: &MobiusMap, child: &HoloExpr) -> HoloExpr {
    if map.is_identity(1e-12) || child.as_constant().is_some() {
        return child.clone();
    }
    match child {
        HoloExpr::Sum { terms } => {
            HoloExpr::sum(terms.iter().map(|t| precompose_canonical(map, t)).collect()).canonicalize()
        }
        HoloExpr::Scale { coeff, child } => HoloExpr::scale(*coeff, precompose_canonical(map, child)),
        HoloExpr::Tensor { child, vector } => HoloExpr::tensor(precompose_canonical(map, child), vector.clone()),
        // child(ψ(φ(w))) = child((ψ∘φ)(w))
        HoloExpr::PrecomposeMobius { map: inner, child } => precompose_canonical(&inner.compose(map), child),
        leaf => HoloExpr::precompose(*map, leaf.clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disc::MobiusMap;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pt(re: f64, im: f64) -> DiscPoint {
        DiscPoint::from_re_im(re, im).unwrap()
    }

    #[test]
    fn eval_examples() {
        let f = HoloExpr::extremal(pt(0.5, 0.0));
        assert_eq!(f.eval(DiscPoint::origin()).unwrap()[0], c(0.0, 0.0));
        let id = HoloExpr::extremal(DiscPoint::origin());
        assert!((id.eval(pt(0.3, 0.0)).unwrap()[0] - c(0.3, 0.0)).norm() < 1e-16);
        assert!((f.eval(pt(0.5, 0.0)).unwrap()[0] - c(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn deriv_examples() {
        let f = HoloExpr::extremal(pt(0.5, 0.0));
        assert!((f.deriv(pt(0.5, 0.0)).unwrap()[0] - c(4.0 / 3.0, 0.0)).norm() < 1e-14);
        assert_eq!(HoloExpr::monomial(1).deriv(pt(0.2, 0.7)).unwrap()[0], c(1.0, 0.0));
        let t = HoloExpr::tensor(HoloExpr::monomial(2), vec![c(0.0, 0.0), c(3.0, 0.0)]);
        let d = t.deriv(pt(0.5, 0.0)).unwrap();
        assert_eq!(d.0, vec![c(0.0, 0.0), c(3.0, 0.0)]);
    }

    #[test]
    fn taylor_validity_enforced() {
        let f = HoloExpr::taylor(vec![c(0.0, 0.0), c(1.0, 0.0), c(0.5, 0.0)], 0.8);
        assert!(f.deriv(pt(0.79, 0.0)).is_ok());
        assert!(matches!(f.deriv(pt(0.81, 0.0)), Err(BlochError::OutOfValidity { .. })));
        assert!(matches!(f.eval(pt(0.0, 0.9)), Err(BlochError::OutOfValidity { .. })));
        let d = f.deriv(pt(0.5, 0.0)).unwrap()[0];
        assert!((d - c(1.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn dimension_validation() {
        let bad = HoloExpr::sum(vec![HoloExpr::monomial(1), HoloExpr::tensor(HoloExpr::monomial(1), vec![c(1.0, 0.0); 2])]);
        assert!(matches!(bad.dim(), Err(BlochError::DimensionMismatch { .. })));
        let nested = HoloExpr::tensor(HoloExpr::tensor(HoloExpr::monomial(1), vec![c(1.0, 0.0); 2]), vec![c(1.0, 0.0)]);
        assert!(nested.dim().is_err());
    }

    #[test]
    fn normalize_examples() {
        let f = HoloExpr::taylor(vec![c(5.0, 0.0), c(1.0, 0.0)], 0.95);
        let g = f.normalize_origin().unwrap();
        assert_eq!(g, HoloExpr::taylor(vec![c(0.0, 0.0), c(1.0, 0.0)], 0.95));

        let e = HoloExpr::extremal(pt(0.2, 0.3));
        assert_eq!(e.normalize_origin().unwrap(), e);

        let x = vec![c(1.0, 0.0), c(0.0, 2.0)];
        let f = HoloExpr::tensor(HoloExpr::sum(vec![HoloExpr::monomial(2), HoloExpr::monomial(0)]), x.clone());
        assert_eq!(f.normalize_origin().unwrap(), HoloExpr::tensor(HoloExpr::monomial(2), x));

        let phi = MobiusMap::involution(pt(0.4, -0.1));
        let f = HoloExpr::precompose(phi, HoloExpr::extremal(pt(0.1, 0.5)));
        let g = f.normalize_origin().unwrap();
        assert!(g.eval(DiscPoint::origin()).unwrap()[0].norm() == 0.0);
        let z = pt(0.3, 0.2);
        assert_eq!(g.deriv(z).unwrap(), f.deriv(z).unwrap());
    }

    #[test]
    fn json_round_trip_and_tags() {
        let phi = MobiusMap::new(c(0.0, 1.0), pt(0.5, 0.0)).unwrap();
        let f = HoloExpr::sum(vec![
            HoloExpr::scale(c(2.0, -1.0), HoloExpr::extremal(pt(0.1, 0.2))),
            HoloExpr::precompose(phi, HoloExpr::monomial(3)),
            HoloExpr::taylor(vec![c(0.0, 0.0), c(1.0, 1.0)], 0.9),
        ]);
        let f = HoloExpr::tensor(f, vec![c(1.0, 0.0), c(0.0, 1.0)]);
        let json = serde_json::to_string(&f).unwrap();
        for tag in ["\"sum\"", "\"scale\"", "\"extremal\"", "\"precompose_mobius\"", "\"monomial\"", "\"taylor\"", "\"tensor\""] {
            assert!(json.contains(tag), "missing {tag} in {json}");
        }
        assert_eq!(HoloExpr::from_json(&json).unwrap(), f);
        assert!(HoloExpr::from_json(r#"{"kind":"extremal","a":[1.0,0.0]}"#).is_err());
        assert!(HoloExpr::from_json(r#"{"kind":"taylor","coeffs":[[0,0],[1,0]]}"#).is_ok());
        assert!(HoloExpr::from_json(r#"{"kind":"taylor","coeffs":[[0,0]],"radius":1.0}"#).is_err());
    }

    #[test]
    fn monomial_seminorm_closed_form() {
        assert!((monomial_seminorm(2) - 4.0 * 3f64.sqrt() / 9.0).abs() < 1e-15);
        // brute-force maximization of k r^{k-1}(1-r^2)
        for k in 2..8u32 {
            let brute = (0..=200_000)
                .map(|i| {
                    let r = i as f64 / 200_000.0;
                    k as f64 * r.powi(k as i32 - 1) * (1.0 - r * r)
                })
                .fold(0.0, f64::max);
            assert!((monomial_seminorm(k) - brute).abs() < 1e-8, "k={k}");
            assert!(monomial_seminorm(k) >= brute);
        }
    }

    #[test]
    fn canonical_collapses_double_involution() {
        let a = pt(0.3, -0.4);
        let phi = MobiusMap::involution(a);
        let g = HoloExpr::sum(vec![
            HoloExpr::scale(c(0.5, 0.0), HoloExpr::extremal(pt(0.1, 0.0))),
            HoloExpr::scale(c(0.0, 0.5), HoloExpr::extremal(pt(-0.2, 0.6))),
        ]);
        let once = HoloExpr::precompose(phi, g.clone()).normalize_origin().unwrap().canonicalize();
        let twice = HoloExpr::precompose(phi, once).normalize_origin().unwrap().canonicalize();
        assert!(twice.approx_eq(&g, 1e-12), "{twice:?}");
    }

    #[test]
    fn polynomial_extraction() {
        let f = HoloExpr::sum(vec![
            HoloExpr::scale(c(2.0, 0.0), HoloExpr::monomial(3)),
            HoloExpr::monomial(1),
        ]);
        let p = f.polynomial().unwrap();
        assert_eq!(p.len(), 4);
        assert_eq!(p[3][0], c(2.0, 0.0));
        assert_eq!(p[1][0], c(1.0, 0.0));
        assert!(HoloExpr::extremal(DiscPoint::origin()).polynomial().is_none());
    }
}
