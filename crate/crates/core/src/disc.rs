//! Points of the open unit disc, its automorphism group, and sampling schemes.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BlochError, Result};

/// Default radius cap for sampled points; the weight `1 - |z|^2` degenerates
/// at the boundary.
pub const DEFAULT_RADIUS_CAP: f64 = 0.95;

/// Allowed deviation of a rotation from the unit circle.
pub const ROTATION_TOL: f64 = 1e-12;

/// A point `z` with `|z| < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct DiscPoint(Complex64);

impl DiscPoint {
    pub fn new(z: Complex64) -> Result<Self> {
        if !z.re.is_finite() || !z.im.is_finite() || z.norm_sqr() >= 1.0 {
            return Err(BlochError::OutsideDisc { re: z.re, im: z.im });
        }
        Ok(DiscPoint(z))
    }

    pub fn from_re_im(re: f64, im: f64) -> Result<Self> {
        Self::new(Complex64::new(re, im))
    }

    pub fn origin() -> Self {
        DiscPoint(Complex64::new(0.0, 0.0))
    }

    #[inline]
    pub fn value(self) -> Complex64 {
        self.0
    }

    /// The Bloch weight `1 - |z|^2`.
    #[inline]
    pub fn weight(self) -> f64 {
        1.0 - self.0.norm_sqr()
    }

    #[inline]
    pub fn modulus(self) -> f64 {
        self.0.norm()
    }
}

impl TryFrom<[f64; 2]> for DiscPoint {
    type Error = BlochError;

    fn try_from([re, im]: [f64; 2]) -> Result<Self> {
        DiscPoint::from_re_im(re, im)
    }
}

impl From<DiscPoint> for [f64; 2] {
    fn from(p: DiscPoint) -> Self {
        [p.0.re, p.0.im]
    }
}

/// The automorphism `z ↦ λ (a - z) / (1 - ā z)` with `|λ| = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMobius", into = "RawMobius")]
pub struct MobiusMap {
    rotation: Complex64,
    center: DiscPoint,
}

#[derive(Serialize, Deserialize)]
struct RawMobius {
    #[serde(with = "crate::cserde")]
    rotation: Complex64,
    center: DiscPoint,
}

impl TryFrom<RawMobius> for MobiusMap {
    type Error = BlochError;

    fn try_from(raw: RawMobius) -> Result<Self> {
        MobiusMap::new(raw.rotation, raw.center)
    }
}

impl From<MobiusMap> for RawMobius {
    fn from(m: MobiusMap) -> Self {
        RawMobius { rotation: m.rotation, center: m.center }
    }
}

impl MobiusMap {
    pub fn new(rotation: Complex64, center: DiscPoint) -> Result<Self> {
        let modulus = rotation.norm();
        if !modulus.is_finite() || (modulus - 1.0).abs() > ROTATION_TOL {
            return Err(BlochError::NotUnimodular { modulus });
        }
        Ok(MobiusMap { rotation, center })
    }

    /// The involution `φ_a` (rotation 1).
    pub fn involution(center: DiscPoint) -> Self {
        MobiusMap { rotation: Complex64::new(1.0, 0.0), center }
    }

    /// The pure rotation `z ↦ -λz` (center 0).
    pub fn rotation_only(rotation: Complex64) -> Result<Self> {
        Self::new(rotation, DiscPoint::origin())
    }

    pub fn rotation(&self) -> Complex64 {
        self.rotation
    }

    pub fn center(&self) -> DiscPoint {
        self.center
    }

    /// Evaluates the map at an arbitrary complex number; callers on the closed
    /// disc get a point on the closed disc.
    #[inline]
    pub fn apply_raw(&self, z: Complex64) -> Complex64 {
        let a = self.center.value();
        self.rotation * (a - z) / (Complex64::new(1.0, 0.0) - a.conj() * z)
    }

    pub fn apply(&self, z: DiscPoint) -> DiscPoint {
        let w = self.apply_raw(z.value());
        // |φ(z)| < 1 analytically; rounding can only push a point that was
        // already within an ulp of the circle onto it.
        let m = w.norm();
        if m < 1.0 {
            DiscPoint(w)
        } else {
            DiscPoint(w / m * (1.0 - f64::EPSILON))
        }
    }

    #[inline]
    pub fn derivative_raw(&self, z: Complex64) -> Complex64 {
        let a = self.center.value();
        let den = Complex64::new(1.0, 0.0) - a.conj() * z;
        self.rotation * (a.norm_sqr() - 1.0) / (den * den)
    }

    pub fn derivative(&self, z: DiscPoint) -> Complex64 {
        self.derivative_raw(z.value())
    }

    /// The inverse map in normal form: rotation `λ̄`, center `λa`.
    pub fn inverse(&self) -> MobiusMap {
        let center = self.rotation * self.center.value();
        MobiusMap {
            rotation: self.rotation.conj(),
            center: DiscPoint::new(center).unwrap_or(self.center),
        }
    }

    /// Normal form of `self ∘ inner`.
    pub fn compose(&self, inner: &MobiusMap) -> MobiusMap {
        // Center: the preimage of 0; rotation read off the derivative at 0,
        // since (λ(c - z)/(1 - c̄z))'(0) = λ(|c|^2 - 1).
        let c = inner.inverse().apply(self.inverse().apply(DiscPoint::origin()));
        let zero = Complex64::new(0.0, 0.0);
        let d0 = self.derivative_raw(inner.apply_raw(zero)) * inner.derivative_raw(zero);
        let lambda = d0 / (c.value().norm_sqr() - 1.0);
        MobiusMap { rotation: lambda / lambda.norm(), center: c }
    }

    /// True when the map is the identity up to `tol`; the identity has
    /// normal form center 0, rotation -1.
    pub fn is_identity(&self, tol: f64) -> bool {
        self.center.modulus() <= tol && (self.rotation + 1.0).norm() <= tol
    }
}

/// Sampling schemes for disc points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleScheme {
    PolarGrid,
    PseudoHyperbolic,
}

/// Draws `n` distinct points with `|z| <= radius_cap`, deterministically in `seed`.
///
/// `PolarGrid` lays out the origin followed by rings of `6k` points and
/// ignores the seed; `PseudoHyperbolic` draws points uniformly with respect
/// to hyperbolic area inside the cap.
pub fn sample_disc(scheme: SampleScheme, n: usize, seed: u64, radius_cap: f64) -> Vec<DiscPoint> {
    let cap = radius_cap.clamp(0.0, 1.0 - 1e-12);
    match scheme {
        SampleScheme::PolarGrid => polar_grid(n, cap),
        SampleScheme::PseudoHyperbolic => pseudo_hyperbolic(n, seed, cap),
    }
}

fn polar_grid(n: usize, cap: f64) -> Vec<DiscPoint> {
    if n == 0 {
        return Vec::new();
    }
    let mut rings = 0usize;
    while 1 + 3 * rings * (rings + 1) < n {
        rings += 1;
    }
    let mut out = Vec::with_capacity(n);
    out.push(DiscPoint::origin());
    'outer: for k in 1..=rings {
        let r = cap * k as f64 / rings as f64;
        let count = 6 * k;
        for j in 0..count {
            if out.len() == n {
                break 'outer;
            }
            let theta = 2.0 * PI * j as f64 / count as f64;
            out.push(DiscPoint(Complex64::from_polar(r, theta)));
        }
    }
    out
}

fn pseudo_hyperbolic(n: usize, seed: u64, cap: f64) -> Vec<DiscPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Hyperbolic area inside radius r is proportional to r^2 / (1 - r^2).
    let t_max = cap * cap / (1.0 - cap * cap);
    let mut out: Vec<DiscPoint> = Vec::with_capacity(n);
    while out.len() < n {
        let t = rng.random::<f64>() * t_max;
        let r = (t / (1.0 + t)).sqrt().min(cap);
        let theta = 2.0 * PI * rng.random::<f64>();
        let z = Complex64::from_polar(r, theta);
        if out.iter().all(|p| p.value() != z) {
            out.push(DiscPoint(z));
        }
    }
    out
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
    fn rejects_boundary_and_outside() {
        assert!(DiscPoint::from_re_im(1.0, 0.0).is_err());
        assert!(DiscPoint::from_re_im(0.8, 0.6).is_err());
        assert!(DiscPoint::from_re_im(f64::NAN, 0.0).is_err());
        assert!(DiscPoint::from_re_im(0.6, 0.79).is_ok());
    }

    #[test]
    fn rejects_non_unimodular_rotation() {
        assert!(MobiusMap::new(c(1.0 + 1e-9, 0.0), DiscPoint::origin()).is_err());
        assert!(MobiusMap::new(c(0.6, 0.8), DiscPoint::origin()).is_ok());
    }

    #[test]
    fn apply_examples() {
        let phi = MobiusMap::involution(pt(0.5, 0.0));
        assert!((phi.apply(DiscPoint::origin()).value() - c(0.5, 0.0)).norm() < 1e-15);
        assert!(phi.apply(pt(0.5, 0.0)).value().norm() < 1e-15);
        let rot = MobiusMap::rotation_only(c(0.0, 1.0)).unwrap();
        assert!((rot.apply(pt(0.3, 0.0)).value() - c(0.0, -0.3)).norm() < 1e-15);
    }

    #[test]
    fn derivative_examples() {
        let phi = MobiusMap::involution(pt(0.5, 0.0));
        assert!((phi.derivative(DiscPoint::origin()) - c(-0.75, 0.0)).norm() < 1e-15);
        assert!((phi.derivative(pt(0.5, 0.0)) - c(-4.0 / 3.0, 0.0)).norm() < 1e-14);
        let neg = MobiusMap::involution(DiscPoint::origin());
        assert!((neg.derivative(pt(0.2, -0.7)) - c(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn inverse_examples() {
        let phi = MobiusMap::involution(pt(0.5, 0.0));
        let inv = phi.inverse();
        assert!((inv.rotation() - phi.rotation()).norm() < 1e-15);
        assert!((inv.center().value() - phi.center().value()).norm() < 1e-15);
        let z = pt(0.3, 0.4);
        assert!((inv.apply(phi.apply(z)).value() - z.value()).norm() < 1e-12);

        let rot = MobiusMap::rotation_only(c(0.0, 1.0)).unwrap();
        let w = rot.apply(z);
        assert!((rot.inverse().apply(w).value() - z.value()).norm() < 1e-12);
    }

    #[test]
    fn polar_grid_degenerate_and_cap() {
        assert_eq!(sample_disc(SampleScheme::PolarGrid, 1, 9, DEFAULT_RADIUS_CAP), vec![DiscPoint::origin()]);
        let pts = sample_disc(SampleScheme::PolarGrid, 40, 0, DEFAULT_RADIUS_CAP);
        assert_eq!(pts.len(), 40);
        assert!(pts.iter().all(|p| p.modulus() <= DEFAULT_RADIUS_CAP + 1e-15));
        assert_eq!(pts, sample_disc(SampleScheme::PolarGrid, 40, 0, DEFAULT_RADIUS_CAP));
    }

    #[test]
    fn pseudo_hyperbolic_cap_and_determinism() {
        let pts = sample_disc(SampleScheme::PseudoHyperbolic, 64, 7, DEFAULT_RADIUS_CAP);
        assert_eq!(pts.len(), 64);
        assert!(pts.iter().all(|p| p.modulus() <= 0.95));
        for (i, p) in pts.iter().enumerate() {
            assert!(pts[..i].iter().all(|q| q != p));
        }
        assert_eq!(pts, sample_disc(SampleScheme::PseudoHyperbolic, 64, 7, DEFAULT_RADIUS_CAP));
    }

    #[test]
    fn serde_round_trip_rejects_bad_center() {
        let json = r#"{"rotation":[1.0,0.0],"center":[0.5,0.0]}"#;
        let m: MobiusMap = serde_json::from_str(json).unwrap();
        assert_eq!(m.center(), pt(0.5, 0.0));
        assert!(serde_json::from_str::<MobiusMap>(r#"{"rotation":[1.0,0.0],"center":[1.0,0.0]}"#).is_err());
        assert!(serde_json::from_str::<MobiusMap>(r#"{"rotation":[2.0,0.0],"center":[0.0,0.0]}"#).is_err());
    }
}
