//! Finite-dimensional vectors in `ℂ^d`, their norms, and summing exponents.

use std::fmt;
use std::ops::{Add, Index, Mul};
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{BlochError, Result};

/// Norm placed on the target space `X = ℂ^d`.
///
/// `L1` only arises as the dual of `Sup`; functionals on a Euclidean space
/// are normed by the Euclidean norm again.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    #[default]
    Euclidean,
    Sup,
    L1,
}

impl Norm {
    pub fn dual(self) -> Norm {
        match self {
            Norm::Euclidean => Norm::Euclidean,
            Norm::Sup => Norm::L1,
            Norm::L1 => Norm::Sup,
        }
    }

    pub fn of(self, v: &[Complex64]) -> f64 {
        match self {
            // Scalars take the modulus so that ‖g'(z)‖ and |g'(z)| agree bitwise.
            Norm::Euclidean if v.len() == 1 => v[0].norm(),
            Norm::Euclidean => v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt(),
            Norm::Sup => v.iter().map(|z| z.norm()).fold(0.0, f64::max),
            Norm::L1 => v.iter().map(|z| z.norm()).sum(),
        }
    }

    /// A functional `x*` of dual norm 1 with `x*(x) = ‖x‖` under the bilinear
    /// pairing `Σ x*_j x_j`. Returns `None` for the zero vector.
    pub fn norming_functional(self, x: &[Complex64]) -> Option<Vec<Complex64>> {
        let n = self.of(x);
        if n == 0.0 {
            return None;
        }
        let zero = Complex64::new(0.0, 0.0);
        Some(match self {
            Norm::Euclidean => x.iter().map(|z| z.conj() / n).collect(),
            Norm::Sup => {
                let (k, _) = x
                    .iter()
                    .enumerate()
                    .fold((0, -1.0), |(bk, bm), (k, z)| if z.norm() > bm { (k, z.norm()) } else { (bk, bm) });
                let mut f = vec![zero; x.len()];
                f[k] = x[k].conj() / x[k].norm();
                f
            }
            Norm::L1 => x
                .iter()
                .map(|z| if z.norm() > 0.0 { z.conj() / z.norm() } else { zero })
                .collect(),
        })
    }
}

/// A value of a vector-valued function, an element of `ℂ^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VectorValue(#[serde(with = "crate::cserde::vec")] pub Vec<Complex64>);

impl VectorValue {
    pub fn zeros(d: usize) -> Self {
        VectorValue(vec![Complex64::new(0.0, 0.0); d])
    }

    pub fn scalar(z: Complex64) -> Self {
        VectorValue(vec![z])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self, flavor: Norm) -> f64 {
        flavor.of(&self.0)
    }

    pub fn components(&self) -> &[Complex64] {
        &self.0
    }

    /// Bilinear (unconjugated) pairing `Σ u_j x_j`.
    pub fn bilinear(&self, x: &[Complex64]) -> Complex64 {
        self.0.iter().zip(x).map(|(u, v)| u * v).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Index<usize> for VectorValue {
    type Output = Complex64;

    fn index(&self, i: usize) -> &Complex64 {
        &self.0[i]
    }
}

impl Add for VectorValue {
    type Output = VectorValue;

    fn add(mut self, rhs: VectorValue) -> VectorValue {
        debug_assert_eq!(self.0.len(), rhs.0.len());
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
        self
    }
}

impl Mul<Complex64> for VectorValue {
    type Output = VectorValue;

    fn mul(mut self, c: Complex64) -> VectorValue {
        for a in &mut self.0 {
            *a *= c;
        }
        self
    }
}

/// A summing exponent `p ∈ [1, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Exponent(f64);

impl Exponent {
    pub const ONE: Exponent = Exponent(1.0);
    pub const TWO: Exponent = Exponent(2.0);
    pub const INFINITY: Exponent = Exponent(f64::INFINITY);

    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(BlochError::InvalidExponent(p));
        }
        Ok(Exponent(p))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    /// The conjugate index `p*`.
    pub fn conjugate(self) -> Exponent {
        if self.0 == 1.0 {
            Exponent::INFINITY
        } else if self.0.is_infinite() {
            Exponent::ONE
        } else {
            Exponent(self.0 / (self.0 - 1.0))
        }
    }

    /// `(Σ a_i^p)^{1/p}` for nonnegative `a_i`, the max for `p = ∞`.
    pub fn norm_of<I: IntoIterator<Item = f64>>(self, values: I) -> f64 {
        if self.is_infinite() {
            values.into_iter().fold(0.0, f64::max)
        } else if self.0 == 1.0 {
            values.into_iter().sum()
        } else {
            let p = self.0;
            values.into_iter().map(|a| a.powf(p)).sum::<f64>().powf(1.0 / p)
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl FromStr for Exponent {
    type Err = BlochError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "∞" => Ok(Exponent::INFINITY),
            t => {
                let p: f64 = t.parse().map_err(|_| BlochError::Parse(format!("bad exponent '{t}'")))?;
                Exponent::new(p)
            }
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(p) => Exponent::new(p).map_err(serde::de::Error::custom),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn norms_and_duals() {
        let x = [c(3.0, 0.0), c(0.0, -4.0)];
        assert_eq!(Norm::Euclidean.of(&x), 5.0);
        assert_eq!(Norm::Sup.of(&x), 4.0);
        assert_eq!(Norm::L1.of(&x), 7.0);
        for flavor in [Norm::Euclidean, Norm::Sup, Norm::L1] {
            let f = flavor.norming_functional(&x).unwrap();
            let val: Complex64 = f.iter().zip(&x).map(|(a, b)| a * b).sum();
            assert!((val - c(flavor.of(&x), 0.0)).norm() < 1e-14);
            assert!((flavor.dual().of(&f) - 1.0).abs() < 1e-14);
        }
        assert!(Norm::Sup.norming_functional(&[c(0.0, 0.0)]).is_none());
    }

    #[test]
    fn exponents() {
        assert_eq!(Exponent::ONE.conjugate(), Exponent::INFINITY);
        assert_eq!(Exponent::INFINITY.conjugate(), Exponent::ONE);
        assert_eq!(Exponent::new(4.0).unwrap().conjugate().value(), 4.0 / 3.0);
        assert!(Exponent::new(0.5).is_err());
        assert_eq!("inf".parse::<Exponent>().unwrap(), Exponent::INFINITY);
        assert_eq!(Exponent::TWO.norm_of([3.0, 4.0]), 5.0);
        assert_eq!(Exponent::INFINITY.norm_of([3.0, 4.0]), 4.0);
        let json = serde_json::to_string(&[Exponent::TWO, Exponent::INFINITY]).unwrap();
        assert_eq!(json, r#"[2.0,"inf"]"#);
        let back: Vec<Exponent> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, vec![Exponent::TWO, Exponent::INFINITY]);
    }
}
