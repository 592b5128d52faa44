//! Finite-sample p-summing constants, the Pietsch domination LP with its
//! dual, discrete factorizations, and Maurey extrapolation.

mod factor;
mod maurey;
mod pietsch;

pub use factor::{factorize, FactorizationCertificate};
pub use maurey::{maurey_extrapolate, maurey_theta, MaureyReport, MaureyStage};
pub use pietsch::{
    domination_check, lp_duality_check, pietsch_lp, DominationReport, DualityReport, PietschMeasure, PointMargin,
};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::disc::DiscPoint;
use crate::error::{BlochError, Result};
use crate::expr::HoloExpr;
use crate::norms::TestFamily;
use crate::vector::{Exponent, Norm};

/// One `(λ, z)` pair of a weighted sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleEntry {
    #[serde(with = "crate::cserde")]
    pub lambda: Complex64,
    pub z: DiscPoint,
}

/// The data `(λ_i, z_i)` of the p-summing inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightedSample {
    pub entries: Vec<SampleEntry>,
}

impl WeightedSample {
    pub fn new(entries: Vec<SampleEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(BlochError::Invalid("a weighted sample needs at least one entry".into()));
        }
        Ok(WeightedSample { entries })
    }

    /// Unit weights at the given points.
    pub fn unit(points: &[DiscPoint]) -> Result<Self> {
        Self::new(points.iter().map(|&z| SampleEntry { lambda: Complex64::new(1.0, 0.0), z }).collect())
    }

    pub fn points(&self) -> Vec<DiscPoint> {
        self.entries.iter().map(|e| e.z).collect()
    }

    /// Parses a JSON list of `{"lambda": [re, im], "z": [re, im]}`; errors
    /// name the offending entry.
    pub fn from_json(s: &str) -> Result<Self> {
        let raw: Vec<serde_json::Value> = serde_json::from_str(s)?;
        let mut entries = Vec::with_capacity(raw.len());
        for (i, v) in raw.into_iter().enumerate() {
            let e: SampleEntry =
                serde_json::from_value(v).map_err(|e| BlochError::Parse(format!("sample entry {i}: {e}")))?;
            entries.push(e);
        }
        Self::new(entries)
    }
}

/// Parses a JSON list of `[re, im]` disc points; errors name the offending entry.
pub fn points_from_json(s: &str) -> Result<Vec<DiscPoint>> {
    let raw: Vec<serde_json::Value> = serde_json::from_str(s)?;
    let mut out = Vec::with_capacity(raw.len());
    for (i, v) in raw.into_iter().enumerate() {
        let z: DiscPoint = serde_json::from_value(v).map_err(|e| BlochError::Parse(format!("point {i}: {e}")))?;
        out.push(z);
    }
    if out.is_empty() {
        return Err(BlochError::Invalid("point list is empty".into()));
    }
    Ok(out)
}

/// Both sides of the denominator of the summing ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Denominator {
    /// `max_g (Σ |λ_i|^p |g'(z_i)|^p)^{1/p}` over the family.
    pub family_value: f64,
    /// `(Σ |λ_i|^p / (1 - |z_i|^2)^p)^{1/p}`, which dominates the ball supremum.
    pub closed_form_value: f64,
    /// Member attaining `family_value` (smallest index on ties).
    pub argmax_member: usize,
}

pub fn denominator(sample: &WeightedSample, family: &TestFamily, p: Exponent) -> Result<Denominator> {
    if family.is_empty() {
        return Err(BlochError::Invalid("family is empty".into()));
    }
    let points = sample.points();
    let derivs = family.derivative_matrix(&points)?;
    let mut best = (0, f64::NEG_INFINITY);
    for k in 0..family.len() {
        let v = p.norm_of(sample.entries.iter().zip(&derivs).map(|(e, row)| e.lambda.norm() * row[k].norm()));
        if v > best.1 {
            best = (k, v);
        }
    }
    let closed = p.norm_of(sample.entries.iter().map(|e| e.lambda.norm() / e.z.weight()));
    Ok(Denominator { family_value: best.1, closed_form_value: closed, argmax_member: best.0 })
}

/// `(Σ |λ_i|^p ‖f'(z_i)‖^p)^{1/p}`.
pub fn numerator(f: &HoloExpr, sample: &WeightedSample, p: Exponent, norm: Norm) -> Result<f64> {
    let mut terms = Vec::with_capacity(sample.entries.len());
    for e in &sample.entries {
        terms.push(e.lambda.norm() * f.deriv(e.z)?.norm(norm));
    }
    Ok(p.norm_of(terms))
}

/// The two sides of the p-summing inequality on one weighted sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummingEstimate {
    pub p: Exponent,
    pub numerator: f64,
    pub denominator_family: f64,
    pub denominator_closed_form: f64,
    /// `numerator / denominator_closed_form`, a true lower bound for `π_p`.
    pub certified_lower: f64,
    /// `numerator / denominator_family`; `"inf"` if the family misses the sample.
    #[serde(with = "crate::cserde::ext_real")]
    pub heuristic_ratio: f64,
    pub argmax_member: usize,
    /// Entry with the largest `|λ_i| ‖f'(z_i)‖`.
    pub argmax_entry: usize,
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

pub fn summing_estimate(
    f: &HoloExpr,
    sample: &WeightedSample,
    family: &TestFamily,
    p: Exponent,
    norm: Norm,
) -> Result<SummingEstimate> {
    let num = numerator(f, sample, p, norm)?;
    let den = denominator(sample, family, p)?;
    let mut argmax_entry = 0;
    let mut best = f64::NEG_INFINITY;
    for (i, e) in sample.entries.iter().enumerate() {
        let v = e.lambda.norm() * f.deriv(e.z)?.norm(norm);
        if v > best {
            best = v;
            argmax_entry = i;
        }
    }
    Ok(SummingEstimate {
        p,
        numerator: num,
        denominator_family: den.family_value,
        denominator_closed_form: den.closed_form_value,
        certified_lower: ratio(num, den.closed_form_value),
        heuristic_ratio: ratio(num, den.family_value),
        argmax_member: den.argmax_member,
        argmax_entry,
    })
}

/// `|g_k'(z_j)|^p` for every point `j` and member `k`.
pub(crate) fn abs_pow_matrix(derivs: &[Vec<Complex64>], p: f64) -> Vec<Vec<f64>> {
    derivs.iter().map(|row| row.iter().map(|d| d.norm().powf(p)).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::{extremal, make_family, FamilySpec};

    fn pt(re: f64, im: f64) -> DiscPoint {
        DiscPoint::from_re_im(re, im).unwrap()
    }

    fn one() -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    fn family_of(points: &[DiscPoint]) -> TestFamily {
        make_family(&FamilySpec::ExtremalGrid { points: points.to_vec() }).unwrap()
    }

    #[test]
    fn denominator_examples() {
        let fam0 = family_of(&[DiscPoint::origin()]);
        let s = WeightedSample::unit(&[DiscPoint::origin()]).unwrap();
        let d = denominator(&s, &fam0, Exponent::TWO).unwrap();
        assert_eq!((d.family_value, d.closed_form_value), (1.0, 1.0));

        let fam = family_of(&[pt(0.5, 0.0)]);
        let s = WeightedSample::unit(&[pt(0.5, 0.0)]).unwrap();
        let d = denominator(&s, &fam, Exponent::ONE).unwrap();
        assert!((d.family_value - 4.0 / 3.0).abs() < 1e-15);
        assert!((d.closed_form_value - 4.0 / 3.0).abs() < 1e-15);

        // f_0' = 1 at both points, so the family side is 2.
        let s = WeightedSample::unit(&[DiscPoint::origin(), pt(0.5, 0.0)]).unwrap();
        let d = denominator(&s, &fam0, Exponent::ONE).unwrap();
        assert!((d.family_value - 2.0).abs() < 1e-15);
        assert!((d.closed_form_value - 7.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn estimate_examples() {
        let x = vec![Complex64::new(2.0, 0.0), Complex64::new(0.0, 0.0)];
        let f = HoloExpr::tensor(extremal(DiscPoint::origin()), x);
        let s = WeightedSample::unit(&[DiscPoint::origin()]).unwrap();
        let fam = family_of(&[DiscPoint::origin()]);
        let e = summing_estimate(&f, &s, &fam, Exponent::ONE, Norm::Euclidean).unwrap();
        assert_eq!((e.numerator, e.denominator_closed_form, e.certified_lower), (2.0, 1.0, 2.0));

        let z = pt(0.3, -0.2);
        let g = extremal(pt(-0.1, 0.4));
        let fam = family_of(&[pt(-0.1, 0.4)]);
        let s = WeightedSample::new(vec![SampleEntry { lambda: one(), z }]).unwrap();
        let e = summing_estimate(&g, &s, &fam, Exponent::TWO, Norm::Euclidean).unwrap();
        let expect = g.deriv(z).unwrap()[0].norm() * z.weight();
        assert!((e.certified_lower - expect).abs() < 1e-15 && e.certified_lower <= 1.0);
        assert!(e.heuristic_ratio >= e.certified_lower);
    }

    #[test]
    fn sample_parse_names_entry() {
        let err = WeightedSample::from_json(r#"[{"lambda":[1,0],"z":[0.1,0]},{"lambda":[1,0],"z":[1.0,0]}]"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("sample entry 1"), "{err}");
        let err = points_from_json("[[0,0],[0,0.5],[0.6,0.8]]").unwrap_err().to_string();
        assert!(err.contains("point 2"), "{err}");
    }
}
