//! Declarative scenarios: one function, a point set, a family and a list of
//! operations, run into a [`Report`].

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::disc::{sample_disc, DiscPoint, SampleScheme, DEFAULT_RADIUS_CAP};
use crate::error::{BlochError, Result};
use crate::expr::HoloExpr;
use crate::norms::{bloch_seminorm_bracket, make_family, sampled_seminorm, FamilySpec, TestFamily, DEFAULT_RESOLUTION};
use crate::report::{Check, Report, Tolerances};
use crate::summing::{
    domination_check, factorize, lp_duality_check, maurey_extrapolate, pietsch_lp, points_from_json, summing_estimate,
    SampleEntry, WeightedSample,
};
use crate::vector::{Exponent, Norm};

const PROP1_INCLUSIONS: &str = include_str!("../scenarios/prop1-inclusions.json");

/// Names of the scenarios shipped with the library.
pub const BUNDLED: [&str; 1] = ["prop1-inclusions"];

pub fn bundled_scenario(name: &str) -> Option<&'static str> {
    match name {
        "prop1-inclusions" => Some(PROP1_INCLUSIONS),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operation {
    Seminorm,
    Summing,
    Pietsch,
    Duality,
    Monotonicity,
    InfinityCoincidence,
    Domination,
    Factorization,
    Maurey,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PointsSpec {
    scheme: SampleScheme,
    n: usize,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default = "default_cap")]
    radius_cap: f64,
}

fn default_cap() -> f64 {
    DEFAULT_RADIUS_CAP
}

fn default_exponents() -> Vec<Exponent> {
    vec![Exponent::ONE, Exponent::new(1.5).expect("valid"), Exponent::TWO, Exponent::new(4.0).expect("valid")]
}

fn default_depth() -> usize {
    6
}

/// Fields parsed by serde; points, sample and function go through the
/// entry-naming parsers.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    #[serde(default)]
    description: String,
    function: Value,
    #[serde(default)]
    points: Option<Value>,
    #[serde(default)]
    sample: Option<Value>,
    #[serde(default)]
    family: Option<FamilySpec>,
    #[serde(default = "default_exponents")]
    exponents: Vec<Exponent>,
    #[serde(default)]
    q: Option<f64>,
    #[serde(default = "default_depth")]
    depth: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    norm: Norm,
    #[serde(default)]
    tolerances: Tolerances,
    checks: Vec<Operation>,
}

/// A fully resolved scenario; its JSON form is echoed into the report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub function: HoloExpr,
    pub points: Vec<DiscPoint>,
    pub sample: WeightedSample,
    pub family: FamilySpec,
    pub exponents: Vec<Exponent>,
    pub q: Option<f64>,
    pub depth: usize,
    pub seed: u64,
    pub norm: Norm,
    pub tolerances: Tolerances,
    pub checks: Vec<Operation>,
}

impl Scenario {
    pub fn from_json(s: &str) -> Result<Scenario> {
        let raw: RawScenario = serde_json::from_str(s).map_err(|e| BlochError::Parse(format!("scenario: {e}")))?;
        let function = HoloExpr::from_json(&raw.function.to_string())
            .map_err(|e| BlochError::Parse(format!("function: {e}")))?;
        let sample = raw.sample.as_ref().map(|v| WeightedSample::from_json(&v.to_string())).transpose()?;
        let points = match &raw.points {
            Some(v @ Value::Array(_)) => points_from_json(&v.to_string())?,
            Some(v) => {
                let spec: PointsSpec =
                    serde_json::from_value(v.clone()).map_err(|e| BlochError::Parse(format!("points: {e}")))?;
                if spec.n == 0 || !(0.0..1.0).contains(&spec.radius_cap) {
                    return Err(BlochError::Parse("points: need n >= 1 and 0 <= radius_cap < 1".into()));
                }
                sample_disc(spec.scheme, spec.n, spec.seed.unwrap_or(raw.seed), spec.radius_cap)
            }
            None => match &sample {
                Some(s) => s.points(),
                None => return Err(BlochError::Parse("scenario needs points or a sample".into())),
            },
        };
        let sample = match sample {
            Some(s) => s,
            None => WeightedSample::unit(&points)?,
        };
        if raw.exponents.is_empty() {
            return Err(BlochError::Parse("exponents: need at least one".into()));
        }
        let family = raw.family.unwrap_or_else(|| FamilySpec::default_recipe(&points, raw.seed));
        Ok(Scenario {
            name: raw.name,
            description: raw.description,
            function,
            points,
            sample,
            family,
            exponents: raw.exponents,
            q: raw.q,
            depth: raw.depth,
            seed: raw.seed,
            norm: raw.norm,
            tolerances: raw.tolerances,
            checks: raw.checks,
        })
    }

    fn finite_exponents(&self) -> Vec<Exponent> {
        let mut ps: Vec<Exponent> = self.exponents.iter().copied().filter(|p| !p.is_infinite()).collect();
        ps.sort_by(|a, b| a.value().total_cmp(&b.value()));
        ps
    }
}

/// Runs every listed operation; failures of any kind become failed checks.
pub fn run_scenario(s: &Scenario, version: &str) -> Report {
    let echo = serde_json::to_value(s).unwrap_or(Value::Null);
    let checks = match make_family(&s.family) {
        Ok(family) => {
            let f = match s.function.normalize_origin() {
                Ok(f) => f,
                Err(e) => return Report::new(version, s.seed, echo, vec![Check::error("function", e)]),
            };
            s.checks.par_iter().flat_map_iter(|op| run_operation(*op, s, &f, &family)).collect()
        }
        Err(e) => vec![Check::error("family", e)],
    };
    Report::new(version, s.seed, echo, checks)
}

fn run_operation(op: Operation, s: &Scenario, f: &HoloExpr, family: &TestFamily) -> Vec<Check> {
    let name = serde_json::to_value(op).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
    let res = match op {
        Operation::Seminorm => op_seminorm(s, f),
        Operation::Summing => op_summing(s, f, family),
        Operation::Pietsch => op_pietsch(s, f, family),
        Operation::Duality => op_duality(s, f, family),
        Operation::Monotonicity => op_monotonicity(s, f, family),
        Operation::InfinityCoincidence => op_infinity(s, f, family),
        Operation::Domination => op_domination(s, f, family),
        Operation::Factorization => op_factorization(s, f, family),
        Operation::Maurey => op_maurey(s, f, family),
    };
    res.unwrap_or_else(|e| vec![Check::error(name, e)])
}

fn op_seminorm(s: &Scenario, f: &HoloExpr) -> Result<Vec<Check>> {
    let b = bloch_seminorm_bracket(f, DEFAULT_RESOLUTION, s.norm)?;
    Ok(vec![Check::bound("seminorm", 0.0, b.lower - b.upper).with_witnesses(serde_json::to_value(&b)?)])
}

fn op_summing(s: &Scenario, f: &HoloExpr, family: &TestFamily) -> Result<Vec<Check>> {
    let tol = s.tolerances.get("summing", 1e-12);
    let mut worst = f64::NEG_INFINITY;
    let mut estimates = Vec::new();
    for &p in &s.exponents {
        let e = summing_estimate(f, &s.sample, family, p, s.norm)?;
        worst = worst.max(e.denominator_family - e.denominator_closed_form).max(e.certified_lower - e.heuristic_ratio);
        estimates.push(e);
    }
    Ok(vec![Check::bound("summing", tol, worst).with_witnesses(serde_json::to_value(&estimates)?)])
}

fn op_pietsch(s: &Scenario, f: &HoloExpr, family: &TestFamily) -> Result<Vec<Check>> {
    let tol = s.tolerances.get("pietsch", 1e-9);
    let mut worst = f64::NEG_INFINITY;
    let mut constants = Vec::new();
    for p in s.finite_exponents() {
        let m = pietsch_lp(f, &s.points, family, p, s.norm)?;
        let d = domination_check(f, &s.points, family, &m, s.norm)?;
        worst = worst.max(-d.worst_margin);
        constants.push(json!({ "p": p, "constant": m.constant }));
    }
    Ok(vec![Check::bound("pietsch", tol, worst).with_witnesses(json!({ "constants": constants }))])
}

fn op_duality(s: &Scenario, f: &HoloExpr, family: &TestFamily) -> Result<Vec<Check>> {
    let tol = s.tolerances.get("duality", 1e-7);
    let mut worst = 0.0f64;
    let mut rows = Vec::new();
    for p in s.finite_exponents() {
        let r = lp_duality_check(f, &s.points, family, p, s.norm)?;
        worst = worst.max(r.relative_gap).max(r.ratio_gap);
        rows.push(json!({ "p": p, "primal": r.primal_value, "dual": r.dual_value, "witness_ratio": r.witness_ratio }));
    }
    Ok(vec![Check::bound("duality", tol, worst).with_witnesses(json!({ "relative": true, "exponents": rows }))])
}

fn op_monotonicity(s: &Scenario, f: &HoloExpr, family: &TestFamily) -> Result<Vec<Check>> {
    let tol = s.tolerances.get("monotonicity", 1e-9);
    let mut cs = Vec::new();
    for p in s.finite_exponents() {
        cs.push((p, pietsch_lp(f, &s.points, family, p, s.norm)?.constant));
    }
    let rise = cs.windows(2).map(|w| w[1].1 - w[0].1).fold(f64::NEG_INFINITY, f64::max);
    let witnesses: Vec<Value> = cs.iter().map(|(p, c)| json!({ "p": p, "constant": c })).collect();
    Ok(vec![Check::bound("monotonicity", tol, rise.max(f64::MIN)).with_witnesses(json!({ "constants": witnesses }))])
}

fn op_infinity(s: &Scenario, f: &HoloExpr, family: &TestFamily) -> Result<Vec<Check>> {
    let tol = s.tolerances.get("infinity_coincidence", 1e-10);
    let mut fam = family.clone();
    fam.extend(make_family(&FamilySpec::ExtremalGrid { points: s.points.clone() })?);
    let sample = WeightedSample::new(
        s.points.iter().map(|&z| SampleEntry { lambda: Complex64::new(z.weight(), 0.0), z }).collect(),
    )?;
    let e = summing_estimate(f, &sample, &fam, Exponent::INFINITY, s.norm)?;
    let sampled = sampled_seminorm(f, &s.points, s.norm)?;
    Ok(vec![Check::bound("infinity_coincidence", tol, (e.heuristic_ratio - sampled).abs())
        .with_witnesses(json!({ "ratio": e.heuristic_ratio, "sampled_seminorm": sampled }))])
}

fn op_domination(s: &Scenario, f: &HoloExpr, family: &TestFamily) -> Result<Vec<Check>> {
    let p = s.finite_exponents().first().copied().ok_or_else(|| BlochError::Invalid("no finite exponent".into()))?;
    let m = pietsch_lp(f, &s.points, family, p, s.norm)?;
    let fresh = sample_disc(SampleScheme::PseudoHyperbolic, 64, s.seed.wrapping_add(1), DEFAULT_RADIUS_CAP);
    let d = domination_check(f, &fresh, family, &m, s.norm)?;
    Ok(vec![Check::info(
        "domination",
        json!({ "p": p, "fresh_points": fresh.len(), "violations": d.violations, "worst_margin": d.worst_margin }),
    )])
}

fn op_factorization(s: &Scenario, f: &HoloExpr, family: &TestFamily) -> Result<Vec<Check>> {
    let tol = s.tolerances.get("factorization", 1e-8);
    let m = pietsch_lp(f, &s.points, family, Exponent::TWO, s.norm)?;
    match factorize(f, &s.points, family, &m, s.norm, s.seed) {
        Ok(c) => Ok(vec![
            Check::bound("factorization", tol, c.residual),
            Check::info(
                "factorization_norm",
                json!({ "operator_norm_estimate": c.operator_norm_estimate, "constant": m.constant }),
            ),
        ]),
        Err(e @ BlochError::RankDeficiency { .. }) => Ok(vec![Check::error("factorization", e).heuristic()]),
        Err(e) => Err(e),
    }
}

fn op_maurey(s: &Scenario, f: &HoloExpr, family: &TestFamily) -> Result<Vec<Check>> {
    let q = s.q.ok_or_else(|| BlochError::Invalid("maurey needs q".into()))?;
    let p = s
        .finite_exponents()
        .into_iter()
        .find(|p| p.value() > 1.0 && p.value() < q)
        .ok_or_else(|| BlochError::Invalid("maurey needs an exponent with 1 < p < q".into()))?;
    let r = maurey_extrapolate(f, &s.points, family, p.value(), q, s.depth, s.norm)?;
    let interp = r.stages.iter().map(|st| st.interpolation_margin).fold(f64::INFINITY, f64::min);
    Ok(vec![
        Check::bound("maurey_theta", s.tolerances.get("maurey_theta", 1e-12), r.theta_residual),
        Check::bound("maurey_interpolation", s.tolerances.get("maurey_interpolation", 1e-12), -interp),
        Check::bound("maurey_final", s.tolerances.get("maurey_final", 0.0), -r.final_margin).with_witnesses(json!({
            "relative": true, "c_max": r.c_max, "constant_c": r.constant_c, "truncation_mass": r.truncation_mass,
        })),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenario_passes() {
        let s = Scenario::from_json(bundled_scenario("prop1-inclusions").unwrap()).unwrap();
        let r = run_scenario(&s, "test");
        assert!(r.ok(), "{:#?}", r.checks);
        assert!(r.check("monotonicity").is_some());
        assert_eq!(r.payload(), run_scenario(&s, "test").payload());
    }

    #[test]
    fn boundary_sample_names_entry() {
        let text = r#"{"name":"x","function":{"kind":"monomial","k":1},
            "sample":[{"lambda":[1,0],"z":[0,0]},{"lambda":[1,0],"z":[1.0,0]}],"checks":["summing"]}"#;
        let err = Scenario::from_json(text).unwrap_err().to_string();
        assert!(err.contains("entry 1"), "{err}");
    }

    #[test]
    fn failures_become_checks() {
        // A taylor node with a tiny radius cannot be evaluated at the points.
        let text = r#"{"name":"x","function":{"kind":"taylor","coeffs":[[0,0],[1,0]],"radius":0.1},
            "points":[[0.5,0]],"family":{"kind":"extremal_grid","points":[[0,0]]},"checks":["pietsch","summing"]}"#;
        let s = Scenario::from_json(text).unwrap();
        let r = run_scenario(&s, "test");
        assert_eq!(r.summary.certified_failures, 2);
        assert!(r.checks.iter().all(|c| c.detail.as_deref().unwrap_or("").contains("taylor")));
    }
}
