//! Reading command inputs given as file paths or inline JSON.

use bloch_core::molecules::Molecule;
use bloch_core::norms::{make_family, FamilySpec, TestFamily};
use bloch_core::summing::points_from_json;
use bloch_core::{BlochError, DiscPoint, HoloExpr, Result, WeightedSample};

/// Inline JSON if the argument starts with `{` or `[`, else a file path.
pub fn read_text(arg: &str) -> Result<String> {
    let t = arg.trim_start();
    if t.starts_with('{') || t.starts_with('[') {
        Ok(arg.to_string())
    } else {
        std::fs::read_to_string(arg).map_err(|e| BlochError::Parse(format!("{arg}: {e}")))
    }
}

pub fn read_expr(arg: &str) -> Result<HoloExpr> {
    HoloExpr::from_json(&read_text(arg)?)
}

pub fn read_points(arg: &str) -> Result<Vec<DiscPoint>> {
    points_from_json(&read_text(arg)?)
}

pub fn read_sample(arg: &str) -> Result<WeightedSample> {
    WeightedSample::from_json(&read_text(arg)?)
}

pub fn read_molecule(arg: &str) -> Result<Molecule> {
    Molecule::from_json(&read_text(arg)?)
}

/// A recipe (`{"kind": ...}`) is built; a family document is taken as is.
pub fn load_family_unchecked(arg: &str) -> Result<TestFamily> {
    let text = read_text(arg)?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    if v.get("kind").is_some() {
        let spec: FamilySpec = serde_json::from_value(v).map_err(|e| BlochError::Parse(format!("family recipe: {e}")))?;
        make_family(&spec)
    } else {
        TestFamily::from_json(&text)
    }
}

/// The given family after validation, or the default recipe on `points`.
pub fn load_family(arg: Option<&str>, points: &[DiscPoint], seed: u64) -> Result<TestFamily> {
    match arg {
        Some(a) => {
            let fam = load_family_unchecked(a)?;
            let issues = fam.validate();
            if issues.is_empty() {
                Ok(fam)
            } else {
                Err(BlochError::CertificationFailure(issues.join("; ")))
            }
        }
        None => make_family(&FamilySpec::default_recipe(points, seed)),
    }
}
