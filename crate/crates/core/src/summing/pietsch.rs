//! The discrete Pietsch domination LP and its dual.

use num_complex::Complex64;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{abs_pow_matrix, SampleEntry};
use crate::disc::DiscPoint;
use crate::error::{BlochError, Result};
use crate::expr::HoloExpr;
use crate::norms::TestFamily;
use crate::simplex::{LinearProgram, LpOutcome, Relation};
use crate::vector::{Exponent, Norm};

/// `(Σ μ_k v_k^p)^{1/p}` for `v >= 0`, scaled by `max v` so a point mass
/// returns its atom exactly.
pub(crate) fn weighted_lp(v: &[f64], mu: &[f64], p: f64) -> f64 {
    let top = v.iter().zip(mu).filter(|(_, &w)| w > 0.0).map(|(a, _)| *a).fold(0.0, f64::max);
    if top == 0.0 {
        return 0.0;
    }
    let s: f64 = v.iter().zip(mu).map(|(a, w)| w * (a / top).powf(p)).sum();
    top * s.powf(1.0 / p)
}

/// Probability weights over a family with a domination constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PietschMeasure {
    pub p: Exponent,
    /// Normalized weights, one per family member.
    pub weights: Vec<f64>,
    pub constant: f64,
    /// `Σ w` before normalization, i.e. `constant^p`.
    pub mass: f64,
}

/// Solves `min Σ w` over `w >= 0` with `Σ_k a_jk w_k >= b_j` for every `j`,
/// then rescales `w` so every row holds in floating point.
pub(crate) fn solve_covering(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let m = a.first().map_or(0, Vec::len);
    for (j, (row, &bj)) in a.iter().zip(b).enumerate() {
        if bj > 0.0 && row.iter().all(|&v| v == 0.0) {
            return Err(BlochError::Infeasible { point: j });
        }
    }
    if b.iter().all(|&v| v <= 0.0) {
        return Ok(vec![0.0; m]);
    }
    // Solve with `b / max b` so the simplex tolerances are relative.
    let bmax = b.iter().cloned().fold(0.0, f64::max);
    let mut lp = LinearProgram::maximize(vec![-1.0; m]);
    for (row, &bj) in a.iter().zip(b) {
        lp = lp.constraint(row.clone(), Relation::Ge, bj / bmax);
    }
    let mut w = match lp.solve()? {
        LpOutcome::Optimal { x, .. } => x.into_iter().map(|v| v * bmax).collect::<Vec<_>>(),
        LpOutcome::Infeasible => return Err(BlochError::LpFailure("covering LP reported infeasible".into())),
        LpOutcome::Unbounded => return Err(BlochError::LpFailure("covering LP reported unbounded".into())),
    };
    if let Some(r) = refine_active_set(a, b, &w) {
        w = r;
    }
    // Polish: the simplex meets rows only to its tolerance.
    let mut scale: f64 = 1.0;
    for (row, &bj) in a.iter().zip(b) {
        if bj > 0.0 {
            let lhs: f64 = row.iter().zip(&w).map(|(x, y)| x * y).sum();
            scale = scale.max(bj / lhs);
        }
    }
    if scale > 1.0 {
        w.iter_mut().for_each(|v| *v *= scale * (1.0 + 4.0 * f64::EPSILON));
    }
    Ok(w)
}

/// Re-solves the rows that are nearly tight on the support of `w` by least
/// squares; returns the result when it is nonnegative, at least as feasible
/// and no heavier.
fn refine_active_set(a: &[Vec<f64>], b: &[f64], w: &[f64]) -> Option<Vec<f64>> {
    let support: Vec<usize> = (0..w.len()).filter(|&k| w[k] > 0.0).collect();
    let tight: Vec<usize> = (0..a.len())
        .filter(|&j| b[j] > 0.0 && a[j].iter().zip(w).map(|(x, y)| x * y).sum::<f64>() <= b[j] * (1.0 + 1e-6))
        .collect();
    if support.is_empty() || tight.is_empty() {
        return None;
    }
    // Rows normalized by b_j so the residual is relative.
    let m = DMatrix::from_fn(tight.len(), support.len(), |r, c| a[tight[r]][support[c]] / b[tight[r]]);
    let rhs = DVector::from_element(tight.len(), 1.0);
    let sol = m.svd(true, true).solve(&rhs, 1e-14).ok()?;
    let mut out = vec![0.0; w.len()];
    for (c, &k) in support.iter().enumerate() {
        if !(sol[c] >= 0.0) {
            return None;
        }
        out[k] = sol[c];
    }
    let worst = |v: &[f64]| {
        a.iter()
            .zip(b)
            .filter(|(_, &bj)| bj > 0.0)
            .map(|(row, &bj)| row.iter().zip(v).map(|(x, y)| x * y).sum::<f64>() / bj)
            .fold(f64::INFINITY, f64::min)
    };
    let mass = |v: &[f64]| v.iter().sum::<f64>();
    // Compare after scaling both to feasibility.
    let (ws, os) = (worst(w), worst(&out));
    if os > 0.0 && mass(&out) / os.min(1.0) <= mass(w) / ws.min(1.0) {
        Some(out)
    } else {
        None
    }
}

/// Solves `max Σ u_j b_j` over `u >= 0` with `Σ_j u_j a_jk <= 1` for every `k`.
pub(crate) fn solve_packing(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let n = a.len();
    let m = a.first().map_or(0, Vec::len);
    for (j, (row, &bj)) in a.iter().zip(b).enumerate() {
        if bj > 0.0 && row.iter().all(|&v| v == 0.0) {
            return Err(BlochError::Infeasible { point: j });
        }
    }
    let bmax = b.iter().cloned().fold(0.0, f64::max);
    if bmax <= 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut lp = LinearProgram::maximize(b.iter().map(|v| v / bmax).collect());
    for k in 0..m {
        lp = lp.constraint(a.iter().map(|row| row[k]).collect(), Relation::Le, 1.0);
    }
    match lp.solve()? {
        LpOutcome::Optimal { x, .. } => Ok(x),
        other => Err(BlochError::LpFailure(format!("packing LP ended {other:?}"))),
    }
}

fn measure_from(w: Vec<f64>, p: Exponent) -> PietschMeasure {
    let mass: f64 = w.iter().sum();
    let m = w.len();
    let weights = if mass > 0.0 { w.iter().map(|v| v / mass).collect() } else { vec![1.0 / m as f64; m] };
    PietschMeasure { p, weights, constant: mass.powf(1.0 / p.value()), mass }
}

fn lp_data(
    f: &HoloExpr,
    points: &[DiscPoint],
    family: &TestFamily,
    p: Exponent,
    norm: Norm,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    if p.is_infinite() {
        return Err(BlochError::InvalidExponent(p.value()));
    }
    if points.is_empty() || family.is_empty() {
        return Err(BlochError::Invalid("Pietsch LP needs points and family members".into()));
    }
    let derivs = family.derivative_matrix(points)?;
    let a = abs_pow_matrix(&derivs, p.value());
    let mut b = Vec::with_capacity(points.len());
    for z in points {
        b.push(f.deriv(*z)?.norm(norm).powf(p.value()));
    }
    Ok((a, b))
}

/// The least `c` with `‖f'(z_j)‖ <= c (Σ_k μ_k |g_k'(z_j)|^p)^{1/p}` at every
/// point, and a measure `μ` attaining it.
pub fn pietsch_lp(
    f: &HoloExpr,
    points: &[DiscPoint],
    family: &TestFamily,
    p: Exponent,
    norm: Norm,
) -> Result<PietschMeasure> {
    let (a, b) = lp_data(f, points, family, p, norm)?;
    Ok(measure_from(solve_covering(&a, &b)?, p))
}

/// Primal and dual LP values for one instance and the dual witness sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    pub p: Exponent,
    /// `c^p = Σ w`.
    pub primal_value: f64,
    /// `max Σ u_j ‖f'(z_j)‖^p`.
    pub dual_value: f64,
    pub relative_gap: f64,
    pub constant: f64,
    /// `λ_j = u_j^{1/p}` at the solved points.
    pub witness: Vec<SampleEntry>,
    /// Summing ratio of `f` over the witness sample, restricted to the family.
    pub witness_ratio: f64,
    /// `|c - witness_ratio| / c`.
    pub ratio_gap: f64,
}

pub fn lp_duality_check(
    f: &HoloExpr,
    points: &[DiscPoint],
    family: &TestFamily,
    p: Exponent,
    norm: Norm,
) -> Result<DualityReport> {
    let (a, b) = lp_data(f, points, family, p, norm)?;
    let w = solve_covering(&a, &b)?;
    let u = solve_packing(&a, &b)?;
    let primal: f64 = w.iter().sum();
    let dual: f64 = u.iter().zip(&b).map(|(x, y)| x * y).sum();
    let pv = p.value();
    let witness: Vec<SampleEntry> = points
        .iter()
        .zip(&u)
        .map(|(&z, &uj)| SampleEntry { lambda: Complex64::new(uj.max(0.0).powf(1.0 / pv), 0.0), z })
        .collect();
    // Restricted summing ratio of the witness: numerator over the family maximum.
    let num: f64 = u.iter().zip(&b).map(|(x, y)| x.max(0.0) * y).sum::<f64>();
    let m = a.first().map_or(0, Vec::len);
    let den = (0..m)
        .map(|k| u.iter().zip(&a).map(|(x, row)| x.max(0.0) * row[k]).sum::<f64>())
        .fold(0.0, f64::max);
    let witness_ratio = if num == 0.0 { 0.0 } else { (num / den).powf(1.0 / pv) };
    let constant = primal.powf(1.0 / pv);
    let rel = |x: f64, y: f64| if x == 0.0 && y == 0.0 { 0.0 } else { (x - y).abs() / x.abs().max(y.abs()) };
    Ok(DualityReport {
        p,
        primal_value: primal,
        dual_value: dual,
        relative_gap: rel(primal, dual),
        constant,
        witness,
        witness_ratio,
        ratio_gap: rel(constant, witness_ratio),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMargin {
    pub z: DiscPoint,
    /// `‖f'(z)‖`.
    pub lhs: f64,
    /// `c (Σ μ_k |g_k'(z)|^p)^{1/p}`.
    pub rhs: f64,
    /// `rhs - lhs`; negative values are violations.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub points: Vec<PointMargin>,
    pub worst_margin: f64,
    pub worst_index: usize,
    pub violations: usize,
}

/// Evaluates the domination inequality of `measure` at arbitrary points.
pub fn domination_check(
    f: &HoloExpr,
    zs: &[DiscPoint],
    family: &TestFamily,
    measure: &PietschMeasure,
    norm: Norm,
) -> Result<DominationReport> {
    if measure.weights.len() != family.len() {
        return Err(BlochError::DimensionMismatch { expected: family.len(), found: measure.weights.len() });
    }
    let pv = measure.p.value();
    let derivs = family.derivative_matrix(zs)?;
    let mut points = Vec::with_capacity(zs.len());
    for (z, row) in zs.iter().zip(&derivs) {
        let lhs = f.deriv(*z)?.norm(norm);
        let abs: Vec<f64> = row.iter().map(|d| d.norm()).collect();
        let rhs = measure.constant * weighted_lp(&abs, &measure.weights, pv);
        points.push(PointMargin { z: *z, lhs, rhs, margin: rhs - lhs });
    }
    let (worst_index, worst_margin) = points
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bm), (i, pm)| if pm.margin < bm { (i, pm.margin) } else { (bi, bm) });
    let violations = points.iter().filter(|pm| pm.margin < 0.0).count();
    Ok(DominationReport { points, worst_margin, worst_index, violations })
}
