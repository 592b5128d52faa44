//! Maurey extrapolation: from a q-dominating measure to an `L_1` domination
//! through a geometric mixture of iterated Pietsch measures.

use serde::{Deserialize, Serialize};

use super::abs_pow_matrix;
use super::pietsch::{pietsch_lp, solve_covering, weighted_lp};
use crate::disc::DiscPoint;
use crate::error::{BlochError, Result};
use crate::expr::HoloExpr;
use crate::norms::TestFamily;
use crate::vector::{Exponent, Norm};

/// `θ ∈ (0, 1)` with `p = θ·1 + (1 - θ) q`.
pub fn maurey_theta(p: f64, q: f64) -> f64 {
    (q - p) / (q - 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaureyStage {
    /// Stage index `n` of the measure `μ_n`.
    pub index: usize,
    pub weights: Vec<f64>,
    /// Constant of `‖v‖_{L_q(μ_{n-1})} <= c_n ‖v‖_{L_p(μ_n)}` (for `n = 0`,
    /// the q-domination constant of `f` itself).
    pub constant: f64,
    /// Worst relative margin of `‖v‖_p^p <= ‖v‖_1^θ ‖v‖_q^{(1-θ)q}` over the points.
    pub interpolation_margin: f64,
    /// Worst relative margin of the stage domination on the points.
    pub domination_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaureyReport {
    pub p: f64,
    pub q: f64,
    pub depth: usize,
    pub theta: f64,
    /// `|θ + (1 - θ) q - p|`.
    pub theta_residual: f64,
    pub stages: Vec<MaureyStage>,
    /// Largest stage constant `c_n`, `n >= 1`.
    pub c_max: f64,
    /// `2 (2 c_max)^{1/θ}`.
    pub constant_c: f64,
    /// `2 (2 c_max)^{p/θ}`, the constant the p-th-power Hölder step supports.
    pub constant_c_power_form: f64,
    /// Weights of the renormalized mixture `λ ∝ Σ_{n<=depth} 2^{-(n+1)} μ_n`.
    pub mixture: Vec<f64>,
    /// Mass `2^{-(depth+1)}` dropped by truncating the mixture.
    pub truncation_mass: f64,
    /// Worst of `C ‖v(z)‖_{L_1(λ)} - ‖v(z)‖_{L_q(μ_0)}`, relative to the right side.
    pub final_margin: f64,
    pub final_margin_power_form: f64,
    pub final_worst_point: usize,
}

fn lr_norm(v: &[f64], mu: &[f64], r: f64) -> f64 {
    weighted_lp(v, mu, r)
}

/// Runs the extrapolation pipeline for `1 < p < q < ∞` on a fixed point set
/// and family; all stages reuse the same data.
pub fn maurey_extrapolate(
    f: &HoloExpr,
    points: &[DiscPoint],
    family: &TestFamily,
    p: f64,
    q: f64,
    depth: usize,
    norm: Norm,
) -> Result<MaureyReport> {
    if !(1.0 < p && p < q && q.is_finite()) {
        return Err(BlochError::Invalid(format!("Maurey extrapolation needs 1 < p < q < ∞, got p={p}, q={q}")));
    }
    if depth == 0 {
        return Err(BlochError::Invalid("depth must be at least 1".into()));
    }
    let theta = maurey_theta(p, q);
    let theta_residual = (theta + (1.0 - theta) * q - p).abs();
    let derivs = family.derivative_matrix(points)?;
    let absv: Vec<Vec<f64>> = derivs.iter().map(|row| row.iter().map(|d| d.norm()).collect()).collect();
    let a_p = abs_pow_matrix(&derivs, p);

    let mu0 = pietsch_lp(f, points, family, Exponent::new(q)?, norm)?;
    let mut measures = vec![mu0.weights.clone()];
    let mut constants = vec![mu0.constant];
    for n in 0..depth {
        let prev = &measures[n];
        let b: Vec<f64> = absv.iter().map(|v| lr_norm(v, prev, q).powf(p)).collect();
        let w = solve_covering(&a_p, &b)?;
        let mass: f64 = w.iter().sum();
        let weights = if mass > 0.0 { w.iter().map(|x| x / mass).collect() } else { prev.clone() };
        constants.push(mass.powf(1.0 / p));
        measures.push(weights);
    }

    let rel = |slack: f64, scale: f64| if scale > 0.0 { slack / scale } else { slack };
    let mut stages = Vec::with_capacity(depth + 1);
    for (n, mu) in measures.iter().enumerate() {
        let mut interp = f64::INFINITY;
        let mut dom = f64::INFINITY;
        for v in &absv {
            let l1 = lr_norm(v, mu, 1.0);
            let lp = lr_norm(v, mu, p);
            let lq = lr_norm(v, mu, q);
            let rhs = l1.powf(theta) * lq.powf((1.0 - theta) * q);
            interp = interp.min(rel(rhs - lp.powf(p), rhs));
            if n > 0 {
                let lhs = lr_norm(v, &measures[n - 1], q);
                let rhs = constants[n] * lp;
                dom = dom.min(rel(rhs - lhs, rhs));
            }
        }
        if n == 0 {
            let rep = super::domination_check(f, points, family, &mu0, norm)?;
            dom = rep
                .points
                .iter()
                .map(|pm| rel(pm.margin, pm.rhs))
                .fold(f64::INFINITY, f64::min);
        }
        stages.push(MaureyStage {
            index: n,
            weights: mu.clone(),
            constant: constants[n],
            interpolation_margin: interp,
            domination_margin: dom,
        });
    }

    let c_max = constants[1..].iter().cloned().fold(0.0, f64::max);
    let constant_c = 2.0 * (2.0 * c_max).powf(1.0 / theta);
    let constant_c_power_form = 2.0 * (2.0 * c_max).powf(p / theta);

    let m = family.len();
    let mut mixture = vec![0.0; m];
    let mut total = 0.0;
    for (n, mu) in measures.iter().enumerate() {
        let c = 0.5f64.powi(n as i32 + 1);
        total += c;
        for (x, w) in mixture.iter_mut().zip(mu) {
            *x += c * w;
        }
    }
    mixture.iter_mut().for_each(|x| *x /= total);

    let mut final_margin = f64::INFINITY;
    let mut final_margin_power_form = f64::INFINITY;
    let mut final_worst_point = 0;
    for (j, v) in absv.iter().enumerate() {
        let lhs = lr_norm(v, &measures[0], q);
        let l1 = lr_norm(v, &mixture, 1.0);
        let margin = rel(constant_c * l1 - lhs, constant_c * l1);
        if margin < final_margin {
            final_margin = margin;
            final_worst_point = j;
        }
        final_margin_power_form = final_margin_power_form.min(rel(constant_c_power_form * l1 - lhs, constant_c_power_form * l1));
    }

    Ok(MaureyReport {
        p,
        q,
        depth,
        theta,
        theta_residual,
        stages,
        c_max,
        constant_c,
        constant_c_power_form,
        mixture,
        truncation_mass: 0.5f64.powi(depth as i32 + 1),
        final_margin,
        final_margin_power_form,
        final_worst_point,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::default_family;

    #[test]
    fn theta_examples() {
        assert!((maurey_theta(2.0, 4.0) - 2.0 / 3.0).abs() < 1e-15);
        let c = 2.0 * (2.0f64).powf(1.0 / (2.0 / 3.0));
        assert!((c - 5.656854249492381).abs() < 1e-12);
    }

    #[test]
    fn pipeline_runs_and_interpolation_holds() {
        let pts = crate::disc::sample_disc(crate::disc::SampleScheme::PseudoHyperbolic, 6, 2, 0.9);
        let fam = default_family(&pts, 2);
        let f = HoloExpr::monomial(1);
        let r = maurey_extrapolate(&f, &pts, &fam, 2.0, 4.0, 6, Norm::Euclidean).unwrap();
        assert!(r.theta_residual < 1e-12);
        assert_eq!(r.stages.len(), 7);
        assert!(r.stages.iter().all(|s| s.interpolation_margin >= -1e-12));
        assert!((r.mixture.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((r.truncation_mass - 1.0 / 128.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_exponents() {
        let fam = default_family(&[], 0);
        assert!(maurey_extrapolate(&HoloExpr::monomial(1), &[DiscPoint::origin()], &fam, 4.0, 2.0, 3, Norm::Euclidean).is_err());
    }
}
