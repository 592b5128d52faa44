//! Discrete factorization `T ∘ (g ↦ g'(z_j)) = f'(z_j)` through `L_p(μ)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PietschMeasure;
use crate::disc::DiscPoint;
use crate::error::{BlochError, Result};
use crate::expr::HoloExpr;
use crate::norms::TestFamily;
use crate::vector::Norm;

/// Largest residual accepted for the factorization identity.
pub const FACTOR_RESIDUAL_TOL: f64 = 1e-8;

const ASCENT_ITERS: usize = 200;
const ASCENT_RESTARTS: usize = 10;
const POWER_ITERS: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizationCertificate {
    pub points: Vec<DiscPoint>,
    pub measure: PietschMeasure,
    /// Members with positive weight, i.e. the coordinates `T` acts on.
    pub support: Vec<usize>,
    /// `d × m` matrix in family coordinates (zero columns off the support).
    #[serde(with = "matrix_serde")]
    pub operator_matrix: Vec<Vec<Complex64>>,
    /// `max_j ‖T v_j - f'(z_j)‖`.
    pub residual: f64,
    /// Norm of `T : span{v_j} ⊂ L_p(μ) → X`, estimated from below by ascent.
    pub operator_norm_estimate: f64,
    pub seed: u64,
}

mod matrix_serde {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &[Vec<Complex64>], s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = m.iter().map(|r| r.iter().map(|z| [z.re, z.im]).collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<Complex64>>, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
        Ok(rows.into_iter().map(|r| r.into_iter().map(|[a, b]| Complex64::new(a, b)).collect()).collect())
    }
}

/// Builds `T` by least squares in `μ^{1/p}`-weighted coordinates and
/// estimates its norm on the span of the `v_j = (g_k'(z_j))_k`.
pub fn factorize(
    f: &HoloExpr,
    points: &[DiscPoint],
    family: &TestFamily,
    measure: &PietschMeasure,
    norm: Norm,
    seed: u64,
) -> Result<FactorizationCertificate> {
    let p = measure.p;
    if p.is_infinite() {
        return Err(BlochError::InvalidExponent(p.value()));
    }
    if measure.weights.len() != family.len() {
        return Err(BlochError::DimensionMismatch { expected: family.len(), found: measure.weights.len() });
    }
    let pv = p.value();
    let d = f.dim()?;
    let support: Vec<usize> = (0..family.len()).filter(|&k| measure.weights[k] > 0.0).collect();
    let scales: Vec<f64> = support.iter().map(|&k| measure.weights[k].powf(1.0 / pv)).collect();
    let derivs = family.derivative_matrix(points)?;
    let n = points.len();
    let m = support.len();

    // Columns are the weighted v_j; F holds the targets f'(z_j).
    let v = DMatrix::from_fn(m, n, |i, j| derivs[j][support[i]] * scales[i]);
    let mut fm = DMatrix::zeros(d, n);
    for (j, z) in points.iter().enumerate() {
        let fd = f.deriv(*z)?;
        for r in 0..d {
            fm[(r, j)] = fd[r];
        }
    }

    let (t_weighted, basis) = if m == 0 {
        (DMatrix::zeros(d, 0), DMatrix::zeros(0, 0))
    } else {
        let svd = v.clone().svd(true, true);
        let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let eps = smax * 1e-12 * (m.max(n) as f64);
        let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
        let u = svd.u.as_ref().expect("requested U");
        let cols: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > eps).collect();
        let basis = DMatrix::from_fn(m, rank, |i, j| u[(i, cols[j])]);
        let pinv = svd.pseudo_inverse(eps).map_err(|e| BlochError::LpFailure(e.to_string()))?;
        (&fm * pinv, basis)
    };

    // Residual in original coordinates: T v_j = T̃ ṽ_j.
    let image = &t_weighted * &v;
    let mut residual: f64 = 0.0;
    for j in 0..n {
        let diff: Vec<Complex64> = (0..d).map(|r| image[(r, j)] - fm[(r, j)]).collect();
        residual = residual.max(norm.of(&diff));
    }
    if !(residual <= FACTOR_RESIDUAL_TOL) {
        return Err(BlochError::RankDeficiency { residual });
    }

    let estimate = if basis.ncols() == 0 {
        0.0
    } else {
        operator_norm_on_span(&t_weighted, &basis, pv, norm, seed)
    };

    let mut operator_matrix = vec![vec![Complex64::new(0.0, 0.0); family.len()]; d];
    for (i, &k) in support.iter().enumerate() {
        for (r, row) in operator_matrix.iter_mut().enumerate() {
            row[k] = t_weighted[(r, i)] * scales[i];
        }
    }

    Ok(FactorizationCertificate {
        points: points.to_vec(),
        measure: measure.clone(),
        support,
        operator_matrix,
        residual,
        operator_norm_estimate: estimate,
        seed,
    })
}

fn lp_norm(u: &DVector<Complex64>, p: f64) -> f64 {
    if p == 2.0 {
        u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    } else {
        u.iter().map(|z| z.norm().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

fn ratio(t: &DMatrix<Complex64>, u: &DVector<Complex64>, p: f64, norm: Norm) -> f64 {
    let den = lp_norm(u, p);
    if den == 0.0 {
        return 0.0;
    }
    let w = t * u;
    norm.of(w.as_slice()) / den
}

/// Ascent direction of `log ‖T u‖_X - log ‖u‖_p` (twice the Wirtinger
/// derivative in `ū`, which is the real gradient).
fn ascent_direction(t: &DMatrix<Complex64>, u: &DVector<Complex64>, p: f64, norm: Norm) -> DVector<Complex64> {
    let w = t * u;
    let zero = Complex64::new(0.0, 0.0);
    let top: DVector<Complex64> = match norm {
        Norm::Euclidean => {
            let n2: f64 = w.iter().map(|z| z.norm_sqr()).sum();
            t.adjoint() * &w / Complex64::new(n2, 0.0)
        }
        Norm::Sup => {
            let (k, _) = w.iter().enumerate().fold((0, -1.0), |(bk, bm), (k, z)| if z.norm() > bm { (k, z.norm()) } else { (bk, bm) });
            let wk = w[k];
            let row = t.row(k).adjoint();
            row * (wk / wk.norm_sqr())
        }
        Norm::L1 => {
            let n1: f64 = w.iter().map(|z| z.norm()).sum();
            let phase = w.map(|z| if z.norm() > 0.0 { z / z.norm() } else { zero });
            t.adjoint() * phase / Complex64::new(n1, 0.0)
        }
    };
    let np = u.iter().map(|z| z.norm().powf(p)).sum::<f64>();
    let bottom = u.map(|z| if z.norm() > 0.0 { z * z.norm().powf(p - 2.0) / np } else { zero });
    top - bottom
}

/// `sup ‖T u‖_X / ‖u‖_p` over `u` in the column span of `basis`.
fn operator_norm_on_span(t: &DMatrix<Complex64>, basis: &DMatrix<Complex64>, p: f64, norm: Norm, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = basis.ncols();
    let mut best: f64 = 0.0;
    if p == 2.0 && norm == Norm::Euclidean {
        best = best.max(power_iteration(t, basis, &mut rng));
    }
    for _ in 0..ASCENT_RESTARTS {
        let mut y = DVector::from_fn(r, |_, _| Complex64::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0));
        let mut u = basis * &y;
        let mut val = ratio(t, &u, p, norm);
        let mut step = 0.5;
        for _ in 0..ASCENT_ITERS {
            let g = basis.adjoint() * ascent_direction(t, &u, p, norm);
            let scale = lp_norm(&u, p);
            let mut accepted = false;
            while step > 1e-14 {
                let y2 = &y + &g * Complex64::new(step * scale, 0.0);
                let u2 = basis * &y2;
                let v2 = ratio(t, &u2, p, norm);
                if v2 > val {
                    y = y2;
                    u = u2;
                    val = v2;
                    step *= 1.5;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        best = best.max(val);
    }
    best
}

/// Largest singular value of `T` on the span, by power iteration on `T^*T`.
fn power_iteration(t: &DMatrix<Complex64>, basis: &DMatrix<Complex64>, rng: &mut ChaCha8Rng) -> f64 {
    let tb = t * basis;
    let gram = tb.adjoint() * &tb;
    let r = basis.ncols();
    let mut x = DVector::from_fn(r, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let mut lambda: f64 = 0.0;
    for _ in 0..POWER_ITERS {
        let y = &gram * &x;
        let ny = y.norm();
        if ny == 0.0 {
            return 0.0;
        }
        x = y / Complex64::new(ny, 0.0);
        let next = (x.adjoint() * &gram * &x)[(0, 0)].re;
        if (next - lambda).abs() <= 1e-16 * next.abs() {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda.max(0.0).sqrt()
}
