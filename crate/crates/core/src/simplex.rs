//! Dense two-phase tableau simplex with Bland's rule.
//!
//! Meant for the tiny programs of the Pietsch machinery (tens of rows and
//! columns). Pivoting is fully deterministic.

use crate::error::{BlochError, Result};

/// Feasibility and optimality tolerance.
pub const LP_TOL: f64 = 1e-9;

const PIVOT_TOL: f64 = 1e-12;
const MAX_PIVOTS: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

/// `maximize c·x` subject to `a_i·x (rel_i) b_i`, `x >= 0`.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<(Vec<f64>, Relation, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64, pivots: usize },
    Infeasible,
    Unbounded,
}

impl LinearProgram {
    pub fn maximize(objective: Vec<f64>) -> Self {
        LinearProgram { objective, rows: Vec::new() }
    }

    pub fn constraint(mut self, row: Vec<f64>, rel: Relation, rhs: f64) -> Self {
        self.rows.push((row, rel, rhs));
        self
    }

    pub fn solve(&self) -> Result<LpOutcome> {
        let n = self.objective.len();
        for (row, _, b) in &self.rows {
            if row.len() != n {
                return Err(BlochError::DimensionMismatch { expected: n, found: row.len() });
            }
            if !b.is_finite() || row.iter().any(|a| !a.is_finite()) {
                return Err(BlochError::LpFailure("non-finite LP data".into()));
            }
        }
        Tableau::build(self).run()
    }
}

struct Tableau {
    /// Rows `0..m` are constraints; column `width - 1` is the right-hand side.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    n_orig: usize,
    first_artificial: usize,
    width: usize,
    objective: Vec<f64>,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Tableau {
        let n = lp.objective.len();
        let m = lp.rows.len();
        // Normalize rows to a nonnegative right-hand side and unit scale.
        let mut rows: Vec<(Vec<f64>, Relation, f64)> = lp
            .rows
            .iter()
            .map(|(a, rel, b)| {
                let scale = a.iter().fold(b.abs(), |s, v| s.max(v.abs()));
                let scale = if scale > 0.0 { scale } else { 1.0 };
                let (mut a, mut rel, mut b) = (a.iter().map(|v| v / scale).collect::<Vec<_>>(), *rel, b / scale);
                if b < 0.0 {
                    a.iter_mut().for_each(|v| *v = -*v);
                    b = -b;
                    rel = match rel {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                }
                (a, rel, b)
            })
            .collect();
        let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
        let first_artificial = n + n_slack;
        let width = first_artificial + n_art + 1;
        let mut t = vec![vec![0.0; width]; m];
        let mut basis = vec![0; m];
        let (mut s, mut a) = (n, first_artificial);
        for (i, (row, rel, b)) in rows.iter_mut().enumerate() {
            t[i][..n].copy_from_slice(row);
            t[i][width - 1] = *b;
            match rel {
                Relation::Le => {
                    t[i][s] = 1.0;
                    basis[i] = s;
                    s += 1;
                }
                Relation::Ge => {
                    t[i][s] = -1.0;
                    s += 1;
                    t[i][a] = 1.0;
                    basis[i] = a;
                    a += 1;
                }
                Relation::Eq => {
                    t[i][a] = 1.0;
                    basis[i] = a;
                    a += 1;
                }
            }
        }
        Tableau { t, basis, n_orig: n, first_artificial, width, objective: lp.objective.clone() }
    }

    fn rhs(&self, i: usize) -> f64 {
        self.t[i][self.width - 1]
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let w = self.width;
        let p = self.t[r][col];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        let prow = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[col];
            if f != 0.0 {
                for j in 0..w {
                    row[j] -= f * prow[j];
                }
                row[col] = 0.0;
            }
        }
        self.basis[r] = col;
    }

    /// Maximizes `cost` over columns `< limit` from the current basis.
    /// Returns `false` when unbounded.
    fn optimize(&mut self, cost: &[f64], limit: usize, pivots: &mut usize) -> Result<bool> {
        loop {
            if *pivots >= MAX_PIVOTS {
                return Err(BlochError::LpFailure("pivot limit reached".into()));
            }
            // Reduced cost of column j: c_j - c_B · column_j.
            let entering = (0..limit).find(|&j| {
                if self.basis.contains(&j) {
                    return false;
                }
                let z: f64 = self.basis.iter().enumerate().map(|(i, &b)| cost[b] * self.t[i][j]).sum();
                cost[j] - z > LP_TOL
            });
            let Some(col) = entering else { return Ok(true) };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.t.len() {
                let a = self.t[i][col];
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - PIVOT_TOL || (ratio <= lr + PIVOT_TOL && self.basis[i] < self.basis[li]) {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else { return Ok(false) };
            self.pivot(r, col);
            *pivots += 1;
        }
    }

    fn run(mut self) -> Result<LpOutcome> {
        let mut pivots = 0;
        let n_art = self.width - 1 - self.first_artificial;
        if n_art > 0 {
            let mut cost = vec![0.0; self.width - 1];
            for c in cost.iter_mut().skip(self.first_artificial) {
                *c = -1.0;
            }
            self.optimize(&cost, self.width - 1, &mut pivots)?;
            let infeasibility: f64 = (0..self.t.len())
                .filter(|&i| self.basis[i] >= self.first_artificial)
                .map(|i| self.rhs(i))
                .sum();
            if infeasibility > LP_TOL {
                return Ok(LpOutcome::Infeasible);
            }
            // Drive zero-level artificials out of the basis; drop redundant rows.
            let mut i = 0;
            while i < self.t.len() {
                if self.basis[i] >= self.first_artificial {
                    match (0..self.first_artificial).find(|&j| self.t[i][j].abs() > PIVOT_TOL) {
                        Some(j) => {
                            self.pivot(i, j);
                            pivots += 1;
                        }
                        None => {
                            self.t.remove(i);
                            self.basis.remove(i);
                            continue;
                        }
                    }
                }
                i += 1;
            }
        }
        let mut cost = vec![0.0; self.width - 1];
        cost[..self.n_orig].copy_from_slice(&self.objective);
        if !self.optimize(&cost, self.first_artificial, &mut pivots)? {
            return Ok(LpOutcome::Unbounded);
        }
        let mut x = vec![0.0; self.n_orig];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.n_orig {
                x[b] = self.rhs(i).max(0.0);
            }
        }
        let value = x.iter().zip(&self.objective).map(|(a, c)| a * c).sum();
        Ok(LpOutcome::Optimal { x, value, pivots })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn optimal(lp: &LinearProgram) -> (Vec<f64>, f64) {
        match lp.solve().unwrap() {
            LpOutcome::Optimal { x, value, .. } => (x, value),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn textbook_max() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let lp = LinearProgram::maximize(vec![3.0, 5.0])
            .constraint(vec![1.0, 0.0], Relation::Le, 4.0)
            .constraint(vec![0.0, 2.0], Relation::Le, 12.0)
            .constraint(vec![3.0, 2.0], Relation::Le, 18.0);
        let (x, v) = optimal(&lp);
        assert!((v - 36.0).abs() < 1e-12);
        assert!((x[0] - 2.0).abs() < 1e-12 && (x[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn covering_min_via_ge_rows() {
        // min w1 + w2 with w1 + 0.64 w2 >= 1, w1 + 1.5625 w2 >= 1 -> (1, 0)
        let lp = LinearProgram::maximize(vec![-1.0, -1.0])
            .constraint(vec![1.0, 0.64], Relation::Ge, 1.0)
            .constraint(vec![1.0, 1.5625], Relation::Ge, 1.0);
        let (x, v) = optimal(&lp);
        assert!((v + 1.0).abs() < 1e-12);
        assert!((x[0] - 1.0).abs() < 1e-12 && x[1].abs() < 1e-12);
    }

    #[test]
    fn equality_and_infeasible_and_unbounded() {
        let lp = LinearProgram::maximize(vec![1.0, 2.0])
            .constraint(vec![1.0, 1.0], Relation::Eq, 1.0)
            .constraint(vec![1.0, 1.0], Relation::Eq, 1.0);
        let (x, v) = optimal(&lp);
        assert!((v - 2.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);

        let lp = LinearProgram::maximize(vec![1.0])
            .constraint(vec![1.0], Relation::Le, 1.0)
            .constraint(vec![1.0], Relation::Ge, 2.0);
        assert_eq!(lp.solve().unwrap(), LpOutcome::Infeasible);

        let lp = LinearProgram::maximize(vec![1.0, 0.0]).constraint(vec![0.0, 1.0], Relation::Le, 1.0);
        assert_eq!(lp.solve().unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's example cycles under the textbook largest-coefficient rule.
        let lp = LinearProgram::maximize(vec![0.75, -150.0, 0.02, -6.0])
            .constraint(vec![0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0)
            .constraint(vec![0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0)
            .constraint(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0);
        let (_, v) = optimal(&lp);
        assert!((v - 0.05).abs() < 1e-12);
    }

    #[test]
    fn negative_rhs_is_flipped() {
        // -x <= -2 means x >= 2; min x.
        let lp = LinearProgram::maximize(vec![-1.0]).constraint(vec![-1.0], Relation::Le, -2.0);
        let (x, _) = optimal(&lp);
        assert!((x[0] - 2.0).abs() < 1e-12);
    }
}
