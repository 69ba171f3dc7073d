//! Dense two-phase tableau simplex with Bland's rule.
//!
//! Solves `max c'x` subject to `Ax <= d` and `0 <= x <= ub`. Finite upper
//! bounds become explicit rows so their multipliers come back alongside the
//! row duals.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexSolution {
    pub x: Vec<f64>,
    pub value: f64,
    /// Multiplier of each row of `A`.
    pub row_duals: Vec<f64>,
    /// Multiplier of each bound `x_j <= ub_j` (0 when the bound is infinite).
    pub bound_duals: Vec<f64>,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    obj: Vec<f64>,
    basis: Vec<usize>,
    width: usize,
    blocked: Vec<bool>,
}

impl Tableau {
    fn rhs(&self) -> usize {
        self.width
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col];
        self.rows[r].iter_mut().for_each(|v| *v /= p);
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[col];
            if f != 0.0 {
                row.iter_mut()
                    .zip(&pivot_row)
                    .for_each(|(v, p)| *v -= f * p);
                row[col] = 0.0;
            }
        }
        let f = self.obj[col];
        if f != 0.0 {
            self.obj
                .iter_mut()
                .zip(&pivot_row)
                .for_each(|(v, p)| *v -= f * p);
            self.obj[col] = 0.0;
        }
        self.basis[r] = col;
    }

    /// Installs `max cost'z` as the objective row, priced out against the basis.
    fn set_objective(&mut self, cost: &[f64]) {
        self.obj = vec![0.0; self.width + 1];
        for (j, c) in cost.iter().enumerate() {
            self.obj[j] = -c;
        }
        for r in 0..self.rows.len() {
            let b = self.basis[r];
            let f = self.obj[b];
            if f != 0.0 {
                let row = &self.rows[r];
                self.obj.iter_mut().zip(row).for_each(|(v, p)| *v -= f * p);
                self.obj[b] = 0.0;
            }
        }
    }

    fn optimize(&mut self) -> Result<()> {
        loop {
            let entering = (0..self.width).find(|&j| !self.blocked[j] && self.obj[j] < -PIVOT_TOL);
            let Some(col) = entering else {
                return Ok(());
            };
            let rhs = self.rhs();
            let mut leave: Option<(usize, f64)> = None;
            for (r, row) in self.rows.iter().enumerate() {
                let a = row[col];
                if a > PIVOT_TOL {
                    let ratio = row[rhs] / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((br, best)) => {
                            if ratio < best - 1e-12
                                || (ratio <= best + 1e-12 && self.basis[r] < self.basis[br])
                            {
                                Some((r, ratio))
                            } else {
                                Some((br, best))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return Err(Error::Unbounded),
                Some((r, _)) => self.pivot(r, col),
            }
        }
    }
}

/// Solves `max c'x` s.t. `a x <= d`, `0 <= x <= ub`. `ub` entries may be `+inf`.
pub fn solve_simplex(c: &[f64], a: &[Vec<f64>], d: &[f64], ub: &[f64]) -> Result<SimplexSolution> {
    let n = c.len();
    if ub.len() != n || a.len() != d.len() || a.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidParameter("inconsistent LP dimensions".into()));
    }
    let finite = |v: &f64| v.is_finite();
    if !c.iter().all(finite) || !d.iter().all(finite) || !a.iter().flatten().all(finite) {
        return Err(Error::InvalidParameter("LP data must be finite".into()));
    }
    if ub.iter().any(|u| u.is_nan() || *u < 0.0) {
        return Err(Error::InvalidParameter(
            "upper bounds must be nonnegative".into(),
        ));
    }

    // Stack the rows: original rows first, then finite upper bounds.
    let mut rows_a: Vec<Vec<f64>> = a.to_vec();
    let mut rows_d: Vec<f64> = d.to_vec();
    let mut bound_row = vec![None; n];
    for (j, &u) in ub.iter().enumerate() {
        if u.is_finite() {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            bound_row[j] = Some(rows_a.len());
            rows_a.push(e);
            rows_d.push(u);
        }
    }
    let m = rows_a.len();
    let negative: Vec<bool> = rows_d.iter().map(|&v| v < 0.0).collect();
    let n_art = negative.iter().filter(|&&b| b).count();
    // columns: x (n), slack/surplus (m), artificials (n_art)
    let width = n + m + n_art;
    let mut rows = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut art = n + m;
    for i in 0..m {
        let mut row = vec![0.0; width + 1];
        if negative[i] {
            for j in 0..n {
                row[j] = -rows_a[i][j];
            }
            row[n + i] = -1.0;
            row[art] = 1.0;
            row[width] = -rows_d[i];
            basis.push(art);
            art += 1;
        } else {
            row[..n].copy_from_slice(&rows_a[i]);
            row[n + i] = 1.0;
            row[width] = rows_d[i];
            basis.push(n + i);
        }
        rows.push(row);
    }
    let mut t = Tableau {
        rows,
        obj: Vec::new(),
        basis,
        width,
        blocked: vec![false; width],
    };

    if n_art > 0 {
        let mut cost = vec![0.0; width];
        cost[n + m..].iter_mut().for_each(|v| *v = -1.0);
        t.set_objective(&cost);
        t.optimize()?;
        let scale = 1.0 + rows_d.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if t.obj[width] < -PIVOT_TOL * scale {
            return Err(Error::Infeasible);
        }
        // drive zero-valued artificials out of the basis where possible
        for r in 0..m {
            if t.basis[r] >= n + m {
                if let Some(col) = (0..n + m).find(|&j| t.rows[r][j].abs() > PIVOT_TOL) {
                    t.pivot(r, col);
                }
            }
        }
        for j in n + m..width {
            t.blocked[j] = true;
        }
    }

    let mut cost = vec![0.0; width];
    cost[..n].copy_from_slice(c);
    t.set_objective(&cost);
    t.optimize()?;

    let mut x = vec![0.0; n];
    for (r, &b) in t.basis.iter().enumerate() {
        if b < n {
            x[b] = t.rows[r][width].max(0.0);
        }
    }
    // roundoff can leave -1e-17 where the price is zero
    let duals: Vec<f64> = (0..m).map(|i| t.obj[n + i].max(0.0)).collect();
    let row_duals = duals[..a.len()].to_vec();
    let bound_duals = bound_row
        .iter()
        .map(|r| r.map_or(0.0, |r| duals[r]))
        .collect();
    Ok(SimplexSolution {
        value: t.obj[width],
        x,
        row_duals,
        bound_duals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn one_variable() {
        let s = solve_simplex(&[1.0], &[vec![1.0]], &[1.0], &[f64::INFINITY]).unwrap();
        assert_relative_eq!(s.value, 1.0);
        assert_relative_eq!(s.x[0], 1.0);
        assert_relative_eq!(s.row_duals[0], 1.0);
    }

    #[test]
    fn empty_polytope() {
        let e = solve_simplex(&[1.0], &[vec![1.0]], &[-1.0], &[f64::INFINITY]).unwrap_err();
        assert!(matches!(e, Error::Infeasible));
    }

    #[test]
    fn unbounded_ray() {
        let e = solve_simplex(&[1.0, 0.0], &[vec![-1.0, 1.0]], &[1.0], &[f64::INFINITY; 2])
            .unwrap_err();
        assert!(matches!(e, Error::Unbounded));
    }

    #[test]
    fn textbook_instance() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let a = vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]];
        let s = solve_simplex(&[3.0, 5.0], &a, &[4.0, 12.0, 18.0], &[f64::INFINITY; 2]).unwrap();
        assert_relative_eq!(s.value, 36.0, epsilon = 1e-9);
        assert_relative_eq!(s.x[0], 2.0, epsilon = 1e-9);
        assert_relative_eq!(s.x[1], 6.0, epsilon = 1e-9);
        assert_relative_eq!(s.row_duals[0], 0.0, epsilon = 1e-9);
        assert_relative_eq!(s.row_duals[1], 1.5, epsilon = 1e-9);
        assert_relative_eq!(s.row_duals[2], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn negative_rhs_row_dual_sign() {
        // min x s.t. x >= 2  <=>  max -x s.t. -x <= -2; dual of that row is 1
        let s = solve_simplex(&[-1.0], &[vec![-1.0]], &[-2.0], &[f64::INFINITY]).unwrap();
        assert_relative_eq!(s.value, -2.0, epsilon = 1e-12);
        assert_relative_eq!(s.row_duals[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn upper_bound_duals() {
        let s = solve_simplex(&[2.0, 1.0], &[vec![1.0, 1.0]], &[3.0], &[1.0, 5.0]).unwrap();
        assert_relative_eq!(s.value, 4.0, epsilon = 1e-12);
        assert_relative_eq!(s.row_duals[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(s.bound_duals[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(s.bound_duals[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's example cycles under the largest-coefficient rule.
        let c = [0.75, -150.0, 0.02, -6.0];
        let a = vec![
            vec![0.25, -60.0, -0.04, 9.0],
            vec![0.5, -90.0, -0.02, 3.0],
            vec![0.0, 0.0, 1.0, 0.0],
        ];
        let s = solve_simplex(&c, &a, &[0.0, 0.0, 1.0], &[f64::INFINITY; 4]).unwrap();
        assert_relative_eq!(s.value, 0.05, epsilon = 1e-9);
    }
}
