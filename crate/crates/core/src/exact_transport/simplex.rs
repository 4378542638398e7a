//! Dense two-phase tableau simplex with Bland's rule.

use crate::error::{ConstraintClass, Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Eq,
    Le,
}

/// Sparse linear constraint `Σ coeff * x_var (= or <=) rhs`.
#[derive(Debug, Clone)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub kind: RowKind,
    pub rhs: f64,
    pub class: ConstraintClass,
}

/// `optimize c·x` subject to rows and `x >= 0`.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub value: f64,
    pub x: Vec<f64>,
}

impl LinearProgram {
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        LinearProgram {
            sense,
            objective,
            rows: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn push(&mut self, coeffs: Vec<(usize, f64)>, kind: RowKind, rhs: f64, class: ConstraintClass) {
        self.rows.push(Row {
            coeffs,
            kind,
            rhs,
            class,
        });
    }

    fn validate(&self) -> Result<()> {
        let n = self.n_vars();
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::Numeric("non-finite objective coefficient".into()));
        }
        for r in &self.rows {
            if !r.rhs.is_finite() || r.coeffs.iter().any(|(j, a)| *j >= n || !a.is_finite()) {
                return Err(Error::Dimension(
                    "constraint references an unknown variable or is non-finite".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn solve(&self) -> Result<LpSolution> {
        self.validate()?;
        Tableau::build(self).solve(self)
    }
}

/// Row-major tableau. Columns: structural, slack, artificial, rhs.
struct Tableau {
    m: usize,
    width: usize,
    n_struct: usize,
    n_slack: usize,
    a: Vec<f64>,
    basis: Vec<usize>,
    /// Original row index of each tableau row.
    origin: Vec<usize>,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Tableau {
        let m = lp.rows.len();
        let n_struct = lp.n_vars();
        let n_slack = lp.rows.iter().filter(|r| r.kind == RowKind::Le).count();
        let width = n_struct + n_slack + m + 1;
        let mut a = vec![0.0; m * width];
        let mut slack = n_struct;
        for (i, r) in lp.rows.iter().enumerate() {
            let row = &mut a[i * width..(i + 1) * width];
            for &(j, v) in &r.coeffs {
                row[j] += v;
            }
            if r.kind == RowKind::Le {
                row[slack] = 1.0;
                slack += 1;
            }
            row[width - 1] = r.rhs;
            if r.rhs < 0.0 {
                for v in row.iter_mut() {
                    *v = -*v;
                }
            }
            row[n_struct + n_slack + i] = 1.0;
        }
        Tableau {
            m,
            width,
            n_struct,
            n_slack,
            a,
            basis: (0..m).map(|i| n_struct + n_slack + i).collect(),
            origin: (0..m).collect(),
        }
    }

    fn n_real(&self) -> usize {
        self.n_struct + self.n_slack
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.width + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.width - 1)
    }

    fn pivot(&mut self, r: usize, c: usize, cost: &mut [f64]) {
        let w = self.width;
        let p = self.a[r * w + c];
        for v in &mut self.a[r * w..(r + 1) * w] {
            *v /= p;
        }
        let prow: Vec<f64> = self.a[r * w..(r + 1) * w].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.a[i * w + c];
            if f != 0.0 {
                for (v, pv) in self.a[i * w..(i + 1) * w].iter_mut().zip(&prow) {
                    *v -= f * pv;
                }
                self.a[i * w + c] = 0.0;
            }
        }
        let f = cost[c];
        if f != 0.0 {
            for (v, pv) in cost.iter_mut().zip(&prow) {
                *v -= f * pv;
            }
            cost[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Minimize over columns `< allowed` using reduced-cost row `cost`
    /// (last entry is minus the objective value).
    fn optimize(&mut self, cost: &mut [f64], allowed: usize) -> Result<()> {
        loop {
            // Bland: lowest-index column with negative reduced cost
            let Some(c) = (0..allowed).find(|&j| cost[j] < -PIVOT_TOL) else {
                return Ok(());
            };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let a = self.at(i, c);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i) / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - 1e-12 || (ratio <= br + 1e-12 && self.basis[i] < self.basis[bi]) {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = best else {
                return Err(Error::Unbounded);
            };
            self.pivot(r, c, cost);
        }
    }

    fn remove_row(&mut self, r: usize) {
        let w = self.width;
        self.a.drain(r * w..(r + 1) * w);
        self.basis.remove(r);
        self.origin.remove(r);
        self.m -= 1;
    }

    fn solve(mut self, lp: &LinearProgram) -> Result<LpSolution> {
        let n_real = self.n_real();
        let w = self.width;

        // phase 1: minimize the sum of artificials
        let mut cost = vec![0.0; w];
        for j in n_real..w - 1 {
            cost[j] = 1.0;
        }
        for i in 0..self.m {
            for j in 0..w {
                cost[j] -= self.at(i, j);
            }
        }
        self.optimize(&mut cost, w - 1)?;
        let infeas = -cost[w - 1];
        let scale = 1.0 + lp.rows.iter().map(|r| r.rhs.abs()).fold(0.0, f64::max);
        if infeas > FEAS_TOL * scale {
            let class = (0..self.m)
                .filter(|&i| self.basis[i] >= n_real && self.rhs(i) > FEAS_TOL * scale)
                .map(|i| lp.rows[self.origin[i]].class)
                .next()
                .unwrap_or(ConstraintClass::Other);
            return Err(Error::Infeasible { class });
        }

        // drive remaining artificials out; drop redundant rows
        let mut i = 0;
        while i < self.m {
            if self.basis[i] >= n_real {
                match (0..n_real).find(|&j| self.at(i, j).abs() > PIVOT_TOL) {
                    Some(j) => {
                        self.pivot(i, j, &mut cost);
                        i += 1;
                    }
                    None => self.remove_row(i),
                }
            } else {
                i += 1;
            }
        }

        // phase 2
        let sign = match lp.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut cost = vec![0.0; w];
        for (j, c) in lp.objective.iter().enumerate() {
            cost[j] = sign * c;
        }
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for j in 0..w {
                    cost[j] -= cb * self.at(i, j);
                }
            }
        }
        self.optimize(&mut cost, n_real)?;

        let mut x = vec![0.0; self.n_struct];
        for i in 0..self.m {
            let b = self.basis[i];
            if b < self.n_struct {
                x[b] = self.rhs(i).max(0.0);
            }
        }
        let value = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpSolution { value, x })
    }
}
