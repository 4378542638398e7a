//! Entropic transport in the log domain, used as the inner solver of the
//! structural dual.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{CostSpec, Coupling, DiscreteMeasure, ObjectiveSpec, PathBatch};

/// Entropic weight as a function of the multiplier `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TauRule {
    /// The regularizer itself, independent of `λ`.
    Fixed { reg: f64 },
    /// `λτ = slope * λ + floor`.
    Coupled { slope: f64, floor: f64 },
}

impl TauRule {
    pub fn stability() -> Self {
        TauRule::Coupled {
            slope: 0.01,
            floor: 1e-5,
        }
    }

    /// Effective regularizer multiplying the entropy.
    pub fn reg(&self, lambda: f64) -> f64 {
        match *self {
            TauRule::Fixed { reg } => reg,
            TauRule::Coupled { slope, floor } => slope * lambda.max(0.0) + floor,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            TauRule::Fixed { reg } => reg > 0.0 && reg.is_finite(),
            TauRule::Coupled { slope, floor } => slope >= 0.0 && floor > 0.0 && slope.is_finite() && floor.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter(format!(
                "regularizer rule {self:?} is not strictly positive"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SinkhornConfig {
    pub tau: TauRule,
    pub max_iter: usize,
    /// Bound on the L1 marginal residual (twice the total variation).
    pub tol: f64,
    /// Residual still accepted, after rounding, once `max_iter` is spent.
    pub fallback_tol: f64,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        SinkhornConfig {
            tau: TauRule::stability(),
            max_iter: 10_000,
            tol: 1e-8,
            fallback_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SinkhornResult {
    pub plan: Coupling,
    pub iterations: usize,
    /// L1 row-marginal residual of the last scaling iterate, before the
    /// final rounding onto the transportation polytope.
    pub marginal_err: f64,
    pub row_potential: Vec<f64>,
    pub col_potential: Vec<f64>,
}

/// Row-major `-f(y_j) + λ c(x_i, y_j) - γ(x_i, y_j)`.
pub fn modified_cost_matrix(
    f: &ObjectiveSpec,
    lambda: f64,
    gamma: &dyn Fn(&[f64], &[f64]) -> f64,
    cost: &CostSpec,
    mu_support: &PathBatch,
    nu_support: &PathBatch,
) -> Result<Vec<f64>> {
    if lambda < 0.0 {
        return Err(Error::Parameter(format!("multiplier must be >= 0, got {lambda}")));
    }
    let shape = mu_support.shape();
    if nu_support.shape() != shape {
        return Err(Error::Dimension("supports have different path shapes".into()));
    }
    let fy: Vec<f64> = nu_support.paths().map(|y| f.eval(shape, y)).collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(mu_support.len() * nu_support.len());
    for x in mu_support.paths() {
        for (y, fv) in nu_support.paths().zip(&fy) {
            let g = gamma(x, y);
            let v = -fv + lambda * cost.eval(shape, x, y)? - g;
            if !v.is_finite() {
                return Err(Error::Numeric(format!("modified cost entry {v} (test function {g})")));
            }
            out.push(v);
        }
    }
    Ok(out)
}

fn log_sum_exp(it: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = it.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + it.map(|v| (v - m).exp()).sum::<f64>().ln()
}

struct Solver<'a> {
    a: &'a [f64],
    log_a: Vec<f64>,
    log_b: Vec<f64>,
    c: &'a [f64],
    n: usize,
    m: usize,
}

impl Solver<'_> {
    fn update_f(&self, f: &mut [f64], g: &[f64], reg: f64) {
        for i in 0..self.n {
            let row = &self.c[i * self.m..(i + 1) * self.m];
            f[i] = -reg * log_sum_exp((0..self.m).map(|j| self.log_b[j] + (g[j] - row[j]) / reg));
        }
    }

    fn update_g(&self, f: &[f64], g: &mut [f64], reg: f64) {
        for j in 0..self.m {
            g[j] = -reg * log_sum_exp((0..self.n).map(|i| self.log_a[i] + (f[i] - self.c[i * self.m + j]) / reg));
        }
    }

    fn log_plan(&self, f: &[f64], g: &[f64], reg: f64, i: usize, j: usize) -> f64 {
        self.log_a[i] + self.log_b[j] + (f[i] + g[j] - self.c[i * self.m + j]) / reg
    }

    /// L1 residual of row sums after a column update (columns are exact).
    fn row_error(&self, f: &[f64], g: &[f64], reg: f64) -> f64 {
        (0..self.n)
            .map(|i| {
                let s: f64 = (0..self.m).map(|j| self.log_plan(f, g, reg, i, j).exp()).sum();
                (s - self.a[i]).abs()
            })
            .sum()
    }

    fn plan(&self, f: &[f64], g: &[f64], reg: f64) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n * self.m);
        for i in 0..self.n {
            for j in 0..self.m {
                p.push(self.log_plan(f, g, reg, i, j).exp());
            }
        }
        p
    }
}

/// Project a nearly feasible positive matrix onto the transportation polytope
/// by row/column scaling down and a rank-one correction.
fn round_to_marginals(p: &mut [f64], a: &[f64], b: &[f64]) {
    let (n, m) = (a.len(), b.len());
    for i in 0..n {
        let s: f64 = p[i * m..(i + 1) * m].iter().sum();
        if s > a[i] {
            let r = a[i] / s;
            p[i * m..(i + 1) * m].iter_mut().for_each(|v| *v *= r);
        }
    }
    for j in 0..m {
        let s: f64 = (0..n).map(|i| p[i * m + j]).sum();
        if s > b[j] {
            let r = b[j] / s;
            (0..n).for_each(|i| p[i * m + j] *= r);
        }
    }
    let ea: Vec<f64> = (0..n)
        .map(|i| a[i] - p[i * m..(i + 1) * m].iter().sum::<f64>())
        .collect();
    let eb: Vec<f64> = (0..m)
        .map(|j| b[j] - (0..n).map(|i| p[i * m + j]).sum::<f64>())
        .collect();
    let total: f64 = ea.iter().sum();
    if total > 0.0 {
        for i in 0..n {
            for j in 0..m {
                p[i * m + j] += ea[i].max(0.0) * eb[j].max(0.0) / total;
            }
        }
    }
}

/// Entropic plan `argmin <C, pi> - reg * S(pi)` by log-domain Sinkhorn with
/// geometric annealing of the regularizer.
pub fn sinkhorn_plan(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &[f64],
    reg: f64,
    cfg: &SinkhornConfig,
) -> Result<SinkhornResult> {
    sinkhorn_weights(mu.weights(), nu.weights(), cost, reg, cfg)
}

/// [`sinkhorn_plan`] on raw marginal weight vectors.
pub fn sinkhorn_weights(a: &[f64], b: &[f64], cost: &[f64], reg: f64, cfg: &SinkhornConfig) -> Result<SinkhornResult> {
    let (n, m) = (a.len(), b.len());
    if cost.len() != n * m || n == 0 || m == 0 {
        return Err(Error::Dimension(format!(
            "cost matrix of {} entries for {n}x{m}",
            cost.len()
        )));
    }
    if !(reg > 0.0 && reg.is_finite()) {
        return Err(Error::Parameter(format!("regularizer must be positive, got {reg}")));
    }
    if a.iter().chain(b).any(|w| !(*w > 0.0)) {
        return Err(Error::Measure(
            "entropic transport needs strictly positive weights".into(),
        ));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numeric("non-finite cost entry".into()));
    }
    let s = Solver {
        a,
        log_a: a.iter().map(|v| v.ln()).collect(),
        log_b: b.iter().map(|v| v.ln()).collect(),
        c: cost,
        n,
        m,
    };
    let spread =
        cost.iter().fold(f64::NEG_INFINITY, |x, &y| x.max(y)) - cost.iter().fold(f64::INFINITY, |x, &y| x.min(y));
    let mut stage_reg = spread.max(reg);
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let mut iterations = 0;
    let mut err;
    let mut converged = false;
    let mut final_stage = false;
    loop {
        let last = stage_reg <= reg;
        let stage_tol = if last { cfg.tol } else { cfg.tol.max(1e-3) };
        loop {
            s.update_f(&mut f, &g, stage_reg);
            s.update_g(&f, &mut g, stage_reg);
            iterations += 1;
            if iterations % 5 == 0 || iterations >= cfg.max_iter {
                err = s.row_error(&f, &g, stage_reg);
                if !err.is_finite() || f.iter().chain(&g).any(|v| !v.is_finite()) {
                    return Err(Error::Numeric("sinkhorn potentials became non-finite".into()));
                }
                if err <= stage_tol || iterations >= cfg.max_iter {
                    break;
                }
            }
        }
        if last {
            final_stage = true;
            converged = err <= cfg.tol;
            break;
        }
        if iterations >= cfg.max_iter {
            break;
        }
        stage_reg = (stage_reg * 0.5).max(reg);
    }
    if !converged && !(final_stage && err <= cfg.fallback_tol) {
        return Err(Error::Convergence {
            iterations,
            marginal_err: err,
        });
    }
    let mut p = s.plan(&f, &g, reg);
    round_to_marginals(&mut p, a, b);
    Ok(SinkhornResult {
        plan: Coupling::with_marginals(p, a, b)?,
        iterations,
        marginal_err: err,
        row_potential: f,
        col_potential: g,
    })
}

/// Modified-cost value `Σ pi*_ij C_ij` at the entropic optimizer, entropy
/// excluded.
#[allow(clippy::too_many_arguments)]
pub fn regularized_distance(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    f: &ObjectiveSpec,
    lambda: f64,
    gamma: &dyn Fn(&[f64], &[f64]) -> f64,
    cost: &CostSpec,
    cfg: &SinkhornConfig,
) -> Result<f64> {
    cfg.tau.validate()?;
    let c = modified_cost_matrix(f, lambda, gamma, cost, mu.support(), nu.support())?;
    let r = sinkhorn_plan(mu, nu, &c, cfg.tau.reg(lambda), cfg)?;
    Ok(r.plan.integrate(&c))
}
