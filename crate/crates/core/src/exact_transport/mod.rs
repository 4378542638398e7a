//! Exact linear programs for transport distances and worst-case primal values
//! on finite supports.

mod causal;
pub mod oracle;
mod simplex;

pub use causal::{CausalityConstraint, CausalityConstraintSet};
pub use simplex::{LinearProgram, LpSolution, Row, RowKind, Sense};

use serde::Serialize;

use crate::error::{ConstraintClass, Error, Result};
use crate::measures::{cost_matrix, CostSpec, Coupling, DiscreteMeasure, ObjectiveSpec, PathBatch};

/// Optimal value and plan of a transport problem.
#[derive(Debug, Clone, Serialize)]
pub struct TransportSolution {
    pub value: f64,
    pub plan: Coupling,
}

/// Optimal worst-case value, the measure attaining it and the plan from the
/// reference measure.
#[derive(Debug, Clone, Serialize)]
pub struct PrimalSolution {
    pub value: f64,
    pub worst: DiscreteMeasure,
    pub plan: Coupling,
    pub transport_cost: f64,
}

fn marginal_rows(lp: &mut LinearProgram, row_w: &[f64], col_w: Option<&[f64]>) {
    let (n, m) = (row_w.len(), col_w.map_or(0, <[f64]>::len));
    let cols = lp.n_vars() / n;
    for (i, &w) in row_w.iter().enumerate() {
        lp.push(
            (0..cols).map(|j| (i * cols + j, 1.0)).collect(),
            RowKind::Eq,
            w,
            ConstraintClass::Marginal,
        );
    }
    if let Some(col_w) = col_w {
        for (j, &w) in col_w.iter().enumerate().take(m) {
            lp.push(
                (0..n).map(|i| (i * cols + j, 1.0)).collect(),
                RowKind::Eq,
                w,
                ConstraintClass::Marginal,
            );
        }
    }
}

fn causality_rows(lp: &mut LinearProgram, set: &CausalityConstraintSet) {
    for c in &set.constraints {
        lp.push(c.coeffs.clone(), RowKind::Eq, 0.0, ConstraintClass::Causality);
    }
}

/// Minimum of `Σ pi_ij C_ij` over couplings of two weight vectors, with
/// optional extra equality constraints. `cost` is row-major and may contain
/// negative entries.
pub fn transport_lp(
    row_w: &[f64],
    col_w: &[f64],
    cost: &[f64],
    causality: Option<&CausalityConstraintSet>,
) -> Result<(f64, Vec<f64>)> {
    if cost.len() != row_w.len() * col_w.len() || row_w.is_empty() || col_w.is_empty() {
        return Err(Error::Dimension(format!(
            "cost matrix of {} entries for {}x{} plan",
            cost.len(),
            row_w.len(),
            col_w.len()
        )));
    }
    let mut lp = LinearProgram::new(Sense::Minimize, cost.to_vec());
    marginal_rows(&mut lp, row_w, Some(col_w));
    if let Some(set) = causality {
        causality_rows(&mut lp, set);
    }
    let sol = lp.solve()?;
    Ok((sol.value, sol.x))
}

fn check_compatible(mu: &DiscreteMeasure, nu: &PathBatch) -> Result<()> {
    if mu.shape() != nu.shape() {
        return Err(Error::Dimension(format!(
            "reference paths are {}x{}, target paths are {}x{}",
            mu.shape().steps,
            mu.shape().dims,
            nu.shape().steps,
            nu.shape().dims
        )));
    }
    Ok(())
}

fn distance(mu: &DiscreteMeasure, nu: &DiscreteMeasure, cost: &CostSpec, causal: bool) -> Result<TransportSolution> {
    check_compatible(mu, nu.support())?;
    cost.validate(mu.shape())?;
    let c = cost_matrix(cost, mu.support(), nu.support())?;
    let set = causal.then(|| CausalityConstraintSet::new(mu, nu.support()));
    let (value, pi) = transport_lp(mu.weights(), nu.weights(), &c, set.as_ref())?;
    Ok(TransportSolution {
        value,
        plan: Coupling::new(pi, mu, nu)?,
    })
}

/// Optimal transport distance `min Σ pi c` over all couplings.
pub fn ot_distance_lp(mu: &DiscreteMeasure, nu: &DiscreteMeasure, cost: &CostSpec) -> Result<TransportSolution> {
    distance(mu, nu, cost, false)
}

/// Causal transport distance: the minimum restricted to causal couplings.
pub fn cot_distance_lp(mu: &DiscreteMeasure, nu: &DiscreteMeasure, cost: &CostSpec) -> Result<TransportSolution> {
    distance(mu, nu, cost, true)
}

fn primal(
    mu: &DiscreteMeasure,
    grid: &PathBatch,
    f: &ObjectiveSpec,
    cost: &CostSpec,
    eps: f64,
    causal: bool,
) -> Result<PrimalSolution> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::Parameter(format!("radius must be finite and >= 0, got {eps}")));
    }
    check_compatible(mu, grid)?;
    let shape = mu.shape();
    cost.validate(shape)?;
    f.validate(shape)?;
    let (n, m) = (mu.len(), grid.len());
    let c = cost_matrix(cost, mu.support(), grid)?;
    let fy: Vec<f64> = grid.paths().map(|y| f.eval(shape, y)).collect::<Result<_>>()?;
    let objective: Vec<f64> = (0..n * m).map(|k| fy[k % m]).collect();

    let mut lp = LinearProgram::new(Sense::Maximize, objective);
    marginal_rows(&mut lp, mu.weights(), None);
    lp.push(
        c.iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(k, v)| (k, *v))
            .collect(),
        RowKind::Le,
        eps,
        ConstraintClass::Budget,
    );
    if causal {
        causality_rows(&mut lp, &CausalityConstraintSet::new(mu, grid));
    }
    // without the budget row the program is always feasible (any product
    // coupling qualifies), so infeasibility is a budget violation
    let sol = lp.solve().map_err(|e| match e {
        Error::Infeasible { .. } => Error::Infeasible {
            class: ConstraintClass::Budget,
        },
        e => e,
    })?;

    let mut col = vec![0.0; m];
    for (k, v) in sol.x.iter().enumerate() {
        col[k % m] += v;
    }
    let plan = Coupling::with_marginals(sol.x, mu.weights(), &col)?;
    let transport_cost = plan.integrate(&c);
    let worst = DiscreteMeasure::from_masses(grid.clone(), col)?;
    Ok(PrimalSolution {
        value: sol.value,
        worst,
        plan,
        transport_cost,
    })
}

/// `sup E_ν[f]` over measures `ν` on the grid with `W(mu, ν) <= eps`.
pub fn primal_ot_lp(
    mu: &DiscreteMeasure,
    grid: &PathBatch,
    f: &ObjectiveSpec,
    cost: &CostSpec,
    eps: f64,
) -> Result<PrimalSolution> {
    primal(mu, grid, f, cost, eps, false)
}

/// `sup E_ν[f]` over measures `ν` on the grid with `W_c(mu, ν) <= eps`.
pub fn primal_cot_lp(
    mu: &DiscreteMeasure,
    grid: &PathBatch,
    f: &ObjectiveSpec,
    cost: &CostSpec,
    eps: f64,
) -> Result<PrimalSolution> {
    primal(mu, grid, f, cost, eps, true)
}

/// Whether `plan` (rows indexed by `mu`, columns by `nu_support`) satisfies
/// every discretized causality equality within `tol`.
pub fn verify_causality(plan: &Coupling, mu: &DiscreteMeasure, nu_support: &PathBatch, tol: f64) -> bool {
    if plan.rows() != mu.len() || plan.cols() != nu_support.len() {
        return false;
    }
    CausalityConstraintSet::new(mu, nu_support).max_violation(plan.as_slice()) <= tol
}
