use serde::{Deserialize, Serialize};

use super::config::GdaConfig;
use crate::measures::DiscreteMeasure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceReason {
    /// Transport cost settled at the radius.
    BudgetBinding,
    /// Multiplier settled at zero.
    MultiplierVanished,
    NotConverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    /// Dual value per iteration, without the martingale penalty.
    pub dual: Vec<f64>,
    pub lambda: Vec<f64>,
    pub transport_cost: Vec<f64>,
    pub penalty: Vec<f64>,
    /// Tail averages over the final `tail_fraction` of iterations.
    pub final_dual: f64,
    pub final_lambda: f64,
    pub final_cost: f64,
    pub last_dual: f64,
    pub worst_case: DiscreteMeasure,
    pub converged: bool,
    pub reason: ConvergenceReason,
}

#[derive(Debug, Default)]
pub(crate) struct Trajectory {
    pub dual: Vec<f64>,
    pub lambda: Vec<f64>,
    pub cost: Vec<f64>,
    pub penalty: Vec<f64>,
}

impl Trajectory {
    pub fn push(&mut self, dual: f64, lambda: f64, cost: f64, penalty: f64) {
        self.dual.push(dual);
        self.lambda.push(lambda);
        self.cost.push(cost);
        self.penalty.push(penalty);
    }

    pub fn finish(self, eps: f64, cfg: &GdaConfig, worst_case: DiscreteMeasure) -> SolverReport {
        let n = self.dual.len();
        let tail = ((n as f64 * cfg.tail_fraction).ceil() as usize).clamp(1, n.max(1));
        let avg = |v: &[f64]| v[n - tail..].iter().sum::<f64>() / tail as f64;
        let final_dual = avg(&self.dual);
        let final_lambda = avg(&self.lambda);
        let final_cost = avg(&self.cost);
        let reason = if (final_cost - eps).abs() <= cfg.cost_rtol * eps {
            ConvergenceReason::BudgetBinding
        } else if final_lambda <= cfg.lambda_tol {
            ConvergenceReason::MultiplierVanished
        } else {
            ConvergenceReason::NotConverged
        };
        SolverReport {
            last_dual: *self.dual.last().unwrap_or(&f64::NAN),
            dual: self.dual,
            lambda: self.lambda,
            transport_cost: self.cost,
            penalty: self.penalty,
            final_dual,
            final_lambda,
            final_cost,
            worst_case,
            converged: reason != ConvergenceReason::NotConverged,
            reason,
        }
    }
}
