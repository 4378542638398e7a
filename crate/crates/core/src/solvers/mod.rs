//! Minimax solvers for the causal and structural duals, the exact λ-grid
//! dual, generator pretraining and the Rademacher estimator.

mod config;
mod gda;
mod grid;
mod pretrain;
mod rademacher;
mod report;
mod scot;

pub use config::GdaConfig;
pub use gda::{dual_objective_cot, solve_dual_cot_gda, DualState};
pub use grid::{lambda_grid_dual, linspace_lambda};
pub use pretrain::{full_mse, pretrain_generator, PretrainConfig, Pretrained};
pub use rademacher::{rademacher_estimate, rademacher_exhaustive, Hypothesis, HypothesisSet, RademacherEstimate};
pub use report::{ConvergenceReason, SolverReport};
pub use scot::{solve_scot, solve_scot_gda, ScotOutcome};
