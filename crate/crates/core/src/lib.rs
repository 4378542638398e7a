//! Worst-case expected values of path functionals over causal optimal
//! transport balls around (adapted) empirical measures.

pub mod error;
pub mod exact_transport;
pub mod measures;
pub mod nnet;
pub mod quantize;
pub mod sinkhorn;
pub mod solvers;
pub mod synthetic;

pub use error::{ConstraintClass, Error, Result};
pub use measures::{
    cost_matrix, expected_value, Bounds, CostSpec, Coupling, DiscreteMeasure, ObjectiveSpec, PathBatch, Shape,
};
pub use nnet::{DenseNet, GeneratorSpec, TestFunctionFamily};
pub use solvers::{DualState, GdaConfig, SolverReport};
pub use synthetic::Problem;
