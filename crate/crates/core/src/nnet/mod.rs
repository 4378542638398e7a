//! Reverse-mode differentiation, dense networks, adapted test functions and
//! the scenario generator.

mod dense;
mod family;
mod generator;
mod graph;
mod optim;

pub use dense::{clamp_params, Activation, DenseNet, ForwardBackward, Layer};
pub use family::{
    compensated_increments, compensated_increments_adjoint, gamma_prime, gamma_prime_grad, martingale_penalty,
    penalty_from_values, TestFunctionFamily,
};
pub use generator::{generate, GeneratorSpec};
pub use graph::{Gradients, Graph, Var};
pub use optim::{Optimizer, OptimizerKind};
