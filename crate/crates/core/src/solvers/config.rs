use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::PathBatch;
use crate::nnet::OptimizerKind;
use crate::sinkhorn::SinkhornConfig;

/// Hyper-parameters shared by the GDA solvers. `Default` is the volatility
/// preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GdaConfig {
    /// Outer iterations.
    pub iterations: usize,
    /// Cap on inner ascent steps over `y` per outer iteration.
    pub inner_steps: usize,
    /// Inner loop stops once the relative objective change falls below this.
    pub inner_tol: f64,
    /// Number of `(h, M)` families; 0 turns the solver into plain OT.
    pub layers: usize,
    pub hidden: usize,
    pub lambda0: f64,
    pub lambda_optimizer: OptimizerKind,
    pub h_optimizer: OptimizerKind,
    pub m_optimizer: OptimizerKind,
    pub y_optimizer: OptimizerKind,
    pub generator_optimizer: OptimizerKind,
    pub h_clamp: (f64, f64),
    pub m_clamp: (f64, f64),
    pub xi: f64,
    pub eta: f64,
    pub y_init_variance: f64,
    /// Sample batch size for the structural solver.
    pub batch: usize,
    /// Replace each sampled batch by its adapted empirical measure.
    pub quantize_batch: bool,
    /// Center `M` increments on each prefix group (see [`crate::nnet::compensated_increments`]).
    pub compensate_increments: bool,
    /// Finite candidate set for the inner supremum; solved exactly when given.
    pub y_grid: Option<PathBatch>,
    pub sinkhorn: SinkhornConfig,
    pub divergence_limit: f64,
    /// Fraction of trailing iterations averaged for the final values.
    pub tail_fraction: f64,
    /// Relative tolerance on `|E_π[c] − ε|` for the convergence flag.
    pub cost_rtol: f64,
    /// Multiplier level treated as zero for the convergence flag.
    pub lambda_tol: f64,
    pub seed: u64,
}

impl Default for GdaConfig {
    fn default() -> Self {
        Self::volatility()
    }
}

impl GdaConfig {
    /// Volatility experiment defaults.
    pub fn volatility() -> Self {
        GdaConfig {
            iterations: 4000,
            inner_steps: 10,
            inner_tol: 1e-6,
            layers: 2,
            hidden: 4,
            lambda0: 10.0,
            lambda_optimizer: OptimizerKind::lambda_momentum(),
            h_optimizer: OptimizerKind::adam(0.05),
            m_optimizer: OptimizerKind::adam(0.05),
            y_optimizer: OptimizerKind::PlainSgdSchedule {
                numerator: 50.0,
                normalize: false,
            },
            generator_optimizer: OptimizerKind::adam(0.01),
            h_clamp: (-50.0, 50.0),
            m_clamp: (-50.0, 50.0),
            xi: 100.0,
            eta: 1e-6,
            y_init_variance: 1e-3,
            batch: 100,
            quantize_batch: true,
            compensate_increments: true,
            y_grid: None,
            sinkhorn: SinkhornConfig {
                tol: 1e-4,
                fallback_tol: 1e-3,
                ..SinkhornConfig::default()
            },
            divergence_limit: 1e6,
            tail_fraction: 0.1,
            cost_rtol: 0.05,
            lambda_tol: 1e-2,
            seed: 0,
        }
    }

    /// Index prediction defaults.
    pub fn prediction() -> Self {
        GdaConfig {
            iterations: 2000,
            lambda0: 1.0,
            lambda_optimizer: OptimizerKind::MomentumSchedule {
                momentum: 0.9,
                scale: 0.1,
                offset: 200.0,
            },
            h_optimizer: OptimizerKind::adam(1e-3),
            m_optimizer: OptimizerKind::adam(1e-3),
            y_optimizer: OptimizerKind::PlainSgdSchedule {
                numerator: 20.0,
                normalize: true,
            },
            generator_optimizer: OptimizerKind::adam(1e-4),
            h_clamp: (-1.0, 1.0),
            m_clamp: (-0.5, 0.5),
            batch: 32,
            ..Self::volatility()
        }
    }

    /// Drop the test functions; the prediction preset also switches to the
    /// faster multiplier schedule used there for OT.
    pub fn ot_mode(mut self) -> Self {
        if self == Self::prediction() {
            self.lambda_optimizer = OptimizerKind::MomentumSchedule {
                momentum: 0.9,
                scale: 1.0,
                offset: 100.0,
            };
        }
        self.layers = 0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Parameter(format!("invalid solver config: {what}")));
        if self.iterations == 0 {
            return bad("iterations must be positive");
        }
        if self.hidden == 0 && self.layers > 0 {
            return bad("hidden must be positive");
        }
        if !(self.lambda0 >= 0.0 && self.lambda0.is_finite()) {
            return bad("lambda0 must be nonnegative");
        }
        for (name, (lo, hi)) in [("h_clamp", self.h_clamp), ("m_clamp", self.m_clamp)] {
            if !(lo <= hi) {
                return bad(&format!("{name} has low > high"));
            }
        }
        if !(self.eta > 0.0) || !(self.xi >= 0.0) {
            return bad("eta must be positive and xi nonnegative");
        }
        if !(self.y_init_variance >= 0.0) {
            return bad("y_init_variance must be nonnegative");
        }
        if self.batch == 0 {
            return bad("batch must be positive");
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction <= 1.0) {
            return bad("tail_fraction must lie in (0, 1]");
        }
        if !(self.divergence_limit > 0.0) {
            return bad("divergence_limit must be positive");
        }
        Ok(())
    }
}
