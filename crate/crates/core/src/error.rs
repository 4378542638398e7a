use thiserror::Error;

/// Which family of linear constraints could not be satisfied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintClass {
    Marginal,
    Causality,
    Budget,
    Other,
}

impl std::fmt::Display for ConstraintClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ConstraintClass::Marginal => "marginal",
            ConstraintClass::Causality => "causality",
            ConstraintClass::Budget => "transport budget",
            ConstraintClass::Other => "other",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("value outside domain: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid measure: {0}")]
    Measure(String),

    #[error("invalid coupling: {0}")]
    Coupling(String),

    #[error("no samples in prefix cell {0:?}")]
    MissingCell(Vec<u32>),

    #[error("linear program infeasible ({class} constraints)")]
    Infeasible { class: ConstraintClass },

    #[error("linear program unbounded")]
    Unbounded,

    #[error("sinkhorn did not converge in {iterations} iterations (marginal error {marginal_err:.3e})")]
    Convergence { iterations: usize, marginal_err: f64 },

    #[error("non-finite value: {0}")]
    Numeric(String),

    #[error("solver diverged at iteration {iteration}: dual value {value:.3e}")]
    Divergence { iteration: usize, value: f64 },

    #[error("at iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable class name, used by the CLI for exit codes.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::Domain(_) => "domain",
            Error::Parameter(_) => "parameter",
            Error::Measure(_) => "measure",
            Error::Coupling(_) => "coupling",
            Error::MissingCell(_) => "missing_cell",
            Error::Infeasible { .. } => "infeasible",
            Error::Unbounded => "unbounded",
            Error::Convergence { .. } => "convergence",
            Error::Numeric(_) => "numeric",
            Error::Divergence { .. } => "divergence",
            Error::AtIteration { source, .. } => source.class(),
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::Io(_) => "io",
        }
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Error {
        Error::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
