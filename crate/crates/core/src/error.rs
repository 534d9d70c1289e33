use thiserror::Error;

/// Errors shared by all modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("capacity exceeded: {what} needs {required} {unit}, budget is {budget}")]
    Capacity {
        what: String,
        required: u128,
        budget: u128,
        unit: &'static str,
    },

    #[error("invalid source: {0}")]
    InvalidSource(String),

    #[error("degenerate source: {0}")]
    Degenerate(String),

    #[error("no witness exists: the source is a product distribution")]
    ProductSource,

    #[error("exact evaluation needs {terms} weighted terms (budget {budget}); use Monte Carlo mode")]
    ExactBudget { terms: u128, budget: u128 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("no coordinate meets the success floor {floor} (best per-coordinate success {best})")]
    NoCoordinate { floor: f64, best: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
