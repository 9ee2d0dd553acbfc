use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("causal energy constraint violated for sensor {sensor}: p*b = {spent} > E = {available}")]
    EnergyConstraint {
        sensor: usize,
        spent: f64,
        available: f64,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("enumeration budget exceeded: {required} supports > budget {budget}; use the sampled estimator")]
    BudgetExceeded { required: f64, budget: f64 },

    #[error("infeasible restricted isometry constant: {0}")]
    InfeasibleRic(String),

    #[error("unsupported basis: {0}")]
    UnsupportedBasis(String),

    #[error("config error{}: {message}", at_line(*.line))]
    Config { line: usize, message: String },

    #[error("solver failed to converge on {failed} of {total} solves (threshold fraction {threshold})")]
    NonConvergence { failed: u64, total: u64, threshold: f64 },

    #[error("container format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn at_line(line: usize) -> String {
    if line == 0 {
        String::new()
    } else {
        format!(" at line {line}")
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
