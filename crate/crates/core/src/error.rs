use thiserror::Error;

use crate::model::HypothesisReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{what} = {value} is outside the domain")]
    Domain { what: &'static str, value: f64 },

    #[error("ellipticity lost at node {node}: coefficient {value}")]
    Ellipticity { node: usize, value: f64 },

    #[error("zero pivot in row {row}")]
    Singular { row: usize },

    #[error("iterate left the admissible band at node {node}: value {value}")]
    OutOfBand { node: usize, value: f64 },

    #[error("iterate at or below sonic value at node {node}: {value}")]
    BelowSonic { node: usize, value: f64 },

    #[error("maximum principle breached at node {node}: v = {value} < k0 = {bound}")]
    MaximumPrinciple { node: usize, value: f64, bound: f64 },

    #[error("existence hypotheses not satisfied:\n{0}")]
    Hypotheses(Box<HypothesisReport<f64>>),

    #[error("{stage} did not converge in {iterations} iterations (last changes: {history:?})")]
    Divergence {
        stage: String,
        iterations: usize,
        history: Vec<f64>,
    },

    #[error("continuation failed: {0}")]
    Continuation(String),

    #[error("shot crossed the sonic line at r = {r}")]
    SonicCrossing { r: f64 },

    #[error("no sign change of the shooting mismatch found: {0}")]
    Bracket(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
