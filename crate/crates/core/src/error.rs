use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(
        "series-budget-exceeded: {terms} terms did not bring the tail below {tail_tol:e} at s_max = {s_max}"
    )]
    SeriesBudgetExceeded { terms: usize, tail_tol: f64, s_max: f64 },

    #[error("range: s = {s} lies outside the certified interval [-1, {s_max_certified}]")]
    Range { s: f64, s_max_certified: f64 },

    #[error("integration-diverged at s = {s}")]
    IntegrationDiverged { s: f64 },

    #[error("root-beyond-range: g has no sign change on [-1, {s_max_certified}] although p + d > 2")]
    RootBeyondRange { s_max_certified: f64 },

    #[error("internal-inconsistency: {0}")]
    InternalInconsistency(String),

    #[error("z1-not-found: {0}")]
    Z1NotFound(String),

    #[error("unknown pair id `{0}`")]
    UnknownPair(String),
}
