use thiserror::Error;

use crate::state::BlochVector;

#[derive(Debug, Error)]
pub enum Error {
    #[error("Bloch radius {0} exceeds 1")]
    RadiusOutOfRange(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("vector norm below 1e-12")]
    ZeroVector,

    #[error("invalid Wishart parameters: {0}")]
    InvalidParams(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("covariance is not numerically positive definite")]
    CholeskyFailure,

    #[error("series did not meet its truncation bound within {terms} terms")]
    NonConvergence { terms: usize },

    #[error("singular state (det = {det:e}) with negative determinant exponent {exponent}")]
    SingularState { det: f64, exponent: f64 },

    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),

    /// `profile` holds (mu, radial derivative) samples over the bracket.
    #[error("no sign change of the radial derivative in [0, {mu_max}] for r = {radius}, N = {columns}")]
    NoRoot {
        radius: f64,
        columns: usize,
        mu_max: f64,
        profile: Vec<(f64, f64)>,
    },

    #[error("fixed-point iteration did not settle after {iterations} iterations")]
    FixedPointDivergence { iterations: usize },

    #[error("peak state is not full rank (smallest eigenvalue {min_eigenvalue:e})")]
    NotFullRank { min_eigenvalue: f64 },

    #[error("target/proposal ratio is unbounded (grid max {grid_max:e}, refined {refined_max:e})")]
    UnboundedRatio { grid_max: f64, refined_max: f64 },

    #[error("ratio {ratio:e} exceeds bound {bound:e} at {state:?}")]
    RatioExceedsBound {
        ratio: f64,
        bound: f64,
        state: BlochVector,
    },

    #[error("empty sample")]
    EmptySample,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Failures of the numerics, as opposed to bad inputs or I/O.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::CholeskyFailure
                | Error::NonConvergence { .. }
                | Error::SingularState { .. }
                | Error::QuadratureFailure(_)
                | Error::NoRoot { .. }
                | Error::FixedPointDivergence { .. }
                | Error::NotFullRank { .. }
                | Error::UnboundedRatio { .. }
                | Error::RatioExceedsBound { .. }
        )
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::RadiusOutOfRange(_) => "RadiusOutOfRange",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::ZeroVector => "ZeroVector",
            Error::InvalidParams(_) => "InvalidParams",
            Error::InvalidInput(_) => "InvalidInput",
            Error::InvalidState(_) => "InvalidState",
            Error::CholeskyFailure => "CholeskyFailure",
            Error::NonConvergence { .. } => "NonConvergence",
            Error::SingularState { .. } => "SingularState",
            Error::QuadratureFailure(_) => "QuadratureFailure",
            Error::NoRoot { .. } => "NoRoot",
            Error::FixedPointDivergence { .. } => "FixedPointDivergence",
            Error::NotFullRank { .. } => "NotFullRank",
            Error::UnboundedRatio { .. } => "UnboundedRatio",
            Error::RatioExceedsBound { .. } => "RatioExceedsBound",
            Error::EmptySample => "EmptySample",
            Error::Io(_) => "Io",
            Error::Csv(_) => "Csv",
            Error::Json(_) => "Json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
