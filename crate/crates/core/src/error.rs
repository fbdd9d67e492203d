use thiserror::Error;

/// Errors produced by the recovery, worst-case and experiment routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} is rank deficient (sigma_min = {sigma_min:e}, tolerance = {tolerance:e})")]
    RankDeficient {
        what: &'static str,
        sigma_min: f64,
        tolerance: f64,
    },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{what} is ill-conditioned (condition estimate {condition:e} exceeds {limit:e})")]
    IllConditioned {
        what: &'static str,
        condition: f64,
        limit: f64,
    },

    #[error("model assumption V ∩ ker(L) = {{0}} violated (sigma_min(C) = {sigma_min:e})")]
    ModelAssumptionViolated { sigma_min: f64 },

    #[error("ridge parameter must be positive, got {0}")]
    NonPositiveGamma(f64),

    #[error("data are inconsistent with the model set: distance to V is {delta:e} > epsilon = {epsilon:e}")]
    ModelInconsistentData { delta: f64, epsilon: f64 },

    #[error("no model-consistent element interpolates the data: minimal distance to V is {delta:e} > epsilon = {epsilon:e}")]
    InfeasibleData { delta: f64, epsilon: f64 },

    #[error("brute-force search dimension {dim} exceeds the supported maximum of {max}")]
    SearchDimensionTooLarge { dim: usize, max: usize },

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
    },

    #[error("linear program solver failed: {0}")]
    LinearProgram(String),

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("sort feature {feature} out of range (dataset has {features} features)")]
    FeatureOutOfRange { feature: usize, features: usize },

    #[error("degenerate split: {0}")]
    DegenerateSplit(String),

    #[error("i/o error: {0}")]
    Io(String),
}

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Input,
    Numerical,
    Infeasible,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::RankDeficient { .. }
            | Error::IllConditioned { .. }
            | Error::NoConvergence { .. }
            | Error::LinearProgram(_) => ErrorClass::Numerical,
            Error::ModelAssumptionViolated { .. }
            | Error::ModelInconsistentData { .. }
            | Error::InfeasibleData { .. } => ErrorClass::Infeasible,
            _ => ErrorClass::Input,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
