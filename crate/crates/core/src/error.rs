use thiserror::Error;

/// Errors raised by estimators, selectors and the experiment harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid bandwidth h = {0}")]
    InvalidBandwidth(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The kernel window around `u` contains no observation with positive weight.
    #[error("zero kernel mass at u = {u} (h = {h})")]
    ZeroMass { u: f64, h: f64 },

    /// The frozen-coefficient AR(1) at `u` has no stationary solution.
    #[error("no stationary approximation at u = {u}: |a(u)| = {coefficient} >= 1")]
    NonStationary { u: f64, coefficient: f64 },

    #[error("bandwidth h = {h} is infeasible: {zero_mass} of {weighted} weighted points have zero mass")]
    InfeasibleBandwidth {
        h: f64,
        zero_mass: usize,
        weighted: usize,
    },

    #[error("every bandwidth in the grid is infeasible")]
    AllInfeasible,

    #[error("empty bandwidth grid")]
    EmptyGrid,

    #[error("missing estimate at u = {0} inside the weight support")]
    MissingEstimate(f64),

    #[error("non-finite value at u = {0}")]
    NonFinite(f64),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("curvature integral must be positive, got {0}")]
    ZeroCurvature(f64),

    #[error("no closed form available for {0}")]
    NoClosedForm(String),

    #[error("unknown kernel `{0}`")]
    UnknownKernel(String),

    #[error("unknown figure `{0}`")]
    UnknownFigure(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("failure budget exceeded: {failed} of {total} replications failed")]
    FailureBudget { failed: usize, total: usize },

    #[error("empty result")]
    EmptyResult,

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
