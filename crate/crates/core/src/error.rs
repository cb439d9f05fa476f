use thiserror::Error;

/// Errors raised by the numerical pipelines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("numerical domain error: {0}")]
    NumericalDomain(String),

    #[error("underflow: {0}")]
    Underflow(String),

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("monotonicity violated: {0}")]
    Monotonicity(String),

    #[error("degenerate density: {0}")]
    DegenerateDensity(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("contraction violated: eigenvalue {eigenvalue} at node {node}")]
    ContractionViolation { node: usize, eigenvalue: f64 },

    #[error("transport solver failed: {message} (lower bound {lower}, upper bound {upper})")]
    Solver {
        message: String,
        lower: f64,
        upper: f64,
    },

    #[error("ill-conditioned basis: mass matrix condition number {condition:e}")]
    IllConditionedBasis { condition: f64 },

    #[error("hypothesis failure: epsilon = {epsilon} is outside the admissible range")]
    HypothesisFailure { epsilon: f64 },

    #[error("certificate failure at stage `{stage}`: {value:e} > {bound:e}")]
    CertificateFailure {
        stage: String,
        value: f64,
        bound: f64,
    },

    #[error("degenerate directions: {0}")]
    DegenerateDirections(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short stable identifier, used by the driver for diagnostics.
    pub fn stage(&self) -> &'static str {
        match self {
            Error::NumericalDomain(_) => "numerical-domain",
            Error::Underflow(_) => "underflow",
            Error::InvalidPotential(_) => "invalid-potential",
            Error::Dimension(_) => "dimension",
            Error::ResourceLimit(_) => "resource-limit",
            Error::InvalidMatrix(_) => "invalid-matrix",
            Error::Monotonicity(_) => "monotonicity",
            Error::DegenerateDensity(_) => "degenerate-density",
            Error::Convergence { .. } => "convergence",
            Error::ContractionViolation { .. } => "contraction-violation",
            Error::Solver { .. } => "solver",
            Error::IllConditionedBasis { .. } => "ill-conditioned-basis",
            Error::HypothesisFailure { .. } => "hypothesis-failure",
            Error::CertificateFailure { .. } => "certificate",
            Error::DegenerateDirections(_) => "degenerate-directions",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
