use thiserror::Error;

/// Errors raised by the solvers, builders and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Caller passed inputs that violate an operation's preconditions.
    #[error("usage error: {0}")]
    Usage(String),

    /// A constructed MDP failed its structural checks.
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    /// An iterative solver ran out of budget before reaching tolerance.
    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// A black-box objective returned NaN or an infinity.
    #[error("objective returned non-finite value {value} at {point:?}")]
    NonFiniteObjective { value: f64, point: Vec<f64> },

    #[error("map parse error at line {line}: {message}")]
    MapParse { line: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}
