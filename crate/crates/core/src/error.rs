use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Cholesky failed at every rung of the jitter ladder.
    #[error("factorization failed after adding jitter {jitter:e} to the diagonal{}", context_suffix(.context))]
    Factorization { jitter: f64, context: Option<String> },

    #[error("degenerate support: {0}")]
    DegenerateSupport(String),

    #[error("sampler initialization failed: {0}")]
    Initialization(String),

    #[error("quadrature box too small: boundary mass {mass:e} exceeds {limit:e}")]
    BoxTooSmall { mass: f64, limit: f64 },

    #[error("malformed draws: {0}")]
    Draws(String),
}

fn context_suffix(context: &Option<String>) -> String {
    context.as_ref().map(|c| format!(" ({c})")).unwrap_or_default()
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Attach a location (e.g. the offending draw) to a factorization error.
    pub fn with_context(self, ctx: impl Into<String>) -> Self {
        match self {
            Error::Factorization { jitter, .. } => Error::Factorization {
                jitter,
                context: Some(ctx.into()),
            },
            other => other,
        }
    }
}
