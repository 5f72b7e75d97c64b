use thiserror::Error;

/// Unified error type for the whole crate.
///
/// Variants are grouped by who is at fault: bad input (graphs, configs,
/// scenario files), violated structural hypotheses (the caller asked for an
/// analysis whose preconditions do not hold), and internal numerical
/// failures (an identity that must hold to working precision did not).
#[derive(Debug, Error)]
pub enum CoordError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error(
        "negative weight {weight} on edge {from} -> {to}: edge weights must be \
         nonnegative under the usual algebraic-graph-theory convention; model \
         antagonistic influence through negative per-agent scalings instead"
    )]
    NegativeWeight { from: usize, to: usize, weight: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("structural hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("not certifiable: {0}")]
    NotCertifiable(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoordError>;

impl CoordError {
    /// Process exit code the CLI maps this error to. Input problems exit
    /// with 2, internal numerical trouble with 3.
    pub fn exit_code(&self) -> i32 {
        match self {
            CoordError::Numerical(_) | CoordError::NotCertifiable(_) => 3,
            _ => 2,
        }
    }
}
