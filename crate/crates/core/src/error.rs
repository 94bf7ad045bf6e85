use thiserror::Error;

use crate::codec::CodecError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),

    #[error("invalid sparsity budget {0}: must be positive and finite")]
    InvalidBudget(f64),

    #[error("infeasible sparsity budget {budget}: only {support} atoms have nonzero coefficients")]
    InfeasibleBudget { budget: f64, support: usize },

    #[error("infinite variance: atom {index} has a nonzero coefficient but zero probability")]
    InfiniteVariance { index: usize },

    #[error("length mismatch: {what} has {actual} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid norm order q = {0}")]
    InvalidNorm(f64),

    #[error("svd did not converge after {sweeps} sweeps")]
    SvdNoConvergence { sweeps: usize },

    #[error("tensor file: {0}")]
    TensorFormat(String),

    #[error(transparent)]
    Codec(#[from] CodecError),

    #[error("training diverged at round {round}: loss is not finite")]
    Diverged { round: u64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("round {round}, worker {worker}, layer {layer}: {source}")]
    Round {
        round: u64,
        worker: usize,
        layer: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by the numbers themselves (zero gradients,
    /// unbounded variance, non-converging factorizations) rather than by a
    /// malformed request.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NonFinite { .. }
            | Error::DegenerateInput(_)
            | Error::InfiniteVariance { .. }
            | Error::SvdNoConvergence { .. }
            | Error::Diverged { .. } => true,
            Error::Round { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
