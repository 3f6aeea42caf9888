use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{func}: argument {value} outside domain ({expected})")]
    Domain {
        func: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("{routine} did not converge after {iterations} iterations ({detail})")]
    NonConvergence {
        routine: &'static str,
        iterations: usize,
        detail: String,
    },

    #[error("moment-infeasible prior: variance {eta2} >= mean*(1-mean) with mean {mu}")]
    MomentInfeasible { mu: f64, eta2: f64 },

    #[error("all borrowing weights of type {index} are zero")]
    DegenerateWeights { index: usize },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("{block} acceptance rate {rate:.3} outside [0.05, 0.95]")]
    Sampler { block: String, rate: f64 },

    #[error("replicate {index}: {source}")]
    Replicate {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Self::Validation(msg.into())
    }

    /// Input was rejected before any numerical work took place.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Validation(_) | Error::InvalidParameter { .. } | Error::Domain { .. } => true,
            Error::Replicate { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
