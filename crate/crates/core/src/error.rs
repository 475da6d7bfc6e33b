use thiserror::Error;

use crate::optim::SolveStatus;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite state encountered at step {step}")]
    NumericOverflow { step: usize },

    #[error("one-step problem ill-posed: lambda_min(R + B'PB) = {min_eig:e}")]
    IllPosed { min_eig: f64 },

    #[error("one-step problem infeasible at x = {x:?} (violation {violation:e})")]
    OneStepInfeasible { x: Vec<f64>, violation: f64 },

    #[error("DARE iteration diverged after {iterations} iterations")]
    DareDiverged { iterations: usize },

    #[error("terminal set degenerate: no positive level passes the sizing checks")]
    DegenerateTerminalSet,

    #[error("online problem infeasible at k = {k}: status {status:?}, violation {violation:e}")]
    OnlineInfeasible {
        k: usize,
        status: SolveStatus,
        violation: f64,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
        if expected == actual {
            Ok(())
        } else {
            Err(Error::Dimension {
                context,
                expected,
                actual,
            })
        }
    }
}
