use thiserror::Error;

/// Failures surfaced by the analysis and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    /// The kept columns do not span the message space.
    #[error("not decodable: kept columns have rank {rank}, need {needed}")]
    NotDecodable { rank: usize, needed: usize },

    /// Even with every node finished the generator cannot be inverted.
    #[error("infeasible code: {0}")]
    InfeasibleCode(String),

    #[error("quadrature did not converge: estimate {estimate:.3e}, error bound {error_bound:.3e}")]
    Convergence { estimate: f64, error_bound: f64 },
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn rank_deficient(rank: usize, k: usize) -> Self {
        Error::InfeasibleCode(format!("generator has rank {rank} < k = {k}"))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
