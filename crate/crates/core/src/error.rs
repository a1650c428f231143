use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("symmetry rejected: {0}")]
    SymmetryRejected(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("state annihilated by projector (norm {norm:.3e})")]
    ProjectorAnnihilated { norm: f64 },

    #[error("unreliable normalization: sampled norm {norm:.3e} below floor")]
    UnreliableNormalization { norm: f64 },

    #[error("Lanczos did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("transition not bracketed: {0}")]
    TransitionNotBracketed(String),

    #[error("resource budget exceeded: {0}")]
    Budget(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
