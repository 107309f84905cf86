use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad user input: malformed config, degenerate polygon, bad polynomial.
    #[error("invalid input: {0}")]
    Invalid(String),
    /// Numerical failure: z-floor breach, CFL violation, branch tracking loss.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Flow ran out of step budget before reaching the tension tolerance.
    #[error("not converged: {0}")]
    NotConverged(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// CLI exit code: 2 invalid input, 3 non-converged, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invalid(_) => 2,
            Error::NotConverged(_) => 3,
            Error::Numerical(_) => 4,
            Error::Io(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
