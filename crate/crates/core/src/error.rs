use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The normal equations could not be factorized, even after the jitter retry.
    #[error("singular system (minimal eigenvalue estimate {min_eigenvalue:.3e})")]
    SingularSystem { min_eigenvalue: f64 },

    #[error("linesearch stalled after {trials} trials (last step {last_step:.3e})")]
    StalledLinesearch { trials: usize, last_step: f64 },

    #[error("inner solve failed at iteration {iteration}: {source}")]
    InnerSolve {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("all {0} grid cells failed")]
    AllCellsFailed(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures of the numerical core, as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::SingularSystem { .. }
                | Error::StalledLinesearch { .. }
                | Error::InnerSolve { .. }
                | Error::Numeric(_)
                | Error::DegenerateData(_)
                | Error::AllCellsFailed(_)
        )
    }
}
