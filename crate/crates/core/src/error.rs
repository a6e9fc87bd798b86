use thiserror::Error;

/// Everything that can go wrong between reading a CSV and printing a report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid data: {0}")]
    Data(String),

    #[error("line {line}, column `{column}`: {message}")]
    Parse {
        line: u64,
        column: String,
        message: String,
    },

    #[error("no failures observed: the test needs at least one record with status 1")]
    NoEvents,

    #[error("every record was dropped for missing values ({dropped} rows)")]
    AllDropped { dropped: usize },

    #[error(
        "monotone likelihood (separation): |beta| reached {beta_norm:.3e} after {iterations} \
         iterations without the score vanishing; check for covariates that perfectly order the failures"
    )]
    Separation { iterations: usize, beta_norm: f64 },

    #[error("singular {what}: reciprocal condition number {rcond:.3e} is below {threshold:.0e}")]
    Singular {
        what: &'static str,
        rcond: f64,
        threshold: f64,
    },

    #[error(
        "Cox fit did not converge in {iterations} iterations (max |score| = {score_norm:.3e})"
    )]
    NotConverged { iterations: usize, score_norm: f64 },

    #[error("degenerate variance for {tested}: the non-proportionality score carries no information beyond beta")]
    DegenerateVariance { tested: String },

    #[error("{failed} of {replicates} replicates failed, more than the 5% allowed")]
    TooManyFailures { failed: usize, replicates: usize },

    #[error("invalid argument: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the command line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Data(_)
            | Error::Parse { .. }
            | Error::NoEvents
            | Error::AllDropped { .. }
            | Error::Io(_) => 2,
            Error::Separation { .. }
            | Error::Singular { .. }
            | Error::NotConverged { .. }
            | Error::DegenerateVariance { .. }
            | Error::TooManyFailures { .. } => 3,
            Error::Usage(_) => 4,
        }
    }
}
