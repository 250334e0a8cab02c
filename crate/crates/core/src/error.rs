use std::path::PathBuf;

/// Errors surfaced by the sampler, estimators and calculus routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure at step {step} (seed {seed}, lambda {lambda})")]
    NumericalFailure { step: usize, seed: u64, lambda: f64 },

    #[error("non-monotone frozen counts during bisection (seed {seed}); try a smaller step size")]
    ResolutionFailure { seed: u64 },

    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(String),

    #[error("partition explosion: k = {k} exceeds the supported maximum {max}")]
    PartitionExplosion { k: usize, max: usize },

    #[error("integer overflow computing {0}")]
    Overflow(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed data: {0}")]
    Format(String),

    #[error("run stopped early, partial results in {path}: {message}")]
    Incomplete { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
