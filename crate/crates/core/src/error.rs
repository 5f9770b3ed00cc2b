use thiserror::Error;

/// Error kinds shared by every module. The CLI maps `Config` and
/// `Parameter` to exit code 2 and everything numeric to exit code 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("range error: {0}")]
    Range(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("bracketing error: {0}")]
    Bracketing(String),
    #[error("solver error: {msg} (final residual {residual:e})")]
    Solver { msg: String, residual: f64 },
    #[error("instability: {0}")]
    Instability(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Parameter(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
