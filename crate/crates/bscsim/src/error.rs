use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameter or configuration value. Message names the field.
    #[error("config error: {0}")]
    Config(String),
    /// Parameters outside the regime a closed form requires (e.g. rho >= 1).
    #[error("regime error: {0}")]
    Regime(String),
    /// Computation budget exceeded (e.g. oracle enumeration for large N).
    #[error("budget error: {0}")]
    Budget(String),
    /// Distribution tail mass above the declared tolerance at the truncation cap.
    #[error("truncation failure: {0}")]
    Truncation(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    /// Process exit code contract: 0 success, 2 config, 3 regime, 4 budget
    /// (enumeration and truncation caps both count), 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Regime(_) => 3,
            Error::Budget(_) | Error::Truncation(_) => 4,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
