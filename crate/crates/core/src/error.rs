use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("policy violation at t={time}: {reason}")]
    PolicyViolation { time: f64, reason: String },

    #[error("runaway intensity: more than {cap} events in one trial")]
    RunawayIntensity { cap: usize },

    #[error("{field}: {message}")]
    Config { field: String, message: String },

    #[error("no closed form available for {0}")]
    NoClosedForm(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Process exit status for the command-line harness.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::Config { .. } => 1,
            _ => 2,
        }
    }
}
