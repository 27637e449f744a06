use thiserror::Error;

/// Errors returned by this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("duplicate observation {country} {year}-{month:02}")]
    DuplicateObservation {
        country: String,
        year: i32,
        month: u32,
    },
    #[error("{country} missing {year}-{month:02}")]
    Gap {
        country: String,
        year: i32,
        month: u32,
    },
    #[error("{country} {year}-{month:02}: demand must be finite and positive, got {value}")]
    InvalidDemand {
        country: String,
        year: i32,
        month: u32,
        value: f64,
    },
    #[error("duplicate country code {0}")]
    DuplicateCountry(String),
    #[error("no observations")]
    Empty,
    /// Not enough data for the requested windows or split.
    #[error("insufficient history: {context} requires at least {required}, got {available}")]
    InsufficientHistory {
        context: String,
        required: usize,
        available: usize,
    },
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// The data carries no spread where the operation needs some.
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error("missing {0}")]
    Missing(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

impl Error {
    /// True for problems with the supplied data or arguments, as opposed to
    /// failures while running.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Self::Parse { .. }
                | Self::DuplicateObservation { .. }
                | Self::Gap { .. }
                | Self::InvalidDemand { .. }
                | Self::DuplicateCountry(_)
                | Self::Empty
                | Self::InvalidParameter(_)
                | Self::Missing(_)
                | Self::Csv(_)
        )
    }
}
